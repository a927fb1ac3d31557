//! H2 programs: `Tr(Q) ≤ g` with `Q ≻ C_K P C_Kᵀ` and `P ≻ A_K P A_Kᵀ + GGᵀ`.

use nalgebra::DMatrix;

use super::common::{
    add_g, add_gain_like, add_linearized_inverse, add_multipliers, add_p, c, eye, lyap_corner, pad,
    require_step, z,
};
use super::{Knowledge, ProblemSpec, Structure, StructurePattern};
use crate::error::{Error, Result};
use crate::sdp::{ConicProgram, MatExpr, VarHandle, VarKind};

/// Builds the H2 program selected by `spec`.
///
/// Single-solve variants (unstructured, diagonal-`P` baseline) ignore
/// `p_tilde`/`lambda`; structured steps require both.
pub fn build_h2_program(
    spec: &ProblemSpec,
    p_tilde: Option<&DMatrix<f64>>,
    lambda: Option<f64>,
) -> Result<ConicProgram> {
    spec.validate()?;
    if !spec.system.has_zero_feedthrough() {
        return Err(Error::NonzeroFeedthrough);
    }
    match (spec.knowledge, &spec.structure) {
        (Knowledge::ModelBased, Structure::Unstructured) => model_convex(spec, None),
        (Knowledge::ModelBased, Structure::PdiagBaseline(p)) => model_convex(spec, Some(p)),
        (Knowledge::ModelBased, Structure::Structured(p)) => {
            let (pt, l) = require_step(p_tilde, lambda)?;
            model_step(spec, p, pt, l)
        }
        (Knowledge::DataDriven, Structure::Unstructured) => data_convex(spec, None),
        (Knowledge::DataDriven, Structure::PdiagBaseline(p)) => data_convex(spec, Some(p)),
        (Knowledge::DataDriven, Structure::Structured(p)) => {
            let (pt, l) = require_step(p_tilde, lambda)?;
            data_step(spec, p, pt, l)
        }
    }
}

/// `[[Q, M], [Mᵀ, N]] ≻ 0` and `Tr(Q) ≤ g`.
fn add_output_bound(prog: &mut ConicProgram, q: &VarHandle, g: &VarHandle, m: MatExpr, n: MatExpr) -> Result<()> {
    let mt = m.transpose();
    prog.add_lmi(MatExpr::block(&[vec![q.expr(), m], vec![mt, n]])?, "output", true)?;
    prog.add_lmi(q.expr(), "Q", true)?;
    prog.add_linear(g.scalar() - q.expr().trace(), "trace bound")
}

fn model_convex(spec: &ProblemSpec, pattern: Option<&StructurePattern>) -> Result<ConicProgram> {
    let sys = &spec.system;
    let (nx, nu, ny, nd) = (sys.nx(), sys.nu(), sys.ny(), sys.nd());
    let mut prog = ConicProgram::new();
    let g = add_g(&mut prog)?;
    let p = add_p(&mut prog, "P", nx, pattern.is_some())?;
    let l = add_gain_like(&mut prog, "L", nu, nx, pattern)?;
    let q = prog.add_variable("Q", VarKind::Symmetric { n: ny })?;

    let akp = p.expr().lmul(&sys.a) + l.expr().lmul(&sys.b);
    let lyap = MatExpr::block(&[
        vec![p.expr(), akp.clone(), c(&sys.g)],
        vec![akp.transpose(), p.expr(), z(nx, nd)],
        vec![c(&sys.g.transpose()), z(nd, nx), eye(nd)],
    ])?;
    prog.add_lmi(lyap, "lyapunov", true)?;
    prog.add_lmi(p.expr(), "P", true)?;
    let ckp = p.expr().lmul(&sys.c) + l.expr().lmul(&sys.d);
    add_output_bound(&mut prog, &q, &g, ckp, p.expr())?;
    prog.set_objective(g.scalar())?;
    Ok(prog)
}

fn model_step(
    spec: &ProblemSpec,
    pattern: &StructurePattern,
    p_tilde: &DMatrix<f64>,
    lambda: f64,
) -> Result<ConicProgram> {
    let sys = &spec.system;
    let (nx, nu, ny) = (sys.nx(), sys.nu(), sys.ny());
    let mut prog = ConicProgram::new();
    let g = add_g(&mut prog)?;
    let p = add_p(&mut prog, "P", nx, false)?;
    let k = add_gain_like(&mut prog, "K", nu, nx, Some(pattern))?;
    let q = prog.add_variable("Q", VarKind::Symmetric { n: ny })?;
    let y = prog.add_variable("Y", VarKind::Symmetric { n: nx })?;
    let zv = prog.add_variable("Z", VarKind::Symmetric { n: nx })?;

    let ak = k.expr().lmul(&sys.b) + sys.a.clone();
    let lyap = MatExpr::block(&[
        vec![p.expr() - &sys.g * sys.g.transpose(), ak.clone()],
        vec![ak.transpose(), y.expr()],
    ])?;
    prog.add_lmi(lyap, "lyapunov", true)?;
    prog.add_lmi(p.expr(), "P", true)?;
    let ck = k.expr().lmul(&sys.d) + sys.c.clone();
    add_output_bound(&mut prog, &q, &g, ck, y.expr())?;
    let penalty = add_linearized_inverse(&mut prog, &p, &y, &zv, p_tilde, lambda)?;
    prog.set_objective(g.scalar() + penalty)?;
    Ok(prog)
}

fn data_convex(spec: &ProblemSpec, pattern: Option<&StructurePattern>) -> Result<ConicProgram> {
    let sys = &spec.system;
    let (nx, nu, ny) = (sys.nx(), sys.nu(), sys.ny());
    let mut prog = ConicProgram::new();
    let (sproc, beta) = add_multipliers(&mut prog, spec)?;
    let g = add_g(&mut prog)?;
    let p = add_p(&mut prog, "P", nx, pattern.is_some())?;
    let l = add_gain_like(&mut prog, "L", nu, nx, pattern)?;
    let q = prog.add_variable("Q", VarKind::Symmetric { n: ny })?;

    let robust = MatExpr::block(&[
        vec![lyap_corner(&p.expr(), &sys.g, &beta), z(nx, nx), z(nx, nu), z(nx, nx)],
        vec![z(nx, nx), z(nx, nx), z(nx, nu), p.expr()],
        vec![z(nu, nx), z(nu, nx), z(nu, nu), l.expr()],
        vec![z(nx, nx), p.expr(), l.expr().transpose(), p.expr()],
    ])? - pad(sproc, nx);
    prog.add_lmi(robust, "robust lyapunov", false)?;
    prog.add_lmi(p.expr(), "P", true)?;
    let ckp = p.expr().lmul(&sys.c) + l.expr().lmul(&sys.d);
    add_output_bound(&mut prog, &q, &g, ckp, p.expr())?;
    prog.set_objective(g.scalar())?;
    Ok(prog)
}

fn data_step(
    spec: &ProblemSpec,
    pattern: &StructurePattern,
    p_tilde: &DMatrix<f64>,
    lambda: f64,
) -> Result<ConicProgram> {
    let sys = &spec.system;
    let (nx, nu, ny) = (sys.nx(), sys.nu(), sys.ny());
    let mut prog = ConicProgram::new();
    let (sproc, beta) = add_multipliers(&mut prog, spec)?;
    let g = add_g(&mut prog)?;
    let p = add_p(&mut prog, "P", nx, false)?;
    let k = add_gain_like(&mut prog, "K", nu, nx, Some(pattern))?;
    let q = prog.add_variable("Q", VarKind::Symmetric { n: ny })?;
    let y = prog.add_variable("Y", VarKind::Symmetric { n: nx })?;
    let zv = prog.add_variable("Z", VarKind::Symmetric { n: nx })?;

    let robust = MatExpr::block(&[
        vec![lyap_corner(&p.expr(), &sys.g, &beta), z(nx, nx), z(nx, nu), z(nx, nx)],
        vec![z(nx, nx), z(nx, nx), z(nx, nu), eye(nx)],
        vec![z(nu, nx), z(nu, nx), z(nu, nu), k.expr()],
        vec![z(nx, nx), eye(nx), k.expr().transpose(), y.expr()],
    ])? - pad(sproc, nx);
    prog.add_lmi(robust, "robust lyapunov", false)?;
    prog.add_lmi(p.expr(), "P", true)?;
    let ck = k.expr().lmul(&sys.d) + sys.c.clone();
    add_output_bound(&mut prog, &q, &g, ck, y.expr())?;
    let penalty = add_linearized_inverse(&mut prog, &p, &y, &zv, p_tilde, lambda)?;
    prog.set_objective(g.scalar() + penalty)?;
    Ok(prog)
}
