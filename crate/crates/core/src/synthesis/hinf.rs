//! H∞ programs built on the discrete bounded-real inequality with `g = γ²`.

use nalgebra::DMatrix;

use super::common::{
    add_g, add_gain_like, add_linearized_inverse, add_multipliers, add_p, c, eye, lyap_corner, pad,
    require_step, scaled_identity, z,
};
use super::{Knowledge, ProblemSpec, Structure, StructurePattern};
use crate::error::Result;
use crate::sdp::{ConicProgram, MatExpr, VarHandle, VarKind};

/// Builds the H∞ program selected by `spec`.
pub fn build_hinf_program(
    spec: &ProblemSpec,
    p_tilde: Option<&DMatrix<f64>>,
    lambda: Option<f64>,
) -> Result<ConicProgram> {
    spec.validate()?;
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

/// `[[P, M, G, 0], [Mᵀ, N, 0, Oᵀ], [Gᵀ, 0, I, Hᵀ], [0, O, H, gI]]`.
fn bounded_real(spec: &ProblemSpec, p: MatExpr, m: MatExpr, n: MatExpr, o: MatExpr, g: &VarHandle) -> Result<MatExpr> {
    let sys = &spec.system;
    let (nx, ny, nd) = (sys.nx(), sys.ny(), sys.nd());
    MatExpr::block(&[
        vec![p, m.clone(), c(&sys.g), z(nx, ny)],
        vec![m.transpose(), n, z(nx, nd), o.transpose()],
        vec![c(&sys.g.transpose()), z(nd, nx), eye(nd), c(&sys.h.transpose())],
        vec![z(ny, nx), o, c(&sys.h), scaled_identity(g, ny)],
    ])
}

fn model_convex(spec: &ProblemSpec, pattern: Option<&StructurePattern>) -> Result<ConicProgram> {
    let sys = &spec.system;
    let (nx, nu) = (sys.nx(), sys.nu());
    let mut prog = ConicProgram::new();
    let g = add_g(&mut prog)?;
    let p = add_p(&mut prog, "P", nx, pattern.is_some())?;
    let l = add_gain_like(&mut prog, "L", nu, nx, pattern)?;
    let akp = p.expr().lmul(&sys.a) + l.expr().lmul(&sys.b);
    let ckp = p.expr().lmul(&sys.c) + l.expr().lmul(&sys.d);
    let brl = bounded_real(spec, p.expr(), akp, p.expr(), ckp, &g)?;
    prog.add_lmi(brl, "bounded real", true)?;
    prog.add_lmi(p.expr(), "P", true)?;
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
    let (nx, nu) = (sys.nx(), sys.nu());
    let mut prog = ConicProgram::new();
    let g = add_g(&mut prog)?;
    let p = add_p(&mut prog, "P", nx, false)?;
    let k = add_gain_like(&mut prog, "K", nu, nx, Some(pattern))?;
    let y = prog.add_variable("Y", VarKind::Symmetric { n: nx })?;
    let zv = prog.add_variable("Z", VarKind::Symmetric { n: nx })?;
    let ak = k.expr().lmul(&sys.b) + sys.a.clone();
    let ck = k.expr().lmul(&sys.d) + sys.c.clone();
    let brl = bounded_real(spec, p.expr(), ak, y.expr(), ck, &g)?;
    prog.add_lmi(brl, "bounded real", true)?;
    prog.add_lmi(p.expr(), "P", true)?;
    let penalty = add_linearized_inverse(&mut prog, &p, &y, &zv, p_tilde, lambda)?;
    prog.set_objective(g.scalar() + penalty)?;
    Ok(prog)
}

/// Robust bounded-real block over the consistency set, of size `2n_x + n_u + n_y`.
fn robust_block(
    spec: &ProblemSpec,
    p: &VarHandle,
    r: &VarHandle,
    g: &VarHandle,
    beta: &VarHandle,
    sproc: MatExpr,
) -> Result<MatExpr> {
    let sys = &spec.system;
    let (nx, nu, ny) = (sys.nx(), sys.nu(), sys.ny());
    let mut cd = DMatrix::zeros(ny, nx + nu);
    cd.view_mut((0, 0), (ny, nx)).copy_from(&sys.c);
    cd.view_mut((0, nx), (ny, nu)).copy_from(&sys.d);
    let gh_t = &sys.g * sys.h.transpose();
    let cdr = r.expr().lmul(&cd);
    let corner = scaled_identity(g, ny) - cdr.rmul(&cd.transpose()) - &sys.h * sys.h.transpose();
    let block = MatExpr::block(&[
        vec![lyap_corner(&p.expr(), &sys.g, beta), z(nx, nx + nu), c(&gh_t)],
        vec![z(nx + nu, nx), -r.expr(), cdr.transpose()],
        vec![c(&gh_t.transpose()), cdr, corner],
    ])?;
    Ok(block - pad(sproc, ny))
}

fn data_convex(spec: &ProblemSpec, pattern: Option<&StructurePattern>) -> Result<ConicProgram> {
    let sys = &spec.system;
    let (nx, nu) = (sys.nx(), sys.nu());
    let mut prog = ConicProgram::new();
    let (sproc, beta) = add_multipliers(&mut prog, spec)?;
    let g = add_g(&mut prog)?;
    let p = add_p(&mut prog, "P", nx, pattern.is_some())?;
    let l = add_gain_like(&mut prog, "L", nu, nx, pattern)?;
    let r = prog.add_variable("R", VarKind::Symmetric { n: nx + nu })?;

    prog.add_lmi(robust_block(spec, &p, &r, &g, &beta, sproc)?, "robust bounded real", false)?;
    let lifted = MatExpr::block(&[vec![p.expr(), l.expr().transpose()], vec![l.expr(), z(nu, nu)]])?;
    let col = MatExpr::block(&[vec![z(nx, nx)], vec![l.expr()]])?;
    let cover = MatExpr::block(&[
        vec![r.expr() - lifted, col.clone()],
        vec![col.transpose(), p.expr()],
    ])?;
    prog.add_lmi(cover, "R cover", true)?;
    prog.add_lmi(p.expr(), "P", true)?;
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
    let (nx, nu) = (sys.nx(), sys.nu());
    let mut prog = ConicProgram::new();
    let (sproc, beta) = add_multipliers(&mut prog, spec)?;
    let g = add_g(&mut prog)?;
    let p = add_p(&mut prog, "P", nx, false)?;
    let k = add_gain_like(&mut prog, "K", nu, nx, Some(pattern))?;
    let r = prog.add_variable("R", VarKind::Symmetric { n: nx + nu })?;
    let y = prog.add_variable("Y", VarKind::Symmetric { n: nx })?;
    let zv = prog.add_variable("Z", VarKind::Symmetric { n: nx })?;

    prog.add_lmi(robust_block(spec, &p, &r, &g, &beta, sproc)?, "robust bounded real", false)?;
    let ik = MatExpr::block(&[vec![eye(nx)], vec![k.expr()]])?;
    let cover = MatExpr::block(&[vec![r.expr(), ik.clone()], vec![ik.transpose(), y.expr()]])?;
    prog.add_lmi(cover, "R cover", true)?;
    prog.add_lmi(p.expr(), "P", true)?;
    let penalty = add_linearized_inverse(&mut prog, &p, &y, &zv, p_tilde, lambda)?;
    prog.set_objective(g.scalar() + penalty)?;
    Ok(prog)
}
