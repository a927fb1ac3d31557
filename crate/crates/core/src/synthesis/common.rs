//! Pieces shared by the H2 and H∞ builders.

use nalgebra::DMatrix;

use super::{linearize_inverse, Multipliers, ProblemSpec, StructurePattern, BETA_MIN};
use crate::data::psi_blocks;
use crate::error::{Error, Result};
use crate::sdp::{ConicProgram, MatExpr, ScalarExpr, VarHandle, VarKind};

pub(crate) fn c(m: &DMatrix<f64>) -> MatExpr {
    MatExpr::constant(m.clone())
}

pub(crate) fn z(r: usize, c: usize) -> MatExpr {
    MatExpr::zeros(r, c)
}

pub(crate) fn eye(n: usize) -> MatExpr {
    MatExpr::identity(n)
}

/// `g·I_n` for a scalar variable `g`.
pub(crate) fn scaled_identity(g: &VarHandle, n: usize) -> MatExpr {
    let mut out = MatExpr::zeros(n, n);
    out.terms.insert(g.offset, DMatrix::identity(n, n));
    out
}

pub(crate) fn add_g(prog: &mut ConicProgram) -> Result<VarHandle> {
    prog.add_variable("g", VarKind::Scalar)
}

/// `P` as symmetric or diagonal.
pub(crate) fn add_p(prog: &mut ConicProgram, name: &str, n: usize, diagonal: bool) -> Result<VarHandle> {
    let kind = if diagonal { VarKind::Diagonal { n } } else { VarKind::Symmetric { n } };
    prog.add_variable(name, kind)
}

/// Gain-shaped variable, restricted to `pattern` when given.
pub(crate) fn add_gain_like(
    prog: &mut ConicProgram,
    name: &str,
    nu: usize,
    nx: usize,
    pattern: Option<&StructurePattern>,
) -> Result<VarHandle> {
    let kind = match pattern {
        Some(p) => VarKind::masked(p.mask()),
        None => VarKind::matrix(nu, nx),
    };
    prog.add_variable(name, kind)
}

pub(crate) fn require_step(p_tilde: Option<&DMatrix<f64>>, lambda: Option<f64>) -> Result<(&DMatrix<f64>, f64)> {
    match (p_tilde, lambda) {
        (Some(p), Some(l)) if l >= 0.0 => Ok((p, l)),
        (Some(_), Some(l)) => Err(Error::InvalidArgument(format!("lambda must be nonnegative, got {l}"))),
        _ => Err(Error::InvalidArgument("structured step needs P_tilde and lambda".into())),
    }
}

/// Adds `Z ⪰ 0`, `Y ≻ 0` and `2P̃⁻¹ − P̃⁻¹PP̃⁻¹ + Z − Y ⪰ 0`; returns `λ·Tr(Z)`.
pub(crate) fn add_linearized_inverse(
    prog: &mut ConicProgram,
    p: &VarHandle,
    y: &VarHandle,
    zv: &VarHandle,
    p_tilde: &DMatrix<f64>,
    lambda: f64,
) -> Result<ScalarExpr> {
    let lin = linearize_inverse(p_tilde)?;
    prog.add_lmi(zv.expr(), "Z", false)?;
    prog.add_lmi(y.expr(), "Y", true)?;
    prog.add_lmi(lin.apply(&p.expr()) + zv.expr() - y.expr(), "linearized inverse", false)?;
    Ok(zv.expr().trace() * lambda)
}

/// S-procedure multipliers with their sign constraints; returns `Σ α_i Ψ_i`
/// (size `2n_x + n_u`) and the `β` handle.
pub(crate) fn add_multipliers(prog: &mut ConicProgram, spec: &ProblemSpec) -> Result<(MatExpr, VarHandle)> {
    let traj = spec.trajectory()?;
    let blocks = psi_blocks(traj)?;
    let n = 2 * traj.nx() + traj.nu();
    let mut term = MatExpr::zeros(n, n);
    match spec.multipliers {
        Multipliers::PerSample => {
            let alpha = prog.add_variable("alpha", VarKind::Vector { len: blocks.len() })?;
            for (i, blk) in blocks.iter().enumerate() {
                term.terms.insert(alpha.offset + i, blk.psi.clone());
                prog.add_linear(alpha.component(i), &format!("alpha_{i}"))?;
            }
        }
        Multipliers::Shared => {
            let alpha = prog.add_variable("alpha", VarKind::Scalar)?;
            let total = blocks.iter().fold(DMatrix::zeros(n, n), |acc, b| acc + &b.psi);
            term.terms.insert(alpha.offset, total);
            prog.add_linear(alpha.scalar(), "alpha")?;
        }
    }
    let beta = prog.add_variable("beta", VarKind::Scalar)?;
    prog.add_linear(beta.scalar() - ScalarExpr::constant(BETA_MIN), "beta")?;
    Ok((term, beta))
}

/// `P − GGᵀ − βI`.
pub(crate) fn lyap_corner(p: &MatExpr, g: &DMatrix<f64>, beta: &VarHandle) -> MatExpr {
    let n = g.nrows();
    p.clone() - g * g.transpose() - scaled_identity(beta, n)
}

/// `blkdiag(term, 0_k)`.
pub(crate) fn pad(term: MatExpr, k: usize) -> MatExpr {
    MatExpr::blkdiag(&[term, MatExpr::zeros(k, k)])
}
