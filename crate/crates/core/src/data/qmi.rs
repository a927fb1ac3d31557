use nalgebra::{DMatrix, DVector};

use super::Trajectory;
use crate::error::{dim_err, Result};
use crate::linalg::{eigmin, sym};

/// Membership slack for `[I A B] Ψ_i [I A B]ᵀ ⪰ −tol·I`.
pub const DEFAULT_TOL_PSD: f64 = 1e-9;

/// Per-sample constant of the data QMI, size `(2 n_x + n_u)` square.
#[derive(Clone, Debug, PartialEq)]
pub struct QmiBlock {
    pub psi: DMatrix<f64>,
    pub index: usize,
}

/// `Ψ = M · blkdiag(ε² I, −1) · Mᵀ` with `M = [[I, x⁺], [0, −x], [0, −u]]`.
pub fn build_psi(
    x: &DVector<f64>,
    u: &DVector<f64>,
    x_next: &DVector<f64>,
    eps: f64,
) -> Result<QmiBlock> {
    let (nx, nu) = (x.len(), u.len());
    if x_next.len() != nx {
        return Err(dim_err("build_psi x_next", nx, x_next.len()));
    }
    let n = 2 * nx + nu;
    let mut m = DMatrix::zeros(n, nx + 1);
    m.view_mut((0, 0), (nx, nx)).fill_with_identity();
    m.view_mut((0, nx), (nx, 1)).copy_from(x_next);
    m.view_mut((nx, nx), (nx, 1)).copy_from(&(-x));
    m.view_mut((2 * nx, nx), (nu, 1)).copy_from(&(-u));
    let mut weight = DMatrix::identity(nx + 1, nx + 1) * (eps * eps);
    weight[(nx, nx)] = -1.0;
    let psi = sym(&(&m * weight * m.transpose()));
    Ok(QmiBlock { psi, index: 0 })
}

/// One block per transition of the trajectory.
pub fn psi_blocks(traj: &Trajectory) -> Result<Vec<QmiBlock>> {
    (0..traj.len())
        .map(|i| {
            let (x, u, xn) = traj.sample(i);
            let mut block = build_psi(&x, &u, &xn, traj.eps)?;
            block.index = i;
            Ok(block)
        })
        .collect()
}

fn check_dims(a: &DMatrix<f64>, b: &DMatrix<f64>, traj: &Trajectory) -> Result<()> {
    let (nx, nu) = (traj.nx(), traj.nu());
    if a.shape() != (nx, nx) {
        return Err(dim_err("consistent A", format!("{:?}", (nx, nx)), format!("{:?}", a.shape())));
    }
    if b.shape() != (nx, nu) {
        return Err(dim_err("consistent B", format!("{:?}", (nx, nu)), format!("{:?}", b.shape())));
    }
    Ok(())
}

pub fn consistent(a: &DMatrix<f64>, b: &DMatrix<f64>, traj: &Trajectory) -> Result<bool> {
    consistent_with_tol(a, b, traj, DEFAULT_TOL_PSD)
}

/// Whether `(A, B)` lies in the consistency set of every transition.
pub fn consistent_with_tol(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    traj: &Trajectory,
    tol_psd: f64,
) -> Result<bool> {
    check_dims(a, b, traj)?;
    let nx = traj.nx();
    let mut lift = DMatrix::zeros(nx, a.ncols() + nx + b.ncols());
    lift.view_mut((0, 0), (nx, nx)).fill_with_identity();
    lift.view_mut((0, nx), (nx, nx)).copy_from(a);
    lift.view_mut((0, 2 * nx), (nx, b.ncols())).copy_from(b);
    for block in psi_blocks(traj)? {
        let q = &lift * &block.psi * lift.transpose();
        if eigmin(&q) < -tol_psd {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{simulate_collect, ExcitationSpec};
    use crate::model::h2_example_system;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn zero_data_gives_scaled_identity() {
        let blk = build_psi(&v(&[0.0, 0.0]), &v(&[0.0]), &v(&[0.0, 0.0]), 0.3).unwrap();
        let mut expected = DMatrix::zeros(5, 5);
        expected[(0, 0)] = 0.09;
        expected[(1, 1)] = 0.09;
        assert!((blk.psi - expected).amax() < 1e-15);
    }

    #[test]
    fn scalar_psi_by_hand() {
        let blk = build_psi(&v(&[1.0]), &v(&[2.0]), &v(&[3.0]), 0.1).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[-8.99, 3.0, 6.0, 3.0, -1.0, -2.0, 6.0, -2.0, -4.0]);
        assert!((blk.psi - expected).amax() < 1e-12);
    }

    #[test]
    fn psi_block_expansion() {
        let x = v(&[0.3, -1.1, 0.4]);
        let u = v(&[2.0, -0.5]);
        let xn = v(&[-0.2, 0.7, 1.9]);
        let eps = 0.2;
        let psi = build_psi(&x, &u, &xn, eps).unwrap().psi;
        let mut expected = DMatrix::zeros(8, 8);
        let tl = DMatrix::identity(3, 3) * (eps * eps) - &xn * xn.transpose();
        expected.view_mut((0, 0), (3, 3)).copy_from(&tl);
        expected.view_mut((0, 3), (3, 3)).copy_from(&(&xn * x.transpose()));
        expected.view_mut((0, 6), (3, 2)).copy_from(&(&xn * u.transpose()));
        expected.view_mut((3, 0), (3, 3)).copy_from(&(&x * xn.transpose()));
        expected.view_mut((3, 3), (3, 3)).copy_from(&(-&x * x.transpose()));
        expected.view_mut((3, 6), (3, 2)).copy_from(&(-&x * u.transpose()));
        expected.view_mut((6, 0), (2, 3)).copy_from(&(&u * xn.transpose()));
        expected.view_mut((6, 3), (2, 3)).copy_from(&(-&u * x.transpose()));
        expected.view_mut((6, 6), (2, 2)).copy_from(&(-&u * u.transpose()));
        assert!((&psi - &expected).amax() <= 1e-12);
        assert!((&psi - psi.transpose()).amax() <= 1e-12);
    }

    #[test]
    fn eps_shift_identity() {
        let x = v(&[0.3, -1.1]);
        let u = v(&[2.0]);
        let xn = v(&[-0.2, 0.7]);
        let p1 = build_psi(&x, &u, &xn, 0.05).unwrap().psi;
        let p2 = build_psi(&x, &u, &xn, 0.3).unwrap().psi;
        let mut shift = DMatrix::zeros(5, 5);
        shift.view_mut((0, 0), (2, 2)).fill_with_identity();
        let diff = p2 - p1 - shift * (0.3f64.powi(2) - 0.05f64.powi(2));
        assert!(diff.amax() <= 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(build_psi(&v(&[1.0, 2.0]), &v(&[1.0]), &v(&[1.0]), 0.1).is_err());
    }

    #[test]
    fn generating_system_is_consistent() {
        let sys = h2_example_system();
        let traj = simulate_collect(&sys, 20, 0.05, 1, &ExcitationSpec::default()).unwrap();
        assert!(consistent(&sys.a, &sys.b, &traj).unwrap());
        let mut lift = DMatrix::zeros(3, 8);
        lift.view_mut((0, 0), (3, 3)).fill_with_identity();
        lift.view_mut((0, 3), (3, 3)).copy_from(&sys.a);
        lift.view_mut((0, 6), (3, 2)).copy_from(&sys.b);
        for blk in psi_blocks(&traj).unwrap() {
            assert!(eigmin(&(&lift * &blk.psi * lift.transpose())) >= -1e-10);
        }
    }

    /// Direct evaluation: `(A, B)` is consistent iff every residual norm is ≤ ε.
    fn residual_oracle(a: &DMatrix<f64>, b: &DMatrix<f64>, traj: &Trajectory) -> bool {
        (0..traj.len()).all(|i| {
            let (x, u, xn) = traj.sample(i);
            (xn - a * x - b * u).norm() <= traj.eps + 1e-12
        })
    }

    #[test]
    fn shifted_dynamics_inconsistent() {
        let sys = h2_example_system();
        let traj = simulate_collect(&sys, 20, 0.05, 3, &ExcitationSpec::default()).unwrap();
        let a = &sys.a + DMatrix::identity(3, 3) * 10.0;
        assert!(!residual_oracle(&a, &sys.b, &traj));
        assert!(!consistent(&a, &sys.b, &traj).unwrap());
    }

    #[test]
    fn huge_eps_accepts_unit_perturbations() {
        let sys = h2_example_system();
        let traj = simulate_collect(&sys, 20, 0.05, 3, &ExcitationSpec::default())
            .unwrap()
            .with_eps(1e6)
            .unwrap();
        let a = sys.a.map(|v| v + 1.0);
        let b = sys.b.map(|v| v - 1.0);
        assert!(residual_oracle(&a, &b, &traj));
        assert!(consistent(&a, &b, &traj).unwrap());
    }
}
