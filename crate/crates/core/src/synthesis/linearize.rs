use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{is_symmetric, spd_inverse};
use crate::sdp::MatExpr;

/// First-order expansion of `P ↦ P⁻¹` at `P̃`: `2P̃⁻¹ − P̃⁻¹ P P̃⁻¹`.
#[derive(Clone, Debug)]
pub struct InverseLinearization {
    pub p_tilde_inv: DMatrix<f64>,
}

pub fn linearize_inverse(p_tilde: &DMatrix<f64>) -> Result<InverseLinearization> {
    if !p_tilde.is_square() {
        return Err(Error::NotSquare {
            context: "linearize_inverse",
            rows: p_tilde.nrows(),
            cols: p_tilde.ncols(),
        });
    }
    if !is_symmetric(p_tilde, 1e-10) {
        return Err(Error::Asymmetric("linearize_inverse"));
    }
    Ok(InverseLinearization { p_tilde_inv: spd_inverse(p_tilde, "linearize_inverse")? })
}

impl InverseLinearization {
    pub fn constant(&self) -> DMatrix<f64> {
        &self.p_tilde_inv * 2.0
    }

    pub fn eval(&self, p: &DMatrix<f64>) -> DMatrix<f64> {
        self.constant() - &self.p_tilde_inv * p * &self.p_tilde_inv
    }

    /// The same map applied to an affine expression in `P`.
    pub fn apply(&self, p: &MatExpr) -> MatExpr {
        MatExpr::constant(self.constant()) - p.lmul(&self.p_tilde_inv).rmul(&self.p_tilde_inv)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eigmin;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn random_pd(rng: &mut ChaCha20Rng, n: usize) -> DMatrix<f64> {
        let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        &m * m.transpose() + DMatrix::identity(n, n) * rng.random_range(0.05..1.0)
    }

    #[test]
    fn tangent_point_is_exact() {
        let p = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let lin = linearize_inverse(&p).unwrap();
        let inv = p.clone().try_inverse().unwrap();
        assert!((lin.eval(&p) - inv).amax() < 1e-14);
    }

    #[test]
    fn scalar_example() {
        let lin = linearize_inverse(&DMatrix::from_element(1, 1, 1.0)).unwrap();
        assert_eq!(lin.eval(&DMatrix::from_element(1, 1, 2.0))[(0, 0)], 0.0);
    }

    #[test]
    fn lower_bounds_the_inverse() {
        let mut rng = ChaCha20Rng::seed_from_u64(17);
        for trial in 0..100 {
            let n = 1 + trial % 5;
            let pt = random_pd(&mut rng, n);
            let p = random_pd(&mut rng, n);
            let lin = linearize_inverse(&pt).unwrap();
            let gap = p.clone().try_inverse().unwrap() - lin.eval(&p);
            assert!(eigmin(&gap) >= -1e-10, "trial {trial}");
        }
    }

    #[test]
    fn rejects_indefinite_or_asymmetric() {
        assert!(linearize_inverse(&DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0])).is_err());
        assert!(linearize_inverse(&DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.0, 1.0])).is_err());
    }

    #[test]
    fn expression_matches_numeric_map() {
        let mut prog = crate::sdp::ConicProgram::new();
        let p = prog.add_variable("P", crate::sdp::VarKind::Symmetric { n: 2 }).unwrap();
        let pt = DMatrix::from_row_slice(2, 2, &[1.5, 0.2, 0.2, 0.7]);
        let lin = linearize_inverse(&pt).unwrap();
        let x = [0.9, -0.3, 2.0];
        let pv = p.value(&x);
        assert!((lin.apply(&p.expr()).eval(&x) - lin.eval(&pv)).amax() < 1e-13);
    }
}
