//! Solver-independent H2 / H∞ oracles for closed loops.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{close_loop, ClosedLoop, Gain, LinearSystem};
use crate::error::{Error, Result};
use crate::linalg::{is_symmetric, sym};
use crate::sdp::SolverSettings;
use crate::synthesis::{certify, Norm};

/// A matrix counts as Schur stable when its spectral radius is below `1 - STABILITY_MARGIN`.
pub const STABILITY_MARGIN: f64 = 1e-9;

pub const DEFAULT_N_GRID: usize = 4096;

pub fn spectral_radius(m: &DMatrix<f64>) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::NotSquare {
            context: "spectral_radius",
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    Ok(m
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max))
}

pub fn is_schur_stable(m: &DMatrix<f64>) -> Result<bool> {
    Ok(spectral_radius(m)? < 1.0 - STABILITY_MARGIN)
}

/// Sum `Σ Aᵏ Q Aᵀᵏ` by repeated squaring.
fn doubling(a: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    let mut w = q.clone();
    let mut ak = a.clone();
    for _ in 0..80 {
        let incr = &ak * &w * ak.transpose();
        let done = incr.norm() <= 1e-18 * w.norm().max(f64::MIN_POSITIVE);
        w += incr;
        if done {
            break;
        }
        ak = &ak * &ak;
    }
    sym(&w)
}

/// Solves `W = A W Aᵀ + Q` for Schur-stable `A`.
pub fn solve_dlyap(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let rho = spectral_radius(a)?;
    if rho >= 1.0 - STABILITY_MARGIN {
        return Err(Error::Unstable(rho));
    }
    if q.shape() != a.shape() {
        return Err(crate::error::dim_err(
            "solve_dlyap Q",
            format!("{:?}", a.shape()),
            format!("{:?}", q.shape()),
        ));
    }
    if !is_symmetric(q, 1e-12) {
        return Err(Error::Asymmetric("solve_dlyap Q"));
    }
    let mut w = doubling(a, q);
    // Iterative refinement on the residual.
    for _ in 0..3 {
        let residual = q + a * &w * a.transpose() - &w;
        if residual.norm() <= 1e-13 * w.norm().max(1e-300) {
            break;
        }
        w += doubling(a, &sym(&residual));
    }
    Ok(w)
}

/// `sqrt(Tr(C_K W C_Kᵀ))` with `W` the controllability Gramian of the loop.
pub fn h2_norm_closed_loop(cl: &ClosedLoop) -> Result<f64> {
    if cl.h.iter().any(|v| *v != 0.0) {
        return Err(Error::NonzeroFeedthrough);
    }
    let w = solve_dlyap(&cl.a_k, &(&cl.g * cl.g.transpose()))?;
    let trace = (&cl.c_k * w * cl.c_k.transpose()).trace();
    Ok(trace.max(0.0).sqrt())
}

pub fn h2_norm(sys: &LinearSystem, k: &Gain) -> Result<f64> {
    if !sys.has_zero_feedthrough() {
        return Err(Error::NonzeroFeedthrough);
    }
    h2_norm_closed_loop(&close_loop(sys, k)?)
}

fn complexify(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

/// Largest singular value of `C_K (e^{iθ} I − A_K)⁻¹ G + H`.
fn gain_at(cl: &ClosedLoop, theta: f64) -> f64 {
    let n = cl.a_k.nrows();
    let z = Complex64::from_polar(1.0, theta);
    let mut resolvent = -complexify(&cl.a_k);
    for i in 0..n {
        resolvent[(i, i)] += z;
    }
    let rhs = complexify(&cl.g);
    let x = match resolvent.lu().solve(&rhs) {
        Some(x) => x,
        None => return f64::INFINITY,
    };
    let t = complexify(&cl.c_k) * x + complexify(&cl.h);
    t.singular_values().iter().copied().fold(0.0, f64::max)
}

fn grid(n_grid: usize) -> impl Iterator<Item = f64> {
    let n = n_grid.max(2);
    (0..n).map(move |j| std::f64::consts::PI * j as f64 / (n - 1) as f64)
}

/// Maximum gain over a uniform grid of `n_grid` frequencies in `[0, π]`.
pub fn hinf_sweep(cl: &ClosedLoop, n_grid: usize) -> Result<f64> {
    let rho = spectral_radius(&cl.a_k)?;
    if rho >= 1.0 - STABILITY_MARGIN {
        return Err(Error::Unstable(rho));
    }
    Ok(grid(n_grid).map(|t| gain_at(cl, t)).fold(0.0, f64::max))
}

/// Grid sweep followed by golden-section refinement around the leading local maxima.
pub fn hinf_sweep_refined(cl: &ClosedLoop, n_grid: usize) -> Result<f64> {
    let rho = spectral_radius(&cl.a_k)?;
    if rho >= 1.0 - STABILITY_MARGIN {
        return Err(Error::Unstable(rho));
    }
    let thetas: Vec<f64> = grid(n_grid).collect();
    let values: Vec<f64> = thetas.iter().map(|&t| gain_at(cl, t)).collect();
    let n = thetas.len();
    let mut peaks: Vec<usize> = (0..n)
        .filter(|&i| {
            let left = if i == 0 { f64::NEG_INFINITY } else { values[i - 1] };
            let right = if i + 1 == n { f64::NEG_INFINITY } else { values[i + 1] };
            values[i] >= left && values[i] >= right
        })
        .collect();
    peaks.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    peaks.truncate(8);

    let mut best = values.iter().copied().fold(0.0, f64::max);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for i in peaks {
        let mut lo = thetas[i.saturating_sub(1)];
        let mut hi = thetas[(i + 1).min(n - 1)];
        let mut x1 = hi - phi * (hi - lo);
        let mut x2 = lo + phi * (hi - lo);
        let (mut f1, mut f2) = (gain_at(cl, x1), gain_at(cl, x2));
        for _ in 0..80 {
            if hi - lo < 1e-13 {
                break;
            }
            if f1 < f2 {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + phi * (hi - lo);
                f2 = gain_at(cl, x2);
            } else {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - phi * (hi - lo);
                f1 = gain_at(cl, x1);
            }
        }
        best = best.max(f1).max(f2);
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HinfMethod {
    FrequencySweep,
    LmiBisection,
}

#[derive(Clone, Debug)]
pub struct HinfOptions {
    pub n_grid: usize,
    pub tol_bisect: f64,
    pub solver: SolverSettings,
}

impl Default for HinfOptions {
    fn default() -> Self {
        Self {
            n_grid: DEFAULT_N_GRID,
            tol_bisect: 1e-6,
            solver: SolverSettings::default(),
        }
    }
}

pub fn hinf_norm(sys: &LinearSystem, k: &Gain, method: HinfMethod) -> Result<f64> {
    hinf_norm_with(sys, k, method, &HinfOptions::default())
}

pub fn hinf_norm_with(
    sys: &LinearSystem,
    k: &Gain,
    method: HinfMethod,
    opts: &HinfOptions,
) -> Result<f64> {
    let cl = close_loop(sys, k)?;
    let sweep = hinf_sweep(&cl, opts.n_grid)?;
    match method {
        HinfMethod::FrequencySweep => Ok(sweep),
        HinfMethod::LmiBisection => certify::bisect_norm(
            sys,
            k,
            Norm::Hinf,
            2.0 * sweep + 1.0,
            opts.tol_bisect,
            &opts.solver,
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn s(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    fn scalar_loop(a: f64, c: f64, g: f64, h: f64) -> ClosedLoop {
        ClosedLoop { a_k: s(a), c_k: s(c), g: s(g), h: s(h) }
    }

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    fn power_iteration_radius(m: &DMatrix<f64>) -> f64 {
        // ρ(M) = lim ‖Mᵏ‖^{1/k}; take k = 2^60 by renormalised squaring.
        let mut p = m.clone();
        let mut log_norm = 0.0;
        let squarings = 60;
        for _ in 0..squarings {
            let nrm = p.norm();
            log_norm = 2.0 * (log_norm + nrm.ln());
            p /= nrm;
            p = &p * &p;
        }
        log_norm += p.norm().ln();
        (log_norm / 2f64.powi(squarings)).exp()
    }

    #[test]
    fn spectral_radius_examples() {
        assert_eq!(spectral_radius(&DMatrix::zeros(3, 3)).unwrap(), 0.0);
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.5, -0.9]));
        assert!((spectral_radius(&d).unwrap() - 0.9).abs() < 1e-14);
        assert!(spectral_radius(&DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn spectral_radius_matches_power_iteration() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let m = random_matrix(&mut rng, 5, 5);
            let rho = spectral_radius(&m).unwrap();
            let est = power_iteration_radius(&m);
            assert!((rho - est).abs() < 1e-8, "rho={rho} est={est}");
        }
    }

    #[test]
    fn dlyap_examples() {
        let w = solve_dlyap(&DMatrix::zeros(2, 2), &DMatrix::identity(2, 2)).unwrap();
        assert_eq!(w, DMatrix::identity(2, 2));
        let w = solve_dlyap(&s(0.5), &s(1.0)).unwrap();
        assert!((w[(0, 0)] - 4.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn dlyap_errors() {
        assert!(matches!(solve_dlyap(&s(1.0), &s(1.0)), Err(Error::Unstable(_))));
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(
            solve_dlyap(&DMatrix::zeros(2, 2), &q),
            Err(Error::Asymmetric(_))
        ));
    }

    #[test]
    fn dlyap_matches_kronecker_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let mut a = random_matrix(&mut rng, 3, 3);
            let rho = spectral_radius(&a).unwrap();
            a *= 0.95 / rho;
            let g = random_matrix(&mut rng, 3, 2);
            let q = &g * g.transpose();
            let w = solve_dlyap(&a, &q).unwrap();
            let residual = &w - &a * &w * a.transpose() - &q;
            assert!(residual.norm() <= 1e-10 * w.norm());

            // vec(W) = (I − A⊗A)⁻¹ vec(Q), column-major vec.
            let kron = a.kronecker(&a);
            let lhs = DMatrix::identity(9, 9) - kron;
            let vec_q = nalgebra::DVector::from_column_slice(q.as_slice());
            let vec_w = lhs.lu().solve(&vec_q).unwrap();
            let w_kron = DMatrix::from_column_slice(3, 3, vec_w.as_slice());
            assert!((&w - w_kron).norm() <= 1e-9 * w.norm());
        }
    }

    #[test]
    fn h2_scalar_examples() {
        assert!((h2_norm_closed_loop(&scalar_loop(0.0, 1.0, 1.0, 0.0)).unwrap() - 1.0).abs() < 1e-14);
        let v = h2_norm_closed_loop(&scalar_loop(0.5, 1.0, 1.0, 0.0)).unwrap();
        assert!((v - (4.0f64 / 3.0).sqrt()).abs() < 1e-14);
        assert!(matches!(
            h2_norm_closed_loop(&scalar_loop(0.5, 1.0, 1.0, 0.1)),
            Err(Error::NonzeroFeedthrough)
        ));
    }

    #[test]
    fn hinf_scalar_examples() {
        let v = hinf_sweep(&scalar_loop(0.0, 0.0, 1.0, -0.7), 64).unwrap();
        assert!((v - 0.7).abs() < 1e-15);
        let v = hinf_sweep(&scalar_loop(0.5, 1.0, 1.0, 0.0), DEFAULT_N_GRID).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
        assert!(hinf_sweep(&scalar_loop(1.2, 1.0, 1.0, 0.0), 16).is_err());
    }

    #[test]
    fn refined_sweep_never_below_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let mut a = random_matrix(&mut rng, 3, 3);
            a *= 0.97 / spectral_radius(&a).unwrap();
            let cl = ClosedLoop {
                a_k: a,
                c_k: random_matrix(&mut rng, 2, 3),
                g: random_matrix(&mut rng, 3, 1),
                h: DMatrix::zeros(2, 1),
            };
            let coarse = hinf_sweep(&cl, 256).unwrap();
            let fine = hinf_sweep_refined(&cl, 256).unwrap();
            let dense = hinf_sweep(&cl, 1 << 16).unwrap();
            assert!(fine >= coarse);
            assert!(fine >= dense - 1e-9);
            assert!((fine - dense) / dense < 1e-6);
        }
    }
}
