//! Infeasible-start primal-dual path-following method with the
//! Nesterov-Todd search direction and Mehrotra predictor-corrector steps.
//!
//! Works on the pair
//!   primal: min Σ⟨C_j, X_j⟩  s.t.  Σ_j ⟨A_ij, X_j⟩ = b_i,  X_j ⪰ 0
//!   dual:   max bᵀy          s.t.  S_j = C_j − Σ_i y_i A_ij ⪰ 0
//! where the user's decision vector is `y`.
//!
//! Every iteration rewrites each block by the congruence `Gᵀ(·)G` with its
//! scaling factor, so the stored iterates satisfy `X_j = S_j = diag(d)`. The
//! dual vector `y` is unaffected. Dual infeasibility is reported as the
//! eigenvalue violation of `C_j − Σ_i y_i A_ij ⪰ 0` on the original blocks.

use nalgebra::{DMatrix, DVector};

use super::{SolveStatus, SolverSettings};
use crate::linalg::{eigmin, sym};

/// Certificates are accepted below this normalized residual.
const TOL_INFEAS: f64 = 1e-8;
/// Consecutive negligible steps before giving up.
const MAX_STALLS: usize = 5;
/// Steps shorter than this trigger a centering step next.
const RECENTER_BELOW: f64 = 0.1;
/// Refinement passes on each Newton solve.
const REFINE_STEPS: usize = 5;

#[derive(Clone)]
pub(crate) struct Block {
    pub c: DMatrix<f64>,
    pub terms: Vec<(usize, DMatrix<f64>)>,
}

pub(crate) struct IpmOutput {
    pub status: SolveStatus,
    pub y: Vec<f64>,
    pub pinf: f64,
    pub dinf: f64,
    pub relgap: f64,
    pub iterations: usize,
}

fn a_op(blocks: &[Block], x: &[DMatrix<f64>], m: usize) -> DVector<f64> {
    let mut out = DVector::zeros(m);
    for (blk, xj) in blocks.iter().zip(x) {
        for (i, a) in &blk.terms {
            out[*i] += a.dot(xj);
        }
    }
    out
}

fn at_op(blocks: &[Block], y: &DVector<f64>) -> Vec<DMatrix<f64>> {
    blocks
        .iter()
        .map(|blk| {
            let n = blk.c.nrows();
            let mut s = DMatrix::zeros(n, n);
            for (i, a) in &blk.terms {
                if y[*i] != 0.0 {
                    s += a * y[*i];
                }
            }
            s
        })
        .collect()
}

fn inner_sum(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn norm_sum(a: &[DMatrix<f64>]) -> f64 {
    a.iter().map(|x| x.norm_squared()).sum::<f64>().sqrt()
}

/// Largest step `α` (capped at `cap`) keeping `X + α dX ⪰ 0`.
fn max_step(x: &[DMatrix<f64>], dx: &[DMatrix<f64>], cap: f64) -> Option<f64> {
    let mut alpha = cap;
    for (xj, dj) in x.iter().zip(dx) {
        let lmin = if xj.nrows() == 1 {
            dj[(0, 0)] / xj[(0, 0)]
        } else {
            let chol = xj.clone().cholesky()?;
            let l = chol.l();
            let linv = l.solve_lower_triangular(&DMatrix::identity(l.nrows(), l.nrows()))?;
            eigmin(&(&linv * dj * linv.transpose()))
        };
        if lmin < 0.0 {
            alpha = alpha.min(-1.0 / lmin);
        }
    }
    Some(alpha)
}

/// A primal step together with the residual `r_p − A(dX)` it leaves.
struct PrimalCandidate {
    dx: Vec<DMatrix<f64>>,
    res: DVector<f64>,
}

struct Direction {
    /// Original-metric projection, work-metric projection, raw solve.
    primal: Vec<PrimalCandidate>,
    dy: DVector<f64>,
    ds: Vec<DMatrix<f64>>,
}

/// Nesterov-Todd scaling of one block: `W = G Gᵀ` with `W S W = X` and
/// `G⁻¹ X G⁻ᵀ = Gᵀ S G = diag(d)`.
struct Scaling {
    g: DMatrix<f64>,
    g_inv: DMatrix<f64>,
    w: DMatrix<f64>,
    d: DVector<f64>,
}

impl Block {
    fn congruence(&self, g: &DMatrix<f64>) -> Block {
        let t = |m: &DMatrix<f64>| sym(&(g.transpose() * m * g));
        Block { c: t(&self.c), terms: self.terms.iter().map(|(i, a)| (*i, t(a))).collect() }
    }
}

impl Scaling {
    fn new(x: &DMatrix<f64>, s: &DMatrix<f64>) -> Option<Self> {
        let rx = sqrt_factor(x);
        let rs = sqrt_factor(s);
        let svd = (rs.transpose() * &rx).svd(true, true);
        let (u, vt) = (svd.u?, svd.v_t?);
        let d = svd.singular_values;
        if d.iter().any(|v| !(*v > 0.0)) {
            return None;
        }
        let dm = d.map(|v| 1.0 / v.sqrt());
        let g = &rx * vt.transpose() * DMatrix::from_diagonal(&dm);
        let g_inv = DMatrix::from_diagonal(&dm) * u.transpose() * rs.transpose();
        let w = sym(&(&g * g.transpose()));
        Some(Self { g, g_inv, w, d })
    }

    /// `Gᵀ M G` for a symmetric `M` in the dual space.
    fn dual_scaled(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        sym(&(self.g.transpose() * m * &self.g))
    }

    /// `G⁻¹ M G⁻ᵀ` for a symmetric `M` in the primal space.
    fn primal_scaled(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        sym(&(&self.g_inv * m * self.g_inv.transpose()))
    }

    /// Solves `diag(d) ∘ Z = R` for `Z` and maps it back as `G Z Gᵀ`.
    fn target(&self, r: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.d.len();
        let z = DMatrix::from_fn(n, n, |i, j| 2.0 * r[(i, j)] / (self.d[i] + self.d[j]));
        sym(&(&self.g * z * self.g.transpose()))
    }
}

struct Newton<'a> {
    blocks: &'a [Block],
    original: &'a [Block],
    t_inv: &'a [DMatrix<f64>],
    scal: &'a [Scaling],
    rd: &'a [DMatrix<f64>],
    rp: &'a DVector<f64>,
    chol: Factor,
    gram: &'a Factor,
    gram_work: Option<Factor>,
    m: usize,
}

impl Newton<'_> {
    /// Direction for a scaled complementarity right-hand side `R_j`.
    fn direction(&self, r: &[DMatrix<f64>]) -> Direction {
        let t: Vec<DMatrix<f64>> = self.scal.iter().zip(r).map(|(sc, rj)| sc.target(rj)).collect();
        let wrw: Vec<DMatrix<f64>> = self.scal.iter().zip(self.rd).map(|(sc, rdj)| &sc.w * rdj * &sc.w).collect();
        let h = self.rp - a_op(self.blocks, &t, self.m) + a_op(self.blocks, &wrw, self.m);
        let mut dy = self.chol.solve(&h);
        let (mut dx, mut ds) = self.recover(&t, &dy);
        // Iterative refinement against the primal equations `A(dX) = r_p`.
        for _ in 0..REFINE_STEPS {
            let res = self.rp - a_op(self.blocks, &dx, self.m);
            if !(res.norm() > 1e-15 * (1.0 + self.rp.norm())) {
                break;
            }
            dy += self.chol.solve(&res);
            (dx, ds) = self.recover(&t, &dy);
        }
        // The scaled products above lose accuracy near degenerate optima.
        // Gram-metric projections restore `A(dX) = r_p` without them; in the
        // original metric the correction `Aᵀw` maps to work coordinates as
        // `T⁻¹ Aᵀw T⁻ᵀ`.
        let res = self.rp - a_op(self.blocks, &dx, self.m);
        let w = self.gram.solve(&res);
        let original: Vec<DMatrix<f64>> = dx
            .iter()
            .zip(at_op(self.original, &w))
            .zip(self.t_inv)
            .map(|((d, c), ti)| d + sym(&(ti * c * ti.transpose())))
            .collect();
        let mut primal = vec![self.candidate(original)];
        if let Some(gram_work) = &self.gram_work {
            let w = gram_work.solve(&res);
            let work = dx.iter().zip(at_op(self.blocks, &w)).map(|(d, c)| d + c).collect();
            primal.push(self.candidate(work));
        }
        primal.push(PrimalCandidate { dx, res });
        Direction { primal, dy, ds }
    }

    fn candidate(&self, dx: Vec<DMatrix<f64>>) -> PrimalCandidate {
        let res = self.rp - a_op(self.blocks, &dx, self.m);
        PrimalCandidate { dx, res }
    }

    fn recover(&self, t: &[DMatrix<f64>], dy: &DVector<f64>) -> (Vec<DMatrix<f64>>, Vec<DMatrix<f64>>) {
        let aty = at_op(self.blocks, dy);
        let ds: Vec<DMatrix<f64>> = self.rd.iter().zip(&aty).map(|(r, a)| r - a).collect();
        let dx: Vec<DMatrix<f64>> = t
            .iter()
            .zip(self.scal)
            .zip(&ds)
            .map(|((tj, sc), dsj)| tj - sym(&(&sc.w * dsj * &sc.w)))
            .collect();
        (dx, ds)
    }
}

/// Factor `R` with `M = R Rᵀ`, falling back to a clipped eigen square root for
/// numerically semidefinite input.
fn sqrt_factor(m: &DMatrix<f64>) -> DMatrix<f64> {
    if let Some(c) = m.clone().cholesky() {
        return c.l();
    }
    let eig = sym(m).symmetric_eigen();
    let d = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&d)
}

/// Schur complement `M_ik = ⟨A_i, W A_k W⟩`, formed as the Gram matrix of
/// `Gᵀ A_i G` so that it stays semidefinite.
fn schur(blocks: &[Block], scal: &[Scaling], used: &[bool]) -> DMatrix<f64> {
    let m = used.len();
    let mut mat = DMatrix::zeros(m, m);
    for (blk, sc) in blocks.iter().zip(scal) {
        let g: Vec<DMatrix<f64>> = blk.terms.iter().map(|(_, a)| sc.dual_scaled(a)).collect();
        for (p, (i, _)) in blk.terms.iter().enumerate() {
            for (r, (k, _)) in blk.terms.iter().enumerate().skip(p) {
                let v = g[p].dot(&g[r]);
                mat[(*i, *k)] += v;
                if i != k {
                    mat[(*k, *i)] += v;
                }
            }
        }
    }
    for (i, &u) in used.iter().enumerate() {
        if !u {
            mat[(i, i)] = 1.0;
        }
    }
    mat
}

/// `G_ik = Σ_j ⟨A_ij, A_kj⟩`.
fn gram_matrix(blocks: &[Block], used: &[bool]) -> DMatrix<f64> {
    let m = used.len();
    let mut mat = DMatrix::zeros(m, m);
    for blk in blocks {
        for (p, (i, ai)) in blk.terms.iter().enumerate() {
            for (k, ak) in &blk.terms[p..] {
                let v = ai.dot(ak);
                mat[(*i, *k)] += v;
                if i != k {
                    mat[(*k, *i)] += v;
                }
            }
        }
    }
    for (i, &u) in used.iter().enumerate() {
        if !u {
            mat[(i, i)] = 1.0;
        }
    }
    mat
}

/// Cholesky factor of a Jacobi-scaled positive semidefinite matrix.
struct Factor {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    scale: DVector<f64>,
}

impl Factor {
    fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let scaled = rhs.component_mul(&self.scale);
        self.chol.solve(&scaled).component_mul(&self.scale)
    }
}

/// Factors `D M D` with `D = diag(M)^{-1/2}`, shifting by a small multiple of
/// the identity when the scaled matrix is numerically singular.
fn factor(mat: DMatrix<f64>) -> Option<Factor> {
    let scale = mat.diagonal().map(|d| if d > 0.0 { 1.0 / d.sqrt() } else { 1.0 });
    let n = mat.nrows();
    let scaled = DMatrix::from_fn(n, n, |i, j| mat[(i, j)] * scale[i] * scale[j]);
    for reg in [0.0, 1e-14, 1e-12, 1e-10] {
        let shifted = &scaled + DMatrix::identity(n, n) * reg;
        if let Some(chol) = shifted.cholesky() {
            return Some(Factor { chol, scale });
        }
    }
    None
}

pub(crate) fn run(original: &[Block], b: &[f64], settings: &SolverSettings) -> IpmOutput {
    let m = b.len();
    let blocks = original;
    let b = DVector::from_column_slice(b);
    let mut used = vec![false; m];
    for blk in blocks {
        for (i, _) in &blk.terms {
            used[*i] = true;
        }
    }
    let out = |status, y: &DVector<f64>, pinf, dinf, relgap, iterations| IpmOutput {
        status,
        y: y.as_slice().to_vec(),
        pinf,
        dinf,
        relgap,
        iterations,
    };
    if used.iter().zip(b.iter()).any(|(&u, &bi)| !u && bi != 0.0) {
        return out(SolveStatus::Unbounded, &DVector::zeros(m), f64::NAN, f64::NAN, f64::NAN, 0);
    }

    let Some(gram) = factor(gram_matrix(blocks, &used)) else {
        return out(SolveStatus::NumericalFailure, &DVector::zeros(m), f64::NAN, f64::NAN, f64::NAN, 0);
    };
    let norm_b = b.norm();
    let norm_c = norm_sum(&blocks.iter().map(|blk| blk.c.clone()).collect::<Vec<_>>());
    let n_total: usize = blocks.iter().map(|blk| blk.c.nrows()).sum();

    let mut x: Vec<DMatrix<f64>> = Vec::with_capacity(blocks.len());
    let mut s: Vec<DMatrix<f64>> = Vec::with_capacity(blocks.len());
    for blk in blocks {
        let n = blk.c.nrows();
        let nf = n as f64;
        let mut xi = 10.0f64.max(nf.sqrt());
        let mut eta = 10.0f64.max(nf.sqrt()).max(blk.c.norm());
        for (i, a) in &blk.terms {
            let na = a.norm();
            xi = xi.max(nf * (1.0 + b[*i].abs()) / (1.0 + na));
            eta = eta.max(na);
        }
        x.push(DMatrix::identity(n, n) * xi);
        s.push(DMatrix::identity(n, n) * eta);
    }
    let mut y = DVector::zeros(m);
    let mut work: Vec<Block> = original.to_vec();
    // `T_j⁻¹` with `work_j = T_jᵀ original_j T_j`.
    let mut t_inv: Vec<DMatrix<f64>> = x.iter().map(|xj| DMatrix::identity(xj.nrows(), xj.nrows())).collect();

    let (mut pinf, mut dinf, mut relgap) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut stalls = 0;
    let mut last_step = 1.0f64;
    for iter in 0..=settings.max_ipm_iters {
        if iter > 0 {
            let Some(scal) = x.iter().zip(&s).map(|(xj, sj)| Scaling::new(xj, sj)).collect::<Option<Vec<_>>>() else {
                return out(SolveStatus::NumericalFailure, &y, pinf, dinf, relgap, iter);
            };
            for (j, sc) in scal.iter().enumerate() {
                work[j] = work[j].congruence(&sc.g);
                t_inv[j] = &sc.g_inv * &t_inv[j];
                x[j] = sc.primal_scaled(&x[j]);
                s[j] = sc.dual_scaled(&s[j]);
            }
        }
        let blocks = &work[..];
        let aty = at_op(blocks, &y);
        let rd: Vec<DMatrix<f64>> = blocks
            .iter()
            .zip(&s)
            .zip(&aty)
            .map(|((blk, sj), a)| &blk.c - sj - a)
            .collect();
        let ax = a_op(blocks, &x, m);
        let rp = &b - &ax;
        let pobj = blocks.iter().zip(&x).map(|(blk, xj)| blk.c.dot(xj)).sum::<f64>();
        let dobj = b.dot(&y);
        let complementarity = inner_sum(&x, &s);
        pinf = rp.norm() / (1.0 + norm_b);
        let violation = original
            .iter()
            .zip(at_op(original, &y))
            .map(|(blk, a)| (-eigmin(&(&blk.c - a))).max(0.0))
            .fold(0.0, f64::max);
        dinf = violation / (1.0 + norm_c);
        relgap = (pobj - dobj).abs().max(complementarity) / (1.0 + pobj.abs() + dobj.abs());
        log::trace!("ipm {iter}: pobj {pobj:.10e} dobj {dobj:.10e} pinf {pinf:.2e} dinf {dinf:.2e} relgap {relgap:.2e}");
        if !(pinf.is_finite() && dinf.is_finite() && relgap.is_finite()) {
            return out(SolveStatus::NumericalFailure, &y, pinf, dinf, relgap, iter);
        }

        if relgap <= settings.tol_gap && pinf <= settings.tol_feas && violation <= settings.tol_feas {
            return out(SolveStatus::Optimal, &y, pinf, dinf, relgap, iter);
        }
        if pobj < 0.0 && ax.norm() / -pobj < TOL_INFEAS {
            return out(SolveStatus::Infeasible, &y, pinf, dinf, relgap, iter);
        }
        if dobj > 0.0 {
            let ray: Vec<DMatrix<f64>> = aty
                .iter()
                .zip(&s)
                .zip(&t_inv)
                .map(|((a, sj), ti)| ti.transpose() * (a + sj) * ti)
                .collect();
            if norm_sum(&ray) / dobj < TOL_INFEAS {
                return out(SolveStatus::Unbounded, &y, pinf, dinf, relgap, iter);
            }
        }
        if iter == settings.max_ipm_iters {
            break;
        }

        let Some(scal) = x.iter().zip(&s).map(|(xj, sj)| Scaling::new(xj, sj)).collect::<Option<Vec<_>>>() else {
            return out(SolveStatus::NumericalFailure, &y, pinf, dinf, relgap, iter);
        };
        let Some(chol) = factor(schur(blocks, &scal, &used)) else {
            return out(SolveStatus::NumericalFailure, &y, pinf, dinf, relgap, iter);
        };
        let newton = Newton { blocks, original, t_inv: &t_inv, scal: &scal, rd: &rd, rp: &rp, chol, gram: &gram, gram_work: factor(gram_matrix(blocks, &used)), m };
        let d2: Vec<DMatrix<f64>> = scal.iter().map(|sc| DMatrix::from_diagonal(&sc.d.map(|v| v * v))).collect();

        // Predictor.
        let r_aff: Vec<DMatrix<f64>> = d2.iter().map(|v| -v).collect();
        let aff = newton.direction(&r_aff);
        let (dxp, dsp) = (&aff.primal[0].dx, &aff.ds);
        let (Some(ap), Some(ad)) = (max_step(&x, dxp, 1.0), max_step(&s, dsp, 1.0)) else {
            return out(SolveStatus::NumericalFailure, &y, pinf, dinf, relgap, iter);
        };
        let mu = complementarity / n_total as f64;
        let gap_aff: f64 = x
            .iter()
            .zip(dxp)
            .zip(s.iter().zip(dsp))
            .map(|((xj, dxj), (sj, dsj))| (xj + dxj * ap).dot(&(sj + dsj * ad)))
            .sum();
        let expon = 1.0f64.max(3.0 * ap.min(ad).powi(2));
        // After a blocked step the iterate has drifted off the central path;
        // a pure centering step without second-order term pulls it back.
        let recenter = last_step < RECENTER_BELOW;
        let sigma = if recenter { 1.0 } else { (gap_aff / complementarity).clamp(0.0, 1.0).powf(expon) };

        // Corrector.
        let r_cor: Vec<DMatrix<f64>> = scal
            .iter()
            .zip(&d2)
            .zip(dxp.iter().zip(dsp))
            .map(|((sc, v2), (dxj, dsj))| {
                let n = v2.nrows();
                let base = DMatrix::identity(n, n) * (sigma * mu) - v2;
                if recenter {
                    base
                } else {
                    base - sym(&(sc.primal_scaled(dxj) * sc.dual_scaled(dsj)))
                }
            })
            .collect();
        let cor = newton.direction(&r_cor);
        let Some(ad_max) = max_step(&s, &cor.ds, f64::INFINITY) else {
            return out(SolveStatus::NumericalFailure, &y, pinf, dinf, relgap, iter);
        };
        let step_factor = 0.9 + 0.09 * ap.min(ad);
        // Longest primal step among the candidates whose residual stays
        // negligible or does not grow; the first candidate is the fallback.
        let pinf_limit = pinf.max(0.1 * settings.tol_feas);
        let mut choice = (0, 0.0);
        for (k, cand) in cor.primal.iter().enumerate() {
            let Some(a) = max_step(&x, &cand.dx, f64::INFINITY) else {
                return out(SolveStatus::NumericalFailure, &y, pinf, dinf, relgap, iter);
            };
            let alpha = (step_factor * a).min(1.0);
            let after = (&rp * (1.0 - alpha) + &cand.res * alpha).norm() / (1.0 + norm_b);
            if (k == 0 || after <= pinf_limit) && alpha > choice.1 {
                choice = (k, alpha);
            }
        }
        let (pick, alpha_p) = choice;
        let dx = &cor.primal[pick].dx;
        let (dy, ds) = (&cor.dy, &cor.ds);
        let alpha_d = (step_factor * ad_max).min(1.0);

        for (xj, dxj) in x.iter_mut().zip(dx) {
            *xj = sym(&(&*xj + dxj * alpha_p));
        }
        for (sj, dsj) in s.iter_mut().zip(ds) {
            *sj = sym(&(&*sj + dsj * alpha_d));
        }
        y += dy * alpha_d;
        log::trace!("ipm {iter}: step p {alpha_p:.3e} d {alpha_d:.3e} sigma {sigma:.2e} candidate {pick}");
        last_step = alpha_p.min(alpha_d);

        if alpha_p.max(alpha_d) < 1e-9 {
            stalls += 1;
            if stalls >= MAX_STALLS {
                return out(SolveStatus::NumericalFailure, &y, pinf, dinf, relgap, iter + 1);
            }
        } else {
            stalls = 0;
        }
    }
    out(SolveStatus::IterationLimit, &y, pinf, dinf, relgap, settings.max_ipm_iters)
}
