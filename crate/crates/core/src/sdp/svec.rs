//! Symmetric-matrix flattening with `√2` off-diagonal scaling, so that
//! `⟨svec(A), svec(B)⟩ = Tr(A B)`.

use nalgebra::DMatrix;
use std::f64::consts::SQRT_2;

pub fn svec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// `(row, col)` of the `k`-th flattened coordinate (lower triangle, column-major).
pub fn svec_index(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(svec_len(n));
    for j in 0..n {
        for i in j..n {
            out.push((i, j));
        }
    }
    out
}

pub fn svec(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    svec_index(n)
        .into_iter()
        .map(|(i, j)| if i == j { m[(i, i)] } else { SQRT_2 * 0.5 * (m[(i, j)] + m[(j, i)]) })
        .collect()
}

pub fn smat(v: &[f64], n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for (k, (i, j)) in svec_index(n).into_iter().enumerate() {
        if i == j {
            m[(i, i)] = v[k];
        } else {
            let e = v[k] / SQRT_2;
            m[(i, j)] = e;
            m[(j, i)] = e;
        }
    }
    m
}

/// Basis matrix of coordinate `(i, j)`: `E_ii`, or `(E_ij + E_ji)/√2`.
pub fn basis(n: usize, i: usize, j: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    if i == j {
        m[(i, i)] = 1.0;
    } else {
        m[(i, j)] = 1.0 / SQRT_2;
        m[(j, i)] = 1.0 / SQRT_2;
    }
    m
}
