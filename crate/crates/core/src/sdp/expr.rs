//! Affine expressions over the flattened scalar decision vector.

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;

use crate::error::{dim_err, Result};

/// `constant + Σ xᵢ coefᵢ`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScalarExpr {
    pub constant: f64,
    pub terms: BTreeMap<usize, f64>,
}

impl ScalarExpr {
    pub fn constant(c: f64) -> Self {
        Self { constant: c, terms: BTreeMap::new() }
    }

    pub fn var(index: usize) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(index, 1.0);
        Self { constant: 0.0, terms }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|(&i, &c)| c * x[i]).sum::<f64>()
    }

    fn prune(mut self) -> Self {
        self.terms.retain(|_, c| *c != 0.0);
        self
    }
}

impl Add for ScalarExpr {
    type Output = ScalarExpr;
    fn add(mut self, rhs: ScalarExpr) -> ScalarExpr {
        self.constant += rhs.constant;
        for (i, c) in rhs.terms {
            *self.terms.entry(i).or_insert(0.0) += c;
        }
        self.prune()
    }
}

impl Sub for ScalarExpr {
    type Output = ScalarExpr;
    fn sub(self, rhs: ScalarExpr) -> ScalarExpr {
        self + (-rhs)
    }
}

impl Neg for ScalarExpr {
    type Output = ScalarExpr;
    fn neg(self) -> ScalarExpr {
        self * -1.0
    }
}

impl Mul<f64> for ScalarExpr {
    type Output = ScalarExpr;
    fn mul(mut self, s: f64) -> ScalarExpr {
        self.constant *= s;
        for c in self.terms.values_mut() {
            *c *= s;
        }
        self.prune()
    }
}

/// Affine matrix-valued expression `F₀ + Σ xᵢ Fᵢ`, not necessarily square.
#[derive(Clone, Debug, PartialEq)]
pub struct MatExpr {
    pub constant: DMatrix<f64>,
    pub terms: BTreeMap<usize, DMatrix<f64>>,
}

impl MatExpr {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::constant(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        Self::constant(DMatrix::identity(n, n))
    }

    pub fn constant(m: DMatrix<f64>) -> Self {
        Self { constant: m, terms: BTreeMap::new() }
    }

    pub fn from_scalar(s: &ScalarExpr) -> Self {
        Self {
            constant: DMatrix::from_element(1, 1, s.constant),
            terms: s
                .terms
                .iter()
                .map(|(&i, &c)| (i, DMatrix::from_element(1, 1, c)))
                .collect(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.constant.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.constant.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.constant.shape()
    }

    fn map_all(&self, f: impl Fn(&DMatrix<f64>) -> DMatrix<f64>) -> Self {
        Self {
            constant: f(&self.constant),
            terms: self.terms.iter().map(|(&i, m)| (i, f(m))).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        self.map_all(|m| m.transpose())
    }

    /// `M · self`.
    pub fn lmul(&self, m: &DMatrix<f64>) -> Self {
        assert_eq!(m.ncols(), self.nrows(), "lmul shape");
        self.map_all(|e| m * e)
    }

    /// `self · M`.
    pub fn rmul(&self, m: &DMatrix<f64>) -> Self {
        assert_eq!(self.ncols(), m.nrows(), "rmul shape");
        self.map_all(|e| e * m)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map_all(|e| e * s)
    }

    /// Scalar-valued trace.
    pub fn trace(&self) -> ScalarExpr {
        ScalarExpr {
            constant: self.constant.trace(),
            terms: self.terms.iter().map(|(&i, m)| (i, m.trace())).collect(),
        }
        .prune()
    }

    pub fn entry(&self, i: usize, j: usize) -> ScalarExpr {
        ScalarExpr {
            constant: self.constant[(i, j)],
            terms: self.terms.iter().map(|(&k, m)| (k, m[(i, j)])).collect(),
        }
        .prune()
    }

    pub fn eval(&self, x: &[f64]) -> DMatrix<f64> {
        let mut out = self.constant.clone();
        for (&i, m) in &self.terms {
            out += m * x[i];
        }
        out
    }

    /// Assembles a block matrix; every row of blocks must have consistent heights
    /// and every column consistent widths.
    pub fn block(rows: &[Vec<MatExpr>]) -> Result<Self> {
        let heights: Vec<usize> = rows.iter().map(|r| r[0].nrows()).collect();
        let widths: Vec<usize> = rows[0].iter().map(MatExpr::ncols).collect();
        for (bi, r) in rows.iter().enumerate() {
            if r.len() != widths.len() {
                return Err(dim_err("block row length", widths.len(), r.len()));
            }
            for (bj, e) in r.iter().enumerate() {
                if e.shape() != (heights[bi], widths[bj]) {
                    return Err(dim_err(
                        "block shape",
                        format!("{:?} at ({bi},{bj})", (heights[bi], widths[bj])),
                        format!("{:?}", e.shape()),
                    ));
                }
            }
        }
        let total_r: usize = heights.iter().sum();
        let total_c: usize = widths.iter().sum();
        let mut out = MatExpr::zeros(total_r, total_c);
        let mut r0 = 0;
        for (bi, r) in rows.iter().enumerate() {
            let mut c0 = 0;
            for (bj, e) in r.iter().enumerate() {
                let (h, w) = (heights[bi], widths[bj]);
                out.constant.view_mut((r0, c0), (h, w)).copy_from(&e.constant);
                for (&k, m) in &e.terms {
                    let slot = out.terms.entry(k).or_insert_with(|| DMatrix::zeros(total_r, total_c));
                    slot.view_mut((r0, c0), (h, w)).copy_from(m);
                }
                c0 += w;
            }
            r0 += heights[bi];
        }
        Ok(out)
    }

    /// Block diagonal assembly.
    pub fn blkdiag(blocks: &[MatExpr]) -> Self {
        let rows: Vec<Vec<MatExpr>> = blocks
            .iter()
            .enumerate()
            .map(|(i, bi)| {
                blocks
                    .iter()
                    .enumerate()
                    .map(|(j, bj)| if i == j { bi.clone() } else { MatExpr::zeros(bi.nrows(), bj.ncols()) })
                    .collect()
            })
            .collect();
        Self::block(&rows).expect("diagonal blocks are consistent by construction")
    }
}

impl Add for MatExpr {
    type Output = MatExpr;
    fn add(mut self, rhs: MatExpr) -> MatExpr {
        assert_eq!(self.shape(), rhs.shape(), "add shape");
        self.constant += rhs.constant;
        for (i, m) in rhs.terms {
            match self.terms.get_mut(&i) {
                Some(slot) => *slot += m,
                None => {
                    self.terms.insert(i, m);
                }
            }
        }
        self
    }
}

impl Sub for MatExpr {
    type Output = MatExpr;
    fn sub(self, rhs: MatExpr) -> MatExpr {
        self + rhs.scale(-1.0)
    }
}

impl Neg for MatExpr {
    type Output = MatExpr;
    fn neg(self) -> MatExpr {
        self.scale(-1.0)
    }
}

impl Add<DMatrix<f64>> for MatExpr {
    type Output = MatExpr;
    fn add(mut self, rhs: DMatrix<f64>) -> MatExpr {
        self.constant += rhs;
        self
    }
}

impl Sub<DMatrix<f64>> for MatExpr {
    type Output = MatExpr;
    fn sub(mut self, rhs: DMatrix<f64>) -> MatExpr {
        self.constant -= rhs;
        self
    }
}
