//! Discrete-time LTI plants, static state feedback and closed loops.

mod builtin;
mod norms;

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::io;

pub use builtin::{builtin_system, h2_example_system, hinf_example_system, BUILTIN_SYSTEMS};
pub use norms::{
    h2_norm, h2_norm_closed_loop, hinf_norm, hinf_norm_with, hinf_sweep, hinf_sweep_refined,
    is_schur_stable, solve_dlyap, spectral_radius, HinfMethod, HinfOptions, DEFAULT_N_GRID,
    STABILITY_MARGIN,
};

/// Plant `x⁺ = Ax + Bu + Gd`, `y = Cx + Du + Hd`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearSystem {
    #[serde(rename = "A", with = "io::rows")]
    pub a: DMatrix<f64>,
    #[serde(rename = "B", with = "io::rows")]
    pub b: DMatrix<f64>,
    #[serde(rename = "C", with = "io::rows")]
    pub c: DMatrix<f64>,
    #[serde(rename = "D", with = "io::rows")]
    pub d: DMatrix<f64>,
    #[serde(rename = "G", with = "io::rows")]
    pub g: DMatrix<f64>,
    #[serde(rename = "H", with = "io::rows")]
    pub h: DMatrix<f64>,
}

impl LinearSystem {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
        g: DMatrix<f64>,
        h: DMatrix<f64>,
    ) -> Result<Self> {
        let sys = Self { a, b, c, d, g, h };
        sys.validate()?;
        Ok(sys)
    }

    pub fn validate(&self) -> Result<()> {
        let nx = self.a.nrows();
        if !self.a.is_square() {
            return Err(Error::NotSquare {
                context: "A",
                rows: self.a.nrows(),
                cols: self.a.ncols(),
            });
        }
        let (nu, ny, nd) = (self.b.ncols(), self.c.nrows(), self.g.ncols());
        if nx == 0 || nu == 0 || ny == 0 || nd == 0 {
            return Err(Error::InvalidArgument(
                "n_x, n_u, n_y and n_d must all be at least 1".into(),
            ));
        }
        let checks: [(&'static str, &DMatrix<f64>, (usize, usize)); 5] = [
            ("B", &self.b, (nx, nu)),
            ("C", &self.c, (ny, nx)),
            ("D", &self.d, (ny, nu)),
            ("G", &self.g, (nx, nd)),
            ("H", &self.h, (ny, nd)),
        ];
        for (name, m, shape) in checks {
            if m.shape() != shape {
                return Err(dim_err(name, format!("{shape:?}"), format!("{:?}", m.shape())));
            }
        }
        let all = [&self.a, &self.b, &self.c, &self.d, &self.g, &self.h];
        if all.iter().any(|m| m.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidArgument("plant matrices must be finite".into()));
        }
        Ok(())
    }

    pub fn nx(&self) -> usize {
        self.a.nrows()
    }
    pub fn nu(&self) -> usize {
        self.b.ncols()
    }
    pub fn ny(&self) -> usize {
        self.c.nrows()
    }
    pub fn nd(&self) -> usize {
        self.g.ncols()
    }

    pub fn has_zero_feedthrough(&self) -> bool {
        self.h.iter().all(|v| *v == 0.0)
    }

    /// Copy with `(A, B)` replaced; the known parts `C, D, G, H` are kept.
    pub fn with_dynamics(&self, a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        Self::new(a, b, self.c.clone(), self.d.clone(), self.g.clone(), self.h.clone())
    }

    /// Loads a plant from a JSON file or from a directory of `A.csv` ... `H.csv`.
    ///
    /// JSON values are inline row arrays or CSV paths relative to the file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if path.is_dir() {
            let read = |name: &str| io::read_csv_matrix(path.join(format!("{name}.csv")));
            return Self::new(read("A")?, read("B")?, read("C")?, read("D")?, read("G")?, read("H")?);
        }
        let text = std::fs::read_to_string(path)?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_json_value(&value, base)
    }

    pub fn from_json_value(value: &serde_json::Value, base: &Path) -> Result<Self> {
        let get = |key: &str| -> Result<DMatrix<f64>> {
            let v = value
                .get(key)
                .ok_or_else(|| Error::Parse(format!("system is missing key `{key}`")))?;
            io::matrix_from_json(v, base)
        };
        Self::new(get("A")?, get("B")?, get("C")?, get("D")?, get("G")?, get("H")?)
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        io::write_text(path, &serde_json::to_string_pretty(self)?)
    }
}

/// Static state-feedback gain `u = Kx`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Gain(#[serde(with = "io::rows")] pub DMatrix<f64>);

impl Gain {
    pub fn new(k: DMatrix<f64>) -> Result<Self> {
        if k.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("gain entries must be finite".into()));
        }
        Ok(Self(k))
    }

    pub fn zeros(nu: usize, nx: usize) -> Self {
        Self(DMatrix::zeros(nu, nx))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// `x⁺ = A_K x + G d`, `y = C_K x + H d`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClosedLoop {
    pub a_k: DMatrix<f64>,
    pub c_k: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub h: DMatrix<f64>,
}

pub fn close_loop(sys: &LinearSystem, k: &Gain) -> Result<ClosedLoop> {
    let k = k.matrix();
    if k.shape() != (sys.nu(), sys.nx()) {
        return Err(dim_err(
            "gain",
            format!("{:?}", (sys.nu(), sys.nx())),
            format!("{:?}", k.shape()),
        ));
    }
    Ok(ClosedLoop {
        a_k: &sys.a + &sys.b * k,
        c_k: &sys.c + &sys.d * k,
        g: sys.g.clone(),
        h: sys.h.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(a: f64, b: f64, c: f64, d: f64, g: f64, h: f64) -> LinearSystem {
        let s = |v| DMatrix::from_element(1, 1, v);
        LinearSystem::new(s(a), s(b), s(c), s(d), s(g), s(h)).unwrap()
    }

    #[test]
    fn zero_gain_leaves_plant() {
        let sys = h2_example_system();
        let cl = close_loop(&sys, &Gain::zeros(2, 3)).unwrap();
        assert_eq!(cl.a_k, sys.a);
        assert_eq!(cl.c_k, sys.c);
        assert_eq!(cl.g, sys.g);
        assert_eq!(cl.h, sys.h);
    }

    #[test]
    fn scalar_pole_cancellation() {
        let sys = scalar(0.5, 1.0, 1.0, 0.0, 1.0, 0.0);
        let cl = close_loop(&sys, &Gain::new(DMatrix::from_element(1, 1, -0.5)).unwrap()).unwrap();
        assert_eq!(cl.a_k[(0, 0)], 0.0);
        assert_eq!(cl.c_k[(0, 0)], 1.0);
    }

    #[test]
    fn closed_loop_matches_explicit_multiply() {
        let sys = h2_example_system();
        let k = DMatrix::from_row_slice(2, 3, &[0.3, -1.2, 0.05, 0.7, 0.2, -0.4]);
        let cl = close_loop(&sys, &Gain::new(k.clone()).unwrap()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = sys.a[(i, j)];
                for l in 0..2 {
                    acc += sys.b[(i, l)] * k[(l, j)];
                }
                assert!((cl.a_k[(i, j)] - acc).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn gain_shape_checked() {
        let sys = h2_example_system();
        assert!(close_loop(&sys, &Gain::zeros(3, 3)).is_err());
    }

    #[test]
    fn inconsistent_plant_rejected() {
        let s = |r, c| DMatrix::<f64>::zeros(r, c);
        let err = LinearSystem::new(s(2, 2), s(3, 1), s(1, 2), s(1, 1), s(2, 1), s(1, 1));
        assert!(err.is_err());
    }

    #[test]
    fn json_accepts_inline_rows_and_csv_paths() {
        let dir = tempfile::tempdir().unwrap();
        io::write_csv_matrix(dir.path().join("a.csv"), &DMatrix::from_element(1, 1, 0.5)).unwrap();
        let json = r#"{"A": "a.csv", "B": [[1.0]], "C": [[1.0]], "D": [[0.0]], "G": [[1.0]], "H": [[0.0]]}"#;
        let path = dir.path().join("sys.json");
        std::fs::write(&path, json).unwrap();
        let sys = LinearSystem::load(&path).unwrap();
        assert_eq!(sys.a[(0, 0)], 0.5);

        let sub = dir.path().join("sysdir");
        std::fs::create_dir(&sub).unwrap();
        for (name, m) in [
            ("A", &sys.a),
            ("B", &sys.b),
            ("C", &sys.c),
            ("D", &sys.d),
            ("G", &sys.g),
            ("H", &sys.h),
        ] {
            io::write_csv_matrix(sub.join(format!("{name}.csv")), m).unwrap();
        }
        assert_eq!(LinearSystem::load(&sub).unwrap(), sys);
    }
}
