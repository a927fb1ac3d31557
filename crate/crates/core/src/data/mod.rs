//! Noisy state/input trajectories and the data-consistency set they induce.

mod qmi;
mod sampling;

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::io;
use crate::model::LinearSystem;

pub use qmi::{build_psi, consistent, consistent_with_tol, psi_blocks, QmiBlock, DEFAULT_TOL_PSD};
pub use sampling::{sample_sigma, SigmaSamples};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialState {
    #[default]
    Zero,
    Gaussian { std: f64 },
}

/// How `x_0` and the inputs `u_k` are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExcitationSpec {
    pub x0: InitialState,
    /// Standard deviation of the i.i.d. Gaussian input entries.
    pub input_std: f64,
}

impl Default for ExcitationSpec {
    fn default() -> Self {
        Self { x0: InitialState::Zero, input_std: 1.0 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub excitation: Option<ExcitationSpec>,
    /// Largest realised noise norm, kept for verification only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_noise_norm: Option<f64>,
    /// Generating plant, kept for verification only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_system: Option<LinearSystem>,
}

/// Measured states `X = [x_0 … x_T]`, inputs `U = [u_0 … u_{T-1}]` and the
/// assumed instantaneous noise bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    #[serde(rename = "X", with = "io::rows")]
    pub x: DMatrix<f64>,
    #[serde(rename = "U", with = "io::rows")]
    pub u: DMatrix<f64>,
    pub eps: f64,
    pub seed: Option<u64>,
    #[serde(default)]
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn new(x: DMatrix<f64>, u: DMatrix<f64>, eps: f64) -> Result<Self> {
        let traj = Self { x, u, eps, seed: None, meta: TrajectoryMeta::default() };
        traj.validate()?;
        Ok(traj)
    }

    pub fn validate(&self) -> Result<()> {
        if self.u.ncols() < 1 {
            return Err(Error::InvalidArgument("trajectory needs T >= 1".into()));
        }
        if self.x.ncols() != self.u.ncols() + 1 {
            return Err(dim_err("trajectory X columns", self.u.ncols() + 1, self.x.ncols()));
        }
        if !(self.eps >= 0.0) || !self.eps.is_finite() {
            return Err(Error::InvalidArgument(format!("eps must be finite and >= 0, got {}", self.eps)));
        }
        Ok(())
    }

    /// Number of transitions `T`.
    pub fn len(&self) -> usize {
        self.u.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.u.ncols() == 0
    }

    pub fn nx(&self) -> usize {
        self.x.nrows()
    }

    pub fn nu(&self) -> usize {
        self.u.nrows()
    }

    pub fn true_system(&self) -> Option<&LinearSystem> {
        self.meta.true_system.as_ref()
    }

    /// `(x_i, u_i, x_{i+1})`.
    pub fn sample(&self, i: usize) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        (
            self.x.column(i).into_owned(),
            self.u.column(i).into_owned(),
            self.x.column(i + 1).into_owned(),
        )
    }

    /// The first `t` transitions.
    pub fn prefix(&self, t: usize) -> Result<Self> {
        if t < 1 || t > self.len() {
            return Err(Error::InvalidArgument(format!(
                "prefix length {t} outside 1..={}",
                self.len()
            )));
        }
        let mut out = self.clone();
        out.x = self.x.columns(0, t + 1).into_owned();
        out.u = self.u.columns(0, t).into_owned();
        Ok(out)
    }

    /// Same data with a different assumed noise bound.
    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        let mut out = self.clone();
        out.eps = eps;
        out.validate()?;
        Ok(out)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let traj: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        traj.validate()?;
        Ok(traj)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        io::write_text(path, &serde_json::to_string_pretty(self)?)
    }
}

/// Point drawn uniformly from the closed Euclidean ball of radius `eps`.
fn ball_sample(rng: &mut ChaCha20Rng, n: usize, eps: f64) -> DVector<f64> {
    if eps == 0.0 {
        return DVector::zeros(n);
    }
    let dir = loop {
        let v = DVector::from_fn(n, |_, _| { let z: f64 = StandardNormal.sample(rng); z });
        let nrm = v.norm();
        if nrm > 1e-12 {
            break v / nrm;
        }
    };
    let r: f64 = Uniform::new_inclusive(0.0, 1.0).expect("valid range").sample(rng);
    dir * (eps * r.powf(1.0 / n as f64))
}

/// Rolls out `x_{k+1} = A x_k + B u_k + w_k` with `‖w_k‖₂ ≤ eps`.
pub fn simulate_collect(
    sys: &LinearSystem,
    t: usize,
    eps: f64,
    seed: u64,
    excitation: &ExcitationSpec,
) -> Result<Trajectory> {
    if t < 1 {
        return Err(Error::InvalidArgument("T must be at least 1".into()));
    }
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::InvalidArgument(format!("eps must be finite and >= 0, got {eps}")));
    }
    let (nx, nu) = (sys.nx(), sys.nu());
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut x = DMatrix::zeros(nx, t + 1);
    let mut u = DMatrix::zeros(nu, t);
    if let InitialState::Gaussian { std } = excitation.x0 {
        for i in 0..nx {
            let z: f64 = StandardNormal.sample(&mut rng);
            x[(i, 0)] = std * z;
        }
    }
    let mut max_noise: f64 = 0.0;
    for k in 0..t {
        for i in 0..nu {
            let z: f64 = StandardNormal.sample(&mut rng);
            u[(i, k)] = excitation.input_std * z;
        }
        let w = ball_sample(&mut rng, nx, eps);
        max_noise = max_noise.max(w.norm());
        let next = &sys.a * x.column(k) + &sys.b * u.column(k) + w;
        x.set_column(k + 1, &next);
    }
    Ok(Trajectory {
        x,
        u,
        eps,
        seed: Some(seed),
        meta: TrajectoryMeta {
            system: None,
            excitation: Some(*excitation),
            max_noise_norm: Some(max_noise),
            true_system: Some(sys.clone()),
        },
    })
}
