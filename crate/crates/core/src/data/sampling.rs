use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::{consistent, Trajectory};
use crate::error::{Error, Result};

/// Accepted draws from the consistency set.
#[derive(Clone, Debug)]
pub struct SigmaSamples {
    pub pairs: Vec<(DMatrix<f64>, DMatrix<f64>)>,
    pub attempts: usize,
    pub acceptance_rate: f64,
}

/// Rejection sampling around `center` (or the trajectory's retained truth):
/// entrywise uniform perturbations in `[-radius, radius]`, kept iff consistent.
pub fn sample_sigma(
    traj: &Trajectory,
    center: Option<(&DMatrix<f64>, &DMatrix<f64>)>,
    count: usize,
    radius: f64,
    seed: u64,
    max_attempts: usize,
) -> Result<SigmaSamples> {
    let (a0, b0) = match center {
        Some((a, b)) => (a.clone(), b.clone()),
        None => {
            let sys = traj.true_system().ok_or_else(|| {
                Error::InvalidArgument("sampling needs a retained true system or a center".into())
            })?;
            (sys.a.clone(), sys.b.clone())
        }
    };
    if count == 0 {
        return Ok(SigmaSamples { pairs: Vec::new(), attempts: 0, acceptance_rate: 1.0 });
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(count);
    let mut attempts = 0;
    while pairs.len() < count && attempts < max_attempts {
        attempts += 1;
        let mut perturb = |m: &DMatrix<f64>| {
            if radius == 0.0 {
                m.clone()
            } else {
                m.map(|v| v + rng.random_range(-radius..=radius))
            }
        };
        let a = perturb(&a0);
        let b = perturb(&b0);
        if consistent(&a, &b, traj)? {
            pairs.push((a, b));
        }
    }
    if pairs.is_empty() {
        return Err(Error::NoAcceptance(attempts));
    }
    Ok(SigmaSamples {
        acceptance_rate: pairs.len() as f64 / attempts as f64,
        pairs,
        attempts,
    })
}
