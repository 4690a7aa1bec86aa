//! Finite-run simulation: draw trial counts from a behavior and measure the
//! strength of the observed frequencies.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{Behavior, SettingsDistribution};
use crate::strength::{min_kl_local, StrengthResult};

/// Outcome counts of `total` trials, laid out like a [`Behavior`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialCounts {
    pub m: usize,
    pub n: usize,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl TrialCounts {
    pub fn new(m: usize, n: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != m * m * n * n {
            return Err(Error::Shape(format!(
                "{} counts for an {m} x {n} test",
                counts.len()
            )));
        }
        let total = counts.iter().sum();
        if total == 0 {
            return Err(Error::InvalidParameter("no trials recorded".into()));
        }
        Ok(Self { m, n, counts, total })
    }

    /// Relative frequencies as a behavior whose settings distribution is the
    /// observed one.
    pub fn frequencies(&self) -> Result<Behavior> {
        let nn = self.n * self.n;
        let total = self.total as f64;
        let probs: Vec<f64> = self.counts.iter().map(|&c| c as f64 / total).collect();
        let settings: Vec<f64> = self
            .counts
            .chunks(nn)
            .map(|cell| cell.iter().sum::<u64>() as f64 / total)
            .collect();
        Behavior::new(self.n, probs, SettingsDistribution::new(self.m, settings)?)
    }
}

fn multinomial(rng: &mut ChaCha20Rng, probs: &[f64], trials: u64) -> Result<Vec<u64>> {
    let mut counts = vec![0u64; probs.len()];
    let mut left = trials;
    let mut mass = 1.0f64;
    for (i, &p) in probs.iter().enumerate() {
        if left == 0 {
            break;
        }
        if i + 1 == probs.len() || mass <= 0.0 {
            counts[i] = left;
            break;
        }
        let share = (p / mass).clamp(0.0, 1.0);
        let draw = Binomial::new(left, share)
            .map_err(|e| Error::InvalidParameter(format!("binomial draw: {e}")))?
            .sample(rng);
        counts[i] = draw;
        left -= draw;
        mass -= p;
    }
    Ok(counts)
}

/// `trials` independent draws of `(settings, outcomes)` from `q`.
pub fn sample_trials(q: &Behavior, trials: u64, seed: u64) -> Result<TrialCounts> {
    sample_trials_blocked(q, trials, seed, 1)
}

/// Like [`sample_trials`], split into `blocks` runs sampled in parallel. Block
/// `b` uses ChaCha20 stream `b` of `seed`, so results depend only on
/// `(seed, blocks)`.
pub fn sample_trials_blocked(q: &Behavior, trials: u64, seed: u64, blocks: usize) -> Result<TrialCounts> {
    if trials == 0 {
        return Err(Error::InvalidParameter("need at least one trial".into()));
    }
    if blocks == 0 {
        return Err(Error::InvalidParameter("need at least one block".into()));
    }
    let probs = q.probs();
    let per = trials / blocks as u64;
    let extra = trials % blocks as u64;
    let parts: Vec<Vec<u64>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let n = per + u64::from((b as u64) < extra);
            multinomial(&mut rng, probs, n)
        })
        .collect::<Result<_>>()?;
    let mut counts = vec![0u64; probs.len()];
    for part in parts {
        for (c, x) in counts.iter_mut().zip(part) {
            *c += x;
        }
    }
    TrialCounts::new(q.num_settings(), q.num_outcomes(), counts)
}

/// `min_kl_local` of the observed frequencies.
pub fn empirical_strength(counts: &TrialCounts, tol: f64) -> Result<StrengthResult> {
    min_kl_local(&counts.frequencies()?, tol)
}
