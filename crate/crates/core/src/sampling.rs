//! Finite-shot emulation of the readout records.
//!
//! Shots are drawn in fixed batches of [`BATCH`]. Batch `b` uses a ChaCha8
//! generator seeded with `seed` on stream `b`, so results depend only on
//! `(seed, shots, inputs)` and not on how batches are scheduled across threads.
//! Photon-number draws are multinomial by sequential conditional binomials;
//! quadrature draws invert a piecewise-linear CDF on a fixed grid.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::quadrature::quadrature_density;
use crate::fock::DensityOperator;
use crate::protocols::{
    counting_photon_distribution, displaced_populations, parity_outcome_probabilities, resolve_counting,
    resolve_parity, ReadoutMethod,
};

/// Shots per generator stream.
pub const BATCH: u64 = 1 << 16;
/// Default quadrature grid step.
pub const DEFAULT_GRID_STEP: f64 = 1e-3;
/// Probability mass a quadrature range must cover.
pub const RANGE_COVERAGE: f64 = 1.0 - 1e-6;
const PROB_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotConfig {
    pub shots: u64,
    pub seed: u64,
    pub binning: Option<f64>,
}

impl ShotConfig {
    pub fn new(shots: u64, seed: u64) -> Result<Self> {
        Self::with_binning(shots, seed, None)
    }

    pub fn with_binning(shots: u64, seed: u64, binning: Option<f64>) -> Result<Self> {
        if shots == 0 {
            return Err(Error::Invalid("shots must be at least 1".into()));
        }
        if let Some(b) = binning {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::Invalid(format!("binning must be positive, got {b}")));
            }
        }
        Ok(Self { shots, seed, binning })
    }

    fn batches(&self) -> Vec<(u64, u64)> {
        let n = self.shots.div_ceil(BATCH);
        (0..n).map(|b| (b, BATCH.min(self.shots - b * BATCH))).collect()
    }

    fn rng(&self, batch: u64) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(batch);
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithError {
    pub value: f64,
    pub std_error: f64,
    pub shots: u64,
}

fn checked_probabilities(probs: &[f64]) -> Result<Vec<f64>> {
    if probs.is_empty() {
        return Err(Error::Invalid("empty outcome distribution".into()));
    }
    if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::Invalid(
            "outcome probabilities must be finite and nonnegative".into(),
        ));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > PROB_TOL {
        return Err(Error::Invalid(format!("outcome probabilities sum to {total}, not 1")));
    }
    Ok(probs.iter().map(|p| p / total).collect())
}

fn multinomial<R: Rng>(rng: &mut R, n: u64, probs: &[f64], counts: &mut [u64]) {
    let mut left = n;
    let mut mass = 1.0f64;
    for (k, &p) in probs.iter().enumerate() {
        if left == 0 {
            break;
        }
        if k + 1 == probs.len() || p >= mass {
            counts[k] += left;
            break;
        }
        let q = (p / mass).clamp(0.0, 1.0);
        let draw = Binomial::new(left, q).expect("valid binomial").sample(rng);
        counts[k] += draw;
        left -= draw;
        mass -= p;
    }
}

/// Multinomial counts for outcomes `0..probs.len()`.
pub fn sample_photon_numbers(probs: &[f64], cfg: &ShotConfig) -> Result<Vec<u64>> {
    let p = checked_probabilities(probs)?;
    let parts: Vec<Vec<u64>> = cfg
        .batches()
        .into_par_iter()
        .map(|(b, n)| {
            let mut counts = vec![0u64; p.len()];
            multinomial(&mut cfg.rng(b), n, &p, &mut counts);
            counts
        })
        .collect();
    let mut total = vec![0u64; p.len()];
    for part in parts {
        for (t, c) in total.iter_mut().zip(part) {
            *t += c;
        }
    }
    Ok(total)
}

/// Quadrature samples drawn from `density` on `[lo, hi]`.
pub fn sample_quadrature(density: impl Fn(f64) -> f64 + Sync, range: (f64, f64), cfg: &ShotConfig) -> Result<Vec<f64>> {
    let (lo, hi) = range;
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(Error::Invalid(format!(
            "quadrature range [{lo}, {hi}] is empty or not finite"
        )));
    }
    let step = cfg.binning.map_or(DEFAULT_GRID_STEP, |b| b.min(DEFAULT_GRID_STEP));
    let cells = ((hi - lo) / step).ceil() as usize;
    let h = (hi - lo) / cells as f64;
    let vals: Vec<f64> = (0..=cells)
        .into_par_iter()
        .map(|i| density(lo + i as f64 * h))
        .collect();
    if vals.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Invalid(
            "quadrature density must be finite and nonnegative".into(),
        ));
    }
    let mut cdf = Vec::with_capacity(cells + 1);
    cdf.push(0.0);
    for i in 0..cells {
        let last = cdf[i];
        cdf.push(last + 0.5 * h * (vals[i] + vals[i + 1]));
    }
    let mass = cdf[cells];
    if mass.is_nan() || mass < RANGE_COVERAGE {
        return Err(Error::InsufficientRange(format!(
            "[{lo}, {hi}] holds {mass:.9} of the quadrature density, need {RANGE_COVERAGE}"
        )));
    }
    let parts: Vec<Vec<f64>> = cfg
        .batches()
        .into_par_iter()
        .map(|(b, n)| {
            let mut rng = cfg.rng(b);
            (0..n)
                .map(|_| {
                    let u = rng.random::<f64>() * mass;
                    let i = cdf.partition_point(|c| *c <= u).clamp(1, cells) - 1;
                    let width = cdf[i + 1] - cdf[i];
                    let frac = if width > 0.0 { (u - cdf[i]) / width } else { 0.5 };
                    lo + (i as f64 + frac) * h
                })
                .collect()
        })
        .collect();
    Ok(parts.concat())
}

/// Quadrature samples of a single-mode pure state.
pub fn sample_quadrature_state(
    amplitudes: &nalgebra::DVector<C64>,
    range: (f64, f64),
    cfg: &ShotConfig,
) -> Result<Vec<f64>> {
    sample_quadrature(|x| quadrature_density(amplitudes, x), range, cfg)
}

fn mean_and_error(counts: &[u64], weight: impl Fn(usize) -> f64) -> (f64, f64) {
    let n: u64 = counts.iter().sum();
    let nf = n as f64;
    let seen = || counts.iter().enumerate().filter(|(_, c)| **c > 0);
    let mean = seen().map(|(k, c)| *c as f64 * weight(k)).sum::<f64>() / nf;
    let var = seen().map(|(k, c)| *c as f64 * (weight(k) - mean).powi(2)).sum::<f64>() / nf;
    (mean, (var / nf).sqrt())
}

/// `Re (1+i)^n = 2^{n/2} cos(n pi / 4)`.
fn counting_weight(n: usize) -> f64 {
    let mag = 2f64.powf(0.5 * n as f64);
    match n % 8 {
        0 => mag,
        1 | 7 => 2f64.powi((n / 2) as i32),
        2 | 6 => 0.0,
        3 | 5 => -(2f64.powi((n / 2) as i32)),
        _ => -mag,
    }
}

/// Emulates a Wigner readout at `beta` with `cfg.shots` repetitions.
///
/// The standard error is the plug-in multinomial error of the estimator. For
/// counting it propagates the real part of the `(1+i)^n` weights.
pub fn estimate_wigner_finite_shots(
    rho: &DensityOperator,
    beta: C64,
    method: &ReadoutMethod,
    cfg: &ShotConfig,
) -> Result<EstimateWithError> {
    let (value, std_error) = match *method {
        ReadoutMethod::Direct => {
            let pops = displaced_populations(rho, -beta)?;
            let counts = sample_photon_numbers(&normalize(&pops), cfg)?;
            let (m, e) = mean_and_error(&counts, |n| if n % 2 == 0 { 1.0 } else { -1.0 });
            (2.0 / PI * m, 2.0 / PI * e)
        }
        ReadoutMethod::Counting { timing } => {
            let t = resolve_counting(timing)?;
            let probs = counting_photon_distribution(rho, beta, t.lambda, t.tau)?;
            let counts = sample_photon_numbers(&normalize(&probs), cfg)?;
            let (m, e) = mean_and_error(&counts, counting_weight);
            (2.0 / PI * m, 2.0 / PI * e)
        }
        ReadoutMethod::Parity { timing, rho0, rho1 } => {
            let t = resolve_parity(timing)?;
            let (p0, p1) = parity_outcome_probabilities(rho, beta, t.lambda, t.tau, rho0, rho1)?;
            let counts = sample_photon_numbers(&normalize(&[p0, p1]), cfg)?;
            let (m, e) = mean_and_error(&counts, |n| if n == 1 { 1.0 } else { -1.0 });
            let scale = 2.0 / (PI * (rho1 - rho0));
            (scale * m, scale.abs() * e)
        }
    };
    Ok(EstimateWithError {
        value,
        std_error,
        shots: cfg.shots,
    })
}

fn normalize(p: &[f64]) -> Vec<f64> {
    let t: f64 = p.iter().sum();
    p.iter().map(|v| v / t).collect()
}
