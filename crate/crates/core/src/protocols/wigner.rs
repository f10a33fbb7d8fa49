use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::precise::counting_estimator;
use super::statistics::displaced_populations;
use crate::dynamics::eta;
use crate::error::{Error, Result};
use crate::fock::expm::expm;
use crate::fock::DensityOperator;
use crate::special::{displacement_element, poisson_pmf};

/// Largest tolerated violation of a readout timing constraint.
pub const CONSTRAINT_TOL: f64 = 1e-9;
/// Largest tolerated imaginary part of the counting estimator.
const IMAG_TOL: f64 = 1e-8;
/// Tail mass left out of the double-precision counting record.
const RECORD_TAIL: f64 = 1e-16;

/// How a readout picks `(Lambda, tau)`: fix one and solve for the other, or
/// give both and have the constraint checked.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Timing {
    Lambda(f64),
    Tau(f64),
    Both { lambda: f64, tau: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolvedTiming {
    pub lambda: f64,
    pub tau: f64,
    pub residual: f64,
}

fn eta_modulus(tau: f64) -> f64 {
    2.0 * (0.5 * tau).sin().abs()
}

fn check_finite(t: &Timing) -> Result<()> {
    let ok = match *t {
        Timing::Lambda(l) => l.is_finite(),
        Timing::Tau(t) => t.is_finite(),
        Timing::Both { lambda, tau } => lambda.is_finite() && tau.is_finite(),
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Invalid("readout timing must be finite".into()))
    }
}

fn resolve(
    t: Timing,
    name: &str,
    residual: impl Fn(f64, f64) -> f64,
    tau_for: impl Fn(f64) -> Option<f64>,
    lambda_for: impl Fn(f64) -> f64,
) -> Result<ResolvedTiming> {
    check_finite(&t)?;
    let (lambda, tau) = match t {
        Timing::Lambda(l) => {
            let tau = tau_for(l.abs()).ok_or_else(|| {
                Error::ProtocolConstraint(format!("{name}: no tau satisfies the constraint at Lambda = {l}"))
            })?;
            (l, tau)
        }
        Timing::Tau(tau) => {
            if eta_modulus(tau) < 1e-12 {
                return Err(Error::ProtocolConstraint(format!(
                    "{name}: eta vanishes at tau = {tau}, no Lambda satisfies the constraint"
                )));
            }
            (lambda_for(tau), tau)
        }
        Timing::Both { lambda, tau } => (lambda, tau),
    };
    let r = residual(lambda, tau);
    if r.abs() > CONSTRAINT_TOL {
        return Err(Error::ProtocolConstraint(format!(
            "{name}: constraint residual {r:.3e} at Lambda = {lambda}, tau = {tau}"
        )));
    }
    Ok(ResolvedTiming {
        lambda,
        tau,
        residual: r,
    })
}

/// Counting readout: `|Lambda eta|^2 = pi`, i.e. `cos tau = 1 - pi / (2 Lambda^2)`.
pub fn resolve_counting(t: Timing) -> Result<ResolvedTiming> {
    resolve(
        t,
        "photon counting",
        |l, tau| l * l * eta_modulus(tau).powi(2) - PI,
        |l| {
            let c = 1.0 - PI / (2.0 * l * l);
            (c >= -1.0 - 1e-12).then(|| c.max(-1.0).acos())
        },
        |tau| PI.sqrt() / eta_modulus(tau),
    )
}

/// Parity readout: `2 |Lambda eta| = pi`, i.e. `cos tau = 1 - pi^2 / (8 Lambda^2)`.
pub fn resolve_parity(t: Timing) -> Result<ResolvedTiming> {
    resolve(
        t,
        "parity",
        |l, tau| 2.0 * l.abs() * eta_modulus(tau) - PI,
        |l| {
            let s = PI / (4.0 * l);
            (s <= 1.0 + 1e-12).then(|| 2.0 * s.min(1.0).asin())
        },
        |tau| PI / (2.0 * eta_modulus(tau)),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WignerMethod {
    Direct,
    Counting,
    Parity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "method")]
pub enum ReadoutMethod {
    Direct,
    Counting { timing: Timing },
    Parity { timing: Timing, rho0: f64, rho1: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WignerPoint {
    pub beta: C64,
    pub value: f64,
    pub method: WignerMethod,
    pub constraint_residual: f64,
    pub imag_residual: f64,
}

/// `W(beta) = (2/pi) sum_n (-1)^n <n| D(-beta) rho D(beta) |n>`.
pub fn wigner_direct(rho: &DensityOperator, beta: C64) -> Result<WignerPoint> {
    let pops = displaced_populations(rho, -beta)?;
    let parity: f64 = pops
        .iter()
        .enumerate()
        .map(|(n, p)| if n % 2 == 0 { *p } else { -*p })
        .sum();
    Ok(WignerPoint {
        beta,
        value: 2.0 / PI * parity,
        method: WignerMethod::Direct,
        constraint_residual: 0.0,
        imag_residual: 0.0,
    })
}

/// Double-precision cavity photon-number distribution after displacing the
/// condensate by `-beta` and coupling for `tau` from vacuum.
pub fn counting_photon_distribution(rho: &DensityOperator, beta: C64, lambda: f64, tau: f64) -> Result<Vec<f64>> {
    let pops = displaced_populations(rho, -beta)?;
    let scale = (lambda * eta(tau)).norm_sqr();
    let x_max = pops
        .iter()
        .enumerate()
        .filter(|(_, p)| **p > 0.0)
        .map(|(m, _)| scale * (m * m) as f64)
        .fold(0.0, f64::max);
    let mut out = Vec::new();
    let mut acc = 0.0;
    let mut n = 0usize;
    loop {
        let p: f64 = pops
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .map(|(m, w)| w * poisson_pmf(n, scale * (m * m) as f64))
            .sum();
        acc += p;
        out.push(p);
        if n as f64 > x_max && 1.0 - acc < RECORD_TAIL {
            break;
        }
        n += 1;
        if n as f64 > 4.0 * x_max + 2000.0 {
            break;
        }
    }
    Ok(out)
}

/// Photon-counting readout: the cavity record `P_c(n)` summed against
/// `(1+i)^n` in arbitrary precision.
pub fn wigner_reconstruct_counting(rho: &DensityOperator, beta: C64, timing: Timing) -> Result<WignerPoint> {
    let t = resolve_counting(timing)?;
    let pops = displaced_populations(rho, -beta)?;
    let scale = (t.lambda * eta(t.tau)).norm_sqr();
    let s = counting_estimator(&pops, scale)?;
    let imag = 2.0 / PI * s.imag;
    if imag.abs() > IMAG_TOL {
        return Err(Error::Propagation(format!(
            "counting estimator has imaginary residual {imag:.3e} at beta = {beta}"
        )));
    }
    Ok(WignerPoint {
        beta,
        value: 2.0 / PI * s.real,
        method: WignerMethod::Counting,
        constraint_residual: t.residual,
        imag_residual: imag,
    })
}

fn check_cavity_mixture(rho0: f64, rho1: f64) -> Result<()> {
    if !(rho0 >= 0.0 && rho1 >= 0.0 && (rho0 + rho1 - 1.0).abs() < 1e-12) {
        return Err(Error::Invalid(format!(
            "cavity populations must be nonnegative and sum to 1, got rho0 = {rho0}, rho1 = {rho1}"
        )));
    }
    if (rho1 - rho0).abs() < 1e-12 {
        return Err(Error::DegenerateContrast);
    }
    Ok(())
}

/// Outcome probabilities `(P_c(0), P_c(1))` of a photon-blockaded cavity
/// prepared in `rho0 |0><0| + rho1 |1><1|`. Each condensate sector `m` drives
/// the two-level cavity with `exp(Lambda m (eta s+ - eta* s-))`.
pub fn parity_outcome_probabilities(
    rho: &DensityOperator,
    beta: C64,
    lambda: f64,
    tau: f64,
    rho0: f64,
    rho1: f64,
) -> Result<(f64, f64)> {
    check_cavity_mixture(rho0, rho1)?;
    let pops = displaced_populations(rho, -beta)?;
    let e = eta(tau);
    let cav = DMatrix::from_row_slice(
        2,
        2,
        &[
            C64::new(rho0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(rho1, 0.0),
        ],
    );
    let (mut p0, mut p1) = (0.0, 0.0);
    for (m, &w) in pops.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let g = e * (lambda * m as f64);
        let gen = DMatrix::from_row_slice(2, 2, &[C64::new(0.0, 0.0), -g.conj(), g, C64::new(0.0, 0.0)]);
        let u = expm(&gen)?;
        let out = &u * &cav * u.adjoint();
        p0 += w * out[(0, 0)].re;
        p1 += w * out[(1, 1)].re;
    }
    Ok((p0, p1))
}

/// `Delta P_c = P_c(1) - P_c(0)` from the blockaded-cavity simulation.
pub fn parity_delta_p(rho: &DensityOperator, beta: C64, lambda: f64, tau: f64, rho0: f64, rho1: f64) -> Result<f64> {
    let (p0, p1) = parity_outcome_probabilities(rho, beta, lambda, tau, rho0, rho1)?;
    Ok(p1 - p0)
}

/// Closed-form `(rho1 - rho0) sum_n P(n) cos(2 |Lambda eta| n)`.
pub fn parity_cosine_law(rho: &DensityOperator, beta: C64, lambda: f64, tau: f64, rho0: f64, rho1: f64) -> Result<f64> {
    check_cavity_mixture(rho0, rho1)?;
    let pops = displaced_populations(rho, -beta)?;
    let k = 2.0 * (lambda * eta(tau)).norm();
    Ok((rho1 - rho0)
        * pops
            .iter()
            .enumerate()
            .map(|(n, p)| p * (k * n as f64).cos())
            .sum::<f64>())
}

/// `Delta P_c` for an unblockaded bosonic cavity, where each sector displaces
/// the cavity by `Lambda m eta`. Diagnostic only: it departs from the cosine
/// law because `|1>` leaks out of the `{|0>, |1>}` subspace.
pub fn parity_bosonic_delta_p(
    rho: &DensityOperator,
    beta: C64,
    lambda: f64,
    tau: f64,
    rho0: f64,
    rho1: f64,
) -> Result<f64> {
    check_cavity_mixture(rho0, rho1)?;
    let pops = displaced_populations(rho, -beta)?;
    let e = eta(tau);
    Ok(pops
        .iter()
        .enumerate()
        .filter(|(_, w)| **w > 0.0)
        .map(|(m, w)| {
            let g = e * (lambda * m as f64);
            let d = |k: usize, j: usize| displacement_element(k, j, g).norm_sqr();
            w * (rho0 * (d(1, 0) - d(0, 0)) + rho1 * (d(1, 1) - d(0, 1)))
        })
        .sum())
}

/// Parity readout: `W = 2 Delta P_c / (pi (rho1 - rho0))`.
pub fn wigner_reconstruct_parity(
    rho: &DensityOperator,
    beta: C64,
    timing: Timing,
    rho0: f64,
    rho1: f64,
) -> Result<WignerPoint> {
    let t = resolve_parity(timing)?;
    let dp = parity_delta_p(rho, beta, t.lambda, t.tau, rho0, rho1)?;
    Ok(WignerPoint {
        beta,
        value: 2.0 * dp / (PI * (rho1 - rho0)),
        method: WignerMethod::Parity,
        constraint_residual: t.residual,
        imag_residual: 0.0,
    })
}

/// Evaluates one readout on every grid point in parallel; output order follows `betas`.
pub fn wigner_grid(rho: &DensityOperator, betas: &[C64], method: &ReadoutMethod) -> Result<Vec<WignerPoint>> {
    betas
        .par_iter()
        .map(|&b| match *method {
            ReadoutMethod::Direct => wigner_direct(rho, b),
            ReadoutMethod::Counting { timing } => wigner_reconstruct_counting(rho, b, timing),
            ReadoutMethod::Parity { timing, rho0, rho1 } => wigner_reconstruct_parity(rho, b, timing, rho0, rho1),
        })
        .collect()
}
