use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use super::{MeasurementKind, MeasurementRecord};
use crate::dynamics::eta;
use crate::error::{Error, Result};
use crate::fock::quadrature::coherent_quadrature_density;
use crate::fock::{displacement_operator, policy_dim, DensityOperator, ModeSpace};

/// Populations below this do not widen the working basis.
const SUPPORT_FLOOR: f64 = 1e-30;
/// Rounding slack for negative populations.
const NEGATIVE_TOL: f64 = 1e-14;
const TRACE_TOL: f64 = 1e-8;

/// Number populations of `D(b) rho D(b)^dag`, computed on a basis wide enough
/// for the displaced state.
pub fn displaced_populations(rho: &DensityOperator, b: C64) -> Result<Vec<f64>> {
    rho.space().require_single("displaced populations")?;
    if !(b.re.is_finite() && b.im.is_finite()) {
        return Err(Error::Invalid(format!("displacement must be finite, got {b}")));
    }
    let d0 = rho.space().total_dim();
    let s = rho.support_max(SUPPORT_FLOOR) + 1;
    let reach = (s as f64).sqrt() + b.norm();
    let d = d0.max(policy_dim(reach)).max((4.0 * b.norm_sqr()).floor() as usize + 1);
    let label = rho.space().labels()[0].clone();
    let dm = displacement_operator(&ModeSpace::single(label, d)?, &rho.space().labels()[0], b)?.to_dense();
    let r = rho.matrix().view((0, 0), (s, s));
    let cols = dm.view((0, 0), (d, s));
    let a = cols * r;
    let mut pops = Vec::with_capacity(d);
    for n in 0..d {
        let mut p = C64::new(0.0, 0.0);
        for k in 0..s {
            p += a[(n, k)] * cols[(n, k)].conj();
        }
        let v = p.re;
        if v < -NEGATIVE_TOL {
            return Err(Error::Propagation(format!("displaced population {v:e} at n = {n}")));
        }
        pops.push(v.max(0.0));
    }
    let total: f64 = pops.iter().sum();
    let tr = rho.trace().re;
    if (total - tr).abs() > TRACE_TOL {
        return Err(Error::Truncation(format!(
            "displaced populations sum to {total}, trace is {tr} (working dimension {d})"
        )));
    }
    Ok(pops)
}

/// `P_a(n) = <n| D(beta) rho D(-beta) |n>` as a photon-number record.
pub fn displaced_number_statistics(rho: &DensityOperator, beta: C64) -> Result<MeasurementRecord> {
    let pops = displaced_populations(rho, beta)?;
    let ctx = BTreeMap::from([("beta_re".to_string(), beta.re), ("beta_im".to_string(), beta.im)]);
    Ok(MeasurementRecord::photon_numbers(&pops, ctx))
}

fn is_odd_pi_multiple(tau: f64) -> bool {
    let k = tau / PI;
    let r = k.round();
    (k - r).abs() < 1e-12 && (r as i64).rem_euclid(2) == 1
}

/// Cavity quadrature marginal `sum_n P_a(n) |<X|Lambda n eta>|^2` after
/// displacing the condensate by `beta` and coupling for `tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureMarginal {
    pops: Vec<f64>,
    shift: Vec<C64>,
}

impl QuadratureMarginal {
    /// The closed form assumes `tau` is an odd multiple of pi unless
    /// `allow_general_tau` is set.
    pub fn new(rho: &DensityOperator, beta: C64, lambda: f64, tau: f64, allow_general_tau: bool) -> Result<Self> {
        if !(lambda.is_finite() && tau.is_finite()) {
            return Err(Error::Invalid("quadrature marginal needs finite Lambda and tau".into()));
        }
        if !allow_general_tau && !is_odd_pi_multiple(tau) {
            return Err(Error::ProtocolConstraint(format!(
                "tau = {tau} is not an odd multiple of pi (set allow_general_tau)"
            )));
        }
        let all = displaced_populations(rho, beta)?;
        let e = eta(tau);
        let (pops, shift) = all
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .map(|(n, p)| (*p, e * (lambda * n as f64)))
            .unzip();
        Ok(Self { pops, shift })
    }

    pub fn density(&self, x: f64) -> f64 {
        self.pops
            .iter()
            .zip(&self.shift)
            .map(|(p, g)| p * coherent_quadrature_density(*g, x))
            .sum()
    }
}

/// [`QuadratureMarginal`] tabulated on `x_grid`.
pub fn quadrature_distribution(
    rho: &DensityOperator,
    beta: C64,
    lambda: f64,
    tau: f64,
    x_grid: &[f64],
    allow_general_tau: bool,
) -> Result<MeasurementRecord> {
    if x_grid.is_empty() {
        return Err(Error::Invalid("quadrature grid is empty".into()));
    }
    if x_grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::Invalid("quadrature grid must be finite".into()));
    }
    let m = QuadratureMarginal::new(rho, beta, lambda, tau, allow_general_tau)?;
    let outcomes = x_grid.iter().map(|&x| (x, m.density(x))).collect();
    let ctx = BTreeMap::from([
        ("beta_re".to_string(), beta.re),
        ("beta_im".to_string(), beta.im),
        ("lambda".to_string(), lambda),
        ("tau".to_string(), tau),
    ]);
    Ok(MeasurementRecord {
        kind: MeasurementKind::Quadrature,
        outcomes,
        context: ctx,
    })
}
