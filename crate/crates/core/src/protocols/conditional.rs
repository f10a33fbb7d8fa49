use nalgebra::DVector;
use num_complex::Complex64 as C64;

use crate::dynamics::eta;
use crate::error::{Error, Result};
use crate::fock::quadrature::quadrature_wavefunctions;
use crate::fock::{ModeSpace, StateVector, ATOM, CAVITY};

/// Outcome densities below this leave the conditional state undefined.
const DENSITY_FLOOR: f64 = 1e-300;

/// Projects the cavity of a joint atom-cavity state onto the quadrature
/// eigenstate `|X>`. Returns the normalized condensate state and the outcome
/// density `p(X)`.
pub fn conditional_quadrature_collapse(joint: &StateVector, x: f64) -> Result<(StateVector, f64)> {
    let space = joint.space();
    if space.n_modes() != 2 || space.labels()[0] != ATOM || space.labels()[1] != CAVITY {
        return Err(Error::Dimension(format!(
            "conditional collapse needs the joint space [{ATOM}, {CAVITY}], got {:?}",
            space.labels()
        )));
    }
    if !x.is_finite() {
        return Err(Error::Invalid(format!("quadrature outcome must be finite, got {x}")));
    }
    let (da, dc) = (space.dims()[0], space.dims()[1]);
    let psi = quadrature_wavefunctions(dc - 1, x);
    let amps = joint.amplitudes();
    let f = DVector::from_iterator(
        da,
        (0..da).map(|n| {
            let row = &amps.as_slice()[n * dc..(n + 1) * dc];
            row.iter().zip(&psi).map(|(a, p)| a * *p).sum::<C64>()
        }),
    );
    let density = f.norm_squared();
    if density.is_nan() || density <= DENSITY_FLOOR {
        return Err(Error::UndefinedConditional(density, x));
    }
    let atom = StateVector::from_amplitudes(ModeSpace::single(ATOM, da)?, f.unscale(density.sqrt()))?;
    Ok((atom, density))
}

/// Populations of a collapsed condensate state.
pub fn sector_populations(atom: &StateVector) -> Vec<f64> {
    atom.probabilities()
}

/// Normalized sector weights `prior_n |<X|Lambda n eta>|^2`, with the prior
/// uniform when `None`.
///
/// At `tau` an odd multiple of pi this is `exp(-8 Lambda^2 (n - X / 2 Lambda)^2)`.
/// The coherent-state overlap makes the same form exact at any `tau`, with
/// `Re(Lambda n eta) = Lambda n (1 - cos tau)`.
pub fn gaussian_sector_weights(x: f64, lambda: f64, tau: f64, n_max: usize, prior: Option<&[f64]>) -> Result<Vec<f64>> {
    if !(x.is_finite() && lambda.is_finite() && tau.is_finite()) {
        return Err(Error::Invalid("sector weights need finite X, Lambda and tau".into()));
    }
    if let Some(p) = prior {
        if p.len() < n_max + 1 {
            return Err(Error::Dimension(format!(
                "prior has {} entries, need {}",
                p.len(),
                n_max + 1
            )));
        }
        if p.iter().any(|v| v.is_nan() || *v < 0.0) {
            return Err(Error::Invalid("prior weights must be nonnegative".into()));
        }
    }
    let shift = lambda * eta(tau).re;
    let logw: Vec<f64> = (0..=n_max)
        .map(|n| {
            let prior_n = prior.map_or(1.0, |p| p[n]);
            if prior_n == 0.0 {
                f64::NEG_INFINITY
            } else {
                prior_n.ln() - 2.0 * (x - shift * n as f64).powi(2)
            }
        })
        .collect();
    let top = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return Err(Error::Invalid("prior weights are all zero".into()));
    }
    let mut w: Vec<f64> = logw.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{analytic_state, policy_space, AtomInitial, SystemParams};
    use crate::special::poisson_pmf;
    use std::f64::consts::PI;

    fn joint(alpha: f64, lambda: f64, tau: f64) -> StateVector {
        let init = AtomInitial::Coherent(C64::new(alpha, 0.0));
        let p = SystemParams::from_lambda(0.0, 1.0, lambda).unwrap();
        let space = policy_space(&init, lambda, tau).unwrap();
        analytic_state(&init, &p, tau, &space).unwrap().state
    }

    #[test]
    fn collapse_matches_gaussian_weights() {
        let (alpha, lambda) = (1.5, 0.7);
        let st = joint(alpha, lambda, PI);
        for x in [-0.3, 0.8, 2.1, 4.4] {
            let (atom, density) = conditional_quadrature_collapse(&st, x).unwrap();
            assert!(density > 0.0);
            let pops = sector_populations(&atom);
            let prior: Vec<f64> = (0..pops.len()).map(|n| poisson_pmf(n, alpha * alpha)).collect();
            let w = gaussian_sector_weights(x, lambda, PI, pops.len() - 1, Some(&prior)).unwrap();
            let dev = pops.iter().zip(&w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(dev < 1e-10, "x={x} dev={dev:e}");
        }
    }

    #[test]
    fn collapse_at_general_tau() {
        let tau = 2.2;
        let st = joint(1.2, 0.9, tau);
        let (atom, _) = conditional_quadrature_collapse(&st, 1.1).unwrap();
        let pops = sector_populations(&atom);
        let prior: Vec<f64> = (0..pops.len()).map(|n| poisson_pmf(n, 1.44)).collect();
        let w = gaussian_sector_weights(1.1, 0.9, tau, pops.len() - 1, Some(&prior)).unwrap();
        let dev = pops.iter().zip(&w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(dev < 1e-10);
    }

    #[test]
    fn density_integrates_to_one() {
        let st = joint(1.0, 0.8, PI);
        let h = 0.01;
        let total: f64 = (-600..4000)
            .map(|i| {
                conditional_quadrature_collapse(&st, i as f64 * h)
                    .map(|r| r.1)
                    .unwrap_or(0.0)
            })
            .sum::<f64>()
            * h;
        assert!((total - 1.0).abs() < 1e-9, "{total}");
    }

    #[test]
    fn far_outcome_is_undefined() {
        let st = joint(1.0, 0.5, PI);
        match conditional_quadrature_collapse(&st, 200.0) {
            Err(Error::UndefinedConditional(d, x)) => {
                assert_eq!(x, 200.0);
                assert!(d <= DENSITY_FLOOR);
            }
            other => panic!("expected undefined conditional, got {other:?}"),
        }
    }

    #[test]
    fn uniform_weights_peak_at_nearest_sector() {
        let w = gaussian_sector_weights(6.0, 1.5, PI, 6, None).unwrap();
        let best = w
            .iter()
            .enumerate()
            .fold((0, 0.0), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
        assert_eq!(best.0, 2);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(gaussian_sector_weights(0.0, 1.0, PI, 3, Some(&[0.0; 4])).is_err());
    }
}
