//! State preparation and readout protocols built on the joint dynamics.
//!
//! Displacement conventions: Wigner readouts apply `D(-beta) rho D(beta)` to
//! the condensate before the cavity interaction, so that every readout
//! estimates `W(beta) = (2/pi) sum_n (-1)^n <n|D(-beta) rho D(beta)|n>`. The
//! displaced number statistics use `D(beta) rho D(-beta)`.

mod cat;
mod conditional;
mod precise;
mod statistics;
mod wigner;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use cat::{cat_generation, cat_target, CatGeneration, CatSpec};
pub use conditional::{conditional_quadrature_collapse, gaussian_sector_weights, sector_populations};
pub use precise::counting_estimator;
pub use statistics::{displaced_number_statistics, displaced_populations, quadrature_distribution, QuadratureMarginal};
pub use wigner::{
    counting_photon_distribution, parity_bosonic_delta_p, parity_cosine_law, parity_delta_p,
    parity_outcome_probabilities, resolve_counting, resolve_parity, wigner_direct, wigner_grid,
    wigner_reconstruct_counting, wigner_reconstruct_parity, ReadoutMethod, ResolvedTiming, Timing, WignerMethod,
    WignerPoint, CONSTRAINT_TOL,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementKind {
    PhotonNumber,
    Quadrature,
}

/// Exact outcome distribution of a readout: `(value, probability)` for photon
/// numbers, `(X, density)` on a grid for quadratures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub kind: MeasurementKind,
    pub outcomes: Vec<(f64, f64)>,
    pub context: BTreeMap<String, f64>,
}

impl MeasurementRecord {
    pub fn photon_numbers(probs: &[f64], context: BTreeMap<String, f64>) -> Self {
        Self {
            kind: MeasurementKind::PhotonNumber,
            outcomes: probs.iter().enumerate().map(|(n, p)| (n as f64, *p)).collect(),
            context,
        }
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.outcomes.iter().map(|o| o.1).collect()
    }
}
