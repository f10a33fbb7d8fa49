use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{evolve_to_tau, policy_space, AtomInitial, SystemParams};
use crate::error::{Error, Result};
use crate::fock::state::coherent_amplitudes;
use crate::fock::{reduce_mode, DensityOperator, ModeSpace, StateVector, ATOM, CAVITY, DEFAULT_LEAKAGE_BUDGET};

/// Cat preparation at `Lambda^2 = 1 / (4 m)`, read out after `tau = 2 pi m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CatSpec {
    pub alpha: C64,
    pub m_revival: u32,
    pub lambda: f64,
}

impl CatSpec {
    pub fn new(alpha: C64, m_revival: u32) -> Result<Self> {
        if m_revival == 0 {
            return Err(Error::Invalid("m_revival must be a positive integer".into()));
        }
        let lambda = 0.5 / (m_revival as f64).sqrt();
        Ok(Self {
            alpha,
            m_revival,
            lambda,
        })
    }

    /// Accepts an explicit `Lambda` if it meets the cat condition.
    pub fn with_lambda(alpha: C64, m_revival: u32, lambda: f64) -> Result<Self> {
        let s = Self {
            alpha,
            m_revival,
            lambda,
        };
        let r = s.condition_residual();
        if m_revival == 0 || r > 1e-12 {
            return Err(Error::ProtocolConstraint(format!(
                "cat condition 4 m Lambda^2 = 1 violated by {r:.3e}"
            )));
        }
        Ok(s)
    }

    pub fn condition_residual(&self) -> f64 {
        (4.0 * self.m_revival as f64 * self.lambda * self.lambda - 1.0).abs()
    }

    pub fn revival_tau(&self) -> f64 {
        2.0 * PI * self.m_revival as f64
    }
}

/// `((1+i)/2)|alpha> + ((1-i)/2)|-alpha>` on a single mode: the branch phases
/// combine to `1` on even and `i` on odd number states.
pub fn cat_target(spec: &CatSpec, space: &ModeSpace) -> Result<StateVector> {
    space.require_single("cat_target")?;
    let dim = space.total_dim();
    let (mut amps, leak) = coherent_amplitudes(spec.alpha, dim);
    if leak > DEFAULT_LEAKAGE_BUDGET {
        return Err(Error::Truncation(format!(
            "cat with |alpha| = {} loses {leak:.3e} beyond dimension {dim}",
            spec.alpha.norm()
        )));
    }
    for n in (1..dim).step_by(2) {
        amps[n] *= C64::new(0.0, 1.0);
    }
    Ok(StateVector::from_amplitudes(space.clone(), amps)?
        .normalized()?
        .with_leakage(leak))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CatGeneration {
    pub atom: DensityOperator,
    /// `<cat| rho_atom |cat>`.
    pub fidelity: f64,
    /// `<0| rho_cavity |0>`.
    pub cavity_vacuum_fidelity: f64,
    pub dims: Vec<usize>,
    pub leakage: f64,
}

/// Propagates `|alpha> ⊗ |0>` numerically to the revival time and compares the
/// condensate with [`cat_target`].
pub fn cat_generation(spec: &CatSpec, omega_m: f64) -> Result<CatGeneration> {
    let init = AtomInitial::Coherent(spec.alpha);
    let tau = spec.revival_tau();
    let params = SystemParams::from_lambda(0.0, omega_m, spec.lambda)?;
    let space = policy_space(&init, spec.lambda, tau)?;
    let evolved = evolve_to_tau(&init, &params, tau, &space, false)?;
    let atom = reduce_mode(&evolved.state, ATOM)?;
    let cavity = reduce_mode(&evolved.state, CAVITY)?;
    let target = cat_target(spec, &space.sub_space(ATOM)?)?;
    Ok(CatGeneration {
        fidelity: atom.fidelity_with_pure(&target)?,
        cavity_vacuum_fidelity: cavity.matrix()[(0, 0)].re,
        atom,
        dims: space.dims().to_vec(),
        leakage: evolved.leakage,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::analytic_state;
    use crate::fock::{number_state, policy_dim};
    use crate::special::poisson_pmf;

    #[test]
    fn zero_amplitude_cat_is_vacuum() {
        let s = ModeSpace::single(ATOM, 10).unwrap();
        let spec = CatSpec::new(C64::new(0.0, 0.0), 1).unwrap();
        let c = cat_target(&spec, &s).unwrap();
        assert!((c.amplitudes() - number_state(&s, ATOM, 0).unwrap().amplitudes()).norm() < 1e-15);
    }

    #[test]
    fn cat_statistics_are_poissonian() {
        let alpha = C64::new(1.3, -0.4);
        let s = ModeSpace::single(ATOM, policy_dim(alpha.norm())).unwrap();
        let c = cat_target(&CatSpec::new(alpha, 2).unwrap(), &s).unwrap();
        for (n, p) in c.probabilities().iter().enumerate() {
            assert!((p - poisson_pmf(n, alpha.norm_sqr())).abs() < 1e-14);
        }
    }

    #[test]
    fn closed_form_revival_is_the_cat() {
        let alpha = C64::new(2.0, 0.0);
        let spec = CatSpec::new(alpha, 1).unwrap();
        let init = AtomInitial::Coherent(alpha);
        let p = SystemParams::from_lambda(0.0, 1.0, spec.lambda).unwrap();
        let space = policy_space(&init, spec.lambda, spec.revival_tau()).unwrap();
        let st = analytic_state(&init, &p, spec.revival_tau(), &space).unwrap();
        let atom = reduce_mode(&st.state, ATOM).unwrap();
        let target = cat_target(&spec, &space.sub_space(ATOM).unwrap()).unwrap();
        assert!((atom.fidelity_with_pure(&target).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn higher_revivals_share_the_phase_pattern() {
        let alpha = C64::new(1.0, 0.5);
        for m in [2u32, 3] {
            let spec = CatSpec::new(alpha, m).unwrap();
            assert!(spec.condition_residual() <= 1e-12);
            let init = AtomInitial::Coherent(alpha);
            let p = SystemParams::from_lambda(0.0, 1.0, spec.lambda).unwrap();
            let space = policy_space(&init, spec.lambda, spec.revival_tau()).unwrap();
            let st = analytic_state(&init, &p, spec.revival_tau(), &space).unwrap();
            let atom = reduce_mode(&st.state, ATOM).unwrap();
            let target = cat_target(&spec, &space.sub_space(ATOM).unwrap()).unwrap();
            assert!((atom.fidelity_with_pure(&target).unwrap() - 1.0).abs() < 1e-10, "m={m}");
        }
        assert!(CatSpec::with_lambda(alpha, 1, 0.51).is_err());
    }
}
