//! Scenario configuration (TOML, schema version 1).
//!
//! Frequencies are given in Hz under `*_hz` keys and multiplied by 2 pi on
//! load. Unknown keys are rejected at parse time; missing or conflicting keys
//! are collected by [`validate`] and reported together.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use optomech::dynamics::{AtomInitial, SystemParams};
use optomech::protocols::{CatSpec, ReadoutMethod, Timing, WignerMethod};
use optomech::sampling::ShotConfig;
use optomech::trap::{effective_coupling, CouplingResult, OpticalParams, TrapGeometry};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    CouplingMap,
    Evolve,
    Cat,
    Conditional,
    NumberStats,
    Wigner,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::CouplingMap => "coupling-map",
            Scenario::Evolve => "evolve",
            Scenario::Cat => "cat",
            Scenario::Conditional => "conditional",
            Scenario::NumberStats => "number-stats",
            Scenario::Wigner => "wigner",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema_version: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    #[serde(default)]
    pub physical: Physical,
    #[serde(default)]
    pub protocol: Protocol,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub sampling: Sampling,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Physical {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rabi_pump_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vacuum_rabi_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detuning_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_m_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega0_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trap_hz: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass_kg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wavelength_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_rad: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_k_per_m: Option<[f64; 3]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateKind {
    Cat,
    Coherent,
    Fock,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid1 {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl Grid1 {
    pub fn points(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.min];
        }
        let h = (self.max - self.min) / (self.n - 1) as f64;
        (0..self.n).map(|i| self.min + i as f64 * h).collect()
    }

    fn check(&self, key: &str, errs: &mut Vec<String>) {
        if self.n == 0 || !(self.min.is_finite() && self.max.is_finite()) || self.max < self.min {
            errs.push(format!("{key}: need finite min <= max and n >= 1"));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid2 {
    pub re: Grid1,
    pub im: Grid1,
}

impl Grid2 {
    /// Row-major: the imaginary part varies fastest.
    pub fn points(&self) -> Vec<C64> {
        let im = self.im.points();
        self.re
            .points()
            .into_iter()
            .flat_map(|r| im.iter().map(move |i| C64::new(r, *i)))
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Protocol {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<StateKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fock_n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_revival: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taus: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_grid: Option<Grid2>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_grid: Option<Grid1>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allow_general_tau: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<WignerMethod>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recoil_axis: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recoil_dk_l: Option<Grid1>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recoil_m_max: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Evolution {
    Analytic,
    Numeric,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Numerics {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evolution: Option<Evolution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atom_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cavity_dim: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sampling {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binning: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrature_range: Option<[f64; 2]>,
}

/// Parses TOML text; unknown keys and type errors fail here.
pub fn parse(text: &str) -> Result<RawConfig, Vec<String>> {
    toml::from_str(text).map_err(|e| vec![e.to_string().trim().to_string()])
}

/// Condensate state for the readout scenarios.
#[derive(Debug, Clone, PartialEq)]
pub enum StateSpec {
    Cat(CatSpec),
    Coherent(C64),
    Fock(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingPlan {
    pub optics: OpticalParams,
    pub trap: TrapGeometry,
    pub omega_m: f64,
    pub delta_k: [f64; 3],
    pub result: CouplingResult,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Plan {
    CouplingMap {
        coupling: CouplingPlan,
        sweep: Option<(usize, Vec<f64>, usize)>,
    },
    Evolve {
        initial: AtomInitial,
        params: SystemParams,
        taus: Vec<f64>,
        dims: Option<(usize, usize)>,
        evolution: Evolution,
    },
    Cat {
        spec: CatSpec,
        omega_m: f64,
    },
    Conditional {
        initial: AtomInitial,
        params: SystemParams,
        tau: f64,
        xs: Vec<f64>,
        dims: Option<(usize, usize)>,
        evolution: Evolution,
    },
    NumberStats {
        state: StateSpec,
        beta: C64,
        quadrature: Option<(f64, f64, Vec<f64>, bool)>,
        shots: Option<ShotConfig>,
        quadrature_range: Option<(f64, f64)>,
    },
    Wigner {
        state: StateSpec,
        betas: Vec<C64>,
        method: ReadoutMethod,
        shots: Option<ShotConfig>,
    },
}

/// Plan plus the derived quantities echoed into the manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct Validated {
    pub plan: Plan,
    pub coupling: Option<CouplingResult>,
    pub lambda: Option<f64>,
}

struct Ctx<'a> {
    raw: &'a RawConfig,
    errs: Vec<String>,
}

fn hz(v: f64) -> f64 {
    2.0 * PI * v
}

impl Ctx<'_> {
    fn need<T: Copy>(&mut self, v: Option<T>, key: &str) -> Option<T> {
        if v.is_none() {
            self.errs.push(format!("{key}: required for this scenario"));
        }
        v
    }

    fn finite(&mut self, v: Option<f64>, key: &str) -> Option<f64> {
        match v {
            Some(x) if !x.is_finite() => {
                self.errs.push(format!("{key}: must be finite, got {x}"));
                None
            }
            other => other,
        }
    }

    fn complex(&mut self, v: Option<[f64; 2]>, key: &str) -> Option<C64> {
        match v {
            Some([re, im]) if re.is_finite() && im.is_finite() => Some(C64::new(re, im)),
            Some(_) => {
                self.errs.push(format!("{key}: must be a finite [re, im] pair"));
                None
            }
            None => None,
        }
    }

    /// `w_m` in rad/s; `None` when absent. Zero is a resonance error.
    fn omega_m(&mut self) -> Option<f64> {
        let w = self.finite(self.raw.physical.omega_m_hz, "physical.omega_m_hz")?;
        if w == 0.0 {
            self.errs
                .push("physical.omega_m_hz: resonance: Lambda undefined (omega_m = 0)".into());
            return None;
        }
        Some(hz(w))
    }

    fn optics_given(&self) -> bool {
        let p = &self.raw.physical;
        p.rabi_pump_hz.is_some() || p.vacuum_rabi_hz.is_some() || p.detuning_hz.is_some()
    }

    fn coupling(&mut self) -> Option<CouplingPlan> {
        let p = self.raw.physical.clone();
        let rabi = {
            let v = self.finite(p.rabi_pump_hz, "physical.rabi_pump_hz");
            self.need(v, "physical.rabi_pump_hz")
        };
        let g = {
            let v = self.finite(p.vacuum_rabi_hz, "physical.vacuum_rabi_hz");
            self.need(v, "physical.vacuum_rabi_hz")
        };
        let det = {
            let v = self.finite(p.detuning_hz, "physical.detuning_hz");
            self.need(v, "physical.detuning_hz")
        };
        let trap_hz = self.need(p.trap_hz, "physical.trap_hz");
        let mass = {
            let v = self.finite(p.mass_kg, "physical.mass_kg");
            self.need(v, "physical.mass_kg")
        };
        let had_omega = p.omega_m_hz.is_some();
        let omega_m = self.omega_m();
        if !had_omega {
            self.errs.push("physical.omega_m_hz: required for this scenario".into());
        }
        let dk = match (p.theta_rad, p.delta_k_per_m) {
            (Some(_), Some(_)) => {
                self.errs
                    .push("physical.theta_rad and physical.delta_k_per_m: conflict, give only one".into());
                None
            }
            (Some(theta), None) => {
                let wl = self.need(p.wavelength_m, "physical.wavelength_m");
                wl.map(|wl| (theta, wl))
                    .map(|(theta, wl)| (Some(theta), Some(wl), None))
            }
            (None, Some(dk)) => Some((None, None, Some(dk))),
            (None, None) => {
                self.errs
                    .push("physical.theta_rad or physical.delta_k_per_m: one is required".into());
                None
            }
        };
        let (rabi, g, det, trap_hz, mass, omega_m, dk) = (rabi?, g?, det?, trap_hz?, mass?, omega_m?, dk?);
        let trap = match TrapGeometry::new(trap_hz.map(hz), mass) {
            Ok(t) => t,
            Err(e) => {
                self.errs.push(format!("physical.trap_hz / physical.mass_kg: {e}"));
                return None;
            }
        };
        let optics = match dk {
            (Some(theta), Some(wl), None) => {
                OpticalParams::with_angle(C64::new(hz(rabi), 0.0), C64::new(hz(g), 0.0), hz(det), wl, theta)
            }
            (_, _, Some(dk)) => {
                // wave vectors with the requested difference; only dk enters the coupling
                let k = p.wavelength_m.map_or(1.0, |wl| 2.0 * PI / wl);
                OpticalParams::new(
                    C64::new(hz(rabi), 0.0),
                    C64::new(hz(g), 0.0),
                    hz(det),
                    [k + dk[0], dk[1], dk[2]],
                    [k, 0.0, 0.0],
                )
            }
            _ => unreachable!(),
        };
        let optics = match optics {
            Ok(o) => o,
            Err(e) => {
                self.errs.push(format!("physical: {e}"));
                return None;
            }
        };
        let delta_k = optics.delta_k();
        match effective_coupling(&optics, delta_k, &trap, omega_m) {
            Ok(result) => Some(CouplingPlan {
                optics,
                trap,
                omega_m,
                delta_k,
                result,
            }),
            Err(e) => {
                self.errs.push(format!("physical: {e}"));
                None
            }
        }
    }

    /// `Lambda` from `protocol.lambda` or from the physical coupling, never both.
    fn lambda(&mut self, required: bool) -> (Option<f64>, Option<CouplingResult>) {
        let given = self.finite(self.raw.protocol.lambda, "protocol.lambda");
        if self.optics_given() {
            if given.is_some() {
                self.errs
                    .push("protocol.lambda: conflicts with the physical coupling parameters, give only one".into());
                return (None, None);
            }
            let c = self.coupling();
            return (c.as_ref().map(|c| c.result.lambda), c.map(|c| c.result));
        }
        if required && given.is_none() {
            self.errs
                .push("protocol.lambda: required (or give the physical coupling parameters)".into());
        }
        (given, None)
    }

    fn system(&mut self, lambda: Option<f64>) -> Option<SystemParams> {
        let omega_m = if self.raw.physical.omega_m_hz.is_some() {
            self.omega_m()?
        } else {
            1.0
        };
        let omega0 = self
            .finite(self.raw.physical.omega0_hz, "physical.omega0_hz")
            .map_or(0.0, hz);
        SystemParams::from_lambda(omega0, omega_m, lambda?)
            .map_err(|e| self.errs.push(format!("physical: {e}")))
            .ok()
    }

    fn dims(&mut self) -> Option<(usize, usize)> {
        let n = &self.raw.numerics;
        match (n.atom_dim, n.cavity_dim) {
            (Some(a), Some(c)) if a >= 1 && c >= 1 => Some((a, c)),
            (None, None) => None,
            _ => {
                self.errs
                    .push("numerics.atom_dim and numerics.cavity_dim: give both, each >= 1".into());
                None
            }
        }
    }

    fn state(&mut self) -> Option<StateSpec> {
        let p = self.raw.protocol.clone();
        match self.need(p.state, "protocol.state")? {
            StateKind::Cat => {
                let alpha = {
                    let v = self.complex(p.alpha, "protocol.alpha");
                    self.need(v, "protocol.alpha")
                }?;
                let m = p.m_revival.unwrap_or(1);
                CatSpec::new(alpha, m)
                    .map(StateSpec::Cat)
                    .map_err(|e| self.errs.push(format!("protocol.m_revival: {e}")))
                    .ok()
            }
            StateKind::Coherent => {
                let alpha = {
                    let v = self.complex(p.alpha, "protocol.alpha");
                    self.need(v, "protocol.alpha")
                }?;
                Some(StateSpec::Coherent(alpha))
            }
            StateKind::Fock => self.need(p.fock_n, "protocol.fock_n").map(StateSpec::Fock),
        }
    }

    fn initial(&mut self) -> Option<AtomInitial> {
        {
            let v = self.complex(self.raw.protocol.alpha, "protocol.alpha");
            self.need(v, "protocol.alpha")
        }
        .map(AtomInitial::Coherent)
    }

    fn shots(&mut self) -> Option<ShotConfig> {
        let s = self.raw.sampling.clone();
        let shots = s.shots?;
        let seed = match s.seed {
            Some(v) => v,
            None => {
                self.errs
                    .push("sampling.seed: required when sampling.shots is set".into());
                return None;
            }
        };
        ShotConfig::with_binning(shots, seed, s.binning)
            .map_err(|e| self.errs.push(format!("sampling: {e}")))
            .ok()
    }
}

/// Checks every required key of `scenario` and builds the execution plan.
pub fn validate(raw: &RawConfig, scenario: Scenario) -> Result<Validated, Vec<String>> {
    let mut cx = Ctx { raw, errs: Vec::new() };
    if let Some(v) = raw.schema_version {
        if v != SCHEMA_VERSION {
            cx.errs.push(format!(
                "schema_version: unsupported version {v}, expected {SCHEMA_VERSION}"
            ));
        }
    }
    if let Some(s) = raw.scenario {
        if s != scenario {
            cx.errs.push(format!(
                "scenario: config names `{}`, command is `{}`",
                s.name(),
                scenario.name()
            ));
        }
    }
    let evolution = raw.numerics.evolution;
    let mut coupling = None;
    let mut lambda = None;
    let plan = match scenario {
        Scenario::CouplingMap => {
            let c = cx.coupling();
            let sweep = raw.protocol.recoil_dk_l.map(|g| {
                g.check("protocol.recoil_dk_l", &mut cx.errs);
                let axis = raw.protocol.recoil_axis.unwrap_or(0);
                if axis > 2 {
                    cx.errs
                        .push(format!("protocol.recoil_axis: must be 0, 1 or 2, got {axis}"));
                }
                (axis, g.points(), raw.protocol.recoil_m_max.unwrap_or(4))
            });
            c.map(|c| {
                coupling = Some(c.result);
                lambda = Some(c.result.lambda);
                Plan::CouplingMap { coupling: c, sweep }
            })
        }
        Scenario::Evolve => {
            let initial = cx.initial();
            let (l, c) = cx.lambda(true);
            coupling = c;
            lambda = l;
            let params = cx.system(l);
            let taus = cx.need(raw.protocol.taus.as_ref(), "protocol.taus").cloned();
            if let Some(t) = &taus {
                if t.is_empty() || t.iter().any(|v| !v.is_finite()) {
                    cx.errs.push("protocol.taus: need at least one finite value".into());
                }
            }
            let dims = cx.dims();
            match (initial, params, taus) {
                (Some(initial), Some(params), Some(taus)) => Some(Plan::Evolve {
                    initial,
                    params,
                    taus,
                    dims,
                    evolution: evolution.unwrap_or(Evolution::Numeric),
                }),
                _ => None,
            }
        }
        Scenario::Cat => {
            let alpha = {
                let v = cx.complex(raw.protocol.alpha, "protocol.alpha");
                cx.need(v, "protocol.alpha")
            };
            let m = raw.protocol.m_revival.unwrap_or(1);
            let omega_m = if raw.physical.omega_m_hz.is_some() {
                cx.omega_m()
            } else {
                Some(1.0)
            };
            let spec = alpha.and_then(|a| {
                let r = match raw.protocol.lambda {
                    Some(l) => CatSpec::with_lambda(a, m, l),
                    None => CatSpec::new(a, m),
                };
                r.map_err(|e| cx.errs.push(format!("protocol.lambda / protocol.m_revival: {e}")))
                    .ok()
            });
            lambda = spec.map(|s| s.lambda);
            match (spec, omega_m) {
                (Some(spec), Some(omega_m)) => Some(Plan::Cat { spec, omega_m }),
                _ => None,
            }
        }
        Scenario::Conditional => {
            let initial = cx.initial();
            let (l, c) = cx.lambda(true);
            coupling = c;
            lambda = l;
            let params = cx.system(l);
            let tau = {
                let v = cx.finite(raw.protocol.tau, "protocol.tau");
                cx.need(v, "protocol.tau")
            };
            let xs = cx.need(raw.protocol.x.as_ref(), "protocol.x").cloned();
            if let Some(x) = &xs {
                if x.is_empty() || x.iter().any(|v| !v.is_finite()) {
                    cx.errs.push("protocol.x: need at least one finite outcome".into());
                }
            }
            let dims = cx.dims();
            match (initial, params, tau, xs) {
                (Some(initial), Some(params), Some(tau), Some(xs)) => Some(Plan::Conditional {
                    initial,
                    params,
                    tau,
                    xs,
                    dims,
                    evolution: evolution.unwrap_or(Evolution::Analytic),
                }),
                _ => None,
            }
        }
        Scenario::NumberStats => {
            let state = cx.state();
            let beta = {
                let v = cx.complex(raw.protocol.beta, "protocol.beta");
                cx.need(v, "protocol.beta")
            };
            let quadrature = match raw.protocol.x_grid {
                Some(g) => {
                    g.check("protocol.x_grid", &mut cx.errs);
                    let (l, c) = cx.lambda(true);
                    coupling = c;
                    lambda = l;
                    let tau = {
                        let v = cx.finite(raw.protocol.tau, "protocol.tau");
                        cx.need(v, "protocol.tau")
                    };
                    match (l, tau) {
                        (Some(l), Some(t)) => Some((l, t, g.points(), raw.protocol.allow_general_tau.unwrap_or(false))),
                        _ => None,
                    }
                }
                None => None,
            };
            let shots = cx.shots();
            let quadrature_range = raw.sampling.quadrature_range.map(|r| (r[0], r[1]));
            match (state, beta) {
                (Some(state), Some(beta)) => Some(Plan::NumberStats {
                    state,
                    beta,
                    quadrature,
                    shots,
                    quadrature_range,
                }),
                _ => None,
            }
        }
        Scenario::Wigner => {
            let state = cx.state();
            let betas = match (raw.protocol.beta, raw.protocol.beta_grid) {
                (Some(_), Some(_)) => {
                    cx.errs
                        .push("protocol.beta and protocol.beta_grid: conflict, give only one".into());
                    None
                }
                (Some(_), None) => cx.complex(raw.protocol.beta, "protocol.beta").map(|b| vec![b]),
                (None, Some(g)) => {
                    g.re.check("protocol.beta_grid.re", &mut cx.errs);
                    g.im.check("protocol.beta_grid.im", &mut cx.errs);
                    Some(g.points())
                }
                (None, None) => {
                    cx.errs
                        .push("protocol.beta or protocol.beta_grid: one is required".into());
                    None
                }
            };
            let method = match cx.need(raw.protocol.method, "protocol.method") {
                Some(WignerMethod::Direct) => Some(ReadoutMethod::Direct),
                Some(m) => {
                    let (l, c) = cx.lambda(false);
                    coupling = c;
                    let timing = match (l, cx.finite(raw.protocol.tau, "protocol.tau")) {
                        (Some(lambda), Some(tau)) => Some(Timing::Both { lambda, tau }),
                        (Some(l), None) => Some(Timing::Lambda(l)),
                        (None, Some(t)) => Some(Timing::Tau(t)),
                        (None, None) => {
                            cx.errs
                                .push("protocol.lambda or protocol.tau: one is required for this readout".into());
                            None
                        }
                    };
                    lambda = l;
                    match m {
                        WignerMethod::Counting => timing.map(|timing| ReadoutMethod::Counting { timing }),
                        _ => {
                            let r0 = cx.need(raw.protocol.rho0, "protocol.rho0");
                            let r1 = cx.need(raw.protocol.rho1, "protocol.rho1");
                            match (timing, r0, r1) {
                                (Some(timing), Some(rho0), Some(rho1)) => {
                                    Some(ReadoutMethod::Parity { timing, rho0, rho1 })
                                }
                                _ => None,
                            }
                        }
                    }
                }
                None => None,
            };
            let shots = cx.shots();
            match (state, betas, method) {
                (Some(state), Some(betas), Some(method)) => Some(Plan::Wigner {
                    state,
                    betas,
                    method,
                    shots,
                }),
                _ => None,
            }
        }
    };
    match plan {
        Some(plan) if cx.errs.is_empty() => Ok(Validated { plan, coupling, lambda }),
        _ => {
            if cx.errs.is_empty() {
                cx.errs.push("configuration incomplete".into());
            }
            Err(cx.errs)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> RawConfig {
        parse(text).unwrap()
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = parse("[protocol]\nalpha = [1.0, 0.0]\nalfa = 2\n").unwrap_err();
        assert!(e[0].contains("alfa"), "{e:?}");
    }

    #[test]
    fn resonance_is_reported() {
        let raw = cfg("[physical]\nomega_m_hz = 0.0\n[protocol]\nalpha = [1.0, 0.0]\nlambda = 0.5\ntaus = [1.0]\n");
        let e = validate(&raw, Scenario::Evolve).unwrap_err();
        assert!(e.iter().any(|m| m.contains("resonance: Lambda undefined")), "{e:?}");
    }

    #[test]
    fn missing_alpha_names_the_key() {
        let e = validate(&RawConfig::default(), Scenario::Cat).unwrap_err();
        assert!(e.iter().any(|m| m.starts_with("protocol.alpha")), "{e:?}");
    }

    #[test]
    fn recoil_conflict() {
        let raw = cfg(
            "[physical]\nrabi_pump_hz = 1e9\nvacuum_rabi_hz = 1e7\ndetuning_hz = 5e9\nomega_m_hz = -1e6\n\
             trap_hz = [100.0, 100.0, 100.0]\nmass_kg = 1.44e-25\nwavelength_m = 7.8e-7\ntheta_rad = 0.1\n\
             delta_k_per_m = [0.0, 0.0, 0.0]\n",
        );
        let e = validate(&raw, Scenario::CouplingMap).unwrap_err();
        assert!(e.iter().any(|m| m.contains("conflict")), "{e:?}");
    }

    #[test]
    fn errors_are_aggregated() {
        let raw = cfg("[protocol]\nstate = \"cat\"\n");
        let e = validate(&raw, Scenario::Wigner).unwrap_err();
        assert!(e.len() >= 3, "{e:?}");
    }

    #[test]
    fn frequencies_carry_two_pi() {
        let raw = cfg(
            "[physical]\nrabi_pump_hz = 1e9\nvacuum_rabi_hz = 1e7\ndetuning_hz = 5e9\nomega_m_hz = -1e6\n\
             trap_hz = [100.0, 100.0, 100.0]\nmass_kg = 1.44e-25\ndelta_k_per_m = [0.0, 0.0, 0.0]\n",
        );
        let v = validate(&raw, Scenario::CouplingMap).unwrap();
        let g = v.coupling.unwrap().g.norm();
        assert!((g / (2.0 * PI * 1e6) - 1.0).abs() < 1e-12);
        assert!((v.lambda.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scenario_mismatch() {
        let raw = cfg("scenario = \"cat\"\n[protocol]\nalpha = [1.0, 0.0]\n");
        assert!(validate(&raw, Scenario::Cat).is_ok());
        assert!(validate(&raw, Scenario::Evolve).is_err());
    }
}
