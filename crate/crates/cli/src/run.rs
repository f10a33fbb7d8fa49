//! Scenario execution, artifact writing and the run manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use optomech::dynamics::{analytic_state, evolution_trace, evolve_to_tau, policy_space, AtomInitial, SystemParams};
use optomech::fock::{coherent_state, number_state, policy_dim, reduce_mode, DensityOperator, ModeSpace, ATOM};
use optomech::protocols::{
    cat_generation, cat_target, conditional_quadrature_collapse, displaced_number_statistics, gaussian_sector_weights,
    quadrature_distribution, wigner_grid, QuadratureMarginal, ReadoutMethod,
};
use optomech::sampling::{estimate_wigner_finite_shots, sample_photon_numbers, sample_quadrature, ShotConfig};
use optomech::trap::recoil_sweep;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::{Evolution, Plan, RawConfig, Scenario, StateSpec, Validated, SCHEMA_VERSION};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Failure of a run, carrying the exit status it maps to.
#[derive(Debug)]
pub enum RunError {
    Validation(Vec<String>),
    Core(optomech::Error),
    Io(String),
    Mismatch(Vec<String>),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Validation(_) => 2,
            RunError::Core(e) => match e.kind() {
                optomech::ErrorKind::Invalid => 2,
                optomech::ErrorKind::NumericalBudget => 3,
                optomech::ErrorKind::ProtocolConstraint => 4,
            },
            RunError::Io(_) => 1,
            RunError::Mismatch(_) => 3,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Validation(errs) => {
                writeln!(f, "invalid configuration:")?;
                for e in errs {
                    writeln!(f, "  - {e}")?;
                }
                Ok(())
            }
            RunError::Core(e) => write!(f, "{e}"),
            RunError::Io(e) => write!(f, "i/o error: {e}"),
            RunError::Mismatch(files) => write!(f, "rerun differs from manifest in: {}", files.join(", ")),
        }
    }
}

impl From<optomech::Error> for RunError {
    fn from(e: optomech::Error) -> Self {
        RunError::Core(e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub scenario: Scenario,
    /// Configuration after command-line overrides; rerunning it reproduces the artifacts.
    pub config: RawConfig,
    pub derived: BTreeMap<String, Value>,
    pub artifacts: Vec<Artifact>,
    pub versions: BTreeMap<String, String>,
    pub wall_clock_seconds: f64,
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

struct Output {
    files: Vec<(String, String)>,
    derived: BTreeMap<String, Value>,
}

impl Output {
    fn new() -> Self {
        Self {
            files: Vec::new(),
            derived: BTreeMap::new(),
        }
    }

    fn file(&mut self, name: &str, body: String) {
        self.files.push((name.to_string(), body));
    }

    fn derive(&mut self, key: &str, v: impl Serialize) {
        self.derived
            .insert(key.to_string(), serde_json::to_value(v).expect("serializable"));
    }
}

fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

fn comment_header(pairs: &[(&str, String)]) -> String {
    pairs.iter().map(|(k, v)| format!("# {k}={v}\n")).collect()
}

fn density_of(state: &StateSpec) -> optomech::Result<DensityOperator> {
    let pure = match state {
        StateSpec::Cat(spec) => cat_target(spec, &ModeSpace::single(ATOM, policy_dim(spec.alpha.norm()))?)?,
        StateSpec::Coherent(a) => coherent_state(&ModeSpace::single(ATOM, policy_dim(a.norm()))?, ATOM, *a)?,
        StateSpec::Fock(n) => number_state(&ModeSpace::single(ATOM, n + 1)?, ATOM, *n)?,
    };
    Ok(DensityOperator::from_pure(&pure))
}

fn joint_space(
    initial: &AtomInitial,
    params: &SystemParams,
    tau_max: f64,
    dims: Option<(usize, usize)>,
) -> optomech::Result<ModeSpace> {
    match dims {
        Some((a, c)) => ModeSpace::atom_cavity(a, c),
        None => policy_space(initial, params.lambda, tau_max),
    }
}

fn execute(v: &Validated) -> Result<Output, RunError> {
    let mut out = Output::new();
    if let Some(c) = &v.coupling {
        out.derive("G_re_rad_s", c.g.re);
        out.derive("G_im_rad_s", c.g.im);
        out.derive("G_abs_hz", c.g.norm() / (2.0 * std::f64::consts::PI));
        out.derive("cavity_phase", c.cavity_phase);
        out.derive("validity_ratio", c.validity_ratio);
        out.derive("lamb_dicke", c.lamb_dicke);
    }
    if let Some(l) = v.lambda {
        out.derive("lambda", l);
    }
    match &v.plan {
        Plan::CouplingMap { coupling, sweep } => {
            let r = &coupling.result;
            let rows = [
                ("G00_re_rad_s", r.g.re),
                ("G00_im_rad_s", r.g.im),
                ("G00_abs_rad_s", r.g.norm()),
                ("G00_abs_hz", r.g.norm() / (2.0 * std::f64::consts::PI)),
                ("lambda", r.lambda),
                ("cavity_phase", r.cavity_phase),
                ("validity_ratio", r.validity_ratio),
                ("delta_k_x_per_m", r.delta_k[0]),
                ("delta_k_y_per_m", r.delta_k[1]),
                ("delta_k_z_per_m", r.delta_k[2]),
                ("eta_x", r.lamb_dicke[0]),
                ("eta_y", r.lamb_dicke[1]),
                ("eta_z", r.lamb_dicke[2]),
            ];
            out.file(
                "coupling.csv",
                csv(
                    &["quantity", "value"],
                    rows.iter().map(|(k, v)| vec![k.to_string(), num(*v)]),
                ),
            );
            if let Some((axis, dk_l, m_max)) = sweep {
                let table = recoil_sweep(&coupling.trap, &coupling.optics, *axis, dk_l, *m_max)?;
                let mut header = vec!["dk_l".to_string(), "eta".into(), "g00_re".into(), "g00_im".into()];
                header.extend((1..=*m_max).map(|m| format!("ratio_{m}")));
                let h: Vec<&str> = header.iter().map(String::as_str).collect();
                out.file(
                    "recoil_sweep.csv",
                    csv(
                        &h,
                        table.iter().map(|row| {
                            let mut r = vec![num(row.dk_l), num(row.eta), num(row.g00.re), num(row.g00.im)];
                            r.extend(row.ratios.iter().map(|v| num(*v)));
                            r
                        }),
                    ),
                );
            }
        }
        Plan::Evolve {
            initial,
            params,
            taus,
            dims,
            evolution,
        } => {
            let tau_max = taus.iter().fold(0.0f64, |m, t| m.max(t.abs()));
            let space = joint_space(initial, params, tau_max, *dims)?;
            out.derive("dims", space.dims());
            let last = *taus.last().expect("validated non-empty");
            let final_state = match evolution {
                Evolution::Numeric => {
                    let rows = evolution_trace(initial, params, taus, &space)?;
                    out.file(
                        "trace.csv",
                        csv(
                            &["tau", "atom_purity", "cavity_x", "cavity_n", "overlap"],
                            rows.iter().map(|r| {
                                vec![
                                    num(r.tau),
                                    num(r.atom_purity),
                                    num(r.cavity_x),
                                    num(r.cavity_n),
                                    num(r.overlap),
                                ]
                            }),
                        ),
                    );
                    let worst = rows.iter().fold(1.0f64, |m, r| m.min(r.overlap));
                    out.derive("min_overlap", worst);
                    evolve_to_tau(initial, params, last, &space, false)?
                }
                Evolution::Analytic => analytic_state(initial, params, last, &space)?,
            };
            out.derive("leakage", final_state.leakage);
            let atom = reduce_mode(&final_state.state, ATOM)?;
            out.file(
                "atom_populations.csv",
                csv(
                    &["n", "probability"],
                    atom.populations()
                        .iter()
                        .enumerate()
                        .map(|(n, p)| vec![n.to_string(), num(*p)]),
                ),
            );
        }
        Plan::Cat { spec, omega_m } => {
            let gen = cat_generation(spec, *omega_m)?;
            let target = cat_target(spec, &ModeSpace::single(ATOM, gen.dims[0])?)?;
            out.derive("fidelity", gen.fidelity);
            out.derive("cavity_vacuum_fidelity", gen.cavity_vacuum_fidelity);
            out.derive("dims", &gen.dims);
            out.derive("leakage", gen.leakage);
            out.derive("revival_tau", spec.revival_tau());
            out.file(
                "cat.csv",
                csv(
                    &["n", "p_evolved", "p_target"],
                    gen.atom
                        .populations()
                        .iter()
                        .zip(target.probabilities())
                        .enumerate()
                        .map(|(n, (a, b))| vec![n.to_string(), num(*a), num(b)]),
                ),
            );
        }
        Plan::Conditional {
            initial,
            params,
            tau,
            xs,
            dims,
            evolution,
        } => {
            let space = joint_space(initial, params, *tau, *dims)?;
            out.derive("dims", space.dims());
            let joint = match evolution {
                Evolution::Analytic => analytic_state(initial, params, *tau, &space)?,
                Evolution::Numeric => evolve_to_tau(initial, params, *tau, &space, false)?,
            };
            out.derive("leakage", joint.leakage);
            let prior = reduce_mode(&initial_only(initial, space.dims()[0])?, ATOM)?.populations();
            let mut rows = Vec::new();
            let mut worst_dev = 0.0f64;
            for &x in xs {
                let (atom, density) = conditional_quadrature_collapse(&joint.state, x)?;
                let w = gaussian_sector_weights(x, params.lambda, *tau, space.dims()[0] - 1, Some(&prior))?;
                let pops = atom.probabilities();
                for (n, (p, g)) in pops.iter().zip(&w).enumerate() {
                    worst_dev = worst_dev.max((p - g).abs());
                    rows.push(vec![num(x), num(density), n.to_string(), num(*p), num(*g)]);
                }
            }
            out.derive("max_weight_deviation", worst_dev);
            out.file(
                "conditional.csv",
                csv(&["x", "density", "n", "population", "gaussian_weight"], rows),
            );
        }
        Plan::NumberStats {
            state,
            beta,
            quadrature,
            shots,
            quadrature_range,
        } => {
            let rho = density_of(state)?;
            let rec = displaced_number_statistics(&rho, *beta)?;
            let probs = rec.probabilities();
            out.derive("probability_sum", probs.iter().sum::<f64>());
            out.file(
                "number_stats.csv",
                csv(
                    &["n", "probability"],
                    probs.iter().enumerate().map(|(n, p)| vec![n.to_string(), num(*p)]),
                ),
            );
            let mut qrec = None;
            if let Some((lambda, tau, grid, allow)) = quadrature {
                let q = quadrature_distribution(&rho, *beta, *lambda, *tau, grid, *allow)?;
                out.file(
                    "quadrature.csv",
                    csv(
                        &["x", "density"],
                        q.outcomes.iter().map(|(x, d)| vec![num(*x), num(*d)]),
                    ),
                );
                qrec = Some((*lambda, *tau));
            }
            if let Some(cfg) = shots {
                let counts = sample_photon_numbers(&normalized(&probs), cfg)?;
                let head = comment_header(&[
                    ("seed", cfg.seed.to_string()),
                    ("shots", cfg.shots.to_string()),
                    ("beta_re", num(beta.re)),
                    ("beta_im", num(beta.im)),
                ]);
                out.file(
                    "number_counts.csv",
                    head + &csv(
                        &["outcome", "count"],
                        counts
                            .iter()
                            .enumerate()
                            .map(|(n, c)| vec![n.to_string(), c.to_string()]),
                    ),
                );
                if let (Some((lambda, tau)), Some((lo, hi))) = (qrec, quadrature_range) {
                    let marginal = QuadratureMarginal::new(&rho, *beta, lambda, tau, true)?;
                    let samples = sample_quadrature(|x| marginal.density(x), (*lo, *hi), cfg)?;
                    let head = comment_header(&[
                        ("seed", cfg.seed.to_string()),
                        ("shots", cfg.shots.to_string()),
                        ("lambda", num(lambda)),
                        ("tau", num(tau)),
                    ]);
                    out.file(
                        "quadrature_samples.csv",
                        head + &csv(&["x"], samples.iter().map(|x| vec![num(*x)])),
                    );
                }
            }
        }
        Plan::Wigner {
            state,
            betas,
            method,
            shots,
        } => {
            let rho = density_of(state)?;
            match shots {
                None => {
                    let pts = wigner_grid(&rho, betas, method)?;
                    let worst_imag = pts.iter().fold(0.0f64, |m, p| m.max(p.imag_residual.abs()));
                    let worst_res = pts.iter().fold(0.0f64, |m, p| m.max(p.constraint_residual.abs()));
                    out.derive("max_imag_residual", worst_imag);
                    out.derive("constraint_residual", worst_res);
                    out.file(
                        "wigner.csv",
                        csv(
                            &["beta_re", "beta_im", "value", "constraint_residual", "imag_residual"],
                            pts.iter().map(|p| {
                                vec![
                                    num(p.beta.re),
                                    num(p.beta.im),
                                    num(p.value),
                                    num(p.constraint_residual),
                                    num(p.imag_residual),
                                ]
                            }),
                        ),
                    );
                }
                Some(cfg) => {
                    let mut rows = Vec::new();
                    for (i, b) in betas.iter().enumerate() {
                        // one stream family per grid point
                        let point_cfg =
                            ShotConfig::with_binning(cfg.shots, cfg.seed.wrapping_add(i as u64), cfg.binning)?;
                        let e = estimate_wigner_finite_shots(&rho, *b, method, &point_cfg)?;
                        rows.push(vec![
                            num(b.re),
                            num(b.im),
                            num(e.value),
                            num(e.std_error),
                            e.shots.to_string(),
                        ]);
                    }
                    let head = comment_header(&[
                        ("seed", cfg.seed.to_string()),
                        ("shots", cfg.shots.to_string()),
                        ("method", method_name(method).to_string()),
                    ]);
                    out.file(
                        "wigner.csv",
                        head + &csv(&["beta_re", "beta_im", "value", "std_error", "shots"], rows),
                    );
                }
            }
        }
    }
    Ok(out)
}

fn method_name(m: &ReadoutMethod) -> &'static str {
    match m {
        ReadoutMethod::Direct => "direct",
        ReadoutMethod::Counting { .. } => "counting",
        ReadoutMethod::Parity { .. } => "parity",
    }
}

fn normalized(p: &[f64]) -> Vec<f64> {
    let t: f64 = p.iter().sum();
    p.iter().map(|v| v / t).collect()
}

fn initial_only(initial: &AtomInitial, atom_dim: usize) -> optomech::Result<optomech::fock::StateVector> {
    optomech::dynamics::initial_state(initial, &ModeSpace::atom_cavity(atom_dim, 2)?)
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn io<E: std::fmt::Display>(path: &Path) -> impl FnOnce(E) -> RunError + '_ {
    move |e| RunError::Io(format!("{}: {e}", path.display()))
}

/// Validates, runs and writes artifacts plus `manifest.json` into `out_dir`.
pub fn run_scenario(raw: &RawConfig, scenario: Scenario, out_dir: &Path) -> Result<RunManifest, RunError> {
    let start = Instant::now();
    let validated = crate::config::validate(raw, scenario).map_err(RunError::Validation)?;
    let output = execute(&validated)?;
    std::fs::create_dir_all(out_dir).map_err(io(out_dir))?;
    let mut artifacts = Vec::new();
    for (name, body) in &output.files {
        let path: PathBuf = out_dir.join(name);
        std::fs::write(&path, body).map_err(io(&path))?;
        artifacts.push(Artifact {
            file: name.clone(),
            sha256: sha256_hex(body.as_bytes()),
            bytes: body.len(),
        });
    }
    let mut config = raw.clone();
    config.scenario = Some(scenario);
    config.schema_version = Some(SCHEMA_VERSION);
    let manifest = RunManifest {
        schema_version: SCHEMA_VERSION,
        scenario,
        config,
        derived: output.derived,
        artifacts,
        versions: BTreeMap::from([
            ("optomech".to_string(), optomech::VERSION.to_string()),
            ("optomech-cli".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ]),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    let path = out_dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| RunError::Io(e.to_string()))?;
    std::fs::write(&path, text + "\n").map_err(io(&path))?;
    Ok(manifest)
}

pub fn read_manifest(path: &Path) -> Result<RunManifest, RunError> {
    let text = std::fs::read_to_string(path).map_err(io(path))?;
    serde_json::from_str(&text).map_err(|e| RunError::Validation(vec![format!("{}: {e}", path.display())]))
}

/// Reruns a manifest into `out_dir` and checks every artifact hash.
pub fn rerun(manifest_path: &Path, out_dir: &Path) -> Result<RunManifest, RunError> {
    let old = read_manifest(manifest_path)?;
    let new = run_scenario(&old.config, old.scenario, out_dir)?;
    let mut bad = Vec::new();
    for a in &old.artifacts {
        match new.artifacts.iter().find(|b| b.file == a.file) {
            Some(b) if b.sha256 == a.sha256 => {}
            _ => bad.push(a.file.clone()),
        }
    }
    if bad.is_empty() && new.artifacts.len() == old.artifacts.len() {
        Ok(new)
    } else {
        Err(RunError::Mismatch(bad))
    }
}

/// Summary lines printed after a run.
pub fn summary(m: &RunManifest) -> Vec<String> {
    let mut lines = vec![format!("scenario {}", m.scenario.name())];
    for (k, v) in &m.derived {
        lines.push(format!("  {k} = {v}"));
    }
    for a in &m.artifacts {
        lines.push(format!("  wrote {} ({} bytes)", a.file, a.bytes));
    }
    lines
}
