//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

#[path = "../../core/tests/support/moment_quadrature.rs"]
#[allow(dead_code)]
mod moment_quadrature;

use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use optomech::dynamics::{analytic_state, evolve_to_tau, policy_space, AtomInitial, SystemParams};
use optomech::fock::{policy_dim, DensityOperator, ModeSpace, ATOM};
use optomech::protocols::{
    cat_generation, cat_target, conditional_quadrature_collapse, displaced_number_statistics, gaussian_sector_weights,
    parity_cosine_law, parity_delta_p, resolve_parity, sector_populations, wigner_direct, wigner_reconstruct_counting,
    wigner_reconstruct_parity, CatSpec, ReadoutMethod, Timing,
};
use optomech::sampling::{estimate_wigner_finite_shots, ShotConfig};
use optomech::special::poisson_pmf;
use optomech::trap::{axis_moment, effective_coupling, single_mode_validity, OpticalParams, TrapGeometry};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Outcome = Result<(bool, String), String>;

struct Criterion {
    id: u32,
    name: &'static str,
    budget_s: Option<f64>,
    run: fn() -> Outcome,
}

const TWO_PI: f64 = 2.0 * PI;
const RB87_MASS: f64 = 1.443_160_6e-25;

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn coupling_magnitude() -> Outcome {
    let k = TWO_PI / 780e-9;
    let optics = OpticalParams::new(
        C64::new(TWO_PI * 1e9, 0.0),
        C64::new(TWO_PI * 1e7, 0.0),
        TWO_PI * 5e9,
        [k, 0.0, 0.0],
        [k, 0.0, 0.0],
    )
    .map_err(err)?;
    let trap = TrapGeometry::new([TWO_PI * 100.0; 3], RB87_MASS).map_err(err)?;
    let c = effective_coupling(&optics, optics.delta_k(), &trap, TWO_PI * 1e6).map_err(err)?;
    let rel = (c.g.norm() / (TWO_PI * 1e6) - 1.0).abs();
    Ok((
        rel <= 5e-3,
        format!("|G|/2pi = {:.6e} Hz, relative error {rel:.2e}", c.g.norm() / TWO_PI),
    ))
}

fn analytic_numeric() -> Outcome {
    let mut worst = 0.0f64;
    for lambda in [0.25, 0.5, 1.0] {
        for alpha in [1.0, 2.0] {
            for tau in [PI / 2.0, PI, TWO_PI] {
                let init = AtomInitial::Coherent(C64::new(alpha, 0.0));
                let p = SystemParams::from_lambda(0.0, 1.0, lambda).map_err(err)?;
                let s = policy_space(&init, lambda, tau).map_err(err)?;
                let a = analytic_state(&init, &p, tau, &s).map_err(err)?;
                let n = evolve_to_tau(&init, &p, tau, &s, false).map_err(err)?;
                let ov = a.state.inner(&n.state).map_err(err)?.norm();
                worst = worst.max(1.0 - ov);
            }
        }
    }
    Ok((worst <= 1e-8, format!("18 cases, max 1 - overlap = {worst:.2e}")))
}

fn cat_fidelity() -> Outcome {
    let spec = CatSpec::new(C64::new(2.0, 0.0), 1).map_err(err)?;
    let g = cat_generation(&spec, 1.0).map_err(err)?;
    let ok = g.fidelity >= 1.0 - 1e-8 && g.cavity_vacuum_fidelity >= 1.0 - 1e-8;
    Ok((
        ok,
        format!(
            "1 - fidelity = {:.1e}, 1 - cavity vacuum fidelity = {:.1e}, dims {:?}",
            1.0 - g.fidelity,
            1.0 - g.cavity_vacuum_fidelity,
            g.dims
        ),
    ))
}

fn number_state_collapse() -> Outcome {
    let (lambda, alpha, tau) = (2.0, 2.0, PI);
    let init = AtomInitial::Coherent(C64::new(alpha, 0.0));
    let p = SystemParams::from_lambda(0.0, 1.0, lambda).map_err(err)?;
    let space = policy_space(&init, lambda, tau).map_err(err)?;
    let joint = analytic_state(&init, &p, tau, &space).map_err(err)?.state;
    let mut ok = true;
    let mut parts = Vec::new();
    for m in 0..3usize {
        let x = 8.0 * m as f64;
        let (atom, _) = conditional_quadrature_collapse(&joint, x).map_err(err)?;
        let pops = sector_populations(&atom);
        let n_max = pops.len() - 1;
        let prior: Vec<f64> = (0..=n_max).map(|n| poisson_pmf(n, alpha * alpha)).collect();
        let w = gaussian_sector_weights(x, lambda, tau, n_max, Some(&prior)).map_err(err)?;
        let dev = pops.iter().zip(&w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let peak = (x / (2.0 * lambda)).round() as usize;
        let in_m = pops[m];
        ok &= in_m >= 1.0 - 1e-9 && dev < 1e-10;
        parts.push(format!(
            "X={x}: P(|{m}>)={in_m:.3e} P(|{peak}>)={:.12} dev={dev:.1e}",
            pops[peak]
        ));
    }
    Ok((ok, parts.join("; ")))
}

/// Local maxima above `1e-6` of the largest entry; round-off wiggles in the
/// far tail are ignored.
fn local_maxima(p: &[f64]) -> Vec<usize> {
    let floor = 1e-6 * p.iter().cloned().fold(0.0, f64::max);
    (1..p.len() - 1)
        .filter(|&n| p[n] > floor && p[n] > p[n - 1] && p[n] >= p[n + 1])
        .collect()
}

fn cat_density(alpha: f64) -> Result<DensityOperator, String> {
    let spec = CatSpec::new(C64::new(alpha, 0.0), 1).map_err(err)?;
    let space = ModeSpace::single(ATOM, policy_dim(alpha)).map_err(err)?;
    Ok(DensityOperator::from_pure(&cat_target(&spec, &space).map_err(err)?))
}

fn displaced_cat_statistics() -> Outcome {
    let rho = cat_density(2.0)?;
    let real = displaced_number_statistics(&rho, C64::new(4.0, 0.0))
        .map_err(err)?
        .probabilities();
    let maxima = local_maxima(&real);
    let near = |c: usize| maxima.iter().any(|&n| n.abs_diff(c) <= 2);
    let bimodal = maxima.len() == 2 && near(4) && near(36);

    let imag = displaced_number_statistics(&rho, C64::new(0.0, 4.0))
        .map_err(err)?
        .probabilities();
    let maxima_i = local_maxima(&imag);
    let deep = (5..=35)
        .filter(|&n| imag[n] < imag[n - 1] && imag[n] <= imag[n + 1])
        .filter(|&n| {
            let left = maxima_i.iter().rev().find(|&&k| k < n);
            let right = maxima_i.iter().find(|&&k| k > n);
            match (left, right) {
                (Some(&l), Some(&r)) => imag[n] < 0.5 * imag[l].min(imag[r]),
                _ => false,
            }
        })
        .count();
    Ok((
        bimodal && deep >= 3,
        format!("beta=4 maxima at {maxima:?}; beta=4i deep minima in [5,35]: {deep}"),
    ))
}

fn random_mixed_state(dim: usize, seed: u64) -> Result<DensityOperator, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(dim, dim, |_, _| {
        C64::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        )
    });
    let m = &a * a.adjoint();
    DensityOperator::normalized(ModeSpace::single(ATOM, dim).map_err(err)?, m).map_err(err)
}

fn wigner_equivalence() -> Outcome {
    let grid: Vec<f64> = (0..7).map(|i| -2.0 + 4.0 * i as f64 / 6.0).collect();
    let parity = resolve_parity(Timing::Tau(PI)).map_err(err)?;
    let mut parts = Vec::new();
    let mut ok = true;
    for (label, rho) in [
        ("cat(1)", cat_density(1.0)?),
        ("random dim 8", random_mixed_state(8, 20240601)?),
    ] {
        let (mut e_count, mut e_par, mut imag) = (0.0f64, 0.0f64, 0.0f64);
        for &re in &grid {
            for &im in &grid {
                let b = C64::new(re, im);
                let w = wigner_direct(&rho, b).map_err(err)?.value;
                let c = wigner_reconstruct_counting(&rho, b, Timing::Tau(PI)).map_err(err)?;
                let p = wigner_reconstruct_parity(&rho, b, Timing::Tau(parity.tau), 0.3, 0.7).map_err(err)?;
                e_count = e_count.max((c.value - w).abs());
                e_par = e_par.max((p.value - w).abs());
                imag = imag.max(c.imag_residual.abs());
            }
        }
        ok &= e_count <= 1e-6 && e_par <= 1e-6 && imag <= 1e-8;
        parts.push(format!(
            "{label}: counting {e_count:.1e}, parity {e_par:.1e}, imag {imag:.1e}"
        ));
    }
    Ok((ok, parts.join("; ")))
}

fn cosine_law() -> Outcome {
    let rho = random_mixed_state(8, 7)?;
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut worst = 0.0f64;
    let mut pairs = 0;
    while pairs < 5 {
        let lambda: f64 = rng.random_range(0.2..2.0);
        let tau: f64 = rng.random_range(0.3..6.0);
        let off = (2.0 * lambda * 2.0 * (0.5 * tau).sin().abs() - PI).abs();
        if off < 0.05 {
            continue;
        }
        let beta = C64::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5));
        let sim = parity_delta_p(&rho, beta, lambda, tau, 0.3, 0.7).map_err(err)?;
        let law = parity_cosine_law(&rho, beta, lambda, tau, 0.3, 0.7).map_err(err)?;
        worst = worst.max((sim - law).abs());
        pairs += 1;
    }
    Ok((
        worst <= 1e-8,
        format!("5 off-manifold (Lambda, tau), max deviation {worst:.2e}"),
    ))
}

fn moment_oracle() -> Outcome {
    let mut worst = 0.0f64;
    for eta in [0.05, 0.5, 1.5, 3.0] {
        let table = moment_quadrature::moment_table(10, eta);
        for (n, row) in table.iter().enumerate() {
            for (m, &(re, im)) in row.iter().enumerate() {
                let oracle = C64::new(re, im);
                let closed = axis_moment(n, m, eta);
                if oracle.norm() < 1e-60 {
                    if closed.norm() >= 1e-15 {
                        return Ok((false, format!("eta={eta} n={n} m={m}: oracle node, closed {closed}")));
                    }
                    continue;
                }
                worst = worst.max((closed - oracle).norm() / oracle.norm());
            }
        }
    }
    let trap = TrapGeometry::new([TWO_PI * 100.0; 3], RB87_MASS).map_err(err)?;
    let mut validity = Vec::new();
    for theta in [0.3, 0.1, 0.03, 0.01, 0.001, 0.0] {
        let optics = OpticalParams::with_angle(
            C64::new(TWO_PI * 1e9, 0.0),
            C64::new(TWO_PI * 1e7, 0.0),
            TWO_PI * 5e9,
            780e-9,
            theta,
        )
        .map_err(err)?;
        validity.push(single_mode_validity(optics.delta_k(), &trap, &optics, 4).map_err(err)?);
    }
    let decreasing = validity.windows(2).all(|w| w[1] < w[0]);
    let vanishes = *validity.last().unwrap() < 1e-12;
    Ok((
        worst <= 1e-8 && decreasing && vanishes,
        format!(
            "max relative error {worst:.2e}; validity over theta = {:?}",
            validity.iter().map(|v| format!("{v:.1e}")).collect::<Vec<_>>()
        ),
    ))
}

fn finite_shots() -> Outcome {
    let space = ModeSpace::single(ATOM, 4).map_err(err)?;
    let rho = DensityOperator::diagonal(space, &[1.0, 0.0, 0.0, 0.0]).map_err(err)?;
    let method = ReadoutMethod::Parity {
        timing: Timing::Tau(PI),
        rho0: 0.3,
        rho1: 0.7,
    };
    let zero = C64::new(0.0, 0.0);
    let e = estimate_wigner_finite_shots(&rho, zero, &method, &ShotConfig::new(100_000, 20240601).map_err(err)?)
        .map_err(err)?;
    let z = (e.value - 2.0 / PI) / e.std_error;
    let pts = [100u64, 1_000, 10_000, 100_000, 1_000_000]
        .iter()
        .map(|&n| {
            let cfg = ShotConfig::new(n, 20240601).map_err(err)?;
            let e = estimate_wigner_finite_shots(&rho, zero, &method, &cfg).map_err(err)?;
            Ok(((n as f64).ln(), e.std_error.ln()))
        })
        .collect::<Result<Vec<_>, String>>()?;
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let slope =
        pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    Ok((
        z.abs() <= 4.0 && (slope + 0.5).abs() <= 0.1,
        format!(
            "W = {:.5} +- {:.1e} ({z:+.2} sigma), slope {slope:.3}",
            e.value, e.std_error
        ),
    ))
}

fn same_bytes(a: &Path, b: &Path) -> Result<Vec<String>, String> {
    let mut diff = Vec::new();
    let mut names: Vec<_> = std::fs::read_dir(a)
        .map_err(err)?
        .map(|e| e.map(|e| e.file_name()))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    names.sort();
    for name in names {
        if name == "manifest.json" {
            continue;
        }
        let x = std::fs::read(a.join(&name)).map_err(err)?;
        let y = std::fs::read(b.join(&name)).map_err(err)?;
        if x != y {
            diff.push(name.to_string_lossy().into_owned());
        }
    }
    Ok(diff)
}

fn determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_optomech");
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let tmp = tempfile::tempdir().map_err(err)?;
    let mut parts = Vec::new();
    let mut ok = true;
    for scenario in ["coupling-map", "evolve", "cat", "conditional", "number-stats", "wigner"] {
        let first = tmp.path().join(format!("{scenario}-a"));
        let second = tmp.path().join(format!("{scenario}-b"));
        let run = Command::new(bin)
            .args(["--quiet", "--config"])
            .arg(configs.join(format!("{scenario}.toml")))
            .arg("--out")
            .arg(&first)
            .arg(scenario)
            .status()
            .map_err(err)?;
        let again = Command::new(bin)
            .args(["--quiet", "--out"])
            .arg(&second)
            .arg("rerun")
            .arg(first.join("manifest.json"))
            .status()
            .map_err(err)?;
        let diff = if run.success() && again.success() {
            same_bytes(&first, &second)?
        } else {
            vec!["<run failed>".into()]
        };
        ok &= diff.is_empty();
        parts.push(if diff.is_empty() {
            format!("{scenario} ok")
        } else {
            format!("{scenario} differs: {diff:?}")
        });
    }
    Ok((ok, parts.join(", ")))
}

fn main() -> ExitCode {
    let criteria = [
        Criterion {
            id: 1,
            name: "coupling magnitude",
            budget_s: Some(1.0),
            run: coupling_magnitude,
        },
        Criterion {
            id: 2,
            name: "analytic-numeric equivalence",
            budget_s: Some(60.0),
            run: analytic_numeric,
        },
        Criterion {
            id: 3,
            name: "cat generation",
            budget_s: Some(10.0),
            run: cat_fidelity,
        },
        Criterion {
            id: 4,
            name: "near-number-state collapse",
            budget_s: Some(10.0),
            run: number_state_collapse,
        },
        Criterion {
            id: 5,
            name: "displaced cat statistics",
            budget_s: Some(5.0),
            run: displaced_cat_statistics,
        },
        Criterion {
            id: 6,
            name: "wigner reconstruction equivalence",
            budget_s: Some(120.0),
            run: wigner_equivalence,
        },
        Criterion {
            id: 7,
            name: "parity cosine law",
            budget_s: Some(30.0),
            run: cosine_law,
        },
        Criterion {
            id: 8,
            name: "transition-moment oracle",
            budget_s: Some(30.0),
            run: moment_oracle,
        },
        Criterion {
            id: 9,
            name: "finite-shot consistency",
            budget_s: Some(60.0),
            run: finite_shots,
        },
        Criterion {
            id: 10,
            name: "rerun determinism",
            budget_s: None,
            run: determinism,
        },
    ];
    let only: Option<u32> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for c in criteria.iter().filter(|c| only.is_none_or(|id| id == c.id)) {
        let start = Instant::now();
        let outcome = (c.run)();
        let secs = start.elapsed().as_secs_f64();
        let in_time = c.budget_s.is_none_or(|b| secs < b);
        let (pass, detail) = match outcome {
            Ok((pass, detail)) => (pass && in_time, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let budget = c.budget_s.map_or(String::new(), |b| format!(", budget {b} s"));
        println!(
            "criterion {:>2} {} {}: {detail} ({secs:.2} s{budget})",
            c.id,
            if pass { "PASS" } else { "FAIL" },
            c.name
        );
        if !pass {
            failed += 1;
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
