//! Effective Hamiltonian `H = w0 a^dag a + w_m c^dag c + G (c + c^dag) a^dag a`,
//! its numerical propagation, and the closed-form joint state.
//!
//! Times are physical (`t` in seconds when frequencies are in rad/s); the
//! dimensionless protocol time is `tau = w_m t`. The closed form lives in the
//! interaction picture obtained by dropping `w0 a^dag a`, with the cavity kept
//! in the lab frame, so each atom sector `n` carries the cavity coherent state
//! `|Lambda n eta>` with `eta = 1 - e^{-i tau}`.

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CsrMatrix};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::expm::{chebyshev_propagate, gershgorin_bounds, hermitian_propagator};
use crate::fock::state::coherent_amplitudes;
use crate::fock::{
    number_operator, policy_dim, quadrature_operator, reduce_mode, ModeSpace, Operator, StateVector, ATOM, CAVITY,
    DEFAULT_LEAKAGE_BUDGET, GUARD_BAND,
};
use crate::special::poisson_pmf;
use crate::trap::CouplingResult;

/// Atom sectors lighter than this are ignored when sizing the cavity basis.
pub const SECTOR_FLOOR: f64 = 1e-20;
/// Norm drift that `evolve_numeric` reports as a propagation failure.
pub const NORM_DRIFT_TOL: f64 = 1e-8;
/// Population allowed in the top levels of an adaptively truncated block.
pub const EDGE_TOL: f64 = 1e-26;

const DENSE_BLOCK_MAX: usize = 24;
const START_BLOCK: usize = 32;
const MIN_SLICES: usize = 8;
const MAX_SLICE_Z: f64 = 2000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Renormalized atom-mode frequency (rad/s).
    pub omega0: f64,
    /// `w_c - w_p` (rad/s), nonzero, either sign.
    pub omega_m: f64,
    /// Real coupling `G` (rad/s).
    pub g: f64,
    /// `-G / w_m`.
    pub lambda: f64,
}

impl SystemParams {
    pub fn new(omega0: f64, omega_m: f64, g: f64) -> Result<Self> {
        check_omega_m(omega_m)?;
        if !(omega0.is_finite() && g.is_finite()) {
            return Err(Error::Invalid("omega0 and G must be finite".into()));
        }
        Ok(Self {
            omega0,
            omega_m,
            g,
            lambda: -g / omega_m,
        })
    }

    pub fn from_lambda(omega0: f64, omega_m: f64, lambda: f64) -> Result<Self> {
        check_omega_m(omega_m)?;
        if !(omega0.is_finite() && lambda.is_finite()) {
            return Err(Error::Invalid("omega0 and Lambda must be finite".into()));
        }
        Ok(Self {
            omega0,
            omega_m,
            g: -lambda * omega_m,
            lambda,
        })
    }

    /// Uses the real coupling left after the phase of `G` is absorbed into the cavity.
    pub fn from_coupling(c: &CouplingResult, omega0: f64) -> Result<Self> {
        Self::from_lambda(omega0, c.omega_m, c.lambda)
    }

    /// Physical time for a dimensionless `tau = w_m t`.
    pub fn time_for_tau(&self, tau: f64) -> f64 {
        tau / self.omega_m
    }
}

fn check_omega_m(omega_m: f64) -> Result<()> {
    if omega_m == 0.0 {
        return Err(Error::Resonance);
    }
    if !omega_m.is_finite() {
        return Err(Error::Invalid(format!("omega_m must be finite, got {omega_m}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    Interaction,
    Lab,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionResult {
    pub state: StateVector,
    pub tau: f64,
    pub frame: Frame,
    pub leakage: f64,
}

/// Initial condensate state; the cavity always starts in vacuum.
#[derive(Debug, Clone, PartialEq)]
pub enum AtomInitial {
    Coherent(C64),
    /// Number-basis amplitudes `c_n`, normalized on use.
    Coefficients(Vec<C64>),
}

impl AtomInitial {
    /// Unnormalized amplitudes on `dim` levels and the probability left outside.
    fn amplitudes(&self, dim: usize) -> Result<(DVector<C64>, f64)> {
        match self {
            AtomInitial::Coherent(alpha) => Ok(coherent_amplitudes(*alpha, dim)),
            AtomInitial::Coefficients(c) => {
                if c.len() > dim {
                    let extra: f64 = c[dim..].iter().map(|v| v.norm_sqr()).sum();
                    if extra > 0.0 {
                        return Err(Error::Dimension(format!(
                            "{} atom coefficients do not fit dimension {dim}",
                            c.len()
                        )));
                    }
                }
                let norm: f64 = c.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
                if norm == 0.0 || !norm.is_finite() {
                    return Err(Error::Invalid("atom coefficients have zero or non-finite norm".into()));
                }
                let mut v = DVector::zeros(dim);
                for (i, x) in c.iter().take(dim).enumerate() {
                    v[i] = x / norm;
                }
                Ok((v, 0.0))
            }
        }
    }

    fn sector_weights(&self, dim: usize) -> Vec<f64> {
        match self {
            AtomInitial::Coherent(alpha) => (0..dim).map(|n| poisson_pmf(n, alpha.norm_sqr())).collect(),
            AtomInitial::Coefficients(c) => {
                let total: f64 = c.iter().map(|v| v.norm_sqr()).sum();
                (0..dim)
                    .map(|n| c.get(n).map_or(0.0, |v| v.norm_sqr() / total))
                    .collect()
            }
        }
    }

    fn policy_atom_dim(&self) -> usize {
        match self {
            AtomInitial::Coherent(alpha) => policy_dim(alpha.norm()),
            AtomInitial::Coefficients(c) => c.len().max(2),
        }
    }
}

/// `eta = 1 - e^{-i tau}`.
pub fn eta(tau: f64) -> C64 {
    C64::new(1.0, 0.0) - C64::from_polar(1.0, -tau)
}

/// Largest `|eta(s)|` for `s` between 0 and `tau`.
pub fn max_eta_modulus(tau: f64) -> f64 {
    if tau.abs() >= std::f64::consts::PI {
        2.0
    } else {
        2.0 * (0.5 * tau.abs()).sin()
    }
}

/// Joint atom-cavity space sized by the truncation policy: the atom mode holds
/// the initial state, the cavity holds `|Lambda n eta(s)|` along the whole
/// trajectory for every sector heavier than [`SECTOR_FLOOR`].
pub fn policy_space(initial: &AtomInitial, lambda: f64, tau: f64) -> Result<ModeSpace> {
    let atom_dim = initial.policy_atom_dim();
    let weights = initial.sector_weights(atom_dim);
    let n_sig = weights.iter().rposition(|&w| w > SECTOR_FLOOR).unwrap_or(0);
    let excursion = lambda.abs() * n_sig as f64 * max_eta_modulus(tau);
    ModeSpace::atom_cavity(atom_dim, policy_dim(excursion))
}

/// Sparse `H / hbar` on an atom-cavity space (atom mode first).
pub fn build_hamiltonian(params: &SystemParams, space: &ModeSpace, include_omega0: bool) -> Result<Operator> {
    if space.n_modes() != 2 || space.labels()[0] != ATOM || space.labels()[1] != CAVITY {
        return Err(Error::Dimension(format!(
            "Hamiltonian needs the joint space [{ATOM}, {CAVITY}], got {:?}",
            space.labels()
        )));
    }
    let (da, dc) = (space.dims()[0], space.dims()[1]);
    let mut coo = CooMatrix::new(da * dc, da * dc);
    for n in 0..da {
        let nf = n as f64;
        let w0 = if include_omega0 { params.omega0 * nf } else { 0.0 };
        for k in 0..dc {
            let i = n * dc + k;
            let diag = w0 + params.omega_m * k as f64;
            if diag != 0.0 {
                coo.push(i, i, C64::new(diag, 0.0));
            }
            if k + 1 < dc && n > 0 && params.g != 0.0 {
                let v = C64::new(params.g * nf * ((k + 1) as f64).sqrt(), 0.0);
                coo.push(i, i + 1, v);
                coo.push(i + 1, i, v);
            }
        }
    }
    Operator::sparse(space.clone(), CsrMatrix::from(&coo), true)
}

/// Connected components of the sparsity graph, each sorted ascending.
fn blocks(h: &CsrMatrix<C64>) -> Vec<Vec<usize>> {
    let n = h.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let (offsets, cols, _) = h.csr_data();
    for i in 0..n {
        for &j in &cols[offsets[i]..offsets[i + 1]] {
            let (a, b) = (find(&mut parent, i), find(&mut parent, j));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut root_slot = vec![usize::MAX; n];
    let mut out: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        if root_slot[r] == usize::MAX {
            root_slot[r] = out.len();
            out.push(Vec::new());
        }
        out[root_slot[r]].push(i);
    }
    out
}

/// Leading `d x d` block of `h` restricted to the component `idx`.
fn sub_block(h: &CsrMatrix<C64>, idx: &[usize], local: &[usize], d: usize) -> CsrMatrix<C64> {
    let (offsets, cols, vals) = h.csr_data();
    let mut coo = CooMatrix::new(d, d);
    for (li, &gi) in idx.iter().take(d).enumerate() {
        for k in offsets[gi]..offsets[gi + 1] {
            let lj = local[cols[k]];
            if lj < d {
                coo.push(li, lj, vals[k]);
            }
        }
    }
    CsrMatrix::from(&coo)
}

fn dense_of(s: &CsrMatrix<C64>) -> DMatrix<C64> {
    let mut m = DMatrix::zeros(s.nrows(), s.ncols());
    for (i, j, v) in s.triplet_iter() {
        m[(i, j)] += *v;
    }
    m
}

fn edge_population(v: &DVector<C64>) -> f64 {
    let d = v.len();
    let g = GUARD_BAND.min(d);
    v.rows(d - g, g).iter().map(|c| c.norm_sqr()).sum()
}

struct BlockOutcome {
    values: DVector<C64>,
    basis_edge: f64,
    dropped: f64,
}

enum Stepper {
    Dense(DMatrix<C64>),
    Sparse(CsrMatrix<C64>),
}

impl Stepper {
    fn new(h: &CsrMatrix<C64>, idx: &[usize], local: &[usize], d: usize, dt: f64) -> Self {
        let sub = sub_block(h, idx, local, d);
        if d <= DENSE_BLOCK_MAX {
            Stepper::Dense(hermitian_propagator(&dense_of(&sub), dt))
        } else {
            Stepper::Sparse(sub)
        }
    }

    fn step(&self, v: &DVector<C64>, dt: f64) -> DVector<C64> {
        match self {
            Stepper::Dense(u) => u * v,
            Stepper::Sparse(s) => chebyshev_propagate(s, v, dt),
        }
    }
}

/// Smallest leading size whose tail beyond it holds at most `EDGE_TOL / 10`
/// and whose top guard levels are empty to the same level.
fn needed_size(v: &DVector<C64>) -> usize {
    let mut tail = 0.0;
    let mut m = v.len();
    while m > 0 && tail + v[m - 1].norm_sqr() <= 0.1 * EDGE_TOL {
        tail += v[m - 1].norm_sqr();
        m -= 1;
    }
    m + 2 * GUARD_BAND
}

/// Evolves one invariant block on a leading sub-block that follows the
/// support of the state: it grows by half whenever the top guard levels
/// exceed [`EDGE_TOL`] at a checkpoint (the slice is then redone from the last
/// accepted checkpoint) and shrinks when the upper third has emptied.
fn evolve_block(h: &CsrMatrix<C64>, idx: &[usize], local: &[usize], psi: &DVector<C64>, t: f64) -> BlockOutcome {
    let full = idx.len();
    let full_block = sub_block(h, idx, local, full);
    let (lo, hi) = gershgorin_bounds(&full_block);
    let z = 0.5 * (hi - lo) * t.abs();
    let slices = MIN_SLICES
        .max((z / MAX_SLICE_Z).ceil() as usize)
        .max((8.0 * z / (std::f64::consts::PI * full as f64)).ceil() as usize);
    let dt = t / slices as f64;

    let initial_edge = edge_population(psi);
    let mut d = START_BLOCK.max(needed_size(psi)).min(full);
    let mut v = psi.rows(0, d).into_owned();
    let mut stepper = Stepper::new(h, idx, local, d, dt);
    let mut worst_edge = 0.0f64;
    let mut dropped = 0.0;
    for _ in 0..slices {
        let w = loop {
            let w = stepper.step(&v, dt);
            if d < full && edge_population(&w) > EDGE_TOL {
                let grown = (d + d / 2).min(full);
                let mut bigger = DVector::zeros(grown);
                bigger.rows_mut(0, d).copy_from(&v);
                v = bigger;
                d = grown;
                stepper = Stepper::new(h, idx, local, d, dt);
                continue;
            }
            break w;
        };
        v = w;
        if d == full {
            worst_edge = worst_edge.max(edge_population(&v));
        }
        let want = START_BLOCK.max(needed_size(&v));
        if 3 * want <= 2 * d {
            dropped += v.rows(want, d - want).iter().map(|c| c.norm_sqr()).sum::<f64>();
            v = v.rows(0, want).into_owned();
            d = want;
            stepper = Stepper::new(h, idx, local, d, dt);
        }
    }
    let mut values = DVector::zeros(full);
    values.rows_mut(0, d).copy_from(&v);
    // only population transported into the top levels counts as leakage
    let basis_edge = (worst_edge - initial_edge).max(0.0);
    BlockOutcome {
        values,
        basis_edge,
        dropped,
    }
}

/// `exp(-i H t) psi0` for a time-independent Hermitian `H`.
///
/// `H` is split into its invariant blocks (connected components of the
/// sparsity pattern); each block is propagated on its own, on the smallest
/// leading sub-block whose top levels stay empty along the trajectory. Blocks
/// that reach the true basis edge with more than the default leakage budget
/// raise a truncation error; norm drift beyond [`NORM_DRIFT_TOL`] raises a
/// propagation error. The returned state's leakage adds the populations seen
/// at the basis edge.
pub fn evolve_numeric(h: &Operator, psi0: &StateVector, t: f64) -> Result<StateVector> {
    h.space().ensure_same(psi0.space())?;
    if !h.is_hermitian_hint() {
        return Err(Error::Invalid("evolve_numeric needs a Hermitian generator".into()));
    }
    if !t.is_finite() {
        return Err(Error::Invalid(format!("evolution time must be finite, got {t}")));
    }
    if t == 0.0 {
        return Ok(psi0.clone());
    }
    let csr = h.to_sparse();
    let comps = blocks(&csr);
    let mut local = vec![0usize; csr.nrows()];
    for comp in &comps {
        for (li, &gi) in comp.iter().enumerate() {
            local[gi] = li;
        }
    }
    let amps = psi0.amplitudes();
    let outcomes: Vec<Option<BlockOutcome>> = comps
        .par_iter()
        .map(|comp| {
            let psi = DVector::from_iterator(comp.len(), comp.iter().map(|&i| amps[i]));
            if psi.iter().all(|c| *c == C64::new(0.0, 0.0)) {
                return None;
            }
            Some(evolve_block(&csr, comp, &local, &psi, t))
        })
        .collect();

    let mut out = DVector::zeros(amps.len());
    let mut edge = 0.0;
    let mut dropped = 0.0;
    for (comp, res) in comps.iter().zip(outcomes) {
        if let Some(r) = res {
            for (li, &gi) in comp.iter().enumerate() {
                out[gi] = r.values[li];
            }
            edge += r.basis_edge;
            dropped += r.dropped;
        }
    }
    if edge > DEFAULT_LEAKAGE_BUDGET {
        return Err(Error::Truncation(format!(
            "population {edge:.3e} reaches the top {GUARD_BAND} levels of the basis"
        )));
    }
    let drift = (out.norm() - amps.norm()).abs();
    if drift > NORM_DRIFT_TOL {
        return Err(Error::Propagation(format!("norm drift {drift:.3e} during propagation")));
    }
    Ok(StateVector::from_amplitudes(psi0.space().clone(), out)?.with_leakage(psi0.norm_leakage() + edge + dropped))
}

/// `|initial> ⊗ |0>_c` on `space`, normalized, with the atom truncation recorded as leakage.
pub fn initial_state(initial: &AtomInitial, space: &ModeSpace) -> Result<StateVector> {
    let (da, dc) = joint_dims(space)?;
    let (atom, leak) = initial.amplitudes(da)?;
    let mut amps = DVector::zeros(da * dc);
    for n in 0..da {
        amps[n * dc] = atom[n];
    }
    Ok(StateVector::from_amplitudes(space.clone(), amps)?
        .normalized()?
        .with_leakage(leak))
}

fn joint_dims(space: &ModeSpace) -> Result<(usize, usize)> {
    if space.n_modes() != 2 || space.labels()[0] != ATOM || space.labels()[1] != CAVITY {
        return Err(Error::Dimension(format!(
            "expected the joint space [{ATOM}, {CAVITY}], got {:?}",
            space.labels()
        )));
    }
    Ok((space.dims()[0], space.dims()[1]))
}

/// Closed-form joint state `sum_n c_n e^{i Lambda^2 n^2 (tau - sin tau)} |n> ⊗ |Lambda n eta>`
/// in the interaction picture.
pub fn analytic_state(
    initial: &AtomInitial,
    params: &SystemParams,
    tau: f64,
    space: &ModeSpace,
) -> Result<EvolutionResult> {
    let (da, dc) = joint_dims(space)?;
    let (atom, atom_leak) = initial.amplitudes(da)?;
    let lam = params.lambda;
    let e = eta(tau);
    let chirp = lam * lam * (tau - tau.sin());
    let mut amps = DVector::zeros(da * dc);
    let mut leak = atom_leak;
    for n in 0..da {
        let c = atom[n];
        if c == C64::new(0.0, 0.0) {
            continue;
        }
        let nf = n as f64;
        let (cav, tail) = coherent_amplitudes(e * (lam * nf), dc);
        leak += c.norm_sqr() * tail;
        let ph = c * C64::from_polar(1.0, chirp * nf * nf);
        for k in 0..dc {
            amps[n * dc + k] = ph * cav[k];
        }
    }
    if leak > DEFAULT_LEAKAGE_BUDGET {
        return Err(Error::Truncation(format!(
            "cavity dimension {dc} loses {leak:.3e} of the closed-form state (budget {DEFAULT_LEAKAGE_BUDGET:e})"
        )));
    }
    let state = StateVector::from_amplitudes(space.clone(), amps)?
        .normalized()?
        .with_leakage(leak);
    Ok(EvolutionResult {
        state,
        tau,
        frame: Frame::Interaction,
        leakage: leak,
    })
}

/// Adds the `e^{-i w0 n t}` sector phases that the interaction picture drops.
pub fn to_lab_frame(res: &EvolutionResult, params: &SystemParams) -> Result<EvolutionResult> {
    if res.frame == Frame::Lab {
        return Ok(res.clone());
    }
    let (da, dc) = joint_dims(res.state.space())?;
    let t = params.time_for_tau(res.tau);
    let mut amps = res.state.amplitudes().clone();
    for n in 0..da {
        let ph = C64::from_polar(1.0, -params.omega0 * n as f64 * t);
        for k in 0..dc {
            amps[n * dc + k] *= ph;
        }
    }
    let state = StateVector::from_amplitudes(res.state.space().clone(), amps)?.with_leakage(res.leakage);
    Ok(EvolutionResult {
        state,
        tau: res.tau,
        frame: Frame::Lab,
        leakage: res.leakage,
    })
}

/// Numerical evolution from `initial ⊗ |0>` to `tau`. Without `w0` the result
/// is in the interaction picture of [`analytic_state`].
pub fn evolve_to_tau(
    initial: &AtomInitial,
    params: &SystemParams,
    tau: f64,
    space: &ModeSpace,
    include_omega0: bool,
) -> Result<EvolutionResult> {
    let h = build_hamiltonian(params, space, include_omega0)?;
    let psi0 = initial_state(initial, space)?;
    let state = evolve_numeric(&h, &psi0, params.time_for_tau(tau))?;
    let leakage = state.norm_leakage();
    let frame = if include_omega0 && params.omega0 != 0.0 {
        Frame::Lab
    } else {
        Frame::Interaction
    };
    Ok(EvolutionResult {
        state,
        tau,
        frame,
        leakage,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub tau: f64,
    pub atom_purity: f64,
    pub cavity_x: f64,
    pub cavity_n: f64,
    /// `|<analytic|numeric>|`.
    pub overlap: f64,
}

/// Numerical trajectory sampled at ascending `taus` (interaction picture),
/// compared against the closed form at every sample.
pub fn evolution_trace(
    initial: &AtomInitial,
    params: &SystemParams,
    taus: &[f64],
    space: &ModeSpace,
) -> Result<Vec<TraceRow>> {
    if taus.windows(2).any(|w| (w[1] - w[0]) * params.omega_m.signum() < 0.0) {
        return Err(Error::Invalid("trace times must be ordered along the evolution".into()));
    }
    let h = build_hamiltonian(params, space, false)?;
    let x_op = quadrature_operator(space, CAVITY)?;
    let n_op = number_operator(space, CAVITY)?;
    let mut state = initial_state(initial, space)?;
    let mut now = 0.0;
    let mut rows = Vec::with_capacity(taus.len());
    for &tau in taus {
        state = evolve_numeric(&h, &state, params.time_for_tau(tau - now))?;
        now = tau;
        let exact = analytic_state(initial, params, tau, space)?;
        rows.push(TraceRow {
            tau,
            atom_purity: reduce_mode(&state, ATOM)?.purity(),
            cavity_x: x_op.expectation(&state)?.re,
            cavity_n: n_op.expectation(&state)?.re,
            overlap: exact.state.inner(&state)?.norm(),
        });
    }
    Ok(rows)
}
