use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use super::space::ModeSpace;
use crate::error::{Error, Result};
use crate::special::{ln_factorial, poisson_pmf};

/// Default cap on probability discarded when truncating a state at construction.
pub const DEFAULT_LEAKAGE_BUDGET: f64 = 1e-10;

/// Pure state on a (possibly joint) truncated number basis.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    space: ModeSpace,
    amplitudes: DVector<C64>,
    norm_leakage: f64,
}

impl StateVector {
    /// Wraps raw amplitudes. The vector is not renormalized.
    pub fn from_amplitudes(space: ModeSpace, amplitudes: DVector<C64>) -> Result<Self> {
        if amplitudes.len() != space.total_dim() {
            return Err(Error::Dimension(format!(
                "{} amplitudes for a space of dimension {}",
                amplitudes.len(),
                space.total_dim()
            )));
        }
        Ok(Self {
            space,
            amplitudes,
            norm_leakage: 0.0,
        })
    }

    pub(crate) fn from_parts(space: ModeSpace, amplitudes: DVector<C64>, norm_leakage: f64) -> Self {
        debug_assert_eq!(amplitudes.len(), space.total_dim());
        Self {
            space,
            amplitudes,
            norm_leakage,
        }
    }

    pub fn space(&self) -> &ModeSpace {
        &self.space
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> DVector<C64> {
        self.amplitudes
    }

    /// Probability discarded by truncation when this state was built.
    pub fn norm_leakage(&self) -> f64 {
        self.norm_leakage
    }

    pub fn with_leakage(mut self, leakage: f64) -> Self {
        self.norm_leakage = leakage;
        self
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// Returns the normalized state; a zero vector is rejected.
    pub fn normalized(mut self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::Invalid("cannot normalize a zero or non-finite state".into()));
        }
        self.amplitudes.unscale_mut(n);
        Ok(self)
    }

    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        self.space.ensure_same(&other.space)?;
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// Probabilities `|c_i|^2` in Kronecker order.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|c| c.norm_sqr()).collect()
    }

    /// Zero-pads a single-mode state to a larger truncation.
    pub fn embed(&self, new_dim: usize) -> Result<Self> {
        self.space.require_single("embed")?;
        let dim = self.space.total_dim();
        if new_dim < dim {
            return Err(Error::Dimension(format!("cannot embed dimension {dim} into {new_dim}")));
        }
        let label = &self.space.labels()[0];
        let mut amps = DVector::zeros(new_dim);
        amps.rows_mut(0, dim).copy_from(&self.amplitudes);
        Ok(Self::from_parts(
            ModeSpace::single(label.clone(), new_dim)?,
            amps,
            self.norm_leakage,
        ))
    }
}

/// `|n>` on a single-mode space.
pub fn number_state(space: &ModeSpace, mode: &str, n: usize) -> Result<StateVector> {
    space.require_single("number_state")?;
    let dim = space.dim_of(mode)?;
    if n >= dim {
        return Err(Error::Dimension(format!(
            "number state |{n}> needs dimension > {n}, have {dim}"
        )));
    }
    let mut amps = DVector::zeros(dim);
    amps[n] = C64::new(1.0, 0.0);
    Ok(StateVector::from_parts(space.clone(), amps, 0.0))
}

/// Coherent-state amplitudes `e^{-|a|^2/2} a^n / sqrt(n!)` for `n < dim`, unnormalized,
/// together with the exact Poisson tail beyond the truncation.
pub(crate) fn coherent_amplitudes(alpha: C64, dim: usize) -> (DVector<C64>, f64) {
    let x = alpha.norm_sqr();
    let mut amps = DVector::zeros(dim);
    if x == 0.0 {
        amps[0] = C64::new(1.0, 0.0);
        return (amps, 0.0);
    }
    let ln_r = alpha.norm().ln();
    let theta = alpha.arg();
    for n in 0..dim {
        let ln_mag = -0.5 * x + n as f64 * ln_r - 0.5 * ln_factorial(n);
        amps[n] = C64::from_polar(ln_mag.exp(), n as f64 * theta);
    }
    (amps, poisson_tail(x, dim))
}

/// `P(N >= dim)` for `N ~ Poisson(mean)`.
pub(crate) fn poisson_tail(mean: f64, dim: usize) -> f64 {
    if mean == 0.0 {
        return 0.0;
    }
    if (dim as f64) <= mean {
        let head: f64 = (0..dim).map(|n| poisson_pmf(n, mean)).sum();
        return (1.0 - head).max(0.0);
    }
    let mut tail = 0.0;
    let mut n = dim;
    loop {
        let p = poisson_pmf(n, mean);
        tail += p;
        if p <= 1e-30 * tail || p == 0.0 {
            break;
        }
        n += 1;
    }
    tail
}

/// Truncated, renormalized coherent state `|alpha>` with the default leakage budget.
pub fn coherent_state(space: &ModeSpace, mode: &str, alpha: C64) -> Result<StateVector> {
    coherent_state_with_budget(space, mode, alpha, DEFAULT_LEAKAGE_BUDGET)
}

pub fn coherent_state_with_budget(
    space: &ModeSpace,
    mode: &str,
    alpha: C64,
    leakage_budget: f64,
) -> Result<StateVector> {
    space.require_single("coherent_state")?;
    let dim = space.dim_of(mode)?;
    let (amps, leakage) = coherent_amplitudes(alpha, dim);
    if leakage > leakage_budget {
        return Err(Error::Truncation(format!(
            "coherent state |{alpha}> loses {leakage:.3e} beyond dimension {dim} (budget {leakage_budget:e})"
        )));
    }
    let s = StateVector::from_parts(space.clone(), amps, leakage).normalized()?;
    Ok(s)
}

/// Tensor product `a ⊗ b`; leakages add.
pub fn join_modes(a: &StateVector, b: &StateVector) -> Result<StateVector> {
    let space = a.space.join(&b.space)?;
    let amps = a.amplitudes.kronecker(&b.amplitudes);
    Ok(StateVector::from_parts(space, amps, a.norm_leakage + b.norm_leakage))
}

/// `|<a|b>|^2`.
pub fn fidelity(a: &StateVector, b: &StateVector) -> Result<f64> {
    Ok(a.inner(b)?.norm_sqr())
}

/// Mixed state on a truncated number basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    space: ModeSpace,
    matrix: DMatrix<C64>,
}

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-10;
pub const EIGEN_FLOOR: f64 = -1e-10;

impl DensityOperator {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(space: ModeSpace, matrix: DMatrix<C64>) -> Result<Self> {
        let d = space.total_dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::Dimension(format!(
                "density matrix is {}x{}, space has dimension {d}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let herm = hermitian_defect(&matrix);
        if herm > HERMITIAN_TOL {
            return Err(Error::Invalid(format!(
                "density matrix not Hermitian (defect {herm:e})"
            )));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::Invalid(format!("density matrix trace {tr} != 1")));
        }
        let min_eig = matrix
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .fold(f64::INFINITY, |m, &v| m.min(v));
        if min_eig < EIGEN_FLOOR {
            return Err(Error::Invalid(format!("density matrix has eigenvalue {min_eig:e} < 0")));
        }
        Ok(Self { space, matrix })
    }

    /// Symmetrizes and rescales to unit trace before validating.
    pub fn normalized(space: ModeSpace, matrix: DMatrix<C64>) -> Result<Self> {
        let mut m = (&matrix + matrix.adjoint()) * C64::new(0.5, 0.0);
        let tr = m.trace().re;
        if tr <= 0.0 {
            return Err(Error::Invalid("density matrix has non-positive trace".into()));
        }
        m.unscale_mut(tr);
        Self::new(space, m)
    }

    pub(crate) fn from_parts(space: ModeSpace, matrix: DMatrix<C64>) -> Self {
        Self { space, matrix }
    }

    pub fn from_pure(state: &StateVector) -> Self {
        let a = state.amplitudes();
        Self {
            space: state.space().clone(),
            matrix: a * a.adjoint(),
        }
    }

    /// Diagonal mixture `sum_n p_n |n><n|` on a single mode.
    pub fn diagonal(space: ModeSpace, populations: &[f64]) -> Result<Self> {
        space.require_single("diagonal density")?;
        if populations.len() > space.total_dim() {
            return Err(Error::Dimension("more populations than basis states".into()));
        }
        let mut m = DMatrix::zeros(space.total_dim(), space.total_dim());
        for (i, &p) in populations.iter().enumerate() {
            m[(i, i)] = C64::new(p, 0.0);
        }
        Self::new(space, m)
    }

    pub fn space(&self) -> &ModeSpace {
        &self.space
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn populations(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().map(|c| c.re).collect()
    }

    /// `<psi| rho |psi>`.
    pub fn fidelity_with_pure(&self, psi: &StateVector) -> Result<f64> {
        self.space.ensure_same(psi.space())?;
        let a = psi.amplitudes();
        Ok(a.dotc(&(&self.matrix * a)).re)
    }

    /// Zero-pads a single-mode density operator to a larger truncation.
    pub fn embed(&self, new_dim: usize) -> Result<Self> {
        self.space.require_single("embed")?;
        let dim = self.space.total_dim();
        if new_dim < dim {
            return Err(Error::Dimension(format!("cannot embed dimension {dim} into {new_dim}")));
        }
        let mut m = DMatrix::zeros(new_dim, new_dim);
        m.view_mut((0, 0), (dim, dim)).copy_from(&self.matrix);
        let label = self.space.labels()[0].clone();
        Ok(Self::from_parts(ModeSpace::single(label, new_dim)?, m))
    }

    /// Highest occupied level, ignoring populations below `floor`.
    pub fn support_max(&self, floor: f64) -> usize {
        self.populations().iter().rposition(|&p| p > floor).unwrap_or(0)
    }
}

pub(crate) fn hermitian_defect(m: &DMatrix<C64>) -> f64 {
    let mut worst = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..=j {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Anything that can be reduced to a single-mode density operator.
pub trait ReduceMode {
    fn reduce_mode(&self, keep: &str) -> Result<DensityOperator>;
}

fn split_dims(space: &ModeSpace, keep: &str) -> Result<(usize, usize, usize)> {
    let pos = space.position(keep)?;
    let d = space.dims()[pos];
    let inner = space.stride(pos);
    let outer = space.total_dim() / (d * inner);
    Ok((outer, d, inner))
}

impl ReduceMode for StateVector {
    fn reduce_mode(&self, keep: &str) -> Result<DensityOperator> {
        let (outer, d, inner) = split_dims(&self.space, keep)?;
        let a = &self.amplitudes;
        let mut out = DMatrix::<C64>::zeros(d, d);
        for hi in 0..outer {
            for lo in 0..inner {
                let base = hi * d * inner + lo;
                for i in 0..d {
                    let ai = a[base + i * inner];
                    if ai == C64::new(0.0, 0.0) {
                        continue;
                    }
                    for j in 0..d {
                        out[(i, j)] += ai * a[base + j * inner].conj();
                    }
                }
            }
        }
        Ok(DensityOperator::from_parts(self.space.sub_space(keep)?, out))
    }
}

impl ReduceMode for DensityOperator {
    fn reduce_mode(&self, keep: &str) -> Result<DensityOperator> {
        let (outer, d, inner) = split_dims(&self.space, keep)?;
        let m = &self.matrix;
        let mut out = DMatrix::<C64>::zeros(d, d);
        for hi in 0..outer {
            for lo in 0..inner {
                let base = hi * d * inner + lo;
                for i in 0..d {
                    for j in 0..d {
                        out[(i, j)] += m[(base + i * inner, base + j * inner)];
                    }
                }
            }
        }
        Ok(DensityOperator::from_parts(self.space.sub_space(keep)?, out))
    }
}

/// Partial trace over every mode except `keep`.
pub fn reduce_mode<R: ReduceMode + ?Sized>(rho: &R, keep: &str) -> Result<DensityOperator> {
    rho.reduce_mode(keep)
}

/// `sum_n (-1)^n rho_nn` on a single mode.
pub fn parity_expectation(rho: &DensityOperator) -> Result<f64> {
    rho.space().require_single("parity_expectation")?;
    Ok(rho
        .matrix()
        .diagonal()
        .iter()
        .enumerate()
        .map(|(n, c)| if n % 2 == 0 { c.re } else { -c.re })
        .sum())
}
