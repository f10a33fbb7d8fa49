use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CsrMatrix};
use num_complex::Complex64 as C64;

use super::expm::hermitian_propagator;
use super::space::{policy_dim, ModeSpace};
use super::state::{hermitian_defect, StateVector};
use crate::error::{Error, Result};

pub const UNITARITY_TOL: f64 = 1e-9;
pub const GUARD_BAND: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub enum Matrix {
    Dense(DMatrix<C64>),
    Sparse(CsrMatrix<C64>),
}

/// Linear operator on a truncated mode space.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    space: ModeSpace,
    matrix: Matrix,
    hermitian_hint: bool,
}

impl Operator {
    pub fn dense(space: ModeSpace, m: DMatrix<C64>, hermitian_hint: bool) -> Result<Self> {
        let d = space.total_dim();
        if m.nrows() != d || m.ncols() != d {
            return Err(Error::Dimension(format!(
                "operator is {}x{}, space has dimension {d}",
                m.nrows(),
                m.ncols()
            )));
        }
        if hermitian_hint {
            let defect = hermitian_defect(&m);
            if defect > 1e-12 {
                return Err(Error::Invalid(format!(
                    "operator flagged Hermitian has defect {defect:e}"
                )));
            }
        }
        Ok(Self {
            space,
            matrix: Matrix::Dense(m),
            hermitian_hint,
        })
    }

    pub fn sparse(space: ModeSpace, m: CsrMatrix<C64>, hermitian_hint: bool) -> Result<Self> {
        let d = space.total_dim();
        if m.nrows() != d || m.ncols() != d {
            return Err(Error::Dimension(format!(
                "operator is {}x{}, space has dimension {d}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(Self {
            space,
            matrix: Matrix::Sparse(m),
            hermitian_hint,
        })
    }

    pub fn space(&self) -> &ModeSpace {
        &self.space
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn is_hermitian_hint(&self) -> bool {
        self.hermitian_hint
    }

    pub fn dim(&self) -> usize {
        self.space.total_dim()
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        match &self.matrix {
            Matrix::Dense(m) => m.clone(),
            Matrix::Sparse(s) => {
                let mut m = DMatrix::zeros(s.nrows(), s.ncols());
                for (i, j, v) in s.triplet_iter() {
                    m[(i, j)] += *v;
                }
                m
            }
        }
    }

    pub fn to_sparse(&self) -> CsrMatrix<C64> {
        match &self.matrix {
            Matrix::Sparse(s) => s.clone(),
            Matrix::Dense(m) => {
                let mut coo = CooMatrix::new(m.nrows(), m.ncols());
                for j in 0..m.ncols() {
                    for i in 0..m.nrows() {
                        if m[(i, j)] != C64::new(0.0, 0.0) {
                            coo.push(i, j, m[(i, j)]);
                        }
                    }
                }
                CsrMatrix::from(&coo)
            }
        }
    }

    pub fn apply_vec(&self, v: &DVector<C64>) -> DVector<C64> {
        match &self.matrix {
            Matrix::Dense(m) => m * v,
            Matrix::Sparse(s) => {
                let (offsets, cols, vals) = s.csr_data();
                DVector::from_fn(s.nrows(), |i, _| {
                    (offsets[i]..offsets[i + 1]).map(|k| vals[k] * v[cols[k]]).sum()
                })
            }
        }
    }

    pub fn apply(&self, psi: &StateVector) -> Result<StateVector> {
        self.space.ensure_same(psi.space())?;
        Ok(StateVector::from_parts(
            self.space.clone(),
            self.apply_vec(psi.amplitudes()),
            psi.norm_leakage(),
        ))
    }

    /// `<psi| O |psi>`.
    pub fn expectation(&self, psi: &StateVector) -> Result<C64> {
        self.space.ensure_same(psi.space())?;
        Ok(psi.amplitudes().dotc(&self.apply_vec(psi.amplitudes())))
    }

    pub fn adjoint(&self) -> Operator {
        let matrix = match &self.matrix {
            Matrix::Dense(m) => Matrix::Dense(m.adjoint()),
            Matrix::Sparse(s) => {
                let t = s.transpose();
                let (offsets, cols, vals) = t.csr_data();
                let conj: Vec<C64> = vals.iter().map(|v| v.conj()).collect();
                Matrix::Sparse(
                    CsrMatrix::try_from_csr_data(t.nrows(), t.ncols(), offsets.to_vec(), cols.to_vec(), conj)
                        .expect("transpose keeps a valid pattern"),
                )
            }
        };
        Operator {
            space: self.space.clone(),
            matrix,
            hermitian_hint: self.hermitian_hint,
        }
    }

    /// Dense product `self * rhs`.
    pub fn compose(&self, rhs: &Operator) -> Result<Operator> {
        self.space.ensure_same(&rhs.space)?;
        Ok(Operator {
            space: self.space.clone(),
            matrix: Matrix::Dense(self.to_dense() * rhs.to_dense()),
            hermitian_hint: false,
        })
    }

    /// Largest entry of `|U^dag U - I|` restricted to levels `< dim - guard` of every mode.
    pub fn unitarity_defect(&self, guard: usize) -> f64 {
        let u = self.to_dense();
        let g = u.adjoint() * &u;
        let keep: Vec<usize> = (0..self.dim())
            .filter(|&idx| {
                let mut rem = idx;
                self.space.dims().iter().rev().all(|&d| {
                    let level = rem % d;
                    rem /= d;
                    level + guard < d
                })
            })
            .collect();
        let mut worst = 0.0f64;
        for &i in &keep {
            for &j in &keep {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - C64::new(target, 0.0)).norm());
            }
        }
        worst
    }
}

fn ladder_triplets(space: &ModeSpace, mode: &str) -> Result<Vec<(usize, usize, C64)>> {
    let pos = space.position(mode)?;
    let d = space.dims()[pos];
    let inner = space.stride(pos);
    let outer = space.total_dim() / (d * inner);
    let mut out = Vec::with_capacity(outer * (d - 1) * inner);
    for hi in 0..outer {
        for n in 1..d {
            let amp = C64::new((n as f64).sqrt(), 0.0);
            for lo in 0..inner {
                let row = hi * d * inner + (n - 1) * inner + lo;
                let col = hi * d * inner + n * inner + lo;
                out.push((row, col, amp));
            }
        }
    }
    Ok(out)
}

fn csr_from(dim: usize, triplets: impl IntoIterator<Item = (usize, usize, C64)>) -> CsrMatrix<C64> {
    let mut coo = CooMatrix::new(dim, dim);
    for (i, j, v) in triplets {
        coo.push(i, j, v);
    }
    CsrMatrix::from(&coo)
}

/// Annihilation operator of `mode`, identity on the other modes.
pub fn mode_annihilation(space: &ModeSpace, mode: &str) -> Result<Operator> {
    let t = ladder_triplets(space, mode)?;
    Operator::sparse(space.clone(), csr_from(space.total_dim(), t), false)
}

/// Number operator `c^dag c` of `mode`.
pub fn number_operator(space: &ModeSpace, mode: &str) -> Result<Operator> {
    let pos = space.position(mode)?;
    let d = space.dims()[pos];
    let inner = space.stride(pos);
    let t = (0..space.total_dim()).map(|idx| (idx, idx, C64::new(((idx / inner) % d) as f64, 0.0)));
    Operator::sparse(space.clone(), csr_from(space.total_dim(), t), true)
}

/// Quadrature `X = (c + c^dag) / 2` of `mode`; vacuum variance is 1/4.
pub fn quadrature_operator(space: &ModeSpace, mode: &str) -> Result<Operator> {
    let t = ladder_triplets(space, mode)?;
    let half = C64::new(0.5, 0.0);
    let both = t.iter().flat_map(|&(r, c, v)| [(r, c, v * half), (c, r, v * half)]);
    Operator::sparse(space.clone(), csr_from(space.total_dim(), both), true)
}

/// Guard band for unitarity checks on a truncated `D(beta)`: level `n` is
/// displaced over roughly `2|beta| sqrt(n) + |beta|^2` levels, so the fixed
/// band is widened by that spread at the top of the basis.
pub fn displacement_guard(dim: usize, beta: C64) -> usize {
    let b = beta.norm();
    GUARD_BAND + (2.0 * b * (dim as f64).sqrt() + b * b).ceil() as usize
}

/// Hermitian generator `i (beta c^dag - beta^* c)` on a single mode of dimension `dim`,
/// so that `D(beta) = exp(-i K)`.
fn displacement_generator(dim: usize, beta: C64) -> DMatrix<C64> {
    let mut k = DMatrix::<C64>::zeros(dim, dim);
    let i = C64::new(0.0, 1.0);
    for n in 1..dim {
        let s = (n as f64).sqrt();
        // <n| c^dag |n-1> = sqrt(n), <n-1| c |n> = sqrt(n)
        k[(n, n - 1)] = i * beta * s;
        k[(n - 1, n)] = -i * beta.conj() * s;
    }
    k
}

/// Displacement operator `D(beta) = exp(beta c^dag - beta^* c)` on a single-mode space.
///
/// The exponential is taken in a padded basis and then restricted, so matrix
/// elements between levels well below the truncation are those of the
/// untruncated operator.
pub fn displacement_operator(space: &ModeSpace, mode: &str, beta: C64) -> Result<Operator> {
    space.require_single("displacement_operator")?;
    let dim = space.dim_of(mode)?;
    if 4.0 * beta.norm_sqr() >= dim as f64 {
        return Err(Error::Truncation(format!(
            "|beta|^2 = {:.3} is within a factor 4 of dimension {dim}",
            beta.norm_sqr()
        )));
    }
    if beta == C64::new(0.0, 0.0) {
        return Operator::dense(space.clone(), DMatrix::identity(dim, dim), false);
    }
    let padded = dim + policy_dim(beta.norm());
    let k = displacement_generator(padded, beta);
    let full = hermitian_propagator(&k, 1.0);
    let d = full.view((0, 0), (dim, dim)).into_owned();
    Operator::dense(space.clone(), d, false)
}
