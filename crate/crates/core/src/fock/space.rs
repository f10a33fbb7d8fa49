use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Label conventionally used for the condensate (matter-wave) mode.
pub const ATOM: &str = "atom";
/// Label conventionally used for the cavity mode.
pub const CAVITY: &str = "cavity";

/// Truncation metadata for a product of bosonic modes.
///
/// Modes are Kronecker-ordered left to right; the first mode is the slowest
/// varying index. Joint atom-cavity spaces always put the atom first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeSpace {
    dims: Vec<usize>,
    labels: Vec<String>,
}

impl ModeSpace {
    pub fn new<S: Into<String>>(modes: impl IntoIterator<Item = (S, usize)>) -> Result<Self> {
        let (labels, dims): (Vec<String>, Vec<usize>) = modes.into_iter().map(|(l, d)| (l.into(), d)).unzip();
        if labels.is_empty() {
            return Err(Error::Dimension("a mode space needs at least one mode".into()));
        }
        for (l, &d) in labels.iter().zip(&dims) {
            if d < 2 {
                return Err(Error::Dimension(format!("mode `{l}` has dimension {d} < 2")));
            }
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::LabelCollision(l.clone()));
            }
        }
        labels
            .iter()
            .zip(&dims)
            .try_fold(1usize, |acc, (_, &d)| acc.checked_mul(d))
            .ok_or_else(|| Error::Dimension("total dimension overflows".into()))?;
        Ok(Self { dims, labels })
    }

    pub fn single(label: impl Into<String>, dim: usize) -> Result<Self> {
        Self::new([(label.into(), dim)])
    }

    /// Joint atom-cavity space, atom mode leftmost.
    pub fn atom_cavity(atom_dim: usize, cavity_dim: usize) -> Result<Self> {
        Self::new([(ATOM, atom_dim), (CAVITY, cavity_dim)])
    }

    /// Tensor product `self ⊗ other`.
    pub fn join(&self, other: &ModeSpace) -> Result<Self> {
        if let Some(l) = other.labels.iter().find(|l| self.labels.contains(l)) {
            return Err(Error::LabelCollision(l.clone()));
        }
        Self::new(
            self.labels
                .iter()
                .chain(&other.labels)
                .cloned()
                .zip(self.dims.iter().chain(&other.dims).copied()),
        )
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn n_modes(&self) -> usize {
        self.dims.len()
    }

    pub fn is_single(&self) -> bool {
        self.dims.len() == 1
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn position(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownMode(label.to_string()))
    }

    pub fn dim_of(&self, label: &str) -> Result<usize> {
        Ok(self.dims[self.position(label)?])
    }

    /// Product of the dimensions to the right of mode `pos`.
    pub(crate) fn stride(&self, pos: usize) -> usize {
        self.dims[pos + 1..].iter().product()
    }

    /// Space with only the listed mode.
    pub fn sub_space(&self, label: &str) -> Result<ModeSpace> {
        ModeSpace::single(label, self.dim_of(label)?)
    }

    pub(crate) fn ensure_same(&self, other: &ModeSpace) -> Result<()> {
        if self != other {
            return Err(Error::SpaceMismatch(format!(
                "{:?}{:?} vs {:?}{:?}",
                self.labels, self.dims, other.labels, other.dims
            )));
        }
        Ok(())
    }

    pub(crate) fn require_single(&self, what: &str) -> Result<()> {
        if !self.is_single() {
            return Err(Error::Dimension(format!(
                "{what} needs a single-mode space, got modes {:?}",
                self.labels
            )));
        }
        Ok(())
    }
}

/// Truncation policy for a mode that must hold a coherent amplitude of
/// modulus `amplitude`: `ceil(a^2 + 10 a) + 20` levels.
///
/// The Poisson tail beyond ten standard deviations above the mean is below
/// `e^-40`, and the constant guard keeps small amplitudes well resolved.
pub fn policy_dim(amplitude: f64) -> usize {
    let a = amplitude.abs();
    (a * a + 10.0 * a).ceil() as usize + 20
}
