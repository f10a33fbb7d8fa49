//! Motional transition moments of a harmonically trapped condensate and the
//! effective atom-cavity coupling derived from them.
//!
//! Along each trap axis the recoil factor `e^{i dk x}` with
//! `x = L (b + b^dag) / sqrt2` is a displacement `D(i eta)` with
//! `eta = dk L / sqrt2`, so every moment factorizes into three
//! displacement matrix elements.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::displacement_element;

/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054_571_817e-34;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapGeometry {
    /// Angular trap frequencies (rad/s).
    pub omega_trap: [f64; 3],
    /// Atomic mass (kg).
    pub mass: f64,
}

impl TrapGeometry {
    pub fn new(omega_trap: [f64; 3], mass: f64) -> Result<Self> {
        if omega_trap.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::Invalid(format!(
                "trap frequencies must be positive, got {omega_trap:?}"
            )));
        }
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::Invalid(format!("mass must be positive, got {mass}")));
        }
        Ok(Self { omega_trap, mass })
    }

    /// Oscillator lengths `L_i = sqrt(hbar / (m omega_i))` (m).
    pub fn lengths(&self) -> [f64; 3] {
        self.omega_trap.map(|w| (HBAR / (self.mass * w)).sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpticalParams {
    /// Pump Rabi frequency `Omega_p` (rad/s).
    pub rabi_pump: C64,
    /// Vacuum Rabi frequency `g_c` (rad/s).
    pub rabi_vacuum: C64,
    /// Atom-pump detuning `Delta` (rad/s), nonzero.
    pub detuning_atom: f64,
    pub k_pump: [f64; 3],
    pub k_cavity: [f64; 3],
}

impl OpticalParams {
    pub fn new(
        rabi_pump: C64,
        rabi_vacuum: C64,
        detuning_atom: f64,
        k_pump: [f64; 3],
        k_cavity: [f64; 3],
    ) -> Result<Self> {
        if !(detuning_atom.is_finite() && detuning_atom != 0.0) {
            return Err(Error::Invalid(format!(
                "atom detuning must be finite and nonzero, got {detuning_atom}"
            )));
        }
        for (name, k) in [("k_pump", k_pump), ("k_cavity", k_cavity)] {
            if !(norm3(k) > 0.0 && k.iter().all(|v| v.is_finite())) {
                return Err(Error::Invalid(format!("{name} must be a nonzero finite vector")));
            }
        }
        Ok(Self {
            rabi_pump,
            rabi_vacuum,
            detuning_atom,
            k_pump,
            k_cavity,
        })
    }

    /// Pump and cavity wave vectors of equal length `2 pi / lambda`, the pump
    /// along x and the cavity axis rotated by `theta` in the x-y plane.
    pub fn with_angle(
        rabi_pump: C64,
        rabi_vacuum: C64,
        detuning_atom: f64,
        wavelength: f64,
        theta: f64,
    ) -> Result<Self> {
        if !(wavelength.is_finite() && wavelength > 0.0) {
            return Err(Error::Invalid(format!("wavelength must be positive, got {wavelength}")));
        }
        let k = 2.0 * std::f64::consts::PI / wavelength;
        Self::new(
            rabi_pump,
            rabi_vacuum,
            detuning_atom,
            [k, 0.0, 0.0],
            [k * theta.cos(), k * theta.sin(), 0.0],
        )
    }

    /// Recoil `dk = k_p - k_c`.
    pub fn delta_k(&self) -> [f64; 3] {
        [
            self.k_pump[0] - self.k_cavity[0],
            self.k_pump[1] - self.k_cavity[1],
            self.k_pump[2] - self.k_cavity[2],
        ]
    }

    /// `Omega_p g_c^* / (2 Delta)`.
    pub fn prefactor(&self) -> C64 {
        self.rabi_pump * self.rabi_vacuum.conj() / (2.0 * self.detuning_atom)
    }
}

fn norm3(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Recoil magnitude `2 (2 pi / lambda) sin(theta / 2)` for equal-length beams
/// crossing at angle `theta`.
pub fn recoil_from_angle(wavelength: f64, theta: f64) -> f64 {
    4.0 * std::f64::consts::PI / wavelength * (0.5 * theta).sin().abs()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingResult {
    /// `G = G_{0,0}` (rad/s).
    pub g: C64,
    pub delta_k: [f64; 3],
    pub lamb_dicke: [f64; 3],
    pub validity_ratio: f64,
    /// `Lambda = -G / omega_m` after the phase of `G` is absorbed into the cavity mode.
    pub lambda: f64,
    /// Phase of `G` absorbed into the cavity operator, in `(-pi/2, pi/2]`.
    pub cavity_phase: f64,
    pub omega_m: f64,
}

/// Signed per-axis `eta_i = dk_i L_i / sqrt2`.
fn signed_eta(delta_k: [f64; 3], trap: &TrapGeometry) -> [f64; 3] {
    let l = trap.lengths();
    [0, 1, 2].map(|i| delta_k[i] * l[i] / std::f64::consts::SQRT_2)
}

/// `|dk_i| L_i / sqrt2` per axis.
pub fn lamb_dicke_parameters(delta_k: [f64; 3], trap: &TrapGeometry) -> [f64; 3] {
    signed_eta(delta_k, trap).map(f64::abs)
}

/// One-dimensional oscillator element `<n| exp(i eta (b + b^dag)) |m>`.
pub fn axis_moment(n: usize, m: usize, eta: f64) -> C64 {
    displacement_element(n, m, C64::new(0.0, eta))
}

/// `G_{n,m}` for the 3-D harmonic trap.
pub fn transition_moment(
    n: [usize; 3],
    m: [usize; 3],
    delta_k: [f64; 3],
    trap: &TrapGeometry,
    optics: &OpticalParams,
) -> C64 {
    let eta = signed_eta(delta_k, trap);
    (0..3).fold(optics.prefactor(), |acc, i| acc * axis_moment(n[i], m[i], eta[i]))
}

/// Largest `|G_{n,0}| / |G_{0,0}|` over `0 < n_x + n_y + n_z <= n_max`.
pub fn single_mode_validity(
    delta_k: [f64; 3],
    trap: &TrapGeometry,
    optics: &OpticalParams,
    n_max: usize,
) -> Result<f64> {
    if n_max < 1 {
        return Err(Error::Invalid("single_mode_validity needs n_max >= 1".into()));
    }
    let g00 = transition_moment([0; 3], [0; 3], delta_k, trap, optics);
    if g00.norm() == 0.0 {
        return Err(Error::DegenerateGeometry("G_00 vanishes".into()));
    }
    let eta = signed_eta(delta_k, trap);
    // per-axis ratios |M(n,0)| / |M(0,0)|; the prefactor cancels
    let axis: Vec<Vec<f64>> = eta
        .iter()
        .map(|&e| {
            let base = axis_moment(0, 0, e).norm();
            (0..=n_max).map(|n| axis_moment(n, 0, e).norm() / base).collect()
        })
        .collect();
    let mut worst = 0.0f64;
    for nx in 0..=n_max {
        for ny in 0..=n_max - nx {
            for nz in 0..=n_max - nx - ny {
                if nx + ny + nz == 0 {
                    continue;
                }
                worst = worst.max(axis[0][nx] * axis[1][ny] * axis[2][nz]);
            }
        }
    }
    Ok(worst)
}

/// Orders of the validity search used by [`effective_coupling`].
pub const VALIDITY_N_MAX: usize = 4;

/// Effective coupling `G = G_{0,0}` and `Lambda = -G / omega_m`.
pub fn effective_coupling(
    optics: &OpticalParams,
    delta_k: [f64; 3],
    trap: &TrapGeometry,
    omega_m: f64,
) -> Result<CouplingResult> {
    if omega_m == 0.0 {
        return Err(Error::Resonance);
    }
    if !omega_m.is_finite() {
        return Err(Error::Invalid(format!("omega_m must be finite, got {omega_m}")));
    }
    let g = transition_moment([0; 3], [0; 3], delta_k, trap, optics);
    let validity_ratio = single_mode_validity(delta_k, trap, optics, VALIDITY_N_MAX)?;
    let mut phase = g.arg();
    if phase > std::f64::consts::FRAC_PI_2 {
        phase -= std::f64::consts::PI;
    } else if phase <= -std::f64::consts::FRAC_PI_2 {
        phase += std::f64::consts::PI;
    }
    let g_real = (g * C64::from_polar(1.0, -phase)).re;
    Ok(CouplingResult {
        g,
        delta_k,
        lamb_dicke: lamb_dicke_parameters(delta_k, trap),
        validity_ratio,
        lambda: -g_real / omega_m,
        cavity_phase: phase,
        omega_m,
    })
}

/// One row of a recoil sweep along a single trap axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoilRow {
    /// Recoil along the axis in units of `1 / L_axis`.
    pub dk_l: f64,
    pub eta: f64,
    pub g00: C64,
    /// `|G_{m,0}| / |G_{0,0}|` for `m = 1..=m_max` along the axis.
    pub ratios: Vec<f64>,
}

/// Sweep `dk` along `axis` (values in units of `1 / L_axis`).
pub fn recoil_sweep(
    trap: &TrapGeometry,
    optics: &OpticalParams,
    axis: usize,
    dk_l: &[f64],
    m_max: usize,
) -> Result<Vec<RecoilRow>> {
    if axis > 2 {
        return Err(Error::Invalid(format!("axis must be 0, 1 or 2, got {axis}")));
    }
    let l = trap.lengths()[axis];
    dk_l.iter()
        .map(|&x| {
            let mut dk = [0.0; 3];
            dk[axis] = x / l;
            let g00 = transition_moment([0; 3], [0; 3], dk, trap, optics);
            if g00.norm() == 0.0 {
                return Err(Error::DegenerateGeometry("G_00 vanishes".into()));
            }
            let ratios = (1..=m_max)
                .map(|m| {
                    let mut n = [0usize; 3];
                    n[axis] = m;
                    transition_moment(n, [0; 3], dk, trap, optics).norm() / g00.norm()
                })
                .collect();
            Ok(RecoilRow {
                dk_l: x,
                eta: x / std::f64::consts::SQRT_2,
                g00,
                ratios,
            })
        })
        .collect()
}
