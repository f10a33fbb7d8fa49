//! Number-state wavefunctions in the quadrature `X = (c + c^dag) / 2`.
//!
//! `psi_n(X) = (2/pi)^{1/4} (2^n n!)^{-1/2} H_n(sqrt2 X) e^{-X^2}`, so the vacuum
//! has `<X^2> = 1/4` and a coherent state `|g>` has density
//! `sqrt(2/pi) exp(-2 (X - Re g)^2)`.

use nalgebra::DVector;
use num_complex::Complex64 as C64;

const RESCALE_ABOVE: f64 = 1e200;

/// `psi_0(X) .. psi_{n_max}(X)` by the normalized three-term recurrence.
///
/// The recurrence runs on a rescaled sequence with a separately tracked log
/// scale, so far tails underflow only at the final multiplication.
pub fn quadrature_wavefunctions(n_max: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; n_max + 1];
    let mut log_scale = 0.25 * (2.0 / std::f64::consts::PI).ln() - x * x;
    let mut prev = 0.0f64;
    let mut cur = 1.0f64;
    let mut raw = vec![0.0f64; n_max + 1];
    let mut scales = vec![0.0f64; n_max + 1];
    raw[0] = cur;
    scales[0] = log_scale;
    let two_x = 2.0 * x;
    for n in 0..n_max {
        let nf = n as f64;
        // psi_{n+1} = 2 X psi_n / sqrt(n+1) - sqrt(n/(n+1)) psi_{n-1}
        let next = two_x * cur / (nf + 1.0).sqrt() - (nf / (nf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
        if cur.abs() > RESCALE_ABOVE {
            prev /= RESCALE_ABOVE;
            cur /= RESCALE_ABOVE;
            log_scale += RESCALE_ABOVE.ln();
        }
        raw[n + 1] = cur;
        scales[n + 1] = log_scale;
    }
    for ((o, r), s) in out.iter_mut().zip(&raw).zip(&scales) {
        *o = if *r == 0.0 {
            0.0
        } else {
            r.signum() * (r.abs().ln() + s).exp()
        };
    }
    out
}

/// `<X|n>` for a single `n`.
pub fn quadrature_wavefunction(n: usize, x: f64) -> f64 {
    quadrature_wavefunctions(n, x)[n]
}

/// `<X|psi>` for single-mode Fock amplitudes.
pub fn project_quadrature(amplitudes: &[C64], x: f64) -> C64 {
    if amplitudes.is_empty() {
        return C64::new(0.0, 0.0);
    }
    let psi = quadrature_wavefunctions(amplitudes.len() - 1, x);
    amplitudes.iter().zip(&psi).map(|(c, p)| c * *p).sum()
}

/// Closed-form `|<X|g>|^2` for a coherent state `|g>`.
pub fn coherent_quadrature_density(g: C64, x: f64) -> f64 {
    (2.0 / std::f64::consts::PI).sqrt() * (-2.0 * (x - g.re).powi(2)).exp()
}

/// Quadrature density `|<X|psi>|^2` of a single-mode state vector.
pub fn quadrature_density(amplitudes: &DVector<C64>, x: f64) -> f64 {
    project_quadrature(amplitudes.as_slice(), x).norm_sqr()
}
