//! Matrix exponentials and Hermitian propagators.
//!
//! Three independent routes are provided:
//!
//! * [`expm`] — scaling and squaring with a degree-13 Padé approximant, for
//!   arbitrary square matrices.
//! * [`hermitian_propagator`] — `exp(-i H t)` from the eigendecomposition of a
//!   Hermitian `H`.
//! * [`chebyshev_propagate`] — `exp(-i H t) psi` for a sparse Hermitian `H`
//!   without forming the propagator, by Chebyshev expansion with Bessel
//!   coefficients.

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CsrMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::special::bessel_j_sequence;

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];
const THETA13: f64 = 5.371920351148152;

fn norm1(a: &DMatrix<C64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `exp(a)` by scaling and squaring with a [13/13] Padé approximant.
pub fn expm(a: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Dimension("expm needs a square matrix".into()));
    }
    let nrm = norm1(a);
    if !nrm.is_finite() {
        return Err(Error::Invalid("expm input has non-finite entries".into()));
    }
    let s = if nrm > THETA13 {
        (nrm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a * C64::new(2f64.powi(-s), 0.0);

    let ident = DMatrix::<C64>::identity(n, n);
    let a2 = &scaled * &scaled;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = |k: usize| C64::new(PADE13[k], 0.0);

    let inner_u = &a6 * b(13) + &a4 * b(11) + &a2 * b(9);
    let u = &scaled * (&a6 * inner_u + &a6 * b(7) + &a4 * b(5) + &a2 * b(3) + &ident * b(1));
    let inner_v = &a6 * b(12) + &a4 * b(10) + &a2 * b(8);
    let v = &a6 * inner_v + &a6 * b(6) + &a4 * b(4) + &a2 * b(2) + &ident * b(0);

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .ok_or_else(|| Error::Propagation("Padé denominator is singular".into()))?;
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

/// `exp(-i h t)` for Hermitian `h`, by eigendecomposition.
pub fn hermitian_propagator(h: &DMatrix<C64>, t: f64) -> DMatrix<C64> {
    let eig = h.clone().symmetric_eigen();
    let phases = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| C64::from_polar(1.0, -l * t)),
    );
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (mut col, ph) in scaled.column_iter_mut().zip(phases.iter()) {
        col *= *ph;
    }
    scaled * v.adjoint()
}

/// Gershgorin interval enclosing the spectrum of a Hermitian CSR matrix.
pub fn gershgorin_bounds(h: &CsrMatrix<C64>) -> (f64, f64) {
    let (offsets, cols, vals) = h.csr_data();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..h.nrows() {
        let mut diag = 0.0;
        let mut radius = 0.0;
        for k in offsets[i]..offsets[i + 1] {
            if cols[k] == i {
                diag += vals[k].re;
            } else {
                radius += vals[k].norm();
            }
        }
        lo = lo.min(diag - radius);
        hi = hi.max(diag + radius);
    }
    if h.nrows() == 0 {
        (0.0, 0.0)
    } else {
        (lo, hi)
    }
}

fn spmv_shifted(h: &CsrMatrix<C64>, x: &[C64], center: f64, inv_half: f64, out: &mut [C64]) {
    let (offsets, cols, vals) = h.csr_data();
    for i in 0..h.nrows() {
        let mut acc = C64::new(0.0, 0.0);
        for k in offsets[i]..offsets[i + 1] {
            acc += vals[k] * x[cols[k]];
        }
        out[i] = (acc - x[i] * center) * inv_half;
    }
}

/// `exp(-i h t) psi` for sparse Hermitian `h` by Chebyshev expansion.
///
/// The expansion is truncated once the Bessel coefficients fall below
/// `1e-17` past the turning index, which keeps the error at the level of
/// double-precision rounding.
pub fn chebyshev_propagate(h: &CsrMatrix<C64>, psi: &DVector<C64>, t: f64) -> DVector<C64> {
    let n = psi.len();
    if t == 0.0 || n == 0 {
        return psi.clone();
    }
    let (lo, hi) = gershgorin_bounds(h);
    let center = 0.5 * (hi + lo);
    let half = (0.5 * (hi - lo)).max(1e-300);
    let z = (half * t).abs();
    let kmax = (z + 30.0 * z.cbrt() + 60.0).ceil() as usize;
    let bessel = bessel_j_sequence(z, kmax);
    let sign = if t >= 0.0 { 1.0 } else { -1.0 };
    // coefficient of T_k: (2 - delta_k0) (-i sign)^k J_k(|half t|)
    let step = C64::new(0.0, -sign);

    let inv_half = 1.0 / half;
    let mut prev: Vec<C64> = psi.iter().copied().collect();
    let mut cur = vec![C64::new(0.0, 0.0); n];
    spmv_shifted(h, &prev, center, inv_half, &mut cur);
    let mut acc: Vec<C64> = prev.iter().map(|v| v * bessel[0]).collect();
    let mut phase = step;
    let c1 = phase * (2.0 * bessel[1]);
    for (a, v) in acc.iter_mut().zip(&cur) {
        *a += v * c1;
    }
    let (offsets, cols, vals) = h.csr_data();
    let two_inv_half = 2.0 * inv_half;
    let mut quiet = 0usize;
    for (k, &jk) in bessel.iter().enumerate().take(kmax + 1).skip(2) {
        phase *= step;
        let ck = phase * (2.0 * jk);
        // T_k = 2 H~ T_{k-1} - T_{k-2}, written over T_{k-2} in place
        for i in 0..n {
            let mut y = C64::new(0.0, 0.0);
            for p in offsets[i]..offsets[i + 1] {
                y += vals[p] * cur[cols[p]];
            }
            let next = (y - cur[i] * center) * two_inv_half - prev[i];
            prev[i] = next;
            acc[i] += ck * next;
        }
        std::mem::swap(&mut prev, &mut cur);
        if (k as f64) > z && jk.abs() < 1e-17 {
            quiet += 1;
            if quiet >= 3 {
                break;
            }
        } else {
            quiet = 0;
        }
    }
    let global = C64::from_polar(1.0, -center * t);
    DVector::from_iterator(n, acc.into_iter().map(|v| v * global))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::max_entry_norm;
    use nalgebra_sparse::CooMatrix;

    fn random_hermitian(n: usize, seed: u64) -> DMatrix<C64> {
        // small LCG keeps this test free of RNG dependencies
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let m = DMatrix::<C64>::from_fn(n, n, |_, _| C64::new(next(), next()));
        (&m + m.adjoint()) * C64::new(0.5, 0.0)
    }

    #[test]
    fn pade_matches_taylor_series_on_small_matrix() {
        let a = random_hermitian(6, 1) * C64::new(0.0, -0.7);
        let e = expm(&a).unwrap();
        // direct Taylor sum to high order as an oracle
        let mut term = DMatrix::<C64>::identity(6, 6);
        let mut sum = term.clone();
        for k in 1..60 {
            term = &term * &a / C64::new(k as f64, 0.0);
            sum += &term;
        }
        assert!(max_entry_norm(&(e - sum)) < 1e-13);
    }

    #[test]
    fn pade_and_eigen_routes_agree_with_scaling() {
        let h = random_hermitian(12, 7) * C64::new(40.0, 0.0);
        let t = 0.37;
        let a = expm(&(&h * C64::new(0.0, -t))).unwrap();
        let b = hermitian_propagator(&h, t);
        assert!(max_entry_norm(&(&a - &b)) < 1e-10);
        let unit = b.adjoint() * &b - DMatrix::identity(12, 12);
        assert!(max_entry_norm(&unit) < 1e-12);
    }

    #[test]
    fn chebyshev_matches_eigen_route() {
        let h = random_hermitian(30, 3) * C64::new(25.0, 0.0);
        let mut coo = CooMatrix::new(30, 30);
        for i in 0..30 {
            for j in 0..30 {
                coo.push(i, j, h[(i, j)]);
            }
        }
        let csr = CsrMatrix::from(&coo);
        let psi = DVector::from_fn(30, |i, _| C64::new((i as f64).sin(), (i as f64).cos()));
        let psi = &psi / C64::new(psi.norm(), 0.0);
        for t in [0.0, 0.5, -1.3, 9.0] {
            let cheb = chebyshev_propagate(&csr, &psi, t);
            let eig = hermitian_propagator(&h, t) * &psi;
            assert!((&cheb - &eig).norm() < 1e-11, "t={t}");
        }
    }
}
