//! Arbitrary-precision evaluation of the photon-counting parity sum.
//!
//! With `x_m = |Lambda m eta|^2` the counting record is the Poisson mixture
//! `P_c(n) = sum_m P(m) e^{-x_m} x_m^n / n!`, and the estimator is
//! `sum_n P_c(n) (1+i)^n`. Partial sums grow like `e^{(sqrt2 - 1) x_max}`
//! before cancelling to O(1), so doubles cannot carry it past `x ~ 80`; the
//! working precision is sized from `x_max` instead.

use dashu_float::round::mode::HalfEven;
use dashu_float::FBig;

use crate::error::{Error, Result};
use crate::special::ln_factorial;

type F = FBig<HalfEven, 2>;

/// Sectors lighter than this are left out of the mixture.
const SECTOR_DROP: f64 = 1e-16;
/// Guard bits on top of the cancellation estimate.
const GUARD_BITS: usize = 128;
/// Series terms below `e^{-TAIL_LN}` end the sum.
const TAIL_LN: f64 = 50.0;

fn hp(v: f64, prec: usize) -> F {
    F::try_from(v).expect("finite value").with_precision(prec).value()
}

fn hp_int(v: u64, prec: usize) -> F {
    F::from(v).with_precision(prec).value()
}

/// Result of [`counting_estimator`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountingSum {
    pub real: f64,
    pub imag: f64,
    /// Largest working precision used by any sector.
    pub precision_bits: usize,
    /// Series terms summed over all sectors.
    pub terms: usize,
}

/// `sum_n P_c(n) (1+i)^n` for sector populations `pops` and `x_m = x_scale m^2`.
///
/// The double sum over photon number and sector is taken sector by sector,
/// so every sector runs at the precision its own cancellation needs.
pub fn counting_estimator(pops: &[f64], x_scale: f64) -> Result<CountingSum> {
    if !(x_scale >= 0.0 && x_scale.is_finite()) {
        return Err(Error::Invalid(format!(
            "counting scale must be finite and nonnegative, got {x_scale}"
        )));
    }
    let sectors: Vec<(usize, f64)> = pops
        .iter()
        .enumerate()
        .filter(|(_, p)| **p >= SECTOR_DROP)
        .map(|(m, p)| (m, *p))
        .collect();
    if sectors.is_empty() {
        return Err(Error::Invalid("no populated sectors".into()));
    }
    let mut out = CountingSum {
        real: 0.0,
        imag: 0.0,
        precision_bits: 0,
        terms: 0,
    };
    for &(m, p) in &sectors {
        let s = sector_sum(p, x_scale * (m * m) as f64)?;
        out.real += s.real;
        out.imag += s.imag;
        out.precision_bits = out.precision_bits.max(s.precision_bits);
        out.terms += s.terms;
    }
    Ok(out)
}

/// `p sum_n e^{-x} x^n (1+i)^n / n!`, truncated once the terms drop below
/// `e^{-TAIL_LN}` past their peak at `n ~ sqrt2 x`.
fn sector_sum(p: f64, x: f64) -> Result<CountingSum> {
    if x == 0.0 {
        return Ok(CountingSum {
            real: p,
            imag: 0.0,
            precision_bits: 53,
            terms: 1,
        });
    }
    let prec = (0.6 * x).ceil() as usize + GUARD_BITS;
    // x and 2x have short significands, so each step below is linear in `prec`
    let xs = hp(x, prec);
    let x2 = hp(2.0 * x, prec);
    let mut t = hp(p, prec) * (-xs.clone()).exp(); // p e^{-x} x^n 2^{floor(n/2)} / n!
    let (mut re, mut im) = (t.clone(), hp_int(0, prec));
    let (ln_p, ln_x) = (p.ln(), x.ln());
    let peak = std::f64::consts::SQRT_2 * x;
    let cap = (4.0 * x) as usize + 1000;
    let mut n = 0usize;
    loop {
        n += 1;
        if n > cap {
            return Err(Error::Propagation(format!(
                "counting series did not converge within {cap} terms"
            )));
        }
        t = if n.is_multiple_of(2) { t * &x2 } else { t * &xs } / hp_int(n as u64, prec);
        // (1+i)^n = 2^q i^q (1+i)^{n mod 2}, q = floor(n/2)
        match (n % 2, (n / 2) % 4) {
            (0, 0) => re += &t,
            (0, 1) => im += &t,
            (0, 2) => re -= &t,
            (0, _) => im -= &t,
            (_, 0) => {
                re += &t;
                im += &t;
            }
            (_, 1) => {
                re -= &t;
                im += &t;
            }
            (_, 2) => {
                re -= &t;
                im -= &t;
            }
            _ => {
                re += &t;
                im -= &t;
            }
        }
        if n as f64 > peak + 10.0 {
            let nf = n as f64;
            let ln_term = ln_p - x + nf * ln_x - ln_factorial(n) + 0.5 * nf * std::f64::consts::LN_2;
            if ln_term < -TAIL_LN {
                break;
            }
        }
    }
    Ok(CountingSum {
        real: re.to_f64().value(),
        imag: im.to_f64().value(),
        precision_bits: prec,
        terms: n + 1,
    })
}
