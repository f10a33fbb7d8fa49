//! Independent oracle for one-axis trap moments
//! `int phi_n(x) phi_m(x) exp(i kappa x) dx` (x in units of the oscillator
//! length), by the trapezoidal rule evaluated in 256-bit arithmetic.
//!
//! The integrand is entire and Gaussian-damped, so the trapezoidal rule with
//! step h converges like `exp(-(2 pi / h - kappa)^2 / 4)`; at h = 1/32 that is
//! far below the working precision. Small moments come out of heavy
//! cancellation, which is why the sum is not carried in doubles.

use dashu_float::round::mode::HalfEven;
use dashu_float::{Context, FBig};

type F = FBig<HalfEven, 2>;

const PREC: usize = 256;
const STEPS_PER_UNIT: usize = 32;
const HALF_WIDTH: usize = 14;

fn f(v: f64) -> F {
    F::try_from(v).unwrap().with_precision(PREC).value()
}

fn int(v: u64) -> F {
    F::from(v).with_precision(PREC).value()
}

fn cos_sin(x: &F) -> (F, F) {
    let x2 = x * x;
    let mut c = int(1);
    let mut s = x.clone();
    let mut tc = int(1);
    let mut ts = x.clone();
    for k in 1..200u64 {
        tc = -(tc * &x2) / int((2 * k - 1) * (2 * k));
        ts = -(ts * &x2) / int((2 * k) * (2 * k + 1));
        c += &tc;
        s += &ts;
        if tc.to_f64().value().abs() < 1e-90 && ts.to_f64().value().abs() < 1e-90 {
            break;
        }
    }
    (c, s)
}

fn ln_fact(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

/// `[n][m]` table of `<n| exp(i eta (b + b^dag)) |m>` for `n, m <= n_max`,
/// returned as `(re, im)` pairs. In position units the phase is
/// `kappa x` with `kappa = sqrt2 eta`, formed here at full precision.
pub fn moment_table(n_max: usize, eta: f64) -> Vec<Vec<(f64, f64)>> {
    let h = int(1) / int(STEPS_PER_UNIT as u64);
    let sqrt2 = Context::<HalfEven>::new(PREC).sqrt(int(2).repr()).value();
    let k = f(eta) * sqrt2;
    let q = (-(&h * &h)).exp();
    let q2 = &q * &q;
    let (ch, sh) = cos_sin(&(&k * &h));

    let mut acc = vec![vec![int(0); n_max + 1]; n_max + 1];
    let mut gauss = int(1);
    let mut step = q.clone();
    let (mut c, mut s) = (int(1), int(0));
    let mut herm = vec![int(0); n_max + 1];
    let steps = HALF_WIDTH * STEPS_PER_UNIT;
    for j in 0..=steps {
        let xi = int(j as u64) * &h;
        herm[0] = int(1);
        if n_max >= 1 {
            herm[1] = int(2) * &xi;
        }
        for n in 1..n_max {
            herm[n + 1] = int(2) * &xi * &herm[n] - int(2 * n as u64) * &herm[n - 1];
        }
        // the +xi and -xi nodes combine into 2 cos (n+m even) or 2i sin (odd)
        let w = if j == 0 { int(1) } else { int(2) };
        let wc = &w * &gauss * &c;
        let ws = &w * &gauss * &s;
        for n in 0..=n_max {
            for m in 0..=n_max {
                let trig = if (n + m) % 2 == 0 { &wc } else { &ws };
                acc[n][m] += &herm[n] * &herm[m] * trig;
            }
        }
        gauss *= &step;
        step *= &q2;
        let nc = &c * &ch - &s * &sh;
        let ns = &s * &ch + &c * &sh;
        c = nc;
        s = ns;
    }
    let hf = 1.0 / STEPS_PER_UNIT as f64;
    (0..=n_max)
        .map(|n| {
            (0..=n_max)
                .map(|m| {
                    let norm = (-0.5
                        * ((n + m) as f64 * 2f64.ln() + ln_fact(n) + ln_fact(m) + std::f64::consts::PI.ln()))
                    .exp();
                    let v = acc[n][m].to_f64().value() * hf * norm;
                    if (n + m) % 2 == 0 {
                        (v, 0.0)
                    } else {
                        (0.0, v)
                    }
                })
                .collect()
        })
        .collect()
}
