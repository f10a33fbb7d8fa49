//! Scalar special functions shared by the Fock-space and trap modules.

use std::sync::OnceLock;

use num_complex::Complex64 as C64;

const TABLE_LEN: usize = 512;

fn ln_factorial_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(TABLE_LEN);
        let mut acc = 0.0f64;
        t.push(0.0);
        for k in 1..TABLE_LEN {
            acc += (k as f64).ln();
            t.push(acc);
        }
        t
    })
}

/// `ln(n!)`, tabulated below 512 and from the Stirling series above.
pub fn ln_factorial(n: usize) -> f64 {
    if n < TABLE_LEN {
        return ln_factorial_table()[n];
    }
    let x = n as f64 + 1.0;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // ln Gamma(x) for x >= 512: series terms beyond 1/x^5 are below 1e-20.
    (x - 0.5) * x.ln() - x
        + 0.5 * (2.0 * std::f64::consts::PI).ln()
        + inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 / 1260.0))
}

/// Generalized Laguerre polynomial `L_n^{(alpha)}(x)` by upward recurrence.
pub fn laguerre(n: usize, alpha: f64, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 + alpha - x;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + alpha - x) * cur - (kf + alpha) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Closed-form Fock matrix element `<row| D(beta) |col>` of the displacement operator.
pub fn displacement_element(row: usize, col: usize, beta: C64) -> C64 {
    let x = beta.norm_sqr();
    let (hi, lo, factor) = if row >= col {
        (row, col, beta)
    } else {
        (col, row, -beta.conj())
    };
    let k = hi - lo;
    let lag = laguerre(lo, k as f64, x);
    if lag == 0.0 {
        return C64::new(0.0, 0.0);
    }
    if k > 0 && factor.norm() == 0.0 {
        return C64::new(0.0, 0.0);
    }
    let ln_mag =
        0.5 * (ln_factorial(lo) - ln_factorial(hi)) - 0.5 * x + if k > 0 { k as f64 * factor.norm().ln() } else { 0.0 };
    let phase = C64::from_polar(1.0, k as f64 * factor.arg());
    phase * (ln_mag.exp() * lag)
}

/// Poisson probability mass `e^{-mean} mean^n / n!`, evaluated in log space.
pub fn poisson_pmf(n: usize, mean: f64) -> f64 {
    if mean == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    (n as f64 * mean.ln() - mean - ln_factorial(n)).exp()
}

/// Bessel functions `J_0(z) ..= J_kmax(z)` for `z >= 0` by Miller's backward recurrence.
pub fn bessel_j_sequence(z: f64, kmax: usize) -> Vec<f64> {
    let mut out = vec![0.0; kmax + 1];
    if z == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let start = {
        let s = kmax.max(z.ceil() as usize) + 50 + (10.0 * z.cbrt()).ceil() as usize;
        s + s % 2
    };
    let mut next = 0.0f64; // J_{k+1}
    let mut cur = 1e-300f64; // J_k
    let mut norm = 0.0f64;
    let mut vals = vec![0.0f64; kmax + 1];
    for k in (1..=start).rev() {
        let prev = (2.0 * k as f64 / z) * cur - next;
        next = cur;
        cur = prev;
        let idx = k - 1;
        if idx % 2 == 0 {
            norm += if idx == 0 { cur } else { 2.0 * cur };
        }
        if idx <= kmax {
            vals[idx] = cur;
        }
        if cur.abs() > 1e250 {
            let s = 1e-250;
            cur *= s;
            next *= s;
            norm *= s;
            if idx <= kmax {
                vals[idx..].iter_mut().for_each(|v| *v *= s);
            }
        }
    }
    for (o, v) in out.iter_mut().zip(vals) {
        *o = v / norm;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_factorial_matches_direct_sum_across_table_edge() {
        for n in [0usize, 1, 5, 100, 511, 512, 513, 2000] {
            let direct: f64 = (1..=n).map(|k| (k as f64).ln()).sum();
            let got = ln_factorial(n);
            assert!((got - direct).abs() <= 1e-12 * direct.max(1.0), "n={n}");
        }
    }

    #[test]
    fn laguerre_low_orders() {
        let x = 0.7;
        assert_eq!(laguerre(0, 2.0, x), 1.0);
        assert!((laguerre(1, 2.0, x) - (3.0 - x)).abs() < 1e-15);
        // L_2^{(a)}(x) = (x^2 - 2(a+2)x + (a+1)(a+2)) / 2
        let a = 2.0;
        let l2 = (x * x - 2.0 * (a + 2.0) * x + (a + 1.0) * (a + 2.0)) / 2.0;
        assert!((laguerre(2, a, x) - l2).abs() < 1e-14);
    }

    #[test]
    fn displacement_ground_column_is_coherent_state() {
        let beta = C64::new(0.8, -0.3);
        let x = beta.norm_sqr();
        for n in 0..12 {
            let expect = (-x / 2.0).exp() * beta.powu(n as u32) / (ln_factorial(n).exp()).sqrt();
            assert!((displacement_element(n, 0, beta) - expect).norm() < 1e-14);
        }
    }

    #[test]
    fn bessel_against_known_values() {
        // J_0(1), J_1(1), J_5(10), J_0(100)
        let j = bessel_j_sequence(1.0, 3);
        assert!((j[0] - 0.765_197_686_557_966_6).abs() < 1e-14);
        assert!((j[1] - 0.440_050_585_744_933_5).abs() < 1e-14);
        let j = bessel_j_sequence(10.0, 8);
        assert!((j[5] - (-0.234_061_528_186_793_6)).abs() < 1e-13);
        let j = bessel_j_sequence(100.0, 2);
        assert!((j[0] - 0.019_985_850_304_223_12).abs() < 1e-13);
    }

    #[test]
    fn bessel_large_argument_normalization() {
        let z = 5000.0;
        let j = bessel_j_sequence(z, 6000);
        let s: f64 = j[0] + 2.0 * j.iter().skip(2).step_by(2).sum::<f64>();
        assert!((s - 1.0).abs() < 1e-12);
        // Neumann sum J_0^2 + 2 sum J_k^2 = 1
        let q: f64 = j[0] * j[0] + 2.0 * j.iter().skip(1).map(|v| v * v).sum::<f64>();
        assert!((q - 1.0).abs() < 1e-10);
        assert!(j[6000].abs() < 1e-30);
    }
}
