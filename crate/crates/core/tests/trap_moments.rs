mod support;

use num_complex::Complex64 as C64;
use optomech::trap::axis_moment;
use support::moment_quadrature::moment_table;

#[test]
fn laguerre_form_matches_quadrature() {
    for eta in [0.05, 0.5, 1.5, 3.0] {
        let table = moment_table(10, eta);
        for (n, row) in table.iter().enumerate() {
            for (m, &(re, im)) in row.iter().enumerate() {
                let oracle = C64::new(re, im);
                let closed = axis_moment(n, m, eta);
                if oracle.norm() < 1e-60 {
                    // eta^2 sits on a node of the Laguerre factor: both routes vanish
                    assert!(closed.norm() < 1e-15, "eta={eta} n={n} m={m} closed={closed}");
                    continue;
                }
                let rel = (closed - oracle).norm() / oracle.norm();
                assert!(rel < 1e-8, "eta={eta} n={n} m={m} closed={closed} oracle={oracle}");
            }
        }
    }
}

#[test]
fn zero_recoil_quadrature_is_orthonormal() {
    let table = moment_table(6, 0.0);
    for (n, row) in table.iter().enumerate() {
        for (m, &(re, im)) in row.iter().enumerate() {
            let expect = if n == m { 1.0 } else { 0.0 };
            assert!((re - expect).abs() < 1e-14 && im == 0.0);
        }
    }
}
