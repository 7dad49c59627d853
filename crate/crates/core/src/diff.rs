//! Finite-difference helpers: Fornberg weight generation for arbitrary
//! derivative order and stencil, plus small wrappers used as independent
//! oracles throughout the test suites.

use num_complex::Complex64;

/// Fornberg's algorithm: weights for the `m`-th derivative at `z` from
/// samples at the (distinct) points `grid`.
pub fn fornberg_weights(z: f64, grid: &[f64], m: usize) -> Vec<f64> {
    let n = grid.len();
    assert!(n > m, "need more than m+1 stencil points");
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = grid[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = grid[i] - z;
        for j in 0..i {
            let c3 = grid[i] - grid[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|row| row[m]).collect()
}

/// Fornberg weights for a unit-spaced central stencil -half..=half, cached.
fn central_weights(deriv: usize, half: usize) -> std::sync::Arc<Vec<f64>> {
    use std::collections::HashMap;
    use std::sync::{Arc, Mutex, OnceLock};
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<Vec<f64>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(w) = cache.lock().unwrap().get(&(deriv, half)) {
        return w.clone();
    }
    let grid: Vec<f64> = (0..=2 * half).map(|i| i as f64 - half as f64).collect();
    let w = Arc::new(fornberg_weights(0.0, &grid, deriv));
    cache.lock().unwrap().insert((deriv, half), w.clone());
    w
}

/// Central finite difference of order `deriv` with `2*half+1` points and
/// spacing `h`; accuracy order 2*half + 1 - deriv (even part).
pub fn central_derivative_c<F: FnMut(f64) -> Complex64>(
    mut f: F,
    x: f64,
    deriv: usize,
    half: usize,
    h: f64,
) -> Complex64 {
    let w = central_weights(deriv, half);
    let scale = h.powi(-(deriv as i32));
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, wi) in w.iter().enumerate() {
        if *wi != 0.0 {
            acc += f(x + (i as f64 - half as f64) * h) * (*wi * scale);
        }
    }
    acc
}

/// 4th-order central first derivative, the workhorse for differentiating
/// x-callables in the series recursion.
pub fn d1_central4_c<F: FnMut(f64) -> Complex64>(f: F, x: f64) -> Complex64 {
    // h tuned for ~1e-12 absolute error on O(1) analytic callables
    let h = 6e-3_f64.max(1e-3 * x.abs());
    central_derivative_c(f, x, 1, 2, h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_reproduce_standard_central_stencils() {
        // 2nd derivative, 5-point central, h=1: [-1/12, 4/3, -5/2, 4/3, -1/12]
        let grid = [-2.0, -1.0, 0.0, 1.0, 2.0];
        let w = fornberg_weights(0.0, &grid, 2);
        let want = [-1.0 / 12.0, 4.0 / 3.0, -5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0];
        for (a, b) in w.iter().zip(want.iter()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn central_derivative_on_exp() {
        let v = central_derivative_c(|x| Complex64::new(x.exp(), 0.0), 0.3, 3, 4, 0.05);
        assert!((v.re - 0.3f64.exp()).abs() < 1e-9);
    }
}
