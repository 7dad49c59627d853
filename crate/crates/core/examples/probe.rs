use microlocal::fbi::*;
use microlocal::field::make_bump;
use num_complex::Complex64;
fn c(re: f64, im: f64) -> Complex64 { Complex64::new(re, im) }

fn run(s_half: f64, n_s: usize, xi_max: f64, n_xi: usize, eps: f64) -> f64 {
    let cutoff = make_bump(0.0, 6.0, 0).unwrap();
    let trace = |x: f64| c((-x * x).exp(), 0.0);
    let scan = fbi_dense_scan(&trace, &cutoff, (-s_half, s_half), n_s, xi_max, n_xi);
    let x_grid: Vec<f64> = (0..=120).map(|i| -1.5 + 3.0 * i as f64 / 120.0).collect();
    let raw = fbi_inverse(&scan, eps, 1.0, &x_grid).unwrap();
    let (mut num, mut den) = (0.0, 0.0);
    for (r, &x) in raw.iter().zip(x_grid.iter()) {
        num += r.re * (-x * x).exp();
        den += r.norm_sqr();
    }
    let c1 = num / den;
    let mut err: f64 = 0.0;
    for (r, &x) in raw.iter().zip(x_grid.iter()) {
        err = err.max((r * c1 - c((-x * x).exp(), 0.0)).norm());
    }
    eprintln!("s±{s_half} n_s={n_s} xi={xi_max} n_xi={n_xi} eps={eps}: c1={c1:.7} err={err:.5}");
    err
}

fn main() {
    run(4.5, 561, 48.0, 961, 1e-3);
    run(7.0, 875, 48.0, 961, 1e-3);   // wider s
    run(9.0, 1125, 48.0, 961, 1e-3);  // wider still
    run(4.5, 1121, 48.0, 961, 1e-3);  // finer s only
    run(4.5, 561, 48.0, 1921, 1e-3);  // finer xi
    run(4.5, 561, 96.0, 1921, 1e-3);  // larger xi range
    run(4.5, 561, 48.0, 961, 2e-4);   // smaller eps
    run(7.0, 875, 48.0, 1921, 1e-3);  // wider s + finer xi
}
