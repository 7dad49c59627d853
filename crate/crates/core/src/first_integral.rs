//! First integrals Z(x,t) = x + i*Phi(x,t) of L = d/dt + a d/dx: formal
//! t-power-series construction with residual order guarantees, an
//! independent finite-difference residual check, and extraction of the
//! limiting directions of Phi(0, t) along running-maximum witnesses.

use crate::diff::d1_central4_c;
use crate::error::Error;
use crate::field::{PlanarVectorField, XFn};
use num_complex::Complex64;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegralKind {
    ClosedForm,
    Series,
}

/// A first integral with guaranteed residual order: L Z = O(t^order).
#[derive(Clone)]
pub struct FirstIntegral {
    kind: IntegralKind,
    eval: Arc<dyn Fn(f64, f64) -> Complex64 + Send + Sync>,
    series: Vec<XFn>, // c_1..c_k when kind == Series, else empty
    order: usize,
}

impl FirstIntegral {
    pub fn closed_form(
        eval: Arc<dyn Fn(f64, f64) -> Complex64 + Send + Sync>,
        order: usize,
    ) -> Self {
        FirstIntegral {
            kind: IntegralKind::ClosedForm,
            eval,
            series: Vec::new(),
            order,
        }
    }

    pub fn kind(&self) -> IntegralKind {
        self.kind
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn eval_z(&self, x: f64, t: f64) -> Complex64 {
        (self.eval)(x, t)
    }

    /// Phi = Im Z.
    pub fn phi(&self, x: f64, t: f64) -> f64 {
        self.eval_z(x, t).im
    }

    /// Diagnostic: the residual Re Z - x. Zero for series integrals at t = 0
    /// and for every preset at all t.
    pub fn re_deviation(&self, x: f64, t: f64) -> f64 {
        self.eval_z(x, t).re - x
    }

    /// Series coefficients c_1..c_k (empty for closed forms).
    pub fn series_coeffs(&self) -> &[XFn] {
        &self.series
    }

    /// d/dx Z(x, 0). Exactly 1 for series integrals; finite differences
    /// otherwise.
    pub fn dz_dx_at0(&self, x: f64) -> Complex64 {
        match self.kind {
            IntegralKind::Series => Complex64::new(1.0, 0.0),
            IntegralKind::ClosedForm => d1_central4_c(|y| self.eval_z(y, 0.0), x),
        }
    }

    /// Whether Z(x, 0) = x holds (exact for series, sampled for closed
    /// forms).
    pub fn is_normalized_at_zero(&self, x_samples: &[f64]) -> bool {
        match self.kind {
            IntegralKind::Series => true,
            IntegralKind::ClosedForm => x_samples
                .iter()
                .all(|&x| (self.eval_z(x, 0.0) - Complex64::new(x, 0.0)).norm() < 1e-12),
        }
    }
}

/// Solve d/dt Z + a d/dx Z = O(t^k), Z(x,0) = x, by matching powers of t:
///   c_{m+1}(x) = -(a_m(x) + sum_{p+q=m, q>=1} a_p(x) c_q'(x)) / (m+1).
/// x-derivatives of the coefficient callables use 4th-order central
/// differences.
pub fn solve_series(field: &PlanarVectorField, k: usize) -> Result<FirstIntegral, Error> {
    if field.taylor_len() < k {
        return Err(Error::InsufficientTaylorOrder {
            have: field.taylor_len(),
            need: k,
        });
    }
    let a: Vec<XFn> = field.taylor_fns().to_vec();
    let mut c: Vec<XFn> = Vec::with_capacity(k);
    for m in 0..k {
        let a_m = a[m].clone();
        let mut convolution: Vec<(XFn, XFn)> = Vec::new();
        for q in 1..=m {
            convolution.push((a[m - q].clone(), c[q - 1].clone()));
        }
        let denom = (m + 1) as f64;
        let next: XFn = Arc::new(move |x: f64| {
            let mut s = a_m(x);
            for (ap, cq) in &convolution {
                let cq = cq.clone();
                s += ap(x) * d1_central4_c(move |y| cq(y), x);
            }
            -s / denom
        });
        c.push(next);
    }
    let coeffs = c.clone();
    let eval = Arc::new(move |x: f64, t: f64| {
        let mut z = Complex64::new(x, 0.0);
        let mut tp = 1.0;
        for cm in &coeffs {
            tp *= t;
            z += cm(x) * tp;
        }
        z
    });
    Ok(FirstIntegral {
        kind: IntegralKind::Series,
        eval,
        series: c,
        order: k,
    })
}

/// Outcome of the residual check: either the residual sits at machine noise
/// (closed-form cancellation) or a fitted log-log slope.
#[derive(Debug, Clone)]
pub struct ResidualReport {
    /// None when the residual is below the exactness threshold 1e-12.
    pub slope: Option<f64>,
    pub max_residual: f64,
    /// (t, max_x residual) samples for CSV output.
    pub samples: Vec<(f64, f64)>,
}

impl ResidualReport {
    pub fn is_exact(&self) -> bool {
        self.slope.is_none()
    }

    /// Order certificate: exact, or slope >= k - 1/2.
    pub fn certifies(&self, k: usize) -> bool {
        match self.slope {
            None => true,
            Some(s) => s >= k as f64 - 0.5,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,max_residual\n");
        for (t, r) in &self.samples {
            out.push_str(&format!("{t},{r}\n"));
        }
        out
    }
}

/// Evaluate r(t) = max_x |dZ/dt + a dZ/dx| by finite differences (both
/// derivatives, keeping the check independent of how Z was built) and fit
/// the least-squares slope of log r against log t.
pub fn residual_check(
    z: &FirstIntegral,
    field: &PlanarVectorField,
    t_grid: &[f64],
    x_grid: &[f64],
) -> Result<ResidualReport, Error> {
    if t_grid.len() < 4 {
        return Err(Error::DegenerateGrid(format!(
            "residual check needs >= 4 t-samples, got {}",
            t_grid.len()
        )));
    }
    let mut samples = Vec::with_capacity(t_grid.len());
    let mut max_residual: f64 = 0.0;
    for &t in t_grid {
        let ht = (5e-3f64).min(t / 7.0).max(1e-7);
        let hx = 5e-3;
        let mut worst: f64 = 0.0;
        for &x in x_grid {
            let dz_dt = crate::diff::central_derivative_c(|s| z.eval_z(x, s), t, 1, 3, ht);
            let dz_dx = crate::diff::central_derivative_c(|y| z.eval_z(y, t), x, 1, 3, hx);
            let r = (dz_dt + field.eval_a(x, t) * dz_dx).norm();
            worst = worst.max(r);
        }
        samples.push((t, worst));
        max_residual = max_residual.max(worst);
    }
    if max_residual < 1e-12 {
        return Ok(ResidualReport {
            slope: None,
            max_residual,
            samples,
        });
    }
    // least-squares slope of log r vs log t over samples with r > 0
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(_, r)| *r > 0.0)
        .map(|(t, r)| (t.ln(), r.ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let cov = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>();
    let var = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum::<f64>();
    Ok(ResidualReport {
        slope: Some(cov / var),
        max_residual,
        samples,
    })
}

/// One running-maximum witness of |Phi(0, .)|.
#[derive(Debug, Clone, Copy)]
pub struct Witness {
    pub t: f64,
    pub phi: f64,
}

/// Accumulation directions of -Phi(0,t_k)/|Phi(0,t_k)| along the witness
/// sequence, plus the witnesses themselves.
#[derive(Debug, Clone)]
pub struct DirectionResult {
    /// Subset of {+1, -1}, sorted ascending.
    pub directions: Vec<i8>,
    /// Witnesses in decreasing t order.
    pub witnesses: Vec<Witness>,
    /// Set when Phi(0, .) vanishes identically to tolerance.
    pub degenerate: bool,
}

impl DirectionResult {
    /// Running-max values |Phi(0, t_k)| in decreasing-t order.
    pub fn max_ratio_trace(&self) -> Vec<f64> {
        self.witnesses.iter().map(|w| w.phi.abs()).collect()
    }
}

/// Number of trailing witnesses that vote on the direction set.
const DIRECTION_WINDOW: usize = 8;
/// Phi values at or below this are treated as identically zero.
pub const PHI_ZERO_TOL: f64 = 1e-280;

/// Discrete direction extraction on a strictly decreasing t-grid. A grid
/// point is a dominating point when |Phi(0,t)| > 0 exceeds every sampled
/// value at smaller t; consecutive dominating points of equal sign belong to
/// the same lobe, and each lobe is represented by its strongest point (the
/// witness t_k). Witness signs therefore alternate, and the direction set
/// holds each sign appearing at least twice among the last
/// `DIRECTION_WINDOW` witnesses (at least once when fewer exist).
pub fn limit_direction_phi<F: FnMut(f64) -> f64>(
    mut phi: F,
    t_grid: &[f64],
) -> Result<DirectionResult, Error> {
    if t_grid.len() < 2 || t_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::NotDecreasing);
    }
    let values: Vec<f64> = t_grid.iter().map(|&t| phi(t)).collect();
    if values.iter().all(|v| v.abs() <= PHI_ZERO_TOL) {
        return Ok(DirectionResult {
            directions: Vec::new(),
            witnesses: Vec::new(),
            degenerate: true,
        });
    }
    // scan upward in t (reverse of the grid), keeping the running max and
    // compressing same-sign runs
    let mut reps: Vec<Witness> = Vec::new(); // ascending t
    let mut run: Option<Witness> = None;
    let mut running: f64 = 0.0;
    for i in (0..t_grid.len()).rev() {
        let v = values[i];
        if v.abs() > 0.0 && v.abs() >= running {
            running = v.abs();
            let w = Witness {
                t: t_grid[i],
                phi: v,
            };
            match run {
                Some(prev) if prev.phi.signum() == v.signum() => run = Some(w),
                Some(prev) => {
                    reps.push(prev);
                    run = Some(w);
                }
                None => run = Some(w),
            }
        }
    }
    if let Some(w) = run {
        reps.push(w);
    }
    // decreasing-t order; the tail entries are the smallest t
    let witnesses: Vec<Witness> = reps.into_iter().rev().collect();
    let tail = &witnesses[witnesses.len().saturating_sub(DIRECTION_WINDOW)..];
    let plus = tail.iter().filter(|w| w.phi < 0.0).count();
    let minus = tail.iter().filter(|w| w.phi > 0.0).count();
    let needed = if tail.len() >= DIRECTION_WINDOW { 2 } else { 1 };
    let mut directions = Vec::new();
    if minus >= needed {
        directions.push(-1);
    }
    if plus >= needed {
        directions.push(1);
    }
    Ok(DirectionResult {
        directions,
        witnesses,
        degenerate: false,
    })
}

/// Direction extraction for a first integral, probing Phi(0, .).
pub fn limit_direction(z: &FirstIntegral, t_grid: &[f64]) -> Result<DirectionResult, Error> {
    limit_direction_phi(|t| z.phi(0.0, t), t_grid)
}

/// Log-spaced decreasing grid from t_hi down to t_lo.
pub fn decreasing_log_grid(t_hi: f64, t_lo: f64, n: usize) -> Vec<f64> {
    assert!(t_hi > t_lo && t_lo > 0.0 && n >= 2);
    (0..n)
        .map(|i| t_hi * (t_lo / t_hi).powf(i as f64 / (n - 1) as f64))
        .collect()
}
