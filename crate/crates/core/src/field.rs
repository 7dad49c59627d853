//! Planar complex vector fields L = d/dt + a(x,t) d/dx, compactly supported
//! test functions with exact derivative oracles, and pointwise
//! classification of the field by the t-Taylor data of Im a.

use crate::diff::central_derivative_c;
use crate::error::Error;
use crate::quad::PanelMesh;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// An x-callable: one t-Taylor coefficient of the field, or one series
/// coefficient of a first integral.
pub type XFn = Arc<dyn Fn(f64) -> Complex64 + Send + Sync>;

/// Coefficient a(x,t) with mixed partial derivatives. Presets implement the
/// derivatives in closed form; table-backed fields fall back to finite
/// differences in x (the t-structure is polynomial and exact).
pub trait CoefFn: Send + Sync {
    fn deriv(&self, nx: usize, nt: usize, x: f64, t: f64) -> Complex64;

    fn eval(&self, x: f64, t: f64) -> Complex64 {
        self.deriv(0, 0, x, t)
    }
}

/// a(x,t) = sum_m a_m(x) t^m with exact t-derivatives and finite-difference
/// x-derivatives of the coefficient callables.
pub struct TaylorCoef {
    pub coeffs: Vec<XFn>,
}

impl CoefFn for TaylorCoef {
    fn deriv(&self, nx: usize, nt: usize, x: f64, t: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (m, c) in self.coeffs.iter().enumerate() {
            if m < nt {
                continue;
            }
            // d^nt/dt^nt t^m = m!/(m-nt)! t^(m-nt)
            let mut fall = 1.0;
            for j in 0..nt {
                fall *= (m - j) as f64;
            }
            let cm = if nx == 0 {
                c(x)
            } else {
                let h = 0.02_f64;
                central_derivative_c(|y| c(y), x, nx, nx / 2 + 3, h)
            };
            acc += cm * fall * t.powi((m - nt) as i32);
        }
        acc
    }
}

/// a(x,t) = sum_m p_m(x) t^m with polynomial p_m: all derivatives exact.
pub struct PolynomialCoef {
    /// coeffs[m][p] multiplies x^p t^m
    pub coeffs: Vec<Vec<Complex64>>,
}

impl CoefFn for PolynomialCoef {
    fn deriv(&self, nx: usize, nt: usize, x: f64, t: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (m, poly) in self.coeffs.iter().enumerate() {
            if m < nt {
                continue;
            }
            let mut fall_t = 1.0;
            for j in 0..nt {
                fall_t *= (m - j) as f64;
            }
            let mut px = Complex64::new(0.0, 0.0);
            for (p, c) in poly.iter().enumerate() {
                if p < nx {
                    continue;
                }
                let mut fall_x = 1.0;
                for j in 0..nx {
                    fall_x *= (p - j) as f64;
                }
                px += c * fall_x * x.powi((p - nx) as i32);
            }
            acc += px * fall_t * t.powi((m - nt) as i32);
        }
        acc
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub x_lo: f64,
    pub x_hi: f64,
    pub t_max: f64,
}

impl Domain {
    pub fn contains_x(&self, x: f64) -> bool {
        x >= self.x_lo && x <= self.x_hi
    }
}

/// The vector field L = d/dt + a(x,t) d/dx on a rectangle
/// [x_lo, x_hi] x [0, T]. Immutable after construction.
#[derive(Clone)]
pub struct PlanarVectorField {
    name: String,
    coef: Arc<dyn CoefFn>,
    taylor: Vec<XFn>,
    domain: Domain,
}

impl PlanarVectorField {
    pub fn new(
        name: impl Into<String>,
        coef: Arc<dyn CoefFn>,
        taylor: Vec<XFn>,
        domain: Domain,
    ) -> Result<Self, Error> {
        if !(domain.x_lo < domain.x_hi) || !(domain.t_max > 0.0) {
            return Err(Error::DegenerateGrid(format!(
                "domain [{}, {}] x [0, {}]",
                domain.x_lo, domain.x_hi, domain.t_max
            )));
        }
        Ok(PlanarVectorField {
            name: name.into(),
            coef,
            taylor,
            domain,
        })
    }

    /// Field defined by its t-Taylor coefficient callables alone.
    pub fn from_taylor(
        name: impl Into<String>,
        coeffs: Vec<XFn>,
        domain: Domain,
    ) -> Result<Self, Error> {
        let coef = Arc::new(TaylorCoef {
            coeffs: coeffs.clone(),
        });
        Self::new(name, coef, coeffs, domain)
    }

    /// Field with a(x,t) polynomial in both variables: coeffs[m][p]
    /// multiplies x^p t^m. Derivatives are exact.
    pub fn from_polynomial(
        name: impl Into<String>,
        coeffs: Vec<Vec<Complex64>>,
        domain: Domain,
    ) -> Result<Self, Error> {
        let taylor: Vec<XFn> = coeffs
            .iter()
            .map(|poly| {
                let poly = poly.clone();
                let f: XFn = Arc::new(move |x: f64| {
                    poly.iter()
                        .rev()
                        .fold(Complex64::new(0.0, 0.0), |acc, c| acc * x + c)
                });
                f
            })
            .collect();
        Self::new(name, Arc::new(PolynomialCoef { coeffs }), taylor, domain)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn eval_a(&self, x: f64, t: f64) -> Complex64 {
        self.coef.eval(x, t)
    }

    /// d^nx/dx^nx d^nt/dt^nt a(x, t).
    pub fn a_deriv(&self, nx: usize, nt: usize, x: f64, t: f64) -> Complex64 {
        self.coef.deriv(nx, nt, x, t)
    }

    pub fn taylor_len(&self) -> usize {
        self.taylor.len()
    }

    /// Taylor coefficient a_m evaluated at x.
    pub fn taylor_at(&self, m: usize, x: f64) -> Complex64 {
        (self.taylor[m])(x)
    }

    pub fn taylor_fns(&self) -> &[XFn] {
        &self.taylor
    }

    /// Max over a sample grid of |a - sum a_m t^m| / t^(K+1): the fitted
    /// constant of the Taylor-agreement invariant.
    pub fn taylor_agreement_constant(&self, nx: usize, nt: usize) -> f64 {
        let k = self.taylor.len();
        let mut worst: f64 = 0.0;
        for i in 0..nx {
            let x = self.domain.x_lo
                + (self.domain.x_hi - self.domain.x_lo) * (i as f64 + 0.5) / nx as f64;
            for j in 1..=nt {
                let t = self.domain.t_max * j as f64 / nt as f64;
                let mut s = Complex64::new(0.0, 0.0);
                for (m, c) in self.taylor.iter().enumerate() {
                    s += c(x) * t.powi(m as i32);
                }
                let dev = (self.eval_a(x, t) - s).norm() / t.powi(k as i32);
                worst = worst.max(dev);
            }
        }
        worst
    }
}

/// Compactly supported test function with exact derivatives up to
/// `max_order`.
#[derive(Clone)]
pub struct TestFunction {
    support: (f64, f64),
    max_order: usize,
    eval: Arc<dyn Fn(usize, f64) -> f64 + Send + Sync>,
    /// Joints between analytic pieces (support and plateau edges for
    /// bumps); quadrature splits panels here.
    breakpoints: Vec<f64>,
}

impl TestFunction {
    pub fn from_parts(
        support: (f64, f64),
        max_order: usize,
        eval: Arc<dyn Fn(usize, f64) -> f64 + Send + Sync>,
    ) -> Self {
        TestFunction {
            support,
            max_order,
            eval,
            breakpoints: vec![support.0, support.1],
        }
    }

    pub fn with_breakpoints(mut self, breakpoints: Vec<f64>) -> Self {
        self.breakpoints = breakpoints;
        self
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    /// n-th derivative at x; zero outside the support.
    pub fn deriv(&self, n: usize, x: f64) -> f64 {
        assert!(
            n <= self.max_order,
            "derivative order {n} exceeds max_order {}",
            self.max_order
        );
        if x <= self.support.0 || x >= self.support.1 {
            return 0.0;
        }
        (self.eval)(n, x)
    }

    /// Sup over the support of |deriv(n, .)|, sampled.
    pub fn sup_deriv(&self, n: usize, samples: usize) -> f64 {
        let (lo, hi) = self.support;
        (0..=samples)
            .map(|i| lo + (hi - lo) * i as f64 / samples as f64)
            .map(|x| self.deriv(n, x).abs())
            .fold(0.0, f64::max)
    }
}

// --- bump construction ---------------------------------------------------

/// Polynomial in one variable, power basis. Internal to the bump recursion.
#[derive(Clone, Debug)]
struct Poly(Vec<f64>);

impl Poly {
    fn eval(&self, u: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * u + c)
    }
    fn derivative(&self) -> Poly {
        if self.0.len() <= 1 {
            return Poly(vec![0.0]);
        }
        Poly(
            self.0[1..]
                .iter()
                .enumerate()
                .map(|(i, c)| (i as f64 + 1.0) * c)
                .collect(),
        )
    }
    fn mul(&self, other: &Poly) -> Poly {
        let mut out = vec![0.0; self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in other.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly(out)
    }
    fn add_scaled(&self, other: &Poly, s: f64) -> Poly {
        let n = self.0.len().max(other.0.len());
        let mut out = vec![0.0; n];
        for (i, a) in self.0.iter().enumerate() {
            out[i] += a;
        }
        for (i, b) in other.0.iter().enumerate() {
            out[i] += s * b;
        }
        Poly(out)
    }
}

/// Prefactor polynomials R_n with
/// d^n/du^n exp(-1/(1-u^2)) = R_n(u) / (1-u^2)^(2n) * exp(-1/(1-u^2)),
/// built by R_{n+1} = (1-u^2)^2 R_n' + (4n u (1-u^2) - 2u) R_n.
fn bump_prefactors(up_to: usize) -> Vec<Poly> {
    let s = Poly(vec![1.0, 0.0, -1.0]); // 1 - u^2
    let s2 = s.mul(&s);
    let mut out = vec![Poly(vec![1.0])];
    for n in 0..up_to {
        let rn = &out[n];
        let term1 = s2.mul(&rn.derivative());
        // (4n u) * s * R_n
        let us = Poly(vec![0.0, 4.0 * n as f64]).mul(&s).mul(rn);
        let term3 = Poly(vec![0.0, -2.0]).mul(rn);
        out.push(term1.add_scaled(&us, 1.0).add_scaled(&term3, 1.0));
    }
    out
}

/// psi^{(n)}(u) for psi(u) = exp(-1/(1-u^2)) on (-1,1), 0 outside, computed
/// through the R_n prefactors with log-space guards near the support edge.
fn psi_deriv(prefactors: &[Poly], n: usize, u: f64) -> f64 {
    let s = 1.0 - u * u;
    if s <= 0.0 {
        return 0.0;
    }
    let log_mag = -1.0 / s - 2.0 * n as f64 * s.ln();
    if log_mag < -700.0 {
        return 0.0;
    }
    prefactors[n].eval(u) * log_mag.exp()
}

fn bump_normalizer() -> f64 {
    static CELL: std::sync::OnceLock<f64> = std::sync::OnceLock::new();
    *CELL.get_or_init(|| {
        let mesh = PanelMesh::uniform(-1.0, 1.0, 8, 32);
        let (v, _) = mesh.integrate(|u| Complex64::new(psi_deriv(&bump_prefactors(0), 0, u), 0.0));
        v.re
    })
}

const TRANSITION_TABLE_N: usize = 8192;

/// Cumulative integral of psi on a fine uniform grid over [-1, 1], built
/// once; T(u) is then read off by 6-point Lagrange interpolation (the
/// interpolation error is far below the round-off of the quadrature).
fn transition_table() -> &'static [f64] {
    static CELL: std::sync::OnceLock<Vec<f64>> = std::sync::OnceLock::new();
    CELL.get_or_init(|| {
        let pf = bump_prefactors(0);
        let n = TRANSITION_TABLE_N;
        let h = 2.0 / n as f64;
        let mut table = Vec::with_capacity(n + 1);
        table.push(0.0);
        let mut acc = crate::quad::Kahan::default();
        let (xs, ws) = crate::quad::gauss_legendre(16);
        for i in 0..n {
            let lo = -1.0 + h * i as f64;
            let mid = lo + 0.5 * h;
            for (x, w) in xs.iter().zip(ws.iter()) {
                acc.add(psi_deriv(&pf, 0, mid + 0.5 * h * x) * w * 0.5 * h);
            }
            table.push(acc.value());
        }
        let total = *table.last().unwrap();
        for v in &mut table {
            *v /= total;
        }
        table
    })
}

/// Smooth transition T(u): 0 at u <= -1, 1 at u >= 1, T' = psi / int(psi).
fn transition(u: f64) -> f64 {
    if u <= -1.0 {
        return 0.0;
    }
    if u >= 1.0 {
        return 1.0;
    }
    let table = transition_table();
    let n = TRANSITION_TABLE_N;
    let pos = (u + 1.0) / 2.0 * n as f64;
    let i = (pos.floor() as usize).min(n - 1);
    // 6-point Lagrange stencil clamped to the table
    let start = i.saturating_sub(2).min(n - 5);
    let mut val = 0.0;
    for j in start..start + 6 {
        let mut l = 1.0;
        for m in start..start + 6 {
            if m != j {
                l *= (pos - m as f64) / (j as f64 - m as f64);
            }
        }
        val += l * table[j];
    }
    val.clamp(0.0, 1.0)
}

/// Plateau bump: 1 on [center - radius/2, center + radius/2], supported in
/// [center - radius, center + radius], with derivatives computed exactly
/// through the R_n recursion (no finite differences near the support edge).
/// Derivative bounds scale like radius^(-n).
pub fn make_bump(center: f64, radius: f64, max_order: usize) -> Result<TestFunction, Error> {
    if !(radius > 0.0) {
        return Err(Error::InvalidRadius(radius));
    }
    let prefactors = Arc::new(bump_prefactors(max_order.max(1)));
    let quarter = radius / 4.0;
    let left_mid = center - 0.75 * radius;
    let right_mid = center + 0.75 * radius;
    let (plateau_lo, plateau_hi) = (center - radius / 2.0, center + radius / 2.0);
    let support = (center - radius, center + radius);
    let pf = prefactors.clone();
    let eval = Arc::new(move |n: usize, x: f64| -> f64 {
        if x <= support.0 || x >= support.1 {
            return 0.0;
        }
        if x >= plateau_lo && x <= plateau_hi {
            return if n == 0 { 1.0 } else { 0.0 };
        }
        let (u, sgn) = if x < plateau_lo {
            ((x - left_mid) / quarter, 1.0)
        } else {
            ((x - right_mid) / quarter, -1.0)
        };
        if n == 0 {
            let t = transition(u);
            if sgn > 0.0 {
                t
            } else {
                1.0 - t
            }
        } else {
            // d^n/dx^n T(u(x)) = (1/quarter)^n psi^{(n-1)}(u) / c
            let scale = sgn * quarter.powi(-(n as i32));
            scale * psi_deriv(&pf, n - 1, u) / bump_normalizer()
        }
    });
    Ok(
        TestFunction::from_parts(support, max_order, eval).with_breakpoints(vec![
            support.0,
            plateau_lo,
            plateau_hi,
            support.1,
        ]),
    )
}

// --- classification -------------------------------------------------------

/// Pointwise class of the field at (x, 0), decided from the t-Taylor data
/// of a: elliptic when Im a(x,0) is already nonzero, "real direction" when
/// the first nonvanishing Im-coefficient appears at order l >= 1, degenerate
/// when none appears up to the available order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "tag", rename_all = "snake_case")]
pub enum PointClass {
    Elliptic,
    RealDirection { order: usize },
    Degenerate,
}

impl PointClass {
    /// The order l; `None` encodes "infinite to tolerance".
    pub fn order(&self) -> Option<usize> {
        match self {
            PointClass::Elliptic => Some(0),
            PointClass::RealDirection { order } => Some(*order),
            PointClass::Degenerate => None,
        }
    }
}

pub fn classify_point(field: &PlanarVectorField, x: f64, tol: f64) -> Result<PointClass, Error> {
    let d = field.domain();
    if !d.contains_x(x) {
        return Err(Error::OutOfDomain {
            x,
            lo: d.x_lo,
            hi: d.x_hi,
        });
    }
    if field.taylor_len() == 0 {
        return Err(Error::EmptyTaylor);
    }
    if field.taylor_at(0, x).im.abs() > tol {
        return Ok(PointClass::Elliptic);
    }
    for l in 1..field.taylor_len() {
        if field.taylor_at(l, x).im.abs() > tol {
            return Ok(PointClass::RealDirection { order: l });
        }
    }
    Ok(PointClass::Degenerate)
}

// --- degenerate-set detection ---------------------------------------------

/// Grid detection of the set where the (purely imaginary) field coefficient
/// vanishes for all t in [0, eps]: grid points with
/// max_{t in [0,eps]} |b(x,t)| <= tol, merged into closed intervals.
pub fn detect_f0(
    field: &PlanarVectorField,
    eps: f64,
    tol: f64,
    x_grid: &[f64],
) -> Result<Vec<(f64, f64)>, Error> {
    if x_grid.len() < 2 {
        return Err(Error::DegenerateGrid("x grid needs >= 2 points".into()));
    }
    if eps > field.domain().t_max {
        return Err(Error::Config(format!(
            "eps = {eps} exceeds the field's t extent {}",
            field.domain().t_max
        )));
    }
    // reality check: a must be i*b with b real to tolerance
    let t_samples = 21;
    let mut max_re: f64 = 0.0;
    let mut sup_a: f64 = 0.0;
    for &x in x_grid {
        for j in 0..=t_samples {
            let t = field.domain().t_max * j as f64 / t_samples as f64;
            let a = field.eval_a(x, t);
            max_re = max_re.max(a.re.abs());
            sup_a = sup_a.max(a.norm());
        }
    }
    let allowed = tol * sup_a;
    if max_re > allowed && max_re > 1e-14 {
        return Err(Error::NotImaginaryForm { max_re, allowed });
    }

    let t_probe = 33;
    let mut inside: Vec<bool> = Vec::with_capacity(x_grid.len());
    for &x in x_grid {
        let mut worst: f64 = 0.0;
        for j in 0..=t_probe {
            let t = eps * j as f64 / t_probe as f64;
            worst = worst.max(field.eval_a(x, t).im.abs());
        }
        inside.push(worst <= tol);
    }
    let mut intervals = Vec::new();
    let mut start: Option<usize> = None;
    for (i, &inc) in inside.iter().enumerate() {
        match (inc, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                intervals.push((x_grid[s], x_grid[i - 1]));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        intervals.push((x_grid[s], x_grid[x_grid.len() - 1]));
    }
    Ok(intervals)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn const_i_field() -> PlanarVectorField {
        PlanarVectorField::from_taylor(
            "const-i",
            vec![Arc::new(|_x| Complex64::new(0.0, 1.0))],
            Domain {
                x_lo: -1.0,
                x_hi: 1.0,
                t_max: 1.0,
            },
        )
        .unwrap()
    }

    #[test]
    fn classify_constant_i_is_elliptic() {
        let f = const_i_field();
        assert_eq!(classify_point(&f, 0.0, 1e-10).unwrap(), PointClass::Elliptic);
        assert_eq!(PointClass::Elliptic.order(), Some(0));
    }

    #[test]
    fn classify_out_of_domain_errors() {
        let f = const_i_field();
        assert!(matches!(
            classify_point(&f, 3.0, 1e-10),
            Err(Error::OutOfDomain { .. })
        ));
    }

    #[test]
    fn bump_values_at_landmarks() {
        let b = make_bump(0.0, 1.0, 0).unwrap();
        assert_eq!(b.deriv(0, 0.0), 1.0);
        assert_eq!(b.deriv(0, 1.0), 0.0);
        assert_eq!(b.deriv(0, -1.0), 0.0);
        assert_eq!(b.deriv(0, 0.49), 1.0);
        let mid = b.deriv(0, 0.75);
        assert!(mid > 0.0 && mid < 1.0);
    }

    #[test]
    fn bump_first_derivative_matches_finite_differences() {
        let b = make_bump(0.0, 1.0, 3).unwrap();
        let x = 0.7;
        let h = 1e-5;
        let fd = (b.deriv(0, x + h) - b.deriv(0, x - h)) / (2.0 * h);
        let exact = b.deriv(1, x);
        assert!(
            (fd - exact).abs() / exact.abs() < 1e-6,
            "fd {fd} vs exact {exact}"
        );
    }

    #[test]
    fn bump_second_derivative_scaling_uniform_over_radius() {
        // property iii): sup |d^n b| * radius^n bounded uniformly
        let mut scaled = Vec::new();
        for r in [1.0, 0.1, 0.01] {
            let b = make_bump(0.0, r, 2).unwrap();
            scaled.push(b.sup_deriv(2, 4000) * r * r);
        }
        let base = scaled[0];
        for s in &scaled {
            assert!((s / base - 1.0).abs() < 0.05, "scaled sups {scaled:?}");
        }
    }

    #[test]
    fn bump_integral_is_three_halves_radius() {
        let b = make_bump(0.3, 0.8, 0).unwrap();
        let mesh = PanelMesh::uniform(-0.5, 1.1, 16, 16);
        let (v, _) = mesh.integrate(|x| Complex64::new(b.deriv(0, x), 0.0));
        assert!((v.re - 1.2).abs() < 1e-10);
        assert!(v.re > 0.8 && v.re < 1.6); // in (radius, 2 radius)
    }

    #[test]
    fn detect_f0_linear_b() {
        // b(x,t) = x: vanishing set {0}
        let f = PlanarVectorField::from_taylor(
            "ib-linear",
            vec![Arc::new(|x| Complex64::new(0.0, x))],
            Domain {
                x_lo: -1.0,
                x_hi: 1.0,
                t_max: 1.0,
            },
        )
        .unwrap();
        let grid: Vec<f64> = (0..=20).map(|i| -1.0 + 0.1 * i as f64).collect();
        let got = detect_f0(&f, 0.5, 1e-9, &grid).unwrap();
        assert_eq!(got.len(), 1);
        assert!((got[0].0 - 0.0).abs() < 1e-12 && (got[0].1 - 0.0).abs() < 1e-12);
    }

    #[test]
    fn detect_f0_constant_b_empty() {
        let f = PlanarVectorField::from_taylor(
            "ib-one",
            vec![Arc::new(|_| Complex64::new(0.0, 1.0))],
            Domain {
                x_lo: -1.0,
                x_hi: 1.0,
                t_max: 1.0,
            },
        )
        .unwrap();
        let grid: Vec<f64> = (0..=10).map(|i| -1.0 + 0.2 * i as f64).collect();
        assert!(detect_f0(&f, 0.5, 1e-9, &grid).unwrap().is_empty());
    }

    #[test]
    fn detect_f0_delayed_vanishing_covers_grid() {
        // b(x,t) = x * max(0, t - 0.5): zero for t <= 0.5, so eps = 0.25
        // reports the whole grid
        struct Delayed;
        impl CoefFn for Delayed {
            fn deriv(&self, nx: usize, nt: usize, x: f64, t: f64) -> Complex64 {
                if nx == 0 && nt == 0 {
                    Complex64::new(0.0, x * (t - 0.5).max(0.0))
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
        }
        let f = PlanarVectorField::new(
            "ib-delayed",
            Arc::new(Delayed),
            vec![Arc::new(|_| Complex64::new(0.0, 0.0))],
            Domain {
                x_lo: -1.0,
                x_hi: 1.0,
                t_max: 1.0,
            },
        )
        .unwrap();
        let grid: Vec<f64> = (0..=10).map(|i| -1.0 + 0.2 * i as f64).collect();
        let got = detect_f0(&f, 0.25, 1e-9, &grid).unwrap();
        assert_eq!(got, vec![(-1.0, 1.0)]);
    }

    #[test]
    fn detect_f0_rejects_non_imaginary_fields() {
        let f = PlanarVectorField::from_taylor(
            "real-part",
            vec![Arc::new(|_| Complex64::new(1.0, 0.0))],
            Domain {
                x_lo: -1.0,
                x_hi: 1.0,
                t_max: 1.0,
            },
        )
        .unwrap();
        let grid: Vec<f64> = (0..=10).map(|i| -1.0 + 0.2 * i as f64).collect();
        assert!(matches!(
            detect_f0(&f, 0.5, 1e-6, &grid),
            Err(Error::NotImaginaryForm { .. })
        ));
    }
}
