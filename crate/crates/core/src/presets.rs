//! Executable presets: the model fields, their closed-form first integrals,
//! named exact solutions, and the branch machinery for the square-root
//! family W_k and the lacunary sum h used by the full-wave-front example.

use crate::branch::{angle_bracket, sqrt_off_neg_imag};
use crate::error::Error;
use crate::field::{CoefFn, Domain, PlanarVectorField, PolynomialCoef, XFn};
use crate::first_integral::FirstIntegral;
use crate::trace::SolutionSampler;
use num_complex::Complex64;
use std::collections::BTreeMap;
use std::sync::Arc;

const I: Complex64 = Complex64::new(0.0, 1.0);

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

// --- W_k machinery (square roots of g_k = Z^2 - 1/k^2) ----------------------

/// Z(x,t) = x (1 + i t^2), the closed-form first integral of the rational
/// preset field.
pub fn z41(x: f64, t: f64) -> Complex64 {
    c(x, 0.0) * c(1.0, t * t)
}

/// g_k = Z^2 - 1/k^2.
pub fn wk_g(k: u32, x: f64, t: f64) -> Complex64 {
    let z = z41(x, t);
    z * z - c(1.0 / (k as f64 * k as f64), 0.0)
}

/// W_k = (Z^2 - 1/k^2)^(1/2), square root taken off the negative imaginary
/// axis. Continuous in the plane, smooth except at (x,t) = (+-1/k, 0).
pub fn wk_eval(k: u32, x: f64, t: f64) -> Complex64 {
    sqrt_off_neg_imag(wk_g(k, x, t))
}

/// Coefficients A_0..A_[n/2] of the closed derivative formula
///   D^n W_k = sum_j A_j g^(1/2 - n + j) (Dg)^(n-2j) (D^2 g)^j,
/// built by the differentiation recursion from A = [1/2] at n = 1. The
/// recursion never references k.
pub fn wk_derivative_coeffs(n: usize) -> Vec<f64> {
    assert!(n >= 1);
    let mut a = vec![0.5];
    for m in 1..n {
        // differentiate: term j gains (1/2 - m + j) * (j-part) and shifts
        // into j+1 with factor (m - 2j); D^3 g = 0 kills the rest
        let mut b = vec![0.0; m / 2 + 2];
        for (j, aj) in a.iter().enumerate() {
            b[j] += aj * (0.5 - m as f64 + j as f64);
            b[j + 1] += aj * (m as f64 - 2.0 * j as f64);
        }
        while b.len() > (m + 1) / 2 + 1 {
            let tail = b.pop().unwrap();
            debug_assert_eq!(tail, 0.0);
        }
        a = b;
    }
    a
}

/// d^n/dx^n W_k(x,t) through the closed formula; stated for t != 0.
pub fn wk_derivative(k: u32, n: usize, x: f64, t: f64) -> Result<Complex64, Error> {
    if t == 0.0 {
        return Err(Error::ZeroTime);
    }
    assert!(n >= 1);
    let g = wk_g(k, x, t);
    let w = c(1.0, t * t);
    let dg = c(2.0 * x, 0.0) * w * w;
    let d2g = c(2.0, 0.0) * w * w;
    let sqrt_g = sqrt_off_neg_imag(g);
    let coeffs = wk_derivative_coeffs(n);
    let mut acc = c(0.0, 0.0);
    for (j, aj) in coeffs.iter().enumerate() {
        // g^(1/2 - n + j) with the same branch as W_k itself
        let power = sqrt_g * g.powi(j as i32 - n as i32);
        acc += power * dg.powu((n - 2 * j) as u32) * d2g.powu(j as u32) * *aj;
    }
    Ok(acc)
}

/// Partial sum of h = sum_k 3^(-k) W_k up to K terms, plus the geometric
/// tail bound sum_{k>K} 3^(-k) (|Z|^2 + 1)^(1/2) = (|Z|^2+1)^(1/2) 3^(-K)/2.
pub fn h_series(x: f64, t: f64, big_k: usize) -> (Complex64, f64) {
    assert!(big_k >= 1);
    let mut acc = c(0.0, 0.0);
    let mut w = 1.0;
    for k in 1..=big_k {
        w /= 3.0;
        acc += wk_eval(k as u32, x, t) * w;
    }
    let z = z41(x, t).norm_sqr();
    let tail = (z + 1.0).sqrt() * w / 2.0;
    (acc, tail)
}

/// x-locations of the trace singularities of the truncated h: +-1/k.
pub fn h_singular_points(big_k: usize) -> Vec<f64> {
    let mut pts = Vec::with_capacity(2 * big_k);
    for k in 1..=big_k {
        pts.push(1.0 / k as f64);
        pts.push(-1.0 / k as f64);
    }
    pts
}

// --- preset coefficient functions --------------------------------------------

/// a(x,t) = -2 i x t / (1 + i t^2), with exact mixed derivatives through the
/// partial-fraction form t/(1+it^2) = (1/2i) [1/(t-w) + 1/(t+w)], w^2 = i.
struct RationalCoef;

impl RationalCoef {
    fn m_deriv(&self, n: usize, t: f64) -> Complex64 {
        let w = Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4);
        let tc = c(t, 0.0);
        let mut fact = 1.0;
        for j in 1..=n {
            fact *= j as f64;
        }
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        let p = -(n as i32) - 1;
        ((tc - w).powi(p) + (tc + w).powi(p)) * c(0.0, -0.5) * sign * fact
    }
}

impl CoefFn for RationalCoef {
    fn deriv(&self, nx: usize, nt: usize, x: f64, t: f64) -> Complex64 {
        match nx {
            0 => self.m_deriv(nt, t) * c(0.0, -2.0 * x),
            1 => self.m_deriv(nt, t) * c(0.0, -2.0),
            _ => c(0.0, 0.0),
        }
    }
}

/// Flat oscillatory tube coefficient a(x,t) = -i Phi'(t), with
/// Phi(t) = exp(-1/t^2) cos(1/t). Derivatives of Phi are carried exactly in
/// the closed family e(t) (P(u) cos(1/t) + Q(u) sin(1/t)), u = 1/t.
struct TubeCoef {
    /// (P_n, Q_n) polynomial pairs for Phi^(n), n = 0..=max
    layers: Vec<(Vec<f64>, Vec<f64>)>,
}

fn poly_mul_shift(p: &[f64], shift: usize, scale: f64, out: &mut Vec<f64>) {
    if out.len() < p.len() + shift {
        out.resize(p.len() + shift, 0.0);
    }
    for (i, v) in p.iter().enumerate() {
        out[i + shift] += scale * v;
    }
}

fn poly_derivative(p: &[f64]) -> Vec<f64> {
    if p.len() <= 1 {
        return vec![0.0];
    }
    p[1..]
        .iter()
        .enumerate()
        .map(|(i, v)| (i as f64 + 1.0) * v)
        .collect()
}

impl TubeCoef {
    fn new(max_order: usize) -> Self {
        let mut layers = vec![(vec![1.0], vec![0.0])];
        for n in 0..max_order {
            let (p, q) = &layers[n];
            // d/dt: P~ = 2u^3 P - u^2 P' - u^2 Q ; Q~ = 2u^3 Q - u^2 Q' + u^2 P
            let mut pn = Vec::new();
            poly_mul_shift(p, 3, 2.0, &mut pn);
            poly_mul_shift(&poly_derivative(p), 2, -1.0, &mut pn);
            poly_mul_shift(q, 2, -1.0, &mut pn);
            let mut qn = Vec::new();
            poly_mul_shift(q, 3, 2.0, &mut qn);
            poly_mul_shift(&poly_derivative(q), 2, -1.0, &mut qn);
            poly_mul_shift(p, 2, 1.0, &mut qn);
            layers.push((pn, qn));
        }
        TubeCoef { layers }
    }

    /// Phi^(n)(t); 0 at t = 0 (the function is flat there).
    fn phi_deriv(&self, n: usize, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let u = 1.0 / t;
        if u * u > 700.0 {
            return 0.0;
        }
        let e = (-u * u).exp();
        let (p, q) = &self.layers[n];
        let horner = |poly: &[f64]| poly.iter().rev().fold(0.0, |acc, c| acc * u + c);
        e * (horner(p) * u.cos() + horner(q) * u.sin())
    }
}

impl CoefFn for TubeCoef {
    fn deriv(&self, nx: usize, nt: usize, _x: f64, t: f64) -> Complex64 {
        if nx > 0 {
            return c(0.0, 0.0);
        }
        c(0.0, -self.phi_deriv(nt + 1, t))
    }
}

/// Phi(t) = exp(-1/t^2) cos(1/t) for the tube preset, exposed for the
/// direction-extraction tests.
pub fn tube_phi(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let u = 1.0 / t;
    if u * u > 700.0 {
        return 0.0;
    }
    (-u * u).exp() * u.cos()
}

// --- the catalog -------------------------------------------------------------

/// A preset: field, closed-form first integral, named exact solutions, and
/// an optional closed-form trace oracle.
pub struct Preset {
    pub name: String,
    pub field: PlanarVectorField,
    pub integral: FirstIntegral,
    pub solutions: BTreeMap<String, SolutionSampler>,
    pub trace_oracle: Option<Arc<dyn Fn(f64) -> Complex64 + Send + Sync>>,
    pub notes: String,
}

impl Preset {
    pub fn solution(&self, name: &str) -> Result<&SolutionSampler, Error> {
        self.solutions
            .get(name)
            .ok_or_else(|| Error::UnknownPreset(format!("{}.{}", self.name, name)))
    }

    /// Max finite-difference residual |df/dt + a df/dx| over the named
    /// solutions on a verification grid away from t = 0 and branch points.
    pub fn verify_solutions(&self) -> f64 {
        let xs = [-0.9, -0.7, -0.44, -0.07, 0.07, 0.3, 0.44, 0.7, 0.9];
        let ts = [0.3, 0.45, 0.6];
        let h = 1e-4;
        let mut worst: f64 = 0.0;
        for sol in self.solutions.values() {
            for &x in &xs {
                for &t in &ts {
                    let df_dt =
                        crate::diff::central_derivative_c(|s| sol.eval(x, s), t, 1, 2, h);
                    let df_dx =
                        crate::diff::central_derivative_c(|y| sol.eval(y, t), x, 1, 2, h);
                    let r = (df_dt + self.field.eval_a(x, t) * df_dx).norm();
                    worst = worst.max(r);
                }
            }
        }
        worst
    }
}

pub const PRESET_NAMES: [&str; 5] = [
    "cauchy_riemann",
    "mizohata",
    "example41",
    "tube1d",
    "thm31ii",
];

/// Default t-Taylor order kept on preset fields.
pub const PRESET_TAYLOR_ORDER: usize = 8;

fn zero_xfn() -> XFn {
    Arc::new(|_| c(0.0, 0.0))
}

pub fn preset(name: &str) -> Result<Preset, Error> {
    match name {
        "cauchy_riemann" => {
            let domain = Domain {
                x_lo: -2.0,
                x_hi: 2.0,
                t_max: 1.0,
            };
            let mut coeffs = vec![vec![]; PRESET_TAYLOR_ORDER + 1];
            coeffs[0] = vec![I];
            let field =
                PlanarVectorField::from_polynomial("cauchy_riemann", coeffs, domain)?;
            let integral =
                FirstIntegral::closed_form(Arc::new(|x: f64, t: f64| c(x, -t)), 99);
            let mut solutions = BTreeMap::new();
            solutions.insert(
                "inv".into(),
                SolutionSampler::new(
                    "inv",
                    Arc::new(|x: f64, t: f64| c(x, -t).inv()),
                    1,
                    0.5,
                )
                .with_singular_hints(vec![0.0]),
            );
            solutions.insert(
                "z".into(),
                SolutionSampler::new("z", Arc::new(|x: f64, t: f64| c(x, -t)), 0, 0.5),
            );
            solutions.insert(
                "z2".into(),
                SolutionSampler::new(
                    "z2",
                    Arc::new(|x: f64, t: f64| c(x, -t) * c(x, -t)),
                    0,
                    0.5,
                ),
            );
            Ok(Preset {
                name: name.into(),
                field,
                integral,
                solutions,
                trace_oracle: None,
                notes: "constant-coefficient model; solutions are holomorphic in x - it".into(),
            })
        }
        "mizohata" => {
            let domain = Domain {
                x_lo: -2.0,
                x_hi: 2.0,
                t_max: 1.0,
            };
            let mut coeffs = vec![vec![]; PRESET_TAYLOR_ORDER + 1];
            coeffs[1] = vec![I];
            let field = PlanarVectorField::from_polynomial("mizohata", coeffs, domain)?;
            let z = |x: f64, t: f64| c(x, -t * t / 2.0);
            let integral = FirstIntegral::closed_form(Arc::new(z), 99);
            let mut solutions = BTreeMap::new();
            solutions.insert(
                "z".into(),
                SolutionSampler::new("z", Arc::new(z), 0, 0.5),
            );
            solutions.insert(
                "z2".into(),
                SolutionSampler::new("z2", Arc::new(move |x, t| z(x, t) * z(x, t)), 0, 0.5),
            );
            Ok(Preset {
                name: name.into(),
                field,
                integral,
                solutions,
                trace_oracle: None,
                notes: "model degenerate field: elliptic for t > 0, real direction at t = 0"
                    .into(),
            })
        }
        "example41" => {
            let domain = Domain {
                x_lo: -2.0,
                x_hi: 2.0,
                t_max: 1.0,
            };
            // t-Taylor of -2ix t/(1+it^2): odd powers with cycling units
            let mut taylor: Vec<XFn> = vec![zero_xfn(); PRESET_TAYLOR_ORDER + 1];
            let cycle = [c(0.0, -2.0), c(-2.0, 0.0), c(0.0, 2.0), c(2.0, 0.0)];
            for (n, m) in (1..=PRESET_TAYLOR_ORDER).step_by(2).enumerate() {
                let unit = cycle[n % 4];
                taylor[m] = Arc::new(move |x: f64| unit * x);
            }
            let field = PlanarVectorField::new(
                "example41",
                Arc::new(RationalCoef),
                taylor,
                domain,
            )?;
            let integral = FirstIntegral::closed_form(Arc::new(z41), 99);
            let mut solutions = BTreeMap::new();
            solutions.insert(
                "z".into(),
                SolutionSampler::new("z", Arc::new(z41), 0, 0.5),
            );
            solutions.insert(
                "w1".into(),
                SolutionSampler::new("w1", Arc::new(|x, t| wk_eval(1, x, t)), 0, 0.5)
                    .with_singular_hints(vec![-1.0, 1.0]),
            );
            solutions.insert(
                "w2".into(),
                SolutionSampler::new("w2", Arc::new(|x, t| wk_eval(2, x, t)), 0, 0.5)
                    .with_singular_hints(vec![-0.5, 0.5]),
            );
            solutions.insert(
                "h".into(),
                SolutionSampler::new("h", Arc::new(|x, t| h_series(x, t, 8).0), 0, 0.5)
                    .with_singular_hints(h_singular_points(8)),
            );
            Ok(Preset {
                name: name.into(),
                field,
                integral,
                solutions,
                trace_oracle: None,
                notes: "rational field with polynomial first integral x(1+it^2); h is the \
                        lacunary square-root sum whose trace has a full wave front at 0"
                    .into(),
            })
        }
        "tube1d" => {
            let domain = Domain {
                x_lo: -2.0,
                x_hi: 2.0,
                t_max: 0.8,
            };
            let coef = Arc::new(TubeCoef::new(PRESET_TAYLOR_ORDER + 4));
            let taylor: Vec<XFn> = vec![zero_xfn(); PRESET_TAYLOR_ORDER + 1];
            let field = PlanarVectorField::new("tube1d", coef, taylor, domain)?;
            let z = |x: f64, t: f64| c(x, tube_phi(t));
            let integral = FirstIntegral::closed_form(Arc::new(z), 99);
            let mut solutions = BTreeMap::new();
            solutions.insert(
                "z".into(),
                SolutionSampler::new("z", Arc::new(z), 0, 0.5),
            );
            Ok(Preset {
                name: name.into(),
                field,
                integral,
                solutions,
                trace_oracle: None,
                notes: "flat oscillatory tube analogue: Phi(0,t) changes sign along every \
                        sequence t -> 0, so both directions carry witnesses"
                    .into(),
            })
        }
        "thm31ii" => {
            let domain = Domain {
                x_lo: -1.0,
                x_hi: 1.0,
                t_max: 1.0,
            };
            let mut coeffs = vec![vec![]; PRESET_TAYLOR_ORDER + 1];
            coeffs[1] = vec![c(0.0, 0.0), I];
            let field = PlanarVectorField::from_polynomial("thm31ii", coeffs, domain)?;
            let z = |x: f64, t: f64| c(x, 0.0) * (-I * c(t * t / 2.0, 0.0)).exp();
            let integral = FirstIntegral::closed_form(Arc::new(z), 99);
            let u = move |x: f64, t: f64| {
                angle_bracket(z(x, t)).expect("Z stays in the sector on the preset domain")
            };
            let mut solutions = BTreeMap::new();
            solutions.insert(
                "z".into(),
                SolutionSampler::new("z", Arc::new(z), 0, 0.5),
            );
            solutions.insert(
                "u3".into(),
                SolutionSampler::new(
                    "u3",
                    Arc::new(move |x, t| {
                        let v = u(x, t);
                        v * v * v
                    }),
                    0,
                    0.5,
                )
                .with_singular_hints(vec![0.0]),
            );
            // lambda(x) = Z(x,0)^2 / x^2 = 1, so the trace is |x|^3 exactly
            let oracle: Arc<dyn Fn(f64) -> Complex64 + Send + Sync> =
                Arc::new(|x: f64| c(x.abs().powi(3), 0.0));
            Ok(Preset {
                name: name.into(),
                field,
                integral,
                solutions,
                trace_oracle: Some(oracle),
                notes: "field proportional to a real vector field along the t-axis; the cube \
                        of the sector root of Z has trace |x|^3 with a full wave front at 0"
                    .into(),
            })
        }
        other => Err(Error::UnknownPreset(other.into())),
    }
}
