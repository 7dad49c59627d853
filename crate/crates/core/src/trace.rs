//! Weak boundary values of tempered solutions: the correction tower
//! phi_0, ..., phi_k with Phi^k = sum phi_j t^j / j!, and the three-term
//! pairing that evaluates <bf, phi> without differentiating f.
//!
//! Tower levels are held symbolically as sums of monomials
//! c * prod (d^nx d^nt a) * phi^(p), so every x-derivative is exact; only
//! the independent identity check differentiates numerically.

use crate::error::Error;
use crate::field::{PlanarVectorField, TestFunction};
use crate::quad::{geometric_t_edges, gauss_legendre, KahanC, PanelMesh};
use num_complex::Complex64;
use std::sync::Arc;

fn binomial(n: usize, k: usize) -> f64 {
    let mut v = 1.0;
    for i in 0..k {
        v = v * (n - i) as f64 / (i + 1) as f64;
    }
    v
}

// --- pairing profiles ------------------------------------------------------

/// A complex-valued, compactly supported pairing function with exact
/// derivatives: either a real test function, or the FBI kernel times a
/// cutoff (the pathway distributional traces use).
#[derive(Clone)]
pub struct PairingProfile {
    support: (f64, f64),
    max_order: usize,
    eval: Arc<dyn Fn(usize, f64) -> Complex64 + Send + Sync>,
    breakpoints: Vec<f64>,
}

impl PairingProfile {
    pub fn from_test_function(phi: &TestFunction) -> Self {
        let breakpoints = phi.breakpoints().to_vec();
        let phi = phi.clone();
        PairingProfile {
            support: phi.support(),
            max_order: phi.max_order(),
            eval: Arc::new(move |n, x| Complex64::new(phi.deriv(n, x), 0.0)),
            breakpoints,
        }
    }

    pub fn from_fn(
        support: (f64, f64),
        max_order: usize,
        eval: Arc<dyn Fn(usize, f64) -> Complex64 + Send + Sync>,
    ) -> Self {
        PairingProfile {
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

    /// cutoff(x) * exp(i zeta (s - x) - kappa |zeta| (s - x)^2), the
    /// generalized kernel at t = 0 for integrals normalized to Z(x,0) = x.
    /// Derivatives come from the Leibniz rule and the closed recursion for
    /// derivatives of exp(g) with quadratic g.
    pub fn kernel(cutoff: &TestFunction, s: f64, zeta: f64, kappa: f64) -> Self {
        let cutoff = cutoff.clone();
        let support = cutoff.support();
        let max_order = cutoff.max_order();
        let breakpoints = cutoff.breakpoints().to_vec();
        let eval = Arc::new(move |n: usize, x: f64| -> Complex64 {
            let w = zeta.abs() * kappa;
            let d = s - x;
            let g = Complex64::new(-w * d * d, zeta * d);
            let k0 = g.exp();
            // K^(j) by K' = g' K, g'' = -2w, g''' = 0
            let g1 = Complex64::new(2.0 * w * d, -zeta);
            let g2 = Complex64::new(-2.0 * w, 0.0);
            let mut kd = vec![k0; n + 1];
            for m in 0..n {
                let mut acc = g1 * kd[m];
                if m >= 1 {
                    acc += g2 * kd[m - 1] * m as f64;
                }
                kd[m + 1] = acc;
            }
            let mut out = Complex64::new(0.0, 0.0);
            for j in 0..=n {
                out += kd[j] * cutoff.deriv(n - j, x) * binomial(n, j);
            }
            out
        });
        PairingProfile {
            support,
            max_order,
            eval,
            breakpoints,
        }
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn deriv(&self, n: usize, x: f64) -> Complex64 {
        if x <= self.support.0 || x >= self.support.1 {
            return Complex64::new(0.0, 0.0);
        }
        (self.eval)(n, x)
    }
}

// --- tower monomial algebra -------------------------------------------------

/// c * prod_i d^{nx_i}_x d^{nt_i}_t a(x,t) * phi^(p)(x)
#[derive(Clone, Debug, PartialEq)]
struct Term {
    coef: f64,
    factors: Vec<(u8, u8)>,
    profile_order: usize,
}

type Level = Vec<Term>;

fn canonicalize(mut terms: Level) -> Level {
    for t in &mut terms {
        t.factors.sort_unstable();
    }
    terms.sort_by(|a, b| {
        (&a.factors, a.profile_order)
            .partial_cmp(&(&b.factors, b.profile_order))
            .unwrap()
    });
    let mut out: Level = Vec::with_capacity(terms.len());
    for t in terms {
        match out.last_mut() {
            Some(last) if last.factors == t.factors && last.profile_order == t.profile_order => {
                last.coef += t.coef;
            }
            _ => out.push(t),
        }
    }
    out.retain(|t| t.coef != 0.0);
    out
}

fn d_dx(level: &Level) -> Level {
    let mut out = Vec::new();
    for term in level {
        for i in 0..term.factors.len() {
            let mut f = term.factors.clone();
            f[i].0 += 1;
            out.push(Term {
                coef: term.coef,
                factors: f,
                profile_order: term.profile_order,
            });
        }
        out.push(Term {
            coef: term.coef,
            factors: term.factors.clone(),
            profile_order: term.profile_order + 1,
        });
    }
    canonicalize(out)
}

fn d_dt(level: &Level) -> Level {
    let mut out = Vec::new();
    for term in level {
        for i in 0..term.factors.len() {
            let mut f = term.factors.clone();
            f[i].1 += 1;
            out.push(Term {
                coef: term.coef,
                factors: f,
                profile_order: term.profile_order,
            });
        }
    }
    canonicalize(out)
}

fn mul_a(level: &Level) -> Level {
    level
        .iter()
        .map(|t| {
            let mut f = t.factors.clone();
            f.push((0, 0));
            Term {
                coef: t.coef,
                factors: f,
                profile_order: t.profile_order,
            }
        })
        .collect()
}

fn negate(mut level: Level) -> Level {
    for t in &mut level {
        t.coef = -t.coef;
    }
    level
}

fn add(mut a: Level, b: Level) -> Level {
    a.extend(b);
    canonicalize(a)
}

/// phi_{j+1} = -d/dt phi_j - d/dx (a phi_j)
fn next_level(level: &Level) -> Level {
    add(negate(d_dt(level)), negate(d_dx(&mul_a(level))))
}

fn eval_level(
    level: &Level,
    field: &PlanarVectorField,
    profile: &PairingProfile,
    x: f64,
    t: f64,
) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for term in level {
        let p = profile.deriv(term.profile_order, x);
        if p.re == 0.0 && p.im == 0.0 {
            continue;
        }
        let mut v = p * term.coef;
        for &(nx, nt) in &term.factors {
            v *= field.a_deriv(nx as usize, nt as usize, x, t);
        }
        acc += v;
    }
    acc
}

/// A level compiled for tight loops: the distinct field-derivative factors
/// are evaluated once per (x, t) and shared across terms, and profile
/// derivatives are looked up in a per-node table.
struct CompiledLevel {
    distinct: Vec<(u8, u8)>,
    /// (coef, factor indices into `distinct`, profile order)
    terms: Vec<(f64, Vec<u8>, usize)>,
}

fn compile_level(level: &Level) -> CompiledLevel {
    let mut distinct: Vec<(u8, u8)> = Vec::new();
    let mut terms = Vec::with_capacity(level.len());
    for t in level {
        let mut idx = Vec::with_capacity(t.factors.len());
        for f in &t.factors {
            let i = match distinct.iter().position(|d| d == f) {
                Some(i) => i,
                None => {
                    distinct.push(*f);
                    distinct.len() - 1
                }
            };
            idx.push(i as u8);
        }
        terms.push((t.coef, idx, t.profile_order));
    }
    CompiledLevel { distinct, terms }
}

impl CompiledLevel {
    /// `prof` holds profile derivatives at the current node, indexed by
    /// order; `scratch` is reused for the distinct factor values.
    fn eval(
        &self,
        field: &PlanarVectorField,
        prof: &[Complex64],
        x: f64,
        t: f64,
        scratch: &mut Vec<Complex64>,
    ) -> Complex64 {
        scratch.clear();
        for &(nx, nt) in &self.distinct {
            scratch.push(field.a_deriv(nx as usize, nt as usize, x, t));
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for (coef, idx, p) in &self.terms {
            let pv = prof[*p];
            if pv.re == 0.0 && pv.im == 0.0 {
                continue;
            }
            let mut v = pv * *coef;
            for &i in idx {
                v *= scratch[i as usize];
            }
            acc += v;
        }
        acc
    }
}

// --- the tower --------------------------------------------------------------

/// The correction tower phi_0 .. phi_k for a field and a pairing profile.
pub struct PhiTower {
    levels: Vec<Level>,
    field: PlanarVectorField,
    profile: PairingProfile,
    k: usize,
}

impl PhiTower {
    pub fn k(&self) -> usize {
        self.k
    }

    /// d^alpha_x phi_j (x, t); alpha + j must stay within the profile's
    /// derivative budget.
    pub fn level_deriv(&self, j: usize, alpha: usize, x: f64, t: f64) -> Complex64 {
        let mut level = self.levels[j].clone();
        for _ in 0..alpha {
            level = d_dx(&level);
        }
        eval_level(&level, &self.field, &self.profile, x, t)
    }

    pub fn level_value(&self, j: usize, x: f64, t: f64) -> Complex64 {
        eval_level(&self.levels[j], &self.field, &self.profile, x, t)
    }

    /// Phi^j(x,t) = sum_{i<=j} phi_i t^i / i!
    pub fn phi_cap(&self, j: usize, x: f64, t: f64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut weight = 1.0;
        for i in 0..=j {
            if i > 0 {
                weight *= t / i as f64;
            }
            acc += eval_level(&self.levels[i], &self.field, &self.profile, x, t) * weight;
        }
        acc
    }

    pub fn support(&self) -> (f64, f64) {
        self.profile.support()
    }
}

/// Build the tower phi_0 = phi, phi_{j+1} = -d/dt phi_j + Q* phi_j with
/// Q* psi = -d/dx (a psi), up to level k.
pub fn build_phi_tower(
    field: &PlanarVectorField,
    phi: &TestFunction,
    k: usize,
) -> Result<PhiTower, Error> {
    build_phi_tower_profile(field, PairingProfile::from_test_function(phi), k)
}

pub fn build_phi_tower_profile(
    field: &PlanarVectorField,
    profile: PairingProfile,
    k: usize,
) -> Result<PhiTower, Error> {
    if profile.max_order() < k + 1 {
        return Err(Error::InsufficientOrder {
            have: profile.max_order(),
            need: k + 1,
        });
    }
    let mut levels: Vec<Level> = vec![vec![Term {
        coef: 1.0,
        factors: Vec::new(),
        profile_order: 0,
    }]];
    for j in 0..k {
        let next = next_level(&levels[j]);
        levels.push(next);
    }
    Ok(PhiTower {
        levels,
        field: field.clone(),
        profile,
        k,
    })
}

/// Numerical check of the identity L^t(Phi^j) = phi_{j+1} t^j / j! for all
/// j < k on the given grid. The t-derivative of Phi^j is taken by 4th-order
/// finite differences (an independent route); the x-part is exact. Returns
/// the maximum absolute deviation.
pub fn lt_phi_identity(tower: &PhiTower, x_grid: &[f64], t_grid: &[f64]) -> f64 {
    let field = &tower.field;
    let profile = &tower.profile;
    // symbolic d/dx (a * phi_i) per level
    let dx_a_levels: Vec<Level> = tower.levels.iter().map(|l| d_dx(&mul_a(l))).collect();
    let mut worst: f64 = 0.0;
    for j in 0..tower.k {
        for &x in x_grid {
            for &t in t_grid {
                let h = (0.015f64).min(t / 4.0);
                let dt_phi = crate::diff::central_derivative_c(
                    |s| tower.phi_cap(j, x, s),
                    t,
                    1,
                    2,
                    h,
                );
                let mut xa = Complex64::new(0.0, 0.0);
                let mut weight = 1.0;
                for i in 0..=j {
                    if i > 0 {
                        weight *= t / i as f64;
                    }
                    xa += eval_level(&dx_a_levels[i], field, profile, x, t) * weight;
                }
                let lt = -dt_phi - xa;
                let mut tj = 1.0;
                for i in 1..=j {
                    tj *= t / i as f64;
                }
                let rhs = tower.level_value(j + 1, x, t) * tj;
                worst = worst.max((lt - rhs).norm());
            }
        }
    }
    worst
}

// --- solution samplers and the pairing ---------------------------------------

/// Pointwise sampler of a solution f on t > 0: evaluation, optional Lf for
/// inexact solutions, the tempered-growth order N, and the default pairing
/// depth T.
#[derive(Clone)]
pub struct SolutionSampler {
    pub name: String,
    eval_f: Arc<dyn Fn(f64, f64) -> Complex64 + Send + Sync>,
    eval_lf: Option<Arc<dyn Fn(f64, f64) -> Complex64 + Send + Sync>>,
    pub growth_n: usize,
    pub t_depth: f64,
    /// x-locations where the trace is singular; quadrature grades panels
    /// toward these.
    pub singular_hints: Vec<f64>,
}

impl SolutionSampler {
    pub fn new(
        name: impl Into<String>,
        eval_f: Arc<dyn Fn(f64, f64) -> Complex64 + Send + Sync>,
        growth_n: usize,
        t_depth: f64,
    ) -> Self {
        SolutionSampler {
            name: name.into(),
            eval_f,
            eval_lf: None,
            growth_n,
            t_depth,
            singular_hints: Vec::new(),
        }
    }

    pub fn with_lf(mut self, lf: Arc<dyn Fn(f64, f64) -> Complex64 + Send + Sync>) -> Self {
        self.eval_lf = Some(lf);
        self
    }

    pub fn with_singular_hints(mut self, hints: Vec<f64>) -> Self {
        self.singular_hints = hints;
        self
    }

    pub fn eval(&self, x: f64, t: f64) -> Complex64 {
        (self.eval_f)(x, t)
    }

    pub fn lf(&self, x: f64, t: f64) -> Option<Complex64> {
        self.eval_lf.as_ref().map(|f| f(x, t))
    }

    pub fn has_lf(&self) -> bool {
        self.eval_lf.is_some()
    }

    /// Spot-check of tempered growth: max over the grid of |f(x,t)| t^N.
    pub fn growth_constant(&self, x_grid: &[f64], t_grid: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for &x in x_grid {
            for &t in t_grid {
                worst = worst.max(self.eval(x, t).norm() * t.powi(self.growth_n as i32));
            }
        }
        worst
    }
}

/// Quadrature plan for pairings: Gauss-Legendre panels in x graded toward
/// singular hints, a geometric mesh (ratio 1/2) in t, and a one-step
/// refinement estimate that must meet `tol`.
#[derive(Clone, Debug)]
pub struct QuadSpec {
    pub x_panels: usize,
    pub x_gl: usize,
    pub grade_levels: usize,
    pub t_levels: usize,
    pub t_gl: usize,
    pub tol: f64,
}

impl Default for QuadSpec {
    fn default() -> Self {
        QuadSpec {
            x_panels: 48,
            x_gl: 12,
            grade_levels: 30,
            t_levels: 40,
            t_gl: 12,
            tol: 1e-6,
        }
    }
}

/// Value of a pairing together with its refinement error estimate and an
/// accumulated round-off floor (the scale below which the three-term sum
/// carries no information).
#[derive(Debug, Clone, Copy)]
pub struct Paired {
    pub value: Complex64,
    pub estimate: f64,
    pub noise: f64,
}

fn pairing_x_mesh(
    profile: &PairingProfile,
    field: &PlanarVectorField,
    hints: &[f64],
    spec: &QuadSpec,
    refine: bool,
) -> PanelMesh {
    let d = field.domain();
    let lo = profile.support().0.max(d.x_lo);
    let hi = profile.support().1.min(d.x_hi);
    let panels = if refine { spec.x_panels * 2 } else { spec.x_panels };
    let mut refine_points: Vec<(f64, usize)> =
        hints.iter().map(|&p| (p, spec.grade_levels)).collect();
    // bump junctions carry steep (though smooth) derivative structure;
    // moderate grading there keeps Gauss-Legendre panels spectral
    refine_points.extend(profile.breakpoints().iter().map(|&p| (p, 12)));
    PanelMesh::graded(lo, hi, panels, spec.x_gl, &refine_points)
}

fn pair_trace_once(
    sol: &SolutionSampler,
    field: &PlanarVectorField,
    tower_levels: &[Level],
    profile: &PairingProfile,
    k: usize,
    t_depth: f64,
    spec: &QuadSpec,
    refine: bool,
) -> (Complex64, f64) {
    let x_mesh = pairing_x_mesh(profile, field, &sol.singular_hints, spec, refine);
    let nodes = x_mesh.nodes();
    // profile derivatives are t-independent: tabulate once per node
    let prof: Vec<Vec<Complex64>> = nodes
        .iter()
        .map(|&(x, _)| (0..=k + 1).map(|p| profile.deriv(p, x)).collect())
        .collect();
    let compiled: Vec<CompiledLevel> = tower_levels.iter().map(compile_level).collect();
    let mut scratch: Vec<Complex64> = Vec::new();

    let mut phi_cap = |idx: usize,
                       x: f64,
                       t: f64,
                       scratch: &mut Vec<Complex64>|
     -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut weight = 1.0;
        for (i, level) in compiled.iter().take(k + 1).enumerate() {
            if i > 0 {
                weight *= t / i as f64;
            }
            acc += level.eval(field, &prof[idx], x, t, scratch) * weight;
        }
        acc
    };

    // term 1: integral of f(., T) Phi^k(., T)
    let mut acc1 = KahanC::default();
    for (idx, &(x, w)) in nodes.iter().enumerate() {
        acc1.add(sol.eval(x, t_depth) * phi_cap(idx, x, t_depth, &mut scratch) * w);
    }
    let term1 = acc1.value();
    let mut noise = acc1.noise_floor();

    // t-mesh, geometric toward 0
    let t_edges = geometric_t_edges(t_depth, 0.5, spec.t_levels);
    let t_gl = if refine { spec.t_gl + 4 } else { spec.t_gl };
    let (tn, tw) = gauss_legendre(t_gl);

    // term 3: + int f * phi_{k+1} t^k / k!
    let mut kfact = 1.0;
    for i in 1..=k {
        kfact *= i as f64;
    }
    let top = &compiled[k + 1];
    let mut acc3 = KahanC::default();
    let mut acc2 = KahanC::default();
    for p in t_edges.windows(2) {
        let half = 0.5 * (p[1] - p[0]);
        let mid = 0.5 * (p[1] + p[0]);
        for (n, w) in tn.iter().zip(tw.iter()) {
            let t = mid + half * n;
            let wt = w * half;
            let mut inner3 = KahanC::default();
            for (idx, &(x, xw)) in nodes.iter().enumerate() {
                inner3.add(sol.eval(x, t) * top.eval(field, &prof[idx], x, t, &mut scratch) * xw);
            }
            let wk = wt * t.powi(k as i32) / kfact;
            acc3.add(inner3.value() * wk);
            noise += inner3.noise_floor() * wk.abs();
            if sol.has_lf() {
                let mut inner2 = KahanC::default();
                for (idx, &(x, xw)) in nodes.iter().enumerate() {
                    inner2.add(sol.lf(x, t).unwrap() * phi_cap(idx, x, t, &mut scratch) * xw);
                }
                acc2.add(inner2.value() * wt);
            }
        }
    }
    (term1 - acc2.value() + acc3.value(), noise)
}

/// Three-term evaluation of <bf, phi>:
///   int f(.,T) Phi^k(.,T) dx - int int Lf Phi^k + int int f L* Phi^k,
/// with L* Phi^k = phi_{k+1} t^k / k! substituted in closed form. The
/// middle term is omitted for exact solutions. Requires k >= N + 1.
pub fn pair_trace(
    sol: &SolutionSampler,
    field: &PlanarVectorField,
    profile: &PairingProfile,
    k: usize,
    t_depth: f64,
    spec: &QuadSpec,
) -> Result<Paired, Error> {
    if k <= sol.growth_n {
        return Err(Error::KTooSmall {
            k,
            n: sol.growth_n,
        });
    }
    if profile.max_order() < k + 1 {
        return Err(Error::InsufficientOrder {
            have: profile.max_order(),
            need: k + 1,
        });
    }
    let mut levels: Vec<Level> = vec![vec![Term {
        coef: 1.0,
        factors: Vec::new(),
        profile_order: 0,
    }]];
    for j in 0..=k {
        let next = next_level(&levels[j]);
        levels.push(next);
    }
    let (coarse, _) = pair_trace_once(sol, field, &levels, profile, k, t_depth, spec, false);
    let (fine, noise) = pair_trace_once(sol, field, &levels, profile, k, t_depth, spec, true);
    let estimate = (fine - coarse).norm();
    if estimate > spec.tol.max(4.0 * noise) {
        return Err(Error::QuadratureNonConvergence {
            estimate,
            tol: spec.tol,
        });
    }
    Ok(Paired {
        value: fine,
        estimate,
        noise,
    })
}

/// The trace as a functional: pairs test functions (and kernel profiles)
/// against bf for a fixed solution, field, tower order and depth.
#[derive(Clone)]
pub struct TraceFunctional {
    sol: SolutionSampler,
    field: PlanarVectorField,
    k: usize,
    t_depth: f64,
    quad: QuadSpec,
}

impl TraceFunctional {
    pub fn new(
        sol: SolutionSampler,
        field: PlanarVectorField,
        k: usize,
        t_depth: f64,
        quad: QuadSpec,
    ) -> Result<Self, Error> {
        if k <= sol.growth_n {
            return Err(Error::KTooSmall {
                k,
                n: sol.growth_n,
            });
        }
        Ok(TraceFunctional {
            sol,
            field,
            k,
            t_depth,
            quad,
        })
    }

    pub fn pair(&self, phi: &TestFunction) -> Result<Complex64, Error> {
        self.pair_profile(&PairingProfile::from_test_function(phi))
            .map(|p| p.value)
    }

    pub fn pair_profile(&self, profile: &PairingProfile) -> Result<Paired, Error> {
        pair_trace(
            &self.sol,
            &self.field,
            profile,
            self.k,
            self.t_depth,
            &self.quad,
        )
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn t_depth(&self) -> f64 {
        self.t_depth
    }

    pub fn sol(&self) -> &SolutionSampler {
        &self.sol
    }

    pub fn field(&self) -> &PlanarVectorField {
        &self.field
    }

    pub fn quad(&self) -> &QuadSpec {
        &self.quad
    }

    pub fn with_quad(mut self, quad: QuadSpec) -> Self {
        self.quad = quad;
        self
    }
}

/// Sweep report for the uniform bound: |<f(., eps), phi>| divided by
/// sum_{|alpha| <= k+1} sup |d^alpha phi| at each depth, plus a divergence
/// flag (fitted log-log slope < -1/2).
#[derive(Debug, Clone)]
pub struct BoundSweep {
    pub constants: Vec<f64>,
    pub flagged: bool,
}

pub fn uniform_bound_sweep(
    sol: &SolutionSampler,
    field: &PlanarVectorField,
    phi: &TestFunction,
    k: usize,
    depths: &[f64],
    spec: &QuadSpec,
) -> Result<BoundSweep, Error> {
    let profile = PairingProfile::from_test_function(phi);
    let mut denom = 0.0;
    for n in 0..=(k + 1).min(phi.max_order()) {
        denom += phi.sup_deriv(n, 2000);
    }
    let mesh = pairing_x_mesh(&profile, field, &sol.singular_hints, spec, false);
    let mut constants = Vec::with_capacity(depths.len());
    for &eps in depths {
        let (v, _) = mesh.integrate(|x| sol.eval(x, eps) * profile.deriv(0, x));
        constants.push(v.norm() / denom);
    }
    // flag growth as eps -> 0
    let pts: Vec<(f64, f64)> = depths
        .iter()
        .zip(constants.iter())
        .filter(|(_, c)| **c > 0.0)
        .map(|(d, c)| (d.ln(), c.ln()))
        .collect();
    let flagged = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let cov: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let var: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        cov / var < -0.5
    } else {
        false
    };
    Ok(BoundSweep { constants, flagged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{make_bump, Domain};

    fn domain() -> Domain {
        Domain {
            x_lo: -2.0,
            x_hi: 2.0,
            t_max: 1.2,
        }
    }

    fn zero_field() -> PlanarVectorField {
        PlanarVectorField::from_polynomial("zero", vec![vec![Complex64::new(0.0, 0.0)]; 4], domain())
            .unwrap()
    }

    fn const_i_field() -> PlanarVectorField {
        PlanarVectorField::from_polynomial("i", vec![vec![Complex64::new(0.0, 1.0)]], domain())
            .unwrap()
    }

    #[test]
    fn tower_vanishes_for_zero_field() {
        let phi = make_bump(0.0, 1.0, 5).unwrap();
        let tower = build_phi_tower(&zero_field(), &phi, 3).unwrap();
        for j in 1..=3 {
            assert!(tower.level_value(j, 0.3, 0.5).norm() < 1e-15);
        }
        let cap = tower.phi_cap(3, 0.3, 0.5);
        assert!((cap - Complex64::new(phi.deriv(0, 0.3), 0.0)).norm() < 1e-15);
    }

    #[test]
    fn tower_constant_i_gives_powers_of_minus_i() {
        // phi_j = (-i)^j phi^{(j)}
        let phi = make_bump(0.0, 1.0, 5).unwrap();
        let tower = build_phi_tower(&const_i_field(), &phi, 3).unwrap();
        for j in 0..=3 {
            for x in [-0.7, 0.2, 0.6] {
                let got = tower.level_value(j, x, 0.4);
                let want = Complex64::new(0.0, -1.0).powu(j as u32) * phi.deriv(j, x);
                assert!(
                    (got - want).norm() < 1e-10 * (1.0 + want.norm()),
                    "j={j} x={x}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn lt_identity_zero_field_machine_zero() {
        let phi = make_bump(0.0, 1.0, 4).unwrap();
        let tower = build_phi_tower(&zero_field(), &phi, 2).unwrap();
        let dev = lt_phi_identity(&tower, &[-0.5, 0.1, 0.6], &[0.2, 0.4]);
        assert!(dev < 1e-13, "deviation {dev}");
    }

    #[test]
    fn lt_identity_constant_i_with_polynomial_profile() {
        // polynomial test function on the truncated support interior
        let phi = TestFunction::from_parts(
            (-1.5, 1.5),
            8,
            Arc::new(|n, x: f64| match n {
                0 => x * x * x,
                1 => 3.0 * x * x,
                2 => 6.0 * x,
                3 => 6.0,
                _ => 0.0,
            }),
        );
        let tower = build_phi_tower(&const_i_field(), &phi, 3).unwrap();
        let dev = lt_phi_identity(&tower, &[-0.4, 0.3, 0.8], &[0.2, 0.35, 0.5]);
        assert!(dev < 1e-8, "deviation {dev}");
    }

    #[test]
    fn pair_trace_dt_field_recovers_integral() {
        // L = d/dt, f = g(x): pairing is int g phi
        let phi = make_bump(0.0, 1.0, 4).unwrap();
        let sol = SolutionSampler::new(
            "g",
            Arc::new(|x: f64, _| Complex64::new((x * 0.7).cos(), 0.0)),
            0,
            0.8,
        );
        let spec = QuadSpec::default();
        let got = pair_trace(
            &sol,
            &zero_field(),
            &PairingProfile::from_test_function(&phi),
            2,
            0.8,
            &spec,
        )
        .unwrap();
        let mesh = PanelMesh::uniform(-1.0, 1.0, 20, 12);
        let (want, _) = mesh.integrate(|x| Complex64::new((x * 0.7).cos() * phi.deriv(0, x), 0.0));
        assert!((got.value - want).norm() < 1e-9, "{} vs {want}", got.value);
    }

    #[test]
    fn pair_trace_principal_value_plus_delta() {
        // L = d/dt + i d/dx, f = 1/(x - it): <bf, phi> = pv int phi/x + i pi phi(0)
        let phi = make_bump(0.3, 1.0, 4).unwrap();
        let sol = SolutionSampler::new(
            "inv",
            Arc::new(|x: f64, t: f64| (Complex64::new(x, -t)).inv()),
            1,
            0.5,
        )
        .with_singular_hints(vec![0.0]);
        let got = pair_trace(
            &sol,
            &const_i_field(),
            &PairingProfile::from_test_function(&phi),
            2,
            0.5,
            &QuadSpec::default(),
        )
        .unwrap();
        // oracle: pv by odd reflection + residue part
        let mut rp: Vec<(f64, usize)> = vec![(0.0, 40)];
        rp.extend(phi.breakpoints().iter().map(|&p| (p, 12)));
        let mesh = PanelMesh::graded(1e-14, 1.4, 24, 16, &rp);
        let (pv, _) = mesh.integrate(|x| {
            Complex64::new((phi.deriv(0, x) - phi.deriv(0, -x)) / x, 0.0)
        });
        let want = Complex64::new(pv.re, std::f64::consts::PI * phi.deriv(0, 0.0));
        let rel = (got.value - want).norm() / want.norm();
        assert!(rel < 1e-3, "pair {} vs oracle {want}, rel {rel}", got.value);
    }

    #[test]
    fn pair_trace_linear_in_test_function() {
        let phi1 = make_bump(0.0, 0.8, 4).unwrap();
        let phi2 = make_bump(0.4, 0.5, 4).unwrap();
        let (al, be) = (1.7, -0.45);
        let mut marks = phi1.breakpoints().to_vec();
        marks.extend_from_slice(phi2.breakpoints());
        let combo = TestFunction::from_parts(
            (-0.9, 0.9),
            4,
            Arc::new({
                let (p1, p2) = (phi1.clone(), phi2.clone());
                move |n, x| al * p1.deriv(n, x) + be * p2.deriv(n, x)
            }),
        )
        .with_breakpoints(marks);
        let sol = SolutionSampler::new(
            "z",
            Arc::new(|x: f64, t: f64| Complex64::new(x, t * t * x)),
            0,
            0.6,
        );
        let f = const_i_field();
        let spec = QuadSpec::default();
        let p = PairingProfile::from_test_function;
        let v1 = pair_trace(&sol, &f, &p(&phi1), 1, 0.6, &spec).unwrap().value;
        let v2 = pair_trace(&sol, &f, &p(&phi2), 1, 0.6, &spec).unwrap().value;
        let vc = pair_trace(&sol, &f, &p(&combo), 1, 0.6, &spec).unwrap().value;
        assert!((vc - (v1 * al + v2 * be)).norm() < 1e-10);
    }

    #[test]
    fn pair_trace_refuses_small_k() {
        let phi = make_bump(0.0, 1.0, 4).unwrap();
        let sol = SolutionSampler::new("f", Arc::new(|_, _| Complex64::new(1.0, 0.0)), 2, 0.5);
        assert!(matches!(
            pair_trace(
                &sol,
                &zero_field(),
                &PairingProfile::from_test_function(&phi),
                2,
                0.5,
                &QuadSpec::default()
            ),
            Err(Error::KTooSmall { .. })
        ));
    }

    #[test]
    fn uniform_bound_flags_divergent_family() {
        let phi = make_bump(0.0, 1.0, 3).unwrap();
        let depths = [0.1, 0.01, 0.001];
        let good = SolutionSampler::new(
            "inv",
            Arc::new(|x: f64, t: f64| (Complex64::new(x, -t)).inv()),
            1,
            0.5,
        )
        .with_singular_hints(vec![0.0]);
        let sweep =
            uniform_bound_sweep(&good, &const_i_field(), &phi, 2, &depths, &QuadSpec::default())
                .unwrap();
        assert!(!sweep.flagged, "constants {:?}", sweep.constants);
        let bad = SolutionSampler::new(
            "one-over-t",
            Arc::new(|_, t: f64| Complex64::new(1.0 / t, 0.0)),
            1,
            0.5,
        );
        let sweep =
            uniform_bound_sweep(&bad, &const_i_field(), &phi, 2, &depths, &QuadSpec::default())
                .unwrap();
        assert!(sweep.flagged, "constants {:?}", sweep.constants);
    }
}
