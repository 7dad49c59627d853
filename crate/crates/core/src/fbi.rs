//! FBI transforms of traces: scans over geometric frequency ladders with
//! the Gaussian-damped kernel, the generalized kernel built from a first
//! integral, decay-rate classification of directions, wave-front reports
//! with the half-space check, and the inversion formula with a calibrated
//! dimensional constant.

use crate::branch::angle_bracket;
use crate::error::Error;
use crate::field::TestFunction;
use crate::first_integral::{FirstIntegral, IntegralKind};
use crate::quad::{KahanC, PanelMesh};
use crate::trace::{PairingProfile, TraceFunctional};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Geometric ladder of |xi| values.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Ladder {
    pub xi_min: f64,
    pub ratio: f64,
    pub count: usize,
}

impl Ladder {
    /// The default scan range: 8 to 256 at ratio sqrt(2) (11 rungs).
    pub fn default_ladder() -> Self {
        Ladder {
            xi_min: 8.0,
            ratio: std::f64::consts::SQRT_2,
            count: 11,
        }
    }

    /// Ladder from xi_min to (at least) xi_max at the given ratio.
    pub fn spanning(xi_min: f64, xi_max: f64, ratio: f64) -> Self {
        assert!(xi_min > 0.0 && xi_max > xi_min && ratio > 1.0);
        let count = ((xi_max / xi_min).ln() / ratio.ln()).round() as usize + 1;
        Ladder {
            xi_min,
            ratio,
            count,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.count)
            .map(|i| self.xi_min * self.ratio.powi(i as i32))
            .collect()
    }

    pub fn xi_max(&self) -> f64 {
        self.xi_min * self.ratio.powi(self.count as i32 - 1)
    }
}

/// Scan plan: evaluation points, probed directions, the frequency ladder,
/// the Gaussian weight kappa (generalized kernel), and the cutoff.
#[derive(Clone)]
pub struct FbiPlan {
    pub points: Vec<f64>,
    pub directions: Vec<i8>,
    pub ladder: Ladder,
    pub kappa: f64,
    pub cutoff: TestFunction,
}

impl FbiPlan {
    pub fn new(points: Vec<f64>, ladder: Ladder, cutoff: TestFunction) -> Result<Self, Error> {
        if !(ladder.ratio > 1.0 && ladder.xi_min > 0.0) {
            return Err(Error::Config("ladder must be strictly increasing".into()));
        }
        Ok(FbiPlan {
            points,
            directions: vec![-1, 1],
            ladder,
            kappa: 1.0,
            cutoff,
        })
    }

    pub fn with_kappa(mut self, kappa: f64) -> Result<Self, Error> {
        if !(kappa > 0.0) {
            return Err(Error::Config(format!("kappa must be positive, got {kappa}")));
        }
        self.kappa = kappa;
        Ok(self)
    }

    pub fn with_directions(mut self, directions: Vec<i8>) -> Self {
        self.directions = directions;
        self
    }
}

/// The trace being scanned: either a directly sampleable function of x
/// (continuous traces) or a trace functional (distributional traces pair
/// against kernel-times-cutoff through the tower machinery).
#[derive(Clone)]
pub enum TraceSource {
    Sampled {
        f: Arc<dyn Fn(f64) -> Complex64 + Send + Sync>,
        singular: Vec<f64>,
    },
    Functional(TraceFunctional),
}

impl TraceSource {
    pub fn sampled(f: Arc<dyn Fn(f64) -> Complex64 + Send + Sync>) -> Self {
        TraceSource::Sampled {
            f,
            singular: Vec::new(),
        }
    }

    pub fn sampled_with_singularities(
        f: Arc<dyn Fn(f64) -> Complex64 + Send + Sync>,
        singular: Vec<f64>,
    ) -> Self {
        TraceSource::Sampled { f, singular }
    }
}

/// Scan values F(s, sigma, |xi|) with per-value measurement floors.
#[derive(Debug, Clone)]
pub struct FbiScan {
    pub points: Vec<f64>,
    pub directions: Vec<i8>,
    pub rungs: Vec<f64>,
    pub kappa: f64,
    values: Vec<Complex64>,
    floors: Vec<f64>,
}

impl FbiScan {
    fn index(&self, p: usize, d: usize, r: usize) -> usize {
        (p * self.directions.len() + d) * self.rungs.len() + r
    }

    pub fn value(&self, p: usize, d: usize, r: usize) -> Complex64 {
        self.values[self.index(p, d, r)]
    }

    pub fn floor(&self, p: usize, d: usize, r: usize) -> f64 {
        self.floors[self.index(p, d, r)]
    }

    pub fn dir_index(&self, direction: i8) -> Option<usize> {
        self.directions.iter().position(|&d| d == direction)
    }

    /// CSV rows: s, direction, xi, re_F, im_F, abs_F.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,direction,xi,re_F,im_F,abs_F\n");
        for (p, s) in self.points.iter().enumerate() {
            for (d, dir) in self.directions.iter().enumerate() {
                for (r, xi) in self.rungs.iter().enumerate() {
                    let v = self.value(p, d, r);
                    out.push_str(&format!(
                        "{s},{dir},{xi},{},{},{}\n",
                        v.re,
                        v.im,
                        v.norm()
                    ));
                }
            }
        }
        out
    }
}

const NODE_CAP: usize = 400_000;

/// Quadrature for one sampled-trace kernel integral: window around s where
/// the Gaussian weight is non-negligible, oscillation-resolving panel
/// count, grading into trace singularities and cutoff joints.
fn sampled_value(
    f: &(dyn Fn(f64) -> Complex64 + Sync),
    singular: &[f64],
    cutoff: &TestFunction,
    z0: Option<&FirstIntegral>,
    s: f64,
    zeta: f64,
    kappa: f64,
) -> Result<(Complex64, f64), Error> {
    let xi = zeta.abs();
    let w = kappa * angle_bracket(c(zeta, 0.0))?.re;
    let window = 12.0 / w.sqrt();
    let (sup_lo, sup_hi) = cutoff.support();
    let lo = sup_lo.max(s - window);
    let hi = sup_hi.min(s + window);
    if lo >= hi {
        return Ok((c(0.0, 0.0), 0.0));
    }
    let gl = 16usize;
    // spec'd oscillation rule: node spacing <= pi / (4 xi)
    let spacing = std::f64::consts::FRAC_PI_4 / xi.max(1.0);
    let mut panels = ((hi - lo) / (spacing * gl as f64)).ceil() as usize;
    panels = panels.max(12);
    if panels * gl > NODE_CAP {
        return Err(Error::OscillationUnresolved {
            required: panels * gl,
            cap: NODE_CAP,
        });
    }
    let mut refine: Vec<(f64, usize)> = singular.iter().map(|&p| (p, 36)).collect();
    refine.extend(cutoff.breakpoints().iter().map(|&p| (p, 12)));
    let mesh = PanelMesh::graded(lo, hi, panels, gl, &refine);
    let mut acc = KahanC::default();
    for (x, wt) in mesh.nodes() {
        let z0x = match z0 {
            Some(z) => z.eval_z(x, 0.0),
            None => c(x, 0.0),
        };
        let dz = match z0 {
            Some(z) => z.dz_dx_at0(x),
            None => c(1.0, 0.0),
        };
        let d = c(s, 0.0) - z0x;
        let e = (c(0.0, zeta) * d - d * d * w).exp();
        acc.add(f(x) * e * dz * (cutoff.deriv(0, x) * wt));
    }
    Ok((acc.value(), acc.noise_floor()))
}

fn scan_internal(
    trace: &TraceSource,
    plan: &FbiPlan,
    z0: Option<&FirstIntegral>,
) -> Result<FbiScan, Error> {
    let rungs = plan.ladder.values();
    let mut jobs = Vec::new();
    for (p, &s) in plan.points.iter().enumerate() {
        for (d, &dir) in plan.directions.iter().enumerate() {
            for (r, &xi) in rungs.iter().enumerate() {
                jobs.push((p, d, r, s, dir as f64 * xi));
            }
        }
    }
    let results: Vec<Result<(Complex64, f64), Error>> = jobs
        .par_iter()
        .map(|&(_, _, _, s, zeta)| match trace {
            TraceSource::Sampled { f, singular } => {
                sampled_value(f.as_ref(), singular, &plan.cutoff, z0, s, zeta, plan.kappa)
            }
            TraceSource::Functional(tf) => {
                if let Some(z) = z0 {
                    if z.kind() != IntegralKind::Series
                        && !z.is_normalized_at_zero(&[-0.5, 0.0, 0.5])
                    {
                        return Err(Error::NonNormalizedIntegral);
                    }
                }
                let profile = PairingProfile::kernel(&plan.cutoff, s, zeta, plan.kappa);
                let paired = tf.pair_profile(&profile)?;
                Ok((paired.value, paired.noise.max(paired.estimate)))
            }
        })
        .collect();
    let n = jobs.len();
    let mut values = vec![c(0.0, 0.0); n];
    let mut floors = vec![0.0; n];
    let dlen = plan.directions.len();
    let rlen = rungs.len();
    for (job, res) in jobs.iter().zip(results) {
        let (p, d, r, _, _) = *job;
        let (v, fl) = res?;
        let idx = (p * dlen + d) * rlen + r;
        values[idx] = v;
        floors[idx] = fl;
    }
    Ok(FbiScan {
        points: plan.points.clone(),
        directions: plan.directions.clone(),
        rungs,
        kappa: plan.kappa,
        values,
        floors,
    })
}

/// FBI transform with the standard kernel exp(i xi (s-x) - |xi| (s-x)^2):
/// F(s, xi) = <trace, kernel * cutoff>.
pub fn fbi_transform(trace: &TraceSource, plan: &FbiPlan) -> Result<FbiScan, Error> {
    let mut std_plan = plan.clone();
    std_plan.kappa = 1.0;
    scan_internal(trace, &std_plan, None)
}

/// Generalized kernel built from a first integral:
/// E = i zeta (s - Z(x,0)) - kappa <zeta> (s - Z(x,0))^2, with the
/// d_x Z(x,0) Jacobian weight. Series integrals have Z(x,0) = x exactly;
/// other integrals must satisfy it on samples for the pairing pathway.
pub fn fbi_generalized(
    trace: &TraceSource,
    z: &FirstIntegral,
    plan: &FbiPlan,
) -> Result<FbiScan, Error> {
    scan_internal(trace, plan, Some(z))
}

// --- decay classification ----------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum DecayClass {
    Exponential { rate: f64 },
    Polynomial { order: f64 },
    Flat,
}

/// Fitted decay of |F| along the ladder at one (point, direction).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DecayFit {
    #[serde(flatten)]
    pub class: DecayClass,
    pub r2: f64,
    /// xi-range actually used by the fit.
    pub window: (f64, f64),
    /// All usable rungs sat below the measurement floor; the decay is
    /// faster than the scan can measure.
    pub floor_limited: bool,
}

impl DecayFit {
    pub fn is_exponential(&self) -> bool {
        matches!(self.class, DecayClass::Exponential { .. })
    }
}

fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let cov: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let var: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let slope = cov / var;
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    let ss_res: f64 = pts
        .iter()
        .map(|p| {
            let pred = my + slope * (p.0 - mx);
            (p.1 - pred) * (p.1 - pred)
        })
        .sum();
    let r2 = if ss_tot < 1e-30 {
        0.0
    } else {
        1.0 - ss_res / ss_tot
    };
    (slope, r2)
}

/// Rungs used by the fits: the top `FIT_RUNGS` usable ones.
const FIT_RUNGS: usize = 6;
/// Exponential acceptance: rate * xi_max must exceed this.
const EXP_RATE_SCALE_MIN: f64 = 5.0;
/// Exponential acceptance: minimum r^2.
const EXP_R2_MIN: f64 = 0.98;
/// |slope| below this in the log-log fit classifies Flat.
const FLAT_SLOPE_MAX: f64 = 0.25;
/// Hard floor for |F| (the spec's absolute floor); the per-value
/// measurement floor from quadrature round-off is usually far larger.
const ABS_FLOOR: f64 = 1e-300;

/// Fit the decay of |F| over the upper rungs: an exponential model
/// log|F| ~ -rate * xi against a polynomial model log|F| ~ -order * log xi.
/// The model with higher r^2 wins; Exponential additionally requires
/// rate * xi_max > 5 and r^2 > 0.98; a log-log slope magnitude under 0.25
/// classifies Flat. Values below the measurement floor are excluded; if
/// fewer than 4 usable rungs remain the direction is reported as
/// floor-limited Exponential (decay too fast to measure).
pub fn fit_decay(scan: &FbiScan, point_idx: usize, direction: i8) -> Result<DecayFit, Error> {
    if scan.rungs.len() < FIT_RUNGS {
        return Err(Error::XiLadderTooShort {
            need: FIT_RUNGS,
            have: scan.rungs.len(),
        });
    }
    let d = scan
        .dir_index(direction)
        .ok_or_else(|| Error::Config(format!("direction {direction} not in scan")))?;
    let usable: Vec<(f64, f64)> = (0..scan.rungs.len())
        .filter_map(|r| {
            let v = scan.value(point_idx, d, r).norm();
            let floor = (4.0 * scan.floor(point_idx, d, r)).max(ABS_FLOOR);
            (v > floor).then(|| (scan.rungs[r], v.ln()))
        })
        .collect();
    let window_all = (scan.rungs[0], *scan.rungs.last().unwrap());
    if usable.len() < 4 {
        return Ok(DecayFit {
            class: DecayClass::Exponential { rate: f64::INFINITY },
            r2: 1.0,
            window: window_all,
            floor_limited: true,
        });
    }
    let fit_pts = &usable[usable.len().saturating_sub(FIT_RUNGS)..];
    let window = (fit_pts[0].0, fit_pts[fit_pts.len() - 1].0);
    let xi_max = window.1;
    let exp_pts: Vec<(f64, f64)> = fit_pts.iter().map(|&(x, y)| (x, y)).collect();
    let (m_exp, r2_exp) = linear_fit(&exp_pts);
    let poly_pts: Vec<(f64, f64)> = fit_pts.iter().map(|&(x, y)| (x.ln(), y)).collect();
    let (m_poly, r2_poly) = linear_fit(&poly_pts);
    let rate = -m_exp;
    if r2_exp >= r2_poly && rate > 0.0 && rate * xi_max > EXP_RATE_SCALE_MIN && r2_exp > EXP_R2_MIN
    {
        return Ok(DecayFit {
            class: DecayClass::Exponential { rate },
            r2: r2_exp,
            window,
            floor_limited: false,
        });
    }
    if m_poly.abs() < FLAT_SLOPE_MAX {
        return Ok(DecayFit {
            class: DecayClass::Flat,
            r2: r2_poly.clamp(0.0, 1.0),
            window,
            floor_limited: false,
        });
    }
    Ok(DecayFit {
        class: DecayClass::Polynomial {
            order: m_poly.abs(),
        },
        r2: r2_poly.clamp(0.0, 1.0),
        window,
        floor_limited: false,
    })
}

// --- wave front report ---------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WfEntry {
    pub x: f64,
    pub direction: i8,
    pub fit: DecayFit,
    pub in_wf: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WaveFrontReport {
    pub entries: Vec<WfEntry>,
    /// (point, halfspace_ok): true iff the in-WF directions at the point
    /// miss +1 or miss -1 (or are empty).
    pub halfspace: Vec<(f64, bool)>,
}

impl WaveFrontReport {
    pub fn in_wf_at(&self, x: f64) -> Vec<i8> {
        self.entries
            .iter()
            .filter(|e| e.x == x && e.in_wf)
            .map(|e| e.direction)
            .collect()
    }

    pub fn entry(&self, x: f64, direction: i8) -> Option<&WfEntry> {
        self.entries
            .iter()
            .find(|e| e.x == x && e.direction == direction)
    }
}

/// Scan the trace over the plan and classify every (point, direction): a
/// direction is outside the wave front set exactly when its scan decays
/// exponentially above threshold. The plan must probe both directions.
pub fn wavefront_report(trace: &TraceSource, plan: &FbiPlan) -> Result<WaveFrontReport, Error> {
    wavefront_report_scan(trace, plan, None)
}

pub fn wavefront_report_generalized(
    trace: &TraceSource,
    z: &FirstIntegral,
    plan: &FbiPlan,
) -> Result<WaveFrontReport, Error> {
    wavefront_report_scan(trace, plan, Some(z))
}

fn wavefront_report_scan(
    trace: &TraceSource,
    plan: &FbiPlan,
    z: Option<&FirstIntegral>,
) -> Result<WaveFrontReport, Error> {
    if !(plan.directions.contains(&1) && plan.directions.contains(&-1)) {
        return Err(Error::Config(
            "wave front report needs both directions in the plan".into(),
        ));
    }
    let scan = match z {
        Some(z) => fbi_generalized(trace, z, plan)?,
        None => fbi_transform(trace, plan)?,
    };
    let mut entries = Vec::new();
    let mut halfspace = Vec::new();
    for (p, &x) in scan.points.iter().enumerate() {
        let mut wf_dirs = Vec::new();
        for &dir in &scan.directions {
            let fit = fit_decay(&scan, p, dir)?;
            let in_wf = !fit.is_exponential();
            if in_wf {
                wf_dirs.push(dir);
            }
            entries.push(WfEntry {
                x,
                direction: dir,
                fit,
                in_wf,
            });
        }
        let ok = !(wf_dirs.contains(&1) && wf_dirs.contains(&-1));
        halfspace.push((x, ok));
    }
    Ok(WaveFrontReport { entries, halfspace })
}

// --- inversion -----------------------------------------------------------------

/// Dense scan on uniform grids for the inversion formula.
#[derive(Debug, Clone)]
pub struct DenseScan {
    pub s_grid: Vec<f64>,
    pub xi_grid: Vec<f64>,
    /// Row-major [s][xi].
    pub values: Vec<Complex64>,
}

/// Sample F(s, xi) of a continuous trace on uniform s and xi grids (both
/// signs of xi), sharing one fixed x-grid so the whole scan costs one pass
/// of trace evaluations.
pub fn fbi_dense_scan(
    trace: &dyn Fn(f64) -> Complex64,
    cutoff: &TestFunction,
    s_range: (f64, f64),
    n_s: usize,
    xi_max: f64,
    n_xi: usize,
) -> DenseScan {
    let s_grid: Vec<f64> = (0..n_s)
        .map(|i| s_range.0 + (s_range.1 - s_range.0) * i as f64 / (n_s - 1) as f64)
        .collect();
    let xi_grid: Vec<f64> = (0..n_xi)
        .map(|i| -xi_max + 2.0 * xi_max * i as f64 / (n_xi - 1) as f64)
        .collect();
    // fixed x-grid resolving the fastest oscillation
    let (lo, hi) = cutoff.support();
    let spacing = std::f64::consts::FRAC_PI_4 / xi_max / 1.5;
    let n_x = (((hi - lo) / spacing).ceil() as usize).max(64);
    let hx = (hi - lo) / n_x as f64;
    let xw: Vec<(f64, Complex64)> = (0..=n_x)
        .map(|i| {
            let x = lo + hx * i as f64;
            let trap = if i == 0 || i == n_x { 0.5 } else { 1.0 };
            (x, trace(x) * (cutoff.deriv(0, x) * hx * trap))
        })
        .collect();
    let mut values = vec![c(0.0, 0.0); n_s * n_xi];
    for (si, &s) in s_grid.iter().enumerate() {
        for (ki, &xi) in xi_grid.iter().enumerate() {
            let w = xi.abs();
            let window = 13.0 / w.sqrt().max(1e-9);
            let j_lo = (((s - window) - lo) / hx).floor().max(0.0) as usize;
            let j_hi = ((((s + window) - lo) / hx).ceil() as usize).min(n_x);
            let mut acc = KahanC::default();
            for j in j_lo..=j_hi {
                let (x, fw) = xw[j];
                let d = s - x;
                let e = c(-w * d * d, xi * d).exp();
                acc.add(fw * e);
            }
            values[si * n_xi + ki] = acc.value();
        }
    }
    DenseScan {
        s_grid,
        xi_grid,
        values,
    }
}

/// Exact moments of sqrt(|xi|) over a cell [a, b] lying on one side of 0:
/// (int sqrt|xi| dxi, int (xi - a) sqrt|xi| dxi).
fn sqrt_moments(a: f64, b: f64) -> (f64, f64) {
    if a >= 0.0 {
        let m0 = (b.powf(1.5) - a.powf(1.5)) * 2.0 / 3.0;
        let m1 = (b.powf(2.5) - a.powf(2.5)) * 2.0 / 5.0 - a * m0;
        (m0, m1)
    } else {
        let (m0, m1m) = sqrt_moments(-b, -a);
        (m0, m0 * (b - a) - m1m)
    }
}

/// The dimensional constant of the inversion formula, calibrated once by
/// least squares against the Gaussian reconstruction (`calibrate_c1`). The
/// analytic value for one variable is 1/(2 pi^(3/2)) ~ 0.0897936.
pub const C1_CALIBRATED: f64 = 0.08979072;

/// Reconstruct cutoff * trace from a dense scan:
/// u(x) = c1 * int int exp(i (x-s) xi - eps xi^2) F(s, xi) |xi|^(1/2) ds dxi.
/// Errors out when the scan's xi-coverage leaves a dominating tail.
pub fn fbi_inverse(
    scan: &DenseScan,
    eps: f64,
    c1: f64,
    x_grid: &[f64],
) -> Result<Vec<Complex64>, Error> {
    let n_xi = scan.xi_grid.len();
    let n_s = scan.s_grid.len();
    let ds = scan.s_grid[1] - scan.s_grid[0];
    let dxi = scan.xi_grid[1] - scan.xi_grid[0];
    // tail estimate: continue the boundary-rung mass at the local decay
    // rate and compare against the total weighted scan mass
    let mut total_mass: f64 = 0.0;
    let mut boundary_mass: f64 = 0.0;
    let mut next_mass: f64 = 0.0;
    for si in 0..n_s {
        for (ki, m) in [(0usize, &mut boundary_mass), (1, &mut next_mass)] {
            *m += scan.values[si * n_xi + ki].norm() * ds;
            *m += scan.values[si * n_xi + (n_xi - 1 - ki)].norm() * ds;
        }
        for (ki, &xi) in scan.xi_grid.iter().enumerate() {
            total_mass += scan.values[si * n_xi + ki].norm() * xi.abs().sqrt() * ds * dxi;
        }
    }
    let xi_max = scan.xi_grid[n_xi - 1];
    let rate = (next_mass / boundary_mass.max(1e-300)).max(1.0 + 1e-9).ln() / dxi;
    let tail = boundary_mass * xi_max.sqrt() / rate;
    let allowed = 5e-3 * total_mass.max(1e-300);
    if tail > allowed {
        return Err(Error::TailDominated {
            estimate: tail,
            allowed,
        });
    }
    // S(xi) = sum_s e^{-i s xi} F(s, xi) ds, smooth in xi; the |xi|^(1/2)
    // cusp is handled by exact weighted moments on the cells near 0
    let mut s_hat = vec![c(0.0, 0.0); n_xi];
    for (ki, &xi) in scan.xi_grid.iter().enumerate() {
        let mut acc = KahanC::default();
        for (si, &s) in scan.s_grid.iter().enumerate() {
            let trap = if si == 0 || si == n_s - 1 { 0.5 } else { 1.0 };
            acc.add(scan.values[si * n_xi + ki] * (c(0.0, -s * xi)).exp() * (ds * trap));
        }
        s_hat[ki] = acc.value() * (-eps * xi * xi).exp();
    }
    const CUSP_CELLS: usize = 16;
    let mut out = Vec::with_capacity(x_grid.len());
    for &x in x_grid {
        let mut acc = KahanC::default();
        for ki in 0..n_xi - 1 {
            let (a, b) = (scan.xi_grid[ki], scan.xi_grid[ki + 1]);
            let ha = s_hat[ki] * (c(0.0, x * a)).exp();
            let hb = s_hat[ki + 1] * (c(0.0, x * b)).exp();
            if a.abs().min(b.abs()) < CUSP_CELLS as f64 * dxi && a * b >= -1e-300 {
                let (m0, m1) = sqrt_moments(a, b);
                acc.add(ha * (m0 - m1 / dxi) + hb * (m1 / dxi));
            } else {
                acc.add((ha * a.abs().sqrt() + hb * b.abs().sqrt()) * (0.5 * dxi));
            }
        }
        out.push(acc.value() * c1);
    }
    Ok(out)
}

/// One-time calibration of the inversion constant against the Gaussian
/// trace: least-squares fit of the raw reconstruction to exp(-x^2) on the
/// cutoff plateau. Returns (c1, max reconstruction error with that c1).
pub fn calibrate_c1() -> (f64, f64) {
    let cutoff = crate::field::make_bump(0.0, 6.0, 0).unwrap();
    let trace = |x: f64| c((-x * x).exp(), 0.0);
    let scan = fbi_dense_scan(&trace, &cutoff, (-4.5, 4.5), 561, 48.0, 961);
    let x_grid: Vec<f64> = (0..=120).map(|i| -1.5 + 3.0 * i as f64 / 120.0).collect();
    let raw = fbi_inverse(&scan, 1e-3, 1.0, &x_grid).unwrap();
    let mut num = 0.0;
    let mut den = 0.0;
    for (r, &x) in raw.iter().zip(x_grid.iter()) {
        let target = (-x * x).exp();
        num += r.re * target;
        den += r.norm_sqr();
    }
    let c1 = num / den;
    let mut err: f64 = 0.0;
    for (r, &x) in raw.iter().zip(x_grid.iter()) {
        err = err.max((r * c1 - c((-x * x).exp(), 0.0)).norm());
    }
    (c1, err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::make_bump;

    fn wide_plan(ladder: Ladder) -> FbiPlan {
        FbiPlan::new(vec![0.0], ladder, make_bump(0.0, 12.0, 4).unwrap()).unwrap()
    }

    #[test]
    fn gaussian_kernel_anchor_closed_form() {
        // constant trace: |F(0, xi)| = sqrt(pi/xi) exp(-xi/4)
        let plan = wide_plan(Ladder::spanning(8.0, 90.5, std::f64::consts::SQRT_2));
        let trace = TraceSource::sampled(Arc::new(|_| c(1.0, 0.0)));
        let scan = fbi_transform(&trace, &plan).unwrap();
        for (r, &xi) in scan.rungs.iter().enumerate() {
            let want = (std::f64::consts::PI / xi).sqrt() * (-xi / 4.0).exp();
            let got = scan.value(0, 1, r).norm();
            assert!(
                (got - want).abs() < 1e-10 + 0.01 * want,
                "xi={xi}: {got} vs {want}"
            );
        }
        let fit = fit_decay(&scan, 0, 1).unwrap();
        match fit.class {
            DecayClass::Exponential { rate } => {
                assert!((rate - 0.25).abs() < 0.025, "rate {rate}");
            }
            other => panic!("expected exponential, got {other:?}"),
        }
    }

    #[test]
    fn delta_model_is_flat() {
        // a point mass pairs the kernel at its center: |F| = 1 for all xi
        let plan = wide_plan(Ladder::default_ladder());
        let rungs = plan.ladder.values();
        let values: Vec<Complex64> = rungs.iter().map(|_| c(1.0, 0.0)).collect();
        let scan = FbiScan {
            points: vec![0.0],
            directions: vec![1],
            rungs,
            kappa: 1.0,
            floors: values.iter().map(|_| 1e-16).collect(),
            values,
        };
        let fit = fit_decay(&scan, 0, 1).unwrap();
        assert_eq!(fit.class, DecayClass::Flat);
    }

    #[test]
    fn synthetic_exponential_and_polynomial_fits() {
        let rungs = Ladder::default_ladder().values();
        let mk = |vals: Vec<Complex64>| FbiScan {
            points: vec![0.0],
            directions: vec![1],
            rungs: rungs.clone(),
            kappa: 1.0,
            floors: vals.iter().map(|_| 1e-305).collect(),
            values: vals,
        };
        let exp_scan = mk(rungs.iter().map(|&x| c((-0.3 * x).exp(), 0.0)).collect());
        match fit_decay(&exp_scan, 0, 1).unwrap().class {
            DecayClass::Exponential { rate } => assert!((rate - 0.3).abs() < 0.02),
            other => panic!("{other:?}"),
        }
        let poly_scan = mk(rungs.iter().map(|&x| c(x.powi(-2), 0.0)).collect());
        match fit_decay(&poly_scan, 0, 1).unwrap().class {
            DecayClass::Polynomial { order } => assert!((order - 2.0).abs() < 0.1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn modulation_moves_frequency_peak() {
        let cutoff = make_bump(0.0, 8.0, 2).unwrap();
        let ladder = Ladder::spanning(2.0, 32.0, std::f64::consts::SQRT_2);
        let plan = FbiPlan::new(vec![0.0], ladder, cutoff).unwrap();
        let flat = TraceSource::sampled(Arc::new(|_| c(1.0, 0.0)));
        let modulated =
            TraceSource::sampled(Arc::new(|x: f64| (c(0.0, 10.0 * x)).exp()));
        let s_flat = fbi_transform(&flat, &plan).unwrap();
        let s_mod = fbi_transform(&modulated, &plan).unwrap();
        let argmax = |s: &FbiScan| {
            let d = s.dir_index(1).unwrap();
            (0..s.rungs.len())
                .max_by(|&a, &b| {
                    s.value(0, d, a)
                        .norm()
                        .partial_cmp(&s.value(0, d, b).norm())
                        .unwrap()
                })
                .map(|r| s.rungs[r])
                .unwrap()
        };
        assert!(argmax(&s_flat) <= 4.0);
        let peak = argmax(&s_mod);
        assert!(
            peak >= 10.0 / std::f64::consts::SQRT_2 && peak <= 10.0 * std::f64::consts::SQRT_2,
            "peak {peak}"
        );
        // opposite direction is exponentially small next to the peak
        let d_minus = s_mod.dir_index(-1).unwrap();
        let d_plus = s_mod.dir_index(1).unwrap();
        let hi = s_mod.rungs.len() - 1;
        let ratio = s_mod.value(0, d_minus, hi).norm() / s_mod.value(0, d_plus, hi).norm();
        assert!(ratio < 1e-3, "ratio {ratio}");
    }

    #[test]
    fn real_trace_conjugate_symmetry() {
        let cutoff = make_bump(0.0, 3.0, 2).unwrap();
        let plan = FbiPlan::new(
            vec![0.2],
            Ladder::spanning(4.0, 32.0, 2.0),
            cutoff,
        )
        .unwrap();
        let trace = TraceSource::sampled(Arc::new(|x: f64| c((x * 1.3).sin(), 0.0)));
        let scan = fbi_transform(&trace, &plan).unwrap();
        let dp = scan.dir_index(1).unwrap();
        let dm = scan.dir_index(-1).unwrap();
        for r in 0..scan.rungs.len() {
            let a = scan.value(0, dp, r);
            let b = scan.value(0, dm, r);
            assert!((a - b.conj()).norm() < 1e-10 * (1.0 + a.norm()));
        }
    }

    #[test]
    fn generalized_specializes_to_standard() {
        let cutoff = make_bump(0.0, 3.0, 2).unwrap();
        let plan = FbiPlan::new(vec![0.1], Ladder::spanning(4.0, 64.0, 2.0), cutoff)
            .unwrap()
            .with_kappa(1.0)
            .unwrap();
        let trace = TraceSource::sampled(Arc::new(|x: f64| c((-x * x).exp(), 0.1 * x)));
        let identity = FirstIntegral::closed_form(Arc::new(|x, _| c(x, 0.0)), 99);
        let a = fbi_transform(&trace, &plan).unwrap();
        let b = fbi_generalized(&trace, &identity, &plan).unwrap();
        for r in 0..a.rungs.len() {
            for d in 0..2 {
                let (va, vb) = (a.value(0, d, r), b.value(0, d, r));
                assert!((va - vb).norm() < 1e-12 * (1.0 + va.norm()), "{va} {vb}");
            }
        }
    }

    #[test]
    fn kappa_sweep_keeps_smooth_trace_exponential() {
        let cutoff = make_bump(0.0, 6.0, 2).unwrap();
        let trace = TraceSource::sampled(Arc::new(|x: f64| c((-x * x).exp(), 0.0)));
        let identity = FirstIntegral::closed_form(Arc::new(|x, _| c(x, 0.0)), 99);
        for kappa in [0.5, 1.0, 2.0] {
            let plan = FbiPlan::new(
                vec![0.0],
                Ladder::spanning(8.0, 64.0, std::f64::consts::SQRT_2),
                cutoff.clone(),
            )
            .unwrap()
            .with_kappa(kappa)
            .unwrap();
            let scan = fbi_generalized(&trace, &identity, &plan).unwrap();
            let fit = fit_decay(&scan, 0, 1).unwrap();
            assert!(
                fit.is_exponential(),
                "kappa={kappa}: {:?}",
                fit.class
            );
        }
    }

    #[test]
    fn heaviside_in_wf_both_directions_at_jump_smooth_away() {
        let cutoff = make_bump(0.0, 3.0, 2).unwrap();
        let plan = FbiPlan::new(
            vec![0.0, 0.7],
            Ladder::default_ladder(),
            cutoff,
        )
        .unwrap();
        let trace = TraceSource::sampled_with_singularities(
            Arc::new(|x: f64| c(if x >= 0.0 { 1.0 } else { 0.0 }, 0.0)),
            vec![0.0],
        );
        let report = wavefront_report(&trace, &plan).unwrap();
        let at0 = report.in_wf_at(0.0);
        assert_eq!(at0, vec![-1, 1], "entries: {:?}", report.entries);
        assert!(!report.halfspace[0].1);
        assert!(report.in_wf_at(0.7).is_empty());
        assert!(report.halfspace[1].1);
    }

    #[test]
    fn smooth_trace_has_empty_wave_front() {
        let cutoff = make_bump(0.0, 4.0, 2).unwrap();
        let plan = FbiPlan::new(vec![-0.3, 0.4], Ladder::default_ladder(), cutoff).unwrap();
        let trace = TraceSource::sampled(Arc::new(|x: f64| c((-x * x).exp(), 0.0)));
        let report = wavefront_report(&trace, &plan).unwrap();
        for e in &report.entries {
            assert!(!e.in_wf, "{e:?}");
        }
    }

    #[test]
    fn translation_moves_the_s_peak() {
        let cutoff = make_bump(0.0, 6.0, 2).unwrap();
        let shift = 1.25;
        let mk = |x0: f64| {
            TraceSource::sampled(Arc::new(move |x: f64| {
                c((-(x - x0) * (x - x0) * 8.0).exp(), 0.0)
            }))
        };
        let points: Vec<f64> = (0..=40).map(|i| -2.0 + 4.0 * i as f64 / 40.0).collect();
        let plan = FbiPlan::new(points.clone(), Ladder::spanning(16.0, 32.0, 2.0), cutoff)
            .unwrap();
        let argmax_s = |scan: &FbiScan| {
            let d = scan.dir_index(1).unwrap();
            points
                .iter()
                .enumerate()
                .max_by(|a, b| {
                    scan.value(a.0, d, 0)
                        .norm()
                        .partial_cmp(&scan.value(b.0, d, 0).norm())
                        .unwrap()
                })
                .map(|(_, &s)| s)
                .unwrap()
        };
        let base = argmax_s(&fbi_transform(&mk(0.0), &plan).unwrap());
        let moved = argmax_s(&fbi_transform(&mk(shift), &plan).unwrap());
        assert!((moved - base - shift).abs() < 0.15, "{base} -> {moved}");
    }

    #[test]
    fn inversion_round_trip_gaussian() {
        let (c1, err) = calibrate_c1();
        assert!(
            (c1 - 1.0 / (2.0 * std::f64::consts::PI.powf(1.5))).abs() < 5e-3,
            "c1 {c1}"
        );
        assert!(err < 1e-2, "reconstruction error {err}");
    }

    #[test]
    fn inversion_zero_trace() {
        let cutoff = make_bump(0.0, 3.0, 0).unwrap();
        let scan = fbi_dense_scan(&|_| c(0.0, 0.0), &cutoff, (-3.5, 3.5), 101, 24.0, 241);
        let out = fbi_inverse(&scan, 1e-3, C1_CALIBRATED, &[-0.4, 0.0, 0.9]).unwrap();
        for v in out {
            assert!(v.norm() < 1e-12);
        }
    }

    #[test]
    fn inversion_oscillatory_trace() {
        let cutoff = make_bump(0.0, 6.0, 0).unwrap();
        let trace = |x: f64| (c(0.0, 5.0 * x)).exp();
        let scan = fbi_dense_scan(&trace, &cutoff, (-4.5, 4.5), 561, 48.0, 961);
        let x_grid: Vec<f64> = (0..=60).map(|i| -1.5 + 3.0 * i as f64 / 60.0).collect();
        let out = fbi_inverse(&scan, 1e-3, C1_CALIBRATED, &x_grid).unwrap();
        let mut worst: f64 = 0.0;
        for (v, &x) in out.iter().zip(x_grid.iter()) {
            worst = worst.max((v - (c(0.0, 5.0 * x)).exp()).norm());
        }
        assert!(worst < 2e-2, "max error {worst}");
    }

    #[test]
    fn inversion_rejects_undersampled_xi() {
        let cutoff = make_bump(0.0, 4.0, 0).unwrap();
        // a rough trace whose spectrum extends well past the tiny xi_max
        let trace = |x: f64| c(if x >= 0.0 { 1.0 } else { 0.0 }, 0.0);
        let scan = fbi_dense_scan(&trace, &cutoff, (-3.0, 3.0), 101, 4.0, 41);
        let out = fbi_inverse(&scan, 1e-3, C1_CALIBRATED, &[0.0]);
        assert!(matches!(out, Err(Error::TailDominated { .. })), "{out:?}");
    }
}
