//! Quadrature building blocks: Gauss-Legendre rules, composite panels with
//! optional grading toward singular points, geometric meshes in t, and a
//! periodic trapezoid rule for the circle model.
//!
//! All accumulation uses compensated (Kahan) summation in a fixed order so
//! that repeated runs produce bit-identical results.

use num_complex::Complex64;

/// Nodes and weights of an `n`-point Gauss-Legendre rule on [-1, 1],
/// memoized per order.
///
/// Computed by Newton iteration on the Legendre polynomial with the usual
/// Chebyshev-like initial guesses; accurate to machine precision for the
/// orders used here (n <= 64).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    use std::collections::HashMap;
    use std::sync::{Mutex, OnceLock};
    static CACHE: OnceLock<Mutex<HashMap<usize, (Vec<f64>, Vec<f64>)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(rule) = cache.lock().unwrap().get(&n) {
        return rule.clone();
    }
    let rule = gauss_legendre_uncached(n);
    cache.lock().unwrap().insert(n, rule.clone());
    rule
}

fn gauss_legendre_uncached(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        // initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre P_n(x) and P_n'(x) by the three-term recurrence
            let mut p0 = 1.0;
            let mut p1 = x;
            for j in 2..=n {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            dp = (n as f64) * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Compensated accumulator. Tracks the running sum of absolute values as
/// well, which gives a cheap round-off floor estimate for the result.
#[derive(Debug, Clone, Copy, Default)]
pub struct Kahan {
    sum: f64,
    carry: f64,
    abs_sum: f64,
}

impl Kahan {
    pub fn add(&mut self, v: f64) {
        let y = v - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
        self.abs_sum += v.abs();
    }
    pub fn value(&self) -> f64 {
        self.sum
    }
    pub fn abs_sum(&self) -> f64 {
        self.abs_sum
    }
}

/// Complex compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanC {
    re: Kahan,
    im: Kahan,
}

impl KahanC {
    pub fn add(&mut self, v: Complex64) {
        self.re.add(v.re);
        self.im.add(v.im);
    }
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
    /// Round-off floor of the accumulated value: eps times the total mass
    /// of |terms| that passed through, with a small safety factor.
    pub fn noise_floor(&self) -> f64 {
        let mass = self.re.abs_sum().hypot(self.im.abs_sum());
        16.0 * f64::EPSILON * mass
    }
}

/// A 1-D integration mesh: ordered panel edges plus a Gauss-Legendre order.
#[derive(Debug, Clone)]
pub struct PanelMesh {
    pub edges: Vec<f64>,
    pub gl_order: usize,
}

impl PanelMesh {
    /// Uniform panels on [a, b].
    pub fn uniform(a: f64, b: f64, panels: usize, gl_order: usize) -> Self {
        assert!(b > a && panels >= 1);
        let edges = (0..=panels)
            .map(|i| a + (b - a) * i as f64 / panels as f64)
            .collect();
        PanelMesh { edges, gl_order }
    }

    /// Uniform panels refined geometrically (ratio 1/2) toward each listed
    /// point that falls inside [a, b]. Each entry carries its own number of
    /// halvings, so algebraic singularities (deep grading) and smooth-flat
    /// junctions of bump functions (moderate grading) can share a mesh.
    pub fn graded(
        a: f64,
        b: f64,
        panels: usize,
        gl_order: usize,
        refine_points: &[(f64, usize)],
    ) -> Self {
        let mut edges: Vec<f64> = (0..=panels)
            .map(|i| a + (b - a) * i as f64 / panels as f64)
            .collect();
        let base = (b - a) / panels as f64;
        for &(p, levels) in refine_points {
            // points on (or beyond) the boundary still grade inward
            if p < a - base || p > b + base {
                continue;
            }
            if p > a && p < b {
                edges.push(p);
            }
            let mut h = base / 2.0;
            for _ in 0..levels {
                if p - h > a {
                    edges.push(p - h);
                }
                if p + h < b {
                    edges.push(p + h);
                }
                h /= 2.0;
            }
        }
        edges.sort_by(|x, y| x.partial_cmp(y).unwrap());
        edges.dedup_by(|x, y| (*x - *y).abs() < 1e-300);
        PanelMesh { edges, gl_order }
    }

    pub fn node_count(&self) -> usize {
        (self.edges.len() - 1) * self.gl_order
    }

    /// Largest node spacing over the mesh (panel width / GL order).
    pub fn max_spacing(&self) -> f64 {
        self.edges
            .windows(2)
            .map(|w| (w[1] - w[0]) / self.gl_order as f64)
            .fold(0.0, f64::max)
    }

    /// Integrate a complex-valued function over the mesh. Returns the value
    /// and a round-off floor estimate.
    pub fn integrate<F: FnMut(f64) -> Complex64>(&self, mut f: F) -> (Complex64, f64) {
        let mut acc = KahanC::default();
        for (x, w) in self.nodes() {
            acc.add(f(x) * w);
        }
        (acc.value(), acc.noise_floor())
    }

    /// All (node, weight) pairs of the composite rule, in integration order.
    pub fn nodes(&self) -> Vec<(f64, f64)> {
        let (xs, ws) = gauss_legendre(self.gl_order);
        let mut out = Vec::with_capacity(self.node_count());
        for p in self.edges.windows(2) {
            let (lo, hi) = (p[0], p[1]);
            let half = 0.5 * (hi - lo);
            let mid = 0.5 * (hi + lo);
            for (x, w) in xs.iter().zip(ws.iter()) {
                out.push((mid + half * x, w * half));
            }
        }
        out
    }

    /// Same mesh with every panel split in two (for Richardson pairs).
    pub fn refined(&self) -> Self {
        let mut edges = Vec::with_capacity(self.edges.len() * 2);
        for p in self.edges.windows(2) {
            edges.push(p[0]);
            edges.push(0.5 * (p[0] + p[1]));
        }
        edges.push(*self.edges.last().unwrap());
        PanelMesh {
            edges,
            gl_order: self.gl_order,
        }
    }
}

/// Geometric mesh on (0, t_max] used for the t-integral of trace pairings:
/// panel edges t_max * ratio^j for j = 0..levels. The leftover piece
/// [0, t_max * ratio^levels] is dropped; the integrands carry a t^k weight
/// so the omitted mass is far below round-off for the defaults used here.
pub fn geometric_t_edges(t_max: f64, ratio: f64, levels: usize) -> Vec<f64> {
    assert!(t_max > 0.0 && ratio > 0.0 && ratio < 1.0);
    let mut edges: Vec<f64> = (0..=levels).map(|j| t_max * ratio.powi(j as i32)).collect();
    edges.reverse();
    edges
}

/// Trapezoid rule for 2*pi-periodic integrands sampled at n equispaced
/// points; spectrally accurate for smooth densities.
pub fn trapezoid_periodic<F: FnMut(f64) -> Complex64>(n: usize, mut f: F) -> Complex64 {
    let mut acc = KahanC::default();
    let h = 2.0 * std::f64::consts::PI / n as f64;
    for i in 0..n {
        acc.add(f(i as f64 * h) * h);
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl5_matches_reference_nodes() {
        let (x, w) = gauss_legendre(5);
        // classical 5-point values
        assert!((x[0] + 0.906_179_845_938_664).abs() < 1e-14);
        assert!((x[2]).abs() < 1e-15);
        assert!((w[2] - 0.568_888_888_888_889).abs() < 1e-13);
        assert!((w[0] - 0.236_926_885_056_189).abs() < 1e-13);
    }

    #[test]
    fn gl_integrates_polynomials_exactly() {
        // n-point rule is exact through degree 2n-1
        for n in [2usize, 8, 16] {
            let mesh = PanelMesh::uniform(-1.0, 1.0, 1, n);
            let d = 2 * n - 1;
            let (v, _) = mesh.integrate(|x| Complex64::new(x.powi(d as i32 - 1), 0.0));
            let exact = 2.0 / (d as f64); // integral of x^(d-1), d-1 even
            assert!((v.re - exact).abs() < 1e-13, "n={n} got {v}");
        }
    }

    #[test]
    fn graded_mesh_resolves_sqrt_singularity() {
        let mesh = PanelMesh::graded(0.0, 1.0, 4, 16, &[(0.5, 24)]);
        let (v, _) = mesh.integrate(|x| Complex64::new((x - 0.5).abs().sqrt(), 0.0));
        // integral of |x-1/2|^(1/2) over [0,1] = 2 * (2/3) * (1/2)^(3/2)
        let exact = 4.0 / 3.0 * 0.5f64.powf(1.5);
        assert!((v.re - exact).abs() < 1e-10, "got {v}, want {exact}");
    }

    #[test]
    fn trapezoid_periodic_is_spectral() {
        let v = trapezoid_periodic(64, |t| Complex64::new((3.0 * t).cos().powi(2), 0.0));
        assert!((v.re - std::f64::consts::PI).abs() < 1e-12);
    }
}
