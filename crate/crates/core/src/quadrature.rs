//! Gauss-Hermite quadrature.

use serde::{Deserialize, Serialize};

/// Largest supported rule; beyond this the tail weights underflow.
pub const MAX_NODES: usize = 300;

/// How the uplink integrals place the Gauss-Hermite nodes in `u = ln x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GhMode {
    /// Nodes shifted to the integrand's mode and scaled by its curvature.
    #[default]
    Adaptive,
    /// Nodes used as-is, `sum w_i e^{u_i^2} g(u_i)`.
    Plain,
}

/// An `n`-point Gauss-Hermite rule for the weight `e^{-x^2}`.
/// Number of eigenvalues below `x` of the Jacobi matrix of the Hermite
/// weight: zero diagonal, off-diagonal `sqrt(k / 2)`.
fn eigenvalues_below(n: usize, x: f64) -> usize {
    let mut count = 0;
    let mut d = -x;
    if d < 0.0 {
        count += 1;
    }
    for k in 1..n {
        let prev = if d == 0.0 { f64::EPSILON } else { d };
        d = -x - 0.5 * k as f64 / prev;
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// Orthonormal Hermite polynomial of degree `n` at `z` and its derivative,
/// scaled as in the recurrence `p_{j+1} = z sqrt(2/(j+1)) p_j - sqrt(j/(j+1)) p_{j-1}`.
fn hermite_orthonormal(n: usize, z: f64) -> (f64, f64) {
    let mut p1 = std::f64::consts::PI.powf(-0.25);
    let mut p2 = 0.0;
    for j in 0..n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
    }
    (p1, (2.0 * n as f64).sqrt() * p2)
}

#[derive(Debug, Clone)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    // w_i * e^{x_i^2}
    unweighted: Vec<f64>,
}

impl GaussHermite {
    /// Builds the rule from the roots of the orthonormal Hermite
    /// recurrence: Sturm-sequence bisection on its Jacobi matrix, then a
    /// Newton polish. Panics if `n` is zero or above [`MAX_NODES`].
    pub fn new(n: usize) -> Self {
        assert!((1..=MAX_NODES).contains(&n), "node count {n} out of range");
        let nf = n as f64;
        let bound = (2.0 * nf + 1.0).sqrt() + 1.0;
        let mut x = Vec::with_capacity(n);
        let mut w = Vec::with_capacity(n);
        for i in 0..n {
            // the i-th smallest eigenvalue has exactly i eigenvalues below it
            let (mut lo, mut hi) = (-bound, bound);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if eigenvalues_below(n, mid) > i {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let mut z = 0.5 * (lo + hi);
            let (mut p, mut dp) = hermite_orthonormal(n, z);
            for _ in 0..3 {
                if dp == 0.0 {
                    break;
                }
                let dz = p / dp;
                if !dz.is_finite() || dz.abs() > hi - lo + 1e-14 {
                    break;
                }
                z -= dz;
                (p, dp) = hermite_orthonormal(n, z);
            }
            if n % 2 == 1 && i == n / 2 {
                z = 0.0;
                (_, dp) = hermite_orthonormal(n, z);
            }
            x.push(z);
            w.push(2.0 / (dp * dp));
        }
        // exact symmetry
        for i in 0..n / 2 {
            let (a, b) = (0.5 * (x[n - 1 - i] - x[i]), 0.5 * (w[i] + w[n - 1 - i]));
            x[i] = -a;
            x[n - 1 - i] = a;
            w[i] = b;
            w[n - 1 - i] = b;
        }
        let unweighted = x.iter().zip(&w).map(|(xi, wi)| wi * (xi * xi).exp()).collect();
        Self { nodes: x, weights: w, unweighted }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes in ascending order.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `sum w_i f(x_i)`, approximating `int e^{-x^2} f(x) dx`.
    pub fn integrate_weighted(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// `sum w_i e^{x_i^2} g(x_i)`, approximating `int g(x) dx` over the real line.
    pub fn integrate(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.unweighted).map(|(&x, &w)| w * g(x)).sum()
    }

    /// `int g(u) du` with nodes mapped to `center + scale * x_i`.
    pub fn integrate_shifted(&self, g: impl Fn(f64) -> f64, center: f64, scale: f64) -> f64 {
        scale * self.integrate(|x| g(center + scale * x))
    }

    /// `int exp(log_g(u)) du` with the nodes centered on the mode of `log_g`
    /// inside `[lo, hi]` and scaled by its curvature there.
    pub fn integrate_adaptive(&self, log_g: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
        match laplace_fit(&log_g, lo, hi) {
            Some((center, sigma)) => self.integrate_shifted(
                |u| log_g(u).exp(),
                center,
                std::f64::consts::SQRT_2 * sigma,
            ),
            None => 0.0,
        }
    }
}

/// Mode and curvature scale of `log_g` on `[lo, hi]`: a grid scan followed
/// by golden-section refinement. `None` when `log_g` is `-inf` everywhere.
pub fn laplace_fit(log_g: &impl Fn(f64) -> f64, lo: f64, hi: f64) -> Option<(f64, f64)> {
    const GRID: usize = 400;
    let step = (hi - lo) / GRID as f64;
    let mut best = f64::NEG_INFINITY;
    let mut best_i = 0;
    for i in 0..=GRID {
        let v = log_g(lo + step * i as f64);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    if !best.is_finite() {
        return None;
    }
    let (mut a, mut b) = (lo + step * (best_i as f64 - 1.0), lo + step * (best_i as f64 + 1.0));
    let gr = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - gr * (b - a);
    let mut d = a + gr * (b - a);
    let (mut fc, mut fd) = (log_g(c), log_g(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-12 * (1.0 + a.abs()) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = log_g(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = log_g(d);
        }
    }
    let center = 0.5 * (a + b);
    let f0 = log_g(center);
    let mut h = 1e-3 * step.max(1e-6);
    let mut sigma = step;
    for _ in 0..8 {
        let curv = (log_g(center + h) - 2.0 * f0 + log_g(center - h)) / (h * h);
        if curv.is_finite() && curv < 0.0 {
            sigma = (-1.0 / curv).sqrt();
            break;
        }
        h *= 10.0;
    }
    Some((center, sigma))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_rule() {
        let gh = GaussHermite::new(2);
        let r = 0.5f64.sqrt();
        assert!((gh.nodes()[0] + r).abs() < 1e-14);
        assert!((gh.nodes()[1] - r).abs() < 1e-14);
        let sp = std::f64::consts::PI.sqrt();
        assert!((gh.weights()[0] - sp / 2.0).abs() < 1e-14);
    }

    #[test]
    fn polynomial_exactness() {
        // int x^{2k} e^{-x^2} = Gamma(k + 1/2)
        let gh = GaussHermite::new(20);
        for k in 0..20 {
            let want = crate::special::ln_gamma(k as f64 + 0.5).exp();
            let got = gh.integrate_weighted(|x| x.powi(2 * k));
            assert!(((got - want) / want).abs() < 1e-10, "k={k}: {got} vs {want}");
            let odd = gh.integrate_weighted(|x| x.powi(2 * k + 1));
            assert!(odd.abs() < 1e-8 * want.max(1.0));
        }
    }

    #[test]
    fn large_rules_keep_their_mass() {
        for n in [150, 250, MAX_NODES] {
            let g = GaussHermite::new(n);
            let pi = std::f64::consts::PI;
            assert!((g.integrate_weighted(|_| 1.0) - pi.sqrt()).abs() < 1e-12, "n={n}");
            assert!((g.integrate_weighted(|x| x * x) - 0.5 * pi.sqrt()).abs() < 1e-12, "n={n}");
            assert!(g.nodes().windows(2).all(|p| p[1] > p[0]));
        }
    }

    #[test]
    fn odd_rule_has_zero_node() {
        let gh = GaussHermite::new(31);
        assert_eq!(gh.nodes()[15], 0.0);
        let total: f64 = gh.weights().iter().sum();
        assert!((total - std::f64::consts::PI.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn adaptive_gaussian_far_from_origin() {
        let gh = GaussHermite::new(10);
        let (m, s) = (-7.3, 0.04);
        let log_g = |u: f64| -0.5 * ((u - m) / s).powi(2);
        let want = s * (2.0 * std::f64::consts::PI).sqrt();
        let got = gh.integrate_adaptive(log_g, -20.0, 5.0);
        assert!(((got - want) / want).abs() < 1e-10);
    }
}
