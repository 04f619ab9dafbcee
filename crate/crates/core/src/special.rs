//! Special functions: regularized incomplete gamma, noncentral chi-square
//! survival and Marcum-Q.

use statrs::function::gamma;

/// Natural log of the gamma function.
pub fn ln_gamma(x: f64) -> f64 {
    gamma::ln_gamma(x)
}

/// Regularized lower incomplete gamma `P(a, x)`, extended with `P(a, 0) = 0`
/// and `P(a, inf) = 1`.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0, "gamma_p shape must be positive, got {a}");
    if x.is_nan() {
        return f64::NAN;
    }
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    gamma::gamma_lr(a, x)
}

/// Regularized upper incomplete gamma `Q(a, x) = 1 - P(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0, "gamma_q shape must be positive, got {a}");
    if x.is_nan() {
        return f64::NAN;
    }
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    gamma::gamma_ur(a, x)
}

/// `e^{-z} * sum_{j<n} z^j / j!`, the finite-sum form of `Q(n, z)` for
/// integer `n`.
pub fn poisson_head(n: u64, z: f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    if z <= 0.0 {
        return 1.0;
    }
    let ln_z = z.ln();
    let mut sum = 0.0;
    let mut comp = 0.0;
    for j in 0..n {
        let t = (j as f64 * ln_z - z - ln_gamma(j as f64 + 1.0)).exp();
        let y = t - comp;
        let s = sum + y;
        comp = (s - sum) - y;
        sum = s;
    }
    sum.min(1.0)
}

const TAIL_ABS: f64 = 1e-17;
const TAIL_REL: f64 = 1e-16;
const MAX_TERMS: usize = 20_000;

/// Survival function of the noncentral chi-square distribution with `k`
/// degrees of freedom and noncentrality `lambda`, evaluated at `x`.
///
/// Sums the Poisson mixture of central chi-square tails outward from the
/// mode of the Poisson weights so that large noncentralities stay finite.
pub fn ncx2_sf(k: f64, lambda: f64, x: f64) -> f64 {
    debug_assert!(k > 0.0 && lambda >= 0.0);
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    let half_k = 0.5 * k;
    let y = 0.5 * x;
    if lambda == 0.0 {
        return gamma_q(half_k, y);
    }
    let mu = 0.5 * lambda;
    let ln_mu = mu.ln();
    let ln_w = |j: usize| -mu + j as f64 * ln_mu - ln_gamma(j as f64 + 1.0);
    let j0 = mu.floor() as usize;

    let mut sum = 0.0;
    let mut j = j0;
    let mut n = 0;
    loop {
        let w = ln_w(j).exp();
        sum += w * gamma_q(half_k + j as f64, y);
        n += 1;
        let ratio = mu / (j as f64 + 1.0);
        if ratio < 1.0 {
            let tail = w * ratio / (1.0 - ratio);
            if tail < TAIL_ABS || tail < TAIL_REL * sum {
                break;
            }
        }
        if n >= MAX_TERMS {
            log::warn!("ncx2_sf upward sum hit the term cap (k={k}, lambda={lambda}, x={x})");
            break;
        }
        j += 1;
    }
    let mut j = j0;
    while j > 0 {
        j -= 1;
        let w = ln_w(j).exp();
        sum += w * gamma_q(half_k + j as f64, y);
        n += 1;
        let ratio = j as f64 / mu;
        if ratio < 1.0 {
            let tail = w * ratio / (1.0 - ratio);
            if tail < TAIL_ABS || tail < TAIL_REL * sum {
                break;
            }
        }
        if n >= 2 * MAX_TERMS {
            log::warn!("ncx2_sf downward sum hit the term cap (k={k}, lambda={lambda}, x={x})");
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// Generalized Marcum Q-function `Q_nu(a, b)` for real order `nu > 0`.
pub fn marcum_q(nu: f64, a: f64, b: f64) -> f64 {
    ncx2_sf(2.0 * nu, a * a, b * b)
}
