//! Downlink and uplink information outage, throughput and joint outage.

use serde::{Deserialize, Serialize};

use crate::channel::{GammaFit, User};
use crate::energy::{buffer_less_outage, buffered_outage, p11, residual_energy, SwiptParams};
use crate::error::Result;
use crate::params::SystemParams;
use crate::quadrature::{GaussHermite, GhMode};
use crate::special::{gamma_p, gamma_q, poisson_head};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NomaParams {
    pub alpha_r: f64,
    pub alpha_t: f64,
    pub r_target: f64,
    pub n0: f64,
}

impl Default for NomaParams {
    fn default() -> Self {
        Self { alpha_r: 0.6, alpha_t: 0.4, r_target: 1.0, n0: 10f64.powf(-2.5) }
    }
}

impl NomaParams {
    /// SINR threshold `2^R - 1`.
    pub fn gamma_th(&self) -> f64 {
        self.r_target.exp2() - 1.0
    }
}

/// Outage and throughput figures for one configuration, indexed by
/// [`User::index`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct LinkMetrics {
    pub p_po: [f64; 2],
    pub p_io_down: [f64; 2],
    pub p_io_up: [f64; 2],
    pub p_joint_down: [f64; 2],
    pub p_joint_up: [f64; 2],
    pub psi_down: f64,
    pub psi_up: f64,
    /// Mean energy left in the buffer after the horizon.
    pub residual: [f64; 2],
}

pub(crate) fn clamp_prob(what: &str, v: f64) -> f64 {
    if v.is_nan() {
        log::warn!("{what}: evaluation produced NaN");
        return v;
    }
    if !(-1e-6..=1.0 + 1e-6).contains(&v) {
        log::warn!("{what}: raw value {v} clamped to [0, 1]");
    }
    v.clamp(0.0, 1.0)
}

fn zsq_cdf(fit: &GammaFit, y: f64) -> f64 {
    fit.cdf_z_sq(y)
}

/// Single-slot downlink outage of `U_r`, which decodes its own signal
/// treating `U_t`'s as interference.
pub fn downlink_outage_r(fit_r: &GammaFit, noma: &NomaParams, swipt: &SwiptParams) -> f64 {
    let g = noma.gamma_th();
    let margin = noma.alpha_r - noma.alpha_t * g;
    if margin <= 0.0 {
        return 1.0;
    }
    let denom = swipt.theta * swipt.beta_r * swipt.p_ap * margin;
    if denom <= 0.0 {
        return 1.0;
    }
    zsq_cdf(fit_r, swipt.antennas as f64 * noma.n0 * g / denom)
}

/// Single-slot downlink outage of `U_t`, which must decode `U_r`'s signal
/// before its own.
pub fn downlink_outage_t(fit_t: &GammaFit, noma: &NomaParams, swipt: &SwiptParams) -> f64 {
    let g = noma.gamma_th();
    let margin = noma.alpha_r - noma.alpha_t * g;
    if margin <= 0.0 {
        return 1.0;
    }
    let base = swipt.theta * swipt.beta_t * swipt.p_ap;
    if base <= 0.0 {
        return 1.0;
    }
    let ln0 = swipt.antennas as f64 * noma.n0 * g;
    let thr = (ln0 / (base * margin)).max(ln0 / (base * noma.alpha_t));
    zsq_cdf(fit_t, thr)
}

/// Outage over a horizon of `q_slots` slots given the single-slot outage.
pub fn info_outage_horizon(single_slot_p10: f64, q_slots: usize) -> f64 {
    1.0 - (1.0 - single_slot_p10).powi(q_slots as i32)
}

/// Quadrature settings for the uplink integrals.
#[derive(Debug, Clone)]
pub struct UplinkQuadrature {
    pub rule: GaussHermite,
    pub mode: GhMode,
    pub integer_shape: bool,
}

impl UplinkQuadrature {
    pub fn new(nodes: usize, mode: GhMode, integer_shape: bool) -> Self {
        if nodes < 10 {
            log::warn!("Gauss-Hermite with {nodes} nodes may be inaccurate");
        }
        Self { rule: GaussHermite::new(nodes), mode, integer_shape }
    }

    pub fn from_params(p: &SystemParams) -> Self {
        Self::new(p.gh_nodes, p.gh_mode, p.gh_integer_shape)
    }

    fn integrate(&self, log_g: impl Fn(f64) -> f64, center: f64) -> f64 {
        match self.mode {
            GhMode::Adaptive => self.rule.integrate_adaptive(log_g, center - 40.0, center + 10.0),
            GhMode::Plain => self.rule.integrate(|u| log_g(u).exp()),
        }
    }
}

/// Law of `Z^2` for `Z ~ Gamma(n, phi)`, optionally with `n` an integer so
/// that the CDF reduces to a finite Poisson sum.
#[derive(Debug, Clone, Copy)]
struct ZsqLaw {
    n: f64,
    phi: f64,
    integer: bool,
}

impl ZsqLaw {
    fn new(fit: &GammaFit, integer: bool) -> Self {
        let n = if integer { fit.rounded_shape() as f64 } else { fit.shape() };
        Self { n, phi: fit.phi, integer }
    }

    fn cdf(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        let z = self.phi * y.sqrt();
        if self.integer {
            1.0 - poisson_head(self.n as u64, z)
        } else {
            gamma_p(self.n, z)
        }
    }

    fn sf(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 1.0;
        }
        let z = self.phi * y.sqrt();
        if self.integer {
            poisson_head(self.n as u64, z)
        } else {
            gamma_q(self.n, z)
        }
    }

    fn ln_pdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let n = self.n;
        n * self.phi.ln() - self.phi * x.sqrt() + 0.5 * (n - 2.0) * x.ln()
            - std::f64::consts::LN_2
            - crate::special::ln_gamma(n)
    }

    /// `ln E[Z^2]`, used to place the quadrature nodes.
    fn ln_mean_sq(&self) -> f64 {
        (self.n * (self.n + 1.0)).ln() - 2.0 * self.phi.ln()
    }
}

/// Uplink parameters shared by both users' outage expressions.
struct Uplink {
    law_t: ZsqLaw,
    law_r: ZsqLaw,
    gain_t: f64,
    gain_r: f64,
    gamma: f64,
    ln0: f64,
}

impl Uplink {
    fn new(fit_t: &GammaFit, fit_r: &GammaFit, p_t: f64, p_r: f64, swipt: &SwiptParams, noma: &NomaParams, integer: bool) -> Self {
        Self {
            law_t: ZsqLaw::new(fit_t, integer),
            law_r: ZsqLaw::new(fit_r, integer),
            gain_t: p_t * swipt.beta_t,
            gain_r: p_r * swipt.beta_r,
            gamma: noma.gamma_th(),
            ln0: swipt.antennas as f64 * noma.n0,
        }
    }

    /// Largest `Z_r^2` that still lets the AP decode `U_t` when `Z_t^2 = x`.
    fn h(&self, x: f64) -> f64 {
        (self.gain_t * x - self.gamma * self.ln0) / (self.gamma * self.gain_r)
    }

    fn h_inv(&self, y: f64) -> f64 {
        self.gamma * (self.gain_r * y + self.ln0) / self.gain_t
    }
}

/// Single-slot uplink outage of `U_t`, decoded first at the AP with `U_r`
/// as interference.
pub fn uplink_outage_t(
    fit_t: &GammaFit,
    fit_r: &GammaFit,
    p_t: f64,
    p_r: f64,
    swipt: &SwiptParams,
    noma: &NomaParams,
    quad: &UplinkQuadrature,
) -> f64 {
    let u = Uplink::new(fit_t, fit_r, p_t, p_r, swipt, noma, quad.integer_shape);
    if u.gamma == 0.0 {
        return 0.0;
    }
    if u.gain_t <= 0.0 {
        return 1.0;
    }
    let log_g = |w: f64| {
        let x = w.exp();
        let y = u.gamma * (u.gain_r * x + u.ln0) / u.gain_t;
        u.law_t.cdf(y).ln() + u.law_r.ln_pdf(x) + w
    };
    clamp_prob("uplink outage of U_t", quad.integrate(log_g, u.law_r.ln_mean_sq()))
}

/// Single-slot uplink outage of `U_r`: the AP fails when it cannot decode
/// `U_t` first, or decodes it but then misses `U_r`.
pub fn uplink_outage_r(
    fit_t: &GammaFit,
    fit_r: &GammaFit,
    p_t: f64,
    p_r: f64,
    swipt: &SwiptParams,
    noma: &NomaParams,
    quad: &UplinkQuadrature,
) -> f64 {
    let u = Uplink::new(fit_t, fit_r, p_t, p_r, swipt, noma, quad.integer_shape);
    if u.gamma == 0.0 {
        return 0.0;
    }
    if u.gain_r <= 0.0 || u.gain_t <= 0.0 {
        return 1.0;
    }
    let a = u.gamma * u.ln0 / u.gain_t;
    let b = u.gamma * u.ln0 / u.gain_r;
    let x_star = a * (1.0 + u.gamma);
    let ft_star = u.law_t.cdf(x_star);
    let head = ft_star + u.law_r.cdf(b) * (1.0 - ft_star);
    // P(x_star < Z_t^2 < h^-1(Z_r^2)), integrated over Z_r^2 = b + e^w. The
    // integrand vanishes continuously at y = b, which the integral over Z_t^2
    // (cut off at x_star, inside the bulk of its law) does not.
    let st_star = u.law_t.sf(x_star);
    let upper = ft_star > 0.5;
    let log_g = |w: f64| {
        let y = b + w.exp();
        let x = u.h_inv(y);
        let d = if upper { st_star - u.law_t.sf(x) } else { u.law_t.cdf(x) - ft_star };
        d.max(0.0).ln() + u.law_r.ln_pdf(y) + w
    };
    let tail = quad.integrate(log_g, u.law_r.ln_mean_sq());
    clamp_prob("uplink outage of U_r", head + tail)
}

/// `U_r` uplink outage in the form `F_r(B) + F_t(A) + int_A^inf ...`, which
/// can exceed 1 when `A < x < A(1 + gamma)` carries mass.
pub fn uplink_outage_r_paper_form(
    fit_t: &GammaFit,
    fit_r: &GammaFit,
    p_t: f64,
    p_r: f64,
    swipt: &SwiptParams,
    noma: &NomaParams,
    quad: &UplinkQuadrature,
) -> f64 {
    let u = Uplink::new(fit_t, fit_r, p_t, p_r, swipt, noma, quad.integer_shape);
    if u.gamma == 0.0 {
        return 0.0;
    }
    if u.gain_r <= 0.0 || u.gain_t <= 0.0 {
        return 1.0;
    }
    let a = u.gamma * u.ln0 / u.gain_t;
    let b = u.gamma * u.ln0 / u.gain_r;
    let head = u.law_r.cdf(b) + u.law_t.cdf(a);
    let log_g = |w: f64| {
        let x = a + w.exp();
        u.law_r.sf(u.h(x)).ln() + u.law_t.ln_pdf(x) + w
    };
    let tail = quad.integrate(log_g, u.law_t.ln_mean_sq());
    clamp_prob("uplink outage of U_r (paper form)", head + tail)
}

/// Sum throughput `R T_s (1 - p_r) + R T_s (1 - p_t)`.
pub fn throughput(p_io_r: f64, p_io_t: f64, r_target: f64, t_s: f64) -> f64 {
    r_target * t_s * ((1.0 - p_io_r) + (1.0 - p_io_t))
}

/// Outage from either an empty buffer or a failed decode, treated as
/// independent events.
pub fn joint_outage(p_po: f64, p_io: f64) -> f64 {
    1.0 - (1.0 - p_po) * (1.0 - p_io)
}

/// Energy model behind an analytic evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnalyticBuffer {
    Buffered,
    BufferLess,
}

/// Power outage of both users, indexed by [`User::index`].
pub fn power_outages(p: &SystemParams, fits: &[GammaFit; 2], buffer: AnalyticBuffer) -> [f64; 2] {
    User::BOTH.map(|k| {
        let (fit, beta, e_s) = (&fits[k.index()], p.beta(k), p.e_s(k));
        match buffer {
            AnalyticBuffer::Buffered => buffered_outage(p.q_slots, fit, &p.swipt, beta, e_s, p.initial_c),
            // no storage, so no initial charge either
            AnalyticBuffer::BufferLess => buffer_less_outage(p11(1, fit, &p.swipt, beta, e_s, 0.0), p.q_slots),
        }
    })
}

/// Single-slot uplink outages `[U_r, U_t]`.
pub fn uplink_outages(p: &SystemParams, fits: &[GammaFit; 2], quad: &UplinkQuadrature) -> [f64; 2] {
    let (fr, ft) = (&fits[0], &fits[1]);
    let (pr, pt) = (p.uplink_power(User::Reflect), p.uplink_power(User::Transmit));
    [
        uplink_outage_r(ft, fr, pt, pr, &p.swipt, &p.noma, quad),
        uplink_outage_t(ft, fr, pt, pr, &p.swipt, &p.noma, quad),
    ]
}

pub fn fits(p: &SystemParams) -> Result<[GammaFit; 2]> {
    Ok([p.fit(User::Reflect)?, p.fit(User::Transmit)?])
}

/// Closed-form metrics of the STAR-RIS system with or without the buffer.
pub fn analytic_metrics(p: &SystemParams, buffer: AnalyticBuffer) -> Result<LinkMetrics> {
    p.validate()?;
    let fits = fits(p)?;
    let quad = UplinkQuadrature::from_params(p);
    let q = p.q_slots;
    let p_po = power_outages(p, &fits, buffer);
    let down = [
        downlink_outage_r(&fits[0], &p.noma, &p.swipt),
        downlink_outage_t(&fits[1], &p.noma, &p.swipt),
    ];
    let up = uplink_outages(p, &fits, &quad);
    let p_io_down = down.map(|x| info_outage_horizon(x, q));
    let p_io_up = up.map(|x| info_outage_horizon(x, q));
    let residual = User::BOTH.map(|k| {
        let c = match buffer {
            AnalyticBuffer::Buffered => p.initial_c,
            AnalyticBuffer::BufferLess => f64::NAN,
        };
        residual_energy(q, &fits[k.index()], &p.swipt, p.beta(k), p.e_s(k), c).energy
    });
    let (r, ts) = (p.noma.r_target, p.swipt.t_s);
    Ok(LinkMetrics {
        p_po,
        p_io_down,
        p_io_up,
        p_joint_down: [0, 1].map(|i| joint_outage(p_po[i], p_io_down[i])),
        p_joint_up: [0, 1].map(|i| joint_outage(p_po[i], p_io_up[i])),
        psi_down: throughput(p_io_down[0], p_io_down[1], r, ts),
        psi_up: throughput(p_io_up[0], p_io_up[1], r, ts),
        residual,
    })
}
