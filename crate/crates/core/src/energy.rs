//! Energy harvesting, consumption and the energy-buffer power-outage model.

use serde::{Deserialize, Serialize};

use crate::channel::GammaFit;
use crate::special::{gamma_q, ln_gamma, ncx2_sf};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwiptParams {
    pub p_ap: f64,
    pub antennas: usize,
    pub eta: f64,
    pub theta: f64,
    pub beta_r: f64,
    pub beta_t: f64,
    pub t_s: f64,
}

impl Default for SwiptParams {
    fn default() -> Self {
        Self {
            p_ap: 1.0,
            antennas: 2,
            eta: 0.9,
            theta: 0.5,
            beta_r: 0.6,
            beta_t: 0.4,
            t_s: 1.0 / 256_000.0,
        }
    }
}

impl SwiptParams {
    /// `eta (1 - theta) beta_k P_AP T_s`, the harvest per unit of `Z^2 / L`.
    pub fn harvest_scale(&self, beta_k: f64) -> f64 {
        self.eta * (1.0 - self.theta) * beta_k * self.p_ap * self.t_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsumptionParams {
    pub m_bits: f64,
    pub e_c: f64,
    pub e_tp: f64,
    pub comp_fraction: f64,
}

impl Default for ConsumptionParams {
    fn default() -> Self {
        Self { m_bits: 3.0, e_c: 50e-9, e_tp: 100e-12, comp_fraction: 0.087 }
    }
}

/// Energy harvested in one slot from composite gain `z`.
pub fn harvested_energy(z: f64, swipt: &SwiptParams, beta_k: f64) -> f64 {
    swipt.harvest_scale(beta_k) * z * z / swipt.antennas as f64
}

/// Per-slot energy `E_s` a user spends on reception, transmission and computing.
pub fn consumption(c: &ConsumptionParams, distance_ap_user: f64) -> f64 {
    let d2 = distance_ap_user * distance_ap_user;
    (1.0 + c.comp_fraction) * (2.0 * c.m_bits * c.e_c + c.m_bits * d2 * c.e_tp)
}

/// Uplink transmit power `M d^2 E_tp / T_s`.
pub fn uplink_power(c: &ConsumptionParams, distance: f64, t_s: f64) -> f64 {
    c.m_bits * distance * distance * c.e_tp / t_s
}

/// Value of `Z^2` at which the cumulative harvest over `q` slots exactly
/// covers `q E_s - C`; `None` when the battery alone suffices.
fn p11_threshold(q: usize, swipt: &SwiptParams, beta_k: f64, e_s: f64, c: f64) -> Option<f64> {
    let deficit = q as f64 * e_s - c;
    if deficit <= 0.0 {
        return None;
    }
    let scale = swipt.harvest_scale(beta_k);
    if scale <= 0.0 {
        return Some(f64::INFINITY);
    }
    Some(swipt.antennas as f64 * deficit / scale)
}

/// Noncentral chi-square parameters of the q-slot harvest model:
/// `(sigma^2, s^2)`.
fn ncx2_model(q: usize, fit: &GammaFit) -> (f64, f64) {
    let sigma2 = fit.var_z();
    let m = fit.mean_z();
    (sigma2, q as f64 * m * m)
}

/// Probability that the buffer is still sufficient after `q` slots.
pub fn p11(q: usize, fit: &GammaFit, swipt: &SwiptParams, beta_k: f64, e_s: f64, c: f64) -> f64 {
    assert!(q >= 1, "slot index starts at 1");
    let Some(thr) = p11_threshold(q, swipt, beta_k, e_s, c) else {
        return 1.0;
    };
    if thr.is_infinite() {
        return 0.0;
    }
    if q == 1 {
        return gamma_q(fit.shape(), fit.phi * thr.sqrt());
    }
    p11_marcum(q, fit, thr)
}

fn p11_marcum(q: usize, fit: &GammaFit, thr: f64) -> f64 {
    let (sigma2, s2) = ncx2_model(q, fit);
    ncx2_sf(q as f64, s2 / sigma2, thr / sigma2)
}

/// The noncentral chi-square (Marcum-Q) form at any `q`, including `q = 1`.
pub fn p11_noncentral(q: usize, fit: &GammaFit, swipt: &SwiptParams, beta_k: f64, e_s: f64, c: f64) -> f64 {
    assert!(q >= 1, "slot index starts at 1");
    match p11_threshold(q, swipt, beta_k, e_s, c) {
        None => 1.0,
        Some(t) if t.is_infinite() => 0.0,
        Some(t) => p11_marcum(q, fit, t),
    }
}

const SERIES_REL: f64 = 1e-14;

/// The double Poisson series for even `q`, summed forward from the first
/// term and truncated once past the peak at relative term `1e-14`. `None`
/// for odd `q`.
pub fn p11_series(q: usize, fit: &GammaFit, swipt: &SwiptParams, beta_k: f64, e_s: f64, c: f64) -> Option<f64> {
    if q == 0 || q % 2 == 1 {
        return None;
    }
    let thr = match p11_threshold(q, swipt, beta_k, e_s, c) {
        None => return Some(1.0),
        Some(t) if t.is_infinite() => return Some(0.0),
        Some(t) => t,
    };
    let (sigma2, s2) = ncx2_model(q, fit);
    let mu = s2 / (2.0 * sigma2);
    let y = thr / (2.0 * sigma2);
    let pois = |k: usize, rate: f64| (k as f64 * rate.ln() - rate - ln_gamma(k as f64 + 1.0)).exp();
    let base = q / 2 - 1;
    let mut inner: f64 = (0..=base).map(|p| pois(p, y)).sum();
    let mut sum = 0.0;
    // far beyond any Poisson(mu) mass that could matter
    let cap = (mu + 40.0 * mu.sqrt()) as usize + 100;
    for k in 0..cap {
        if k > 0 {
            inner += pois(base + k, y);
        }
        let term = pois(k, mu) * inner;
        sum += term;
        if k as f64 > mu && term < SERIES_REL * sum {
            break;
        }
    }
    Some(sum.min(1.0))
}

/// `1 - prod_q P11(q)`.
pub fn power_outage(per_slot_p11: &[f64]) -> f64 {
    1.0 - per_slot_p11.iter().product::<f64>()
}

/// Outage without a buffer: every slot must cover itself, `1 - P11(1)^Q`.
pub fn buffer_less_outage(p11_first: f64, q_slots: usize) -> f64 {
    1.0 - p11_first.powi(q_slots as i32)
}

/// Power-outage probability of a buffered user over `q_slots` slots.
pub fn buffered_outage(q_slots: usize, fit: &GammaFit, swipt: &SwiptParams, beta_k: f64, e_s: f64, c: f64) -> f64 {
    let p: Vec<f64> = (1..=q_slots).map(|q| p11(q, fit, swipt, beta_k, e_s, c)).collect();
    power_outage(&p)
}

/// Initial charge `Q E_s` that maximizes the sufficiency probabilities.
pub fn optimal_initial_energy(q_slots: usize, e_s: f64) -> f64 {
    q_slots as f64 * e_s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub energy: f64,
    pub sustainable: bool,
}

/// Expected energy left after `q_slots` slots, and whether the mean harvest
/// per slot covers the consumption.
pub fn residual_energy(q_slots: usize, fit: &GammaFit, swipt: &SwiptParams, beta_k: f64, e_s: f64, c: f64) -> Residual {
    let per_slot = swipt.harvest_scale(beta_k) * fit.mean_z_sq() / swipt.antennas as f64;
    Residual { energy: q_slots as f64 * per_slot + c - q_slots as f64 * e_s, sustainable: per_slot >= e_s }
}

/// High-power limit of `P11(q)`: the Poisson weights of the noncentral model
/// summed over all orders.
pub fn asymptotic_p11(q: usize, fit: &GammaFit) -> f64 {
    assert!(q >= 1, "slot index starts at 1");
    let (sigma2, s2) = ncx2_model(q, fit);
    let mu = s2 / (2.0 * sigma2);
    let ln_mu = mu.ln();
    let w = |k: usize| (k as f64 * ln_mu - mu - ln_gamma(k as f64 + 1.0)).exp();
    let k0 = mu.floor() as usize;
    let mut sum = 0.0;
    let mut k = k0;
    loop {
        let t = w(k);
        sum += t;
        if k > k0 && t < 1e-17 {
            break;
        }
        k += 1;
    }
    let mut k = k0;
    while k > 0 {
        k -= 1;
        let t = w(k);
        sum += t;
        if t < 1e-17 {
            break;
        }
    }
    sum
}

/// Power state of one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PowerState {
    /// Outage.
    S0,
    /// Sufficient.
    S1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub harvested: f64,
    pub consumed: f64,
    pub state: PowerState,
}

/// Cumulative buffer `B(q) = sum E(l) + C - q E_s`; a slot is in outage when
/// the running balance is negative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BufferState {
    pub level: f64,
    pub initial_c: f64,
    pub q_index: usize,
    pub history: Vec<SlotRecord>,
}

impl BufferState {
    pub fn new(initial_c: f64) -> Self {
        Self { level: initial_c, initial_c, q_index: 0, history: Vec::new() }
    }

    pub fn step(&mut self, harvested: f64, consumed: f64) -> PowerState {
        self.level += harvested - consumed;
        self.q_index += 1;
        let state = if self.level >= 0.0 { PowerState::S1 } else { PowerState::S0 };
        self.history.push(SlotRecord { harvested, consumed, state });
        state
    }

    /// True when any slot so far was in outage.
    pub fn had_outage(&self) -> bool {
        self.history.iter().any(|r| r.state == PowerState::S0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fit() -> GammaFit {
        GammaFit { chi: 70.0, phi: 200.0, antennas: 2 }
    }

    #[test]
    fn threshold_edge_cases() {
        let s = SwiptParams::default();
        assert_eq!(p11(3, &fit(), &s, 0.6, 1e-7, 1e-6), 1.0);
        assert_eq!(p11(3, &fit(), &s, 0.0, 1e-6, 0.0), 0.0);
        let full = SwiptParams { theta: 1.0, ..s };
        assert_eq!(p11(1, &fit(), &full, 0.6, 1e-6, 0.0), 0.0);
    }

    #[test]
    fn buffer_tracks_running_balance() {
        let mut b = BufferState::new(1.0);
        assert_eq!(b.step(0.5, 1.0), PowerState::S1);
        assert_eq!(b.step(0.0, 1.0), PowerState::S0);
        assert_eq!(b.step(2.0, 1.0), PowerState::S1);
        assert!((b.level - 0.5).abs() < 1e-15);
        assert_eq!(b.q_index, 3);
        assert!(b.had_outage());
    }
}
