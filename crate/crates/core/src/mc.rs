//! Monte Carlo trial engine and the baseline/impairment variants.
//!
//! Trials are split into fixed-size chunks. Chunk `i` draws from a ChaCha8
//! stream seeded with the run seed and stream id `i`, so the result depends
//! only on the seed and trial count, never on how chunks are scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{pathloss, NakagamiParams, NakagamiSampler, User};
use crate::error::{Error, Result};
use crate::params::SystemParams;

/// Trials per RNG chunk.
pub const CHUNK: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    Proposed,
    BufferLess,
    ConventionalRis,
    Tdma,
    DiscretePhase,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Sic {
    #[default]
    Perfect,
    /// Fraction of the cancelled signal left over after SIC.
    Imperfect(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Csi {
    #[default]
    Perfect,
    Imperfect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BufferModel {
    /// Unquantized cumulative balance.
    #[default]
    TwoState,
    /// Buffer floored to `n` evenly spaced levels.
    Levels(u8),
}

/// Downlink decoding order `(at U_t, at U_r)`: which user's signal each
/// receiver decodes first. The analysed order is `(r, r)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodingOrder {
    pub at_t: User,
    pub at_r: User,
}

impl Default for DecodingOrder {
    fn default() -> Self {
        Self { at_t: User::Reflect, at_r: User::Reflect }
    }
}

impl DecodingOrder {
    pub fn label(&self) -> String {
        format!("{}{}", self.at_t.tag(), self.at_r.tag())
    }
}

/// Rate normalization of the TDMA baseline, whose users each own half a
/// slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TdmaRate {
    /// Each user signals at `2R` in its half slot, so it delivers the same
    /// `R T_s` bits as under NOMA.
    #[default]
    Doubled,
    /// Each user signals at `R` and delivers `R T_s / 2` bits.
    Same,
}

/// How small-scale fades are shared between users and antennas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LegSharing {
    /// The AP-RIS leg is common to both users and the RIS-user leg is
    /// common to all AP antennas.
    #[default]
    Physical,
    /// Every user and antenna sees its own RIS legs, matching the
    /// independence the closed forms assume.
    Independent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct VariantConfig {
    pub scheme: Scheme,
    pub phase_bits: u32,
    pub sic: Sic,
    pub csi: Csi,
    pub buffer_model: BufferModel,
    pub decoding_order: DecodingOrder,
    pub legs: LegSharing,
    pub tdma_rate: TdmaRate,
    /// Leveled-buffer capacity in units of the user's per-slot consumption
    /// `E_s`; defaults to `2 Q`.
    pub c_max_slots: Option<f64>,
}

impl VariantConfig {
    pub fn new(scheme: Scheme) -> Self {
        Self { scheme, ..Self::default() }
    }

    pub fn with_legs(mut self, legs: LegSharing) -> Self {
        self.legs = legs;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Variant(m.to_string()));
        if self.scheme == Scheme::Tdma && self.decoding_order != DecodingOrder::default() {
            return bad("tdma has no superposition to order");
        }
        if self.scheme == Scheme::Tdma && self.sic != Sic::Perfect {
            return bad("tdma does not use SIC");
        }
        if self.scheme != Scheme::Tdma && self.tdma_rate != TdmaRate::default() {
            return bad("tdma_rate applies to the tdma scheme only");
        }
        if self.scheme == Scheme::DiscretePhase && self.phase_bits == 0 {
            return bad("discrete_phase needs phase_bits >= 1");
        }
        if let Sic::Imperfect(e) = self.sic {
            if !(0.0..=1.0).contains(&e) {
                return bad("SIC residual must lie in [0, 1]");
            }
        }
        if let BufferModel::Levels(n) = self.buffer_model {
            if !(n == 3 || n == 4) {
                return bad("leveled buffers support 3 or 4 levels");
            }
            if self.scheme == Scheme::BufferLess {
                return bad("buffer_less has no buffer to quantize");
            }
        }
        if let Some(c) = self.c_max_slots {
            if !(c > 0.0) {
                return bad("c_max_slots must be positive");
            }
        }
        Ok(())
    }

    /// Short identifier used in output file names.
    pub fn label(&self) -> String {
        let mut s = match self.scheme {
            Scheme::Proposed => "proposed".to_string(),
            Scheme::BufferLess => "buffer_less".to_string(),
            Scheme::ConventionalRis => "conventional_ris".to_string(),
            Scheme::Tdma if self.tdma_rate == TdmaRate::Same => "tdma_same_rate".to_string(),
            Scheme::Tdma => "tdma".to_string(),
            Scheme::DiscretePhase => format!("discrete_phase_e{}", self.phase_bits),
        };
        if let Sic::Imperfect(e) = self.sic {
            s += &format!("_sic{e}");
        }
        if self.csi == Csi::Imperfect {
            s += "_icsi";
        }
        if let BufferModel::Levels(n) = self.buffer_model {
            s += &format!("_levels{n}");
        }
        if self.decoding_order != DecodingOrder::default() {
            s += &format!("_order{}", self.decoding_order.label());
        }
        if self.legs == LegSharing::Independent {
            s += "_indep";
        }
        s
    }

    /// True when the closed forms describe this variant.
    pub fn has_analytic(&self) -> bool {
        matches!(self.scheme, Scheme::Proposed | Scheme::BufferLess)
            && self.sic == Sic::Perfect
            && self.csi == Csi::Perfect
            && self.buffer_model == BufferModel::TwoState
            && self.decoding_order == DecodingOrder::default()
    }
}

/// Quantization residual of one element phase with `e` bits: the ideal
/// phase is uniform, the applied phase is the nearest of `2^e` levels.
pub fn discrete_phase_error<R: Rng + ?Sized>(e: u32, rng: &mut R) -> f64 {
    assert!(e >= 1, "need at least one phase bit");
    let e = e.min(52);
    let step = std::f64::consts::TAU / (1u64 << e) as f64;
    let ideal = rng.random::<f64>() * std::f64::consts::TAU;
    let applied = (ideal / step).round() * step;
    let r = applied - ideal;
    // keep the half-open convention [-step/2, step/2)
    if r >= 0.5 * step {
        r - step
    } else {
        r
    }
}

/// Post-SIC downlink SINR of `U_t` when a fraction `epsilon` of `U_r`'s
/// signal survives cancellation.
pub fn imperfect_sic_sinr(z_t: f64, p: &SystemParams, epsilon: f64) -> f64 {
    let s = p.swipt.theta * p.swipt.beta_t * p.swipt.p_ap * z_t * z_t;
    let noise = p.swipt.antennas as f64 * p.noma.n0;
    s * p.noma.alpha_t / (noise + epsilon * s * p.noma.alpha_r)
}

/// Downlink SINR of user `k`'s own signal (after SIC at `U_t`) with the
/// channel-estimation error folded in as extra interference `L theta beta_k N0`.
pub fn imperfect_csi_sinr(z: f64, k: User, p: &SystemParams) -> f64 {
    let beta = p.beta(k);
    let s = p.swipt.theta * beta * p.swipt.p_ap * z * z;
    let l = p.swipt.antennas as f64;
    let noise = l * p.noma.n0 + l * p.swipt.theta * beta * p.noma.n0;
    match k {
        User::Reflect => s * p.noma.alpha_r / (s * p.noma.alpha_t + noise),
        User::Transmit => s * p.noma.alpha_t / noise,
    }
}

/// Buffer restricted to the levels `{0, c_max/(n-1), ..., c_max}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeveledBuffer {
    pub level: f64,
    pub c_max: f64,
    pub levels: u8,
}

impl LeveledBuffer {
    pub fn new(initial_c: f64, c_max: f64, levels: u8) -> Self {
        let mut b = Self { level: 0.0, c_max, levels };
        b.level = b.floor(initial_c);
        b
    }

    fn step_size(&self) -> f64 {
        self.c_max / (self.levels as f64 - 1.0)
    }

    /// Largest grid level not above `x` (and not above `c_max`).
    pub fn floor(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let x = x.min(self.c_max);
        let d = self.step_size();
        let k = (x / d * (1.0 + 1e-12)).floor();
        (k * d).min(self.c_max)
    }
}

/// One slot of a leveled buffer. Returns the new state and whether the slot
/// was in power outage (available energy below the consumption).
pub fn leveled_buffer_step(state: LeveledBuffer, harvested: f64, consumed: f64) -> (LeveledBuffer, bool) {
    let available = state.level + harvested;
    if available < consumed {
        (LeveledBuffer { level: state.floor(available), ..state }, true)
    } else {
        (LeveledBuffer { level: state.floor(available - consumed), ..state }, false)
    }
}

/// Compensated (Neumaier) running sum.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    pub fn binomial(count: u64, n: u64) -> Self {
        let p = count as f64 / n as f64;
        Self { mean: p, se: (p * (1.0 - p) / n as f64).sqrt() }
    }

    /// Whether `x` lies within `k` standard errors (or `abs_tol`) of the mean.
    pub fn agrees(&self, x: f64, k: f64, abs_tol: f64) -> bool {
        (x - self.mean).abs() <= (k * self.se).max(abs_tol)
    }
}

/// Aggregated counts of one Monte Carlo run, indexed by [`User::index`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialStats {
    pub n_trials: u64,
    pub seed: u64,
    pub q_slots: usize,
    pub r_target: f64,
    pub t_s: f64,
    /// Fraction of `R T_s` delivered by one successful user.
    pub share: f64,
    /// Trials with a power outage in any slot.
    pub power_outage: [u64; 2],
    /// Trials with a failed downlink decode in any slot.
    pub io_down: [u64; 2],
    pub io_up: [u64; 2],
    pub joint_down: [u64; 2],
    pub joint_up: [u64; 2],
    /// Per slot `q`, trials whose buffer covered slot `q`.
    pub slot_sufficient: Vec<[u64; 2]>,
    /// Failed single-slot decodes over all `n_trials * q_slots` slots.
    pub slot_down_fail: [u64; 2],
    pub slot_up_fail: [u64; 2],
    /// Sums over trials of the number of users (0..=2) without a horizon
    /// information outage, and of its square.
    pub psi_down_sum: u64,
    pub psi_down_sumsq: u64,
    pub psi_up_sum: u64,
    pub psi_up_sumsq: u64,
    pub residual_tracked: bool,
    pub residual_sum: [CompensatedSum; 2],
    pub residual_sumsq: [CompensatedSum; 2],
}

impl TrialStats {
    fn empty(p: &SystemParams, v: &VariantConfig, seed: u64) -> Self {
        let half = v.scheme == Scheme::Tdma && v.tdma_rate == TdmaRate::Same;
        Self {
            n_trials: 0,
            seed,
            q_slots: p.q_slots,
            r_target: p.noma.r_target,
            t_s: p.swipt.t_s,
            share: if half { 0.5 } else { 1.0 },
            power_outage: [0; 2],
            io_down: [0; 2],
            io_up: [0; 2],
            joint_down: [0; 2],
            joint_up: [0; 2],
            slot_sufficient: vec![[0; 2]; p.q_slots],
            slot_down_fail: [0; 2],
            slot_up_fail: [0; 2],
            psi_down_sum: 0,
            psi_down_sumsq: 0,
            psi_up_sum: 0,
            psi_up_sumsq: 0,
            residual_tracked: v.scheme != Scheme::BufferLess,
            residual_sum: Default::default(),
            residual_sumsq: Default::default(),
        }
    }

    /// Adds the counts of `other`, which must come from the same point.
    pub fn merge(&mut self, other: &TrialStats) {
        self.n_trials += other.n_trials;
        for k in 0..2 {
            self.power_outage[k] += other.power_outage[k];
            self.io_down[k] += other.io_down[k];
            self.io_up[k] += other.io_up[k];
            self.joint_down[k] += other.joint_down[k];
            self.joint_up[k] += other.joint_up[k];
            self.slot_down_fail[k] += other.slot_down_fail[k];
            self.slot_up_fail[k] += other.slot_up_fail[k];
            self.residual_sum[k].merge(&other.residual_sum[k]);
            self.residual_sumsq[k].merge(&other.residual_sumsq[k]);
        }
        for (a, b) in self.slot_sufficient.iter_mut().zip(&other.slot_sufficient) {
            a[0] += b[0];
            a[1] += b[1];
        }
        self.psi_down_sum += other.psi_down_sum;
        self.psi_down_sumsq += other.psi_down_sumsq;
        self.psi_up_sum += other.psi_up_sum;
        self.psi_up_sumsq += other.psi_up_sumsq;
    }

    fn rate(&self, c: u64) -> Estimate {
        Estimate::binomial(c, self.n_trials)
    }

    pub fn power_outage(&self, k: User) -> Estimate {
        self.rate(self.power_outage[k.index()])
    }

    pub fn io_down(&self, k: User) -> Estimate {
        self.rate(self.io_down[k.index()])
    }

    pub fn io_up(&self, k: User) -> Estimate {
        self.rate(self.io_up[k.index()])
    }

    pub fn joint_down(&self, k: User) -> Estimate {
        self.rate(self.joint_down[k.index()])
    }

    pub fn joint_up(&self, k: User) -> Estimate {
        self.rate(self.joint_up[k.index()])
    }

    /// Estimate of `P11(q)` for `q` in `1..=Q`.
    pub fn p11(&self, q: usize, k: User) -> Estimate {
        self.rate(self.slot_sufficient[q - 1][k.index()])
    }

    pub fn p10_down(&self, k: User) -> Estimate {
        Estimate::binomial(self.slot_down_fail[k.index()], self.n_trials * self.q_slots as u64)
    }

    pub fn p10_up(&self, k: User) -> Estimate {
        Estimate::binomial(self.slot_up_fail[k.index()], self.n_trials * self.q_slots as u64)
    }

    fn psi(&self, sum: u64, sumsq: u64) -> Estimate {
        let n = self.n_trials as f64;
        let m = sum as f64 / n;
        let var = (sumsq as f64 / n - m * m).max(0.0) * n / (n - 1.0).max(1.0);
        let scale = self.share * self.r_target * self.t_s;
        Estimate { mean: scale * m, se: scale * (var / n).sqrt() }
    }

    pub fn psi_down(&self) -> Estimate {
        self.psi(self.psi_down_sum, self.psi_down_sumsq)
    }

    pub fn psi_up(&self) -> Estimate {
        self.psi(self.psi_up_sum, self.psi_up_sumsq)
    }

    /// Mean energy left after the horizon; `None` for schemes without a buffer.
    pub fn residual(&self, k: User) -> Option<Estimate> {
        if !self.residual_tracked {
            return None;
        }
        let n = self.n_trials as f64;
        let m = self.residual_sum[k.index()].value() / n;
        let var = (self.residual_sumsq[k.index()].value() / n - m * m).max(0.0) * n / (n - 1.0).max(1.0);
        Some(Estimate { mean: m, se: (var / n).sqrt() })
    }
}

/// Per-user draws of the composite gain for every slot of one trial.
struct ChannelSampler {
    antennas: usize,
    elements: [usize; 2],
    legs: LegSharing,
    share_ris_leg: bool,
    direct: [Option<NakagamiSampler>; 2],
    ap_ris: NakagamiSampler,
    ris_user: [NakagamiSampler; 2],
    phase_bits: Option<u32>,
    // scratch
    h: Vec<f64>,
    g: Vec<f64>,
    delta: Vec<f64>,
}

impl ChannelSampler {
    fn new(p: &SystemParams, v: &VariantConfig) -> Result<Self> {
        let n = p.n_elements;
        let (elements, share_ris_leg) = match v.scheme {
            Scheme::ConventionalRis => ([n / 2, n - n / 2], false),
            _ => ([n, n], v.legs == LegSharing::Physical),
        };
        let lr = p.links(User::Reflect)?;
        let lt = p.links(User::Transmit)?;
        let g = &p.geometry;
        Ok(Self {
            antennas: p.swipt.antennas,
            elements,
            legs: v.legs,
            share_ris_leg,
            direct: [lr.direct.map(|d| d.sampler()), lt.direct.map(|d| d.sampler())],
            ap_ris: NakagamiParams::new(p.fading.ap_ris, pathloss(g.ap_ris(), g)?)?.sampler(),
            ris_user: [lr.ris_user.sampler(), lt.ris_user.sampler()],
            phase_bits: (v.scheme == Scheme::DiscretePhase).then_some(v.phase_bits),
            h: vec![0.0; n * p.swipt.antennas],
            g: vec![0.0; n],
            delta: vec![0.0; n],
        })
    }

    /// Squared composite gains `[Z_r^2, Z_t^2]` of one slot.
    fn draw<R: Rng>(&mut self, rng: &mut R) -> [f64; 2] {
        let l = self.antennas;
        if self.share_ris_leg {
            let n = self.elements[0];
            for x in self.h[..n * l].iter_mut() {
                *x = self.ap_ris.sample_power(rng);
            }
        }
        let mut out = [0.0; 2];
        for k in 0..2 {
            out[k] = self.draw_user(k, rng);
        }
        out
    }

    fn draw_user<R: Rng>(&mut self, k: usize, rng: &mut R) -> f64 {
        let l = self.antennas;
        let n = self.elements[k];
        if !self.share_ris_leg {
            for x in self.h[..n * l].iter_mut() {
                *x = self.ap_ris.sample_power(rng);
            }
        }
        let physical = self.legs == LegSharing::Physical;
        if physical {
            for x in self.g[..n].iter_mut() {
                *x = self.ris_user[k].sample_power(rng);
            }
        }
        match self.phase_bits {
            None => {
                let mut z = 0.0;
                for ant in 0..l {
                    if let Some(d) = &self.direct[k] {
                        z += d.sample(rng);
                    }
                    let hs = &self.h[ant * n..(ant + 1) * n];
                    for (i, &h2) in hs.iter().enumerate() {
                        let g2 = if physical { self.g[i] } else { self.ris_user[k].sample_power(rng) };
                        z += (h2 * g2).sqrt();
                    }
                }
                z * z
            }
            Some(e) => {
                let mut delta = std::mem::take(&mut self.delta);
                for d in delta[..n].iter_mut() {
                    *d = discrete_phase_error(e, rng);
                }
                let (mut re, mut im) = (0.0, 0.0);
                for ant in 0..l {
                    if let Some(d) = &self.direct[k] {
                        re += d.sample(rng);
                    }
                    let hs = &self.h[ant * n..(ant + 1) * n];
                    for (i, &h2) in hs.iter().enumerate() {
                        let g2 = if physical { self.g[i] } else { self.ris_user[k].sample_power(rng) };
                        let a = (h2 * g2).sqrt();
                        re += a * delta[i].cos();
                        im += a * delta[i].sin();
                    }
                }
                self.delta = delta;
                re * re + im * im
            }
        }
    }
}

/// Constants of one parameter point under one variant.
struct PointEval {
    q_slots: usize,
    e_s: [f64; 2],
    harvest: [f64; 2],
    initial_c: f64,
    c_max: [f64; 2],
    levels: Option<u8>,
    buffered: bool,
    tdma: bool,
    // downlink: received signal power per unit Z^2 and noise per user
    dl_sig: [f64; 2],
    dl_noise: [f64; 2],
    alpha_r: f64,
    alpha_t: f64,
    sic_eps: f64,
    order: DecodingOrder,
    gamma: f64,
    // uplink: transmit power times surface gain per user
    ul_gain: [f64; 2],
    ul_noise: f64,
}

impl PointEval {
    fn new(p: &SystemParams, v: &VariantConfig) -> Self {
        let s = &p.swipt;
        let l = s.antennas as f64;
        let tdma = v.scheme == Scheme::Tdma;
        let unit_beta = matches!(v.scheme, Scheme::Tdma | Scheme::ConventionalRis);
        let beta = User::BOTH.map(|k| if unit_beta { 1.0 } else { p.beta(k) });
        let slot = if tdma { 0.5 } else { 1.0 };
        let e_s = User::BOTH.map(|k| p.e_s(k));
        let ln0 = l * p.noma.n0;
        let csi = v.csi == Csi::Imperfect;
        let r = p.noma.r_target;
        PointEval {
            q_slots: p.q_slots,
            e_s,
            harvest: beta.map(|b| s.eta * (1.0 - s.theta) * b * s.p_ap / l * s.t_s * slot),
            initial_c: p.initial_c,
            c_max: e_s.map(|e| v.c_max_slots.unwrap_or(2.0 * p.q_slots as f64) * e),
            levels: match v.buffer_model {
                BufferModel::Levels(n) => Some(n),
                BufferModel::TwoState => None,
            },
            buffered: v.scheme != Scheme::BufferLess,
            tdma,
            dl_sig: beta.map(|b| s.theta * b * s.p_ap),
            dl_noise: beta.map(|b| ln0 + if csi { l * s.theta * b * p.noma.n0 } else { 0.0 }),
            alpha_r: p.noma.alpha_r,
            alpha_t: p.noma.alpha_t,
            sic_eps: match v.sic {
                Sic::Perfect => 0.0,
                Sic::Imperfect(e) => e,
            },
            order: v.decoding_order,
            gamma: if tdma && v.tdma_rate == TdmaRate::Doubled { (2.0 * r).exp2() - 1.0 } else { r.exp2() - 1.0 },
            ul_gain: User::BOTH.map(|k| p.uplink_power(k) / slot * beta[k.index()]),
            ul_noise: ln0,
        }
    }

    /// Downlink decode success `[U_r, U_t]` for squared gains `x`.
    fn downlink(&self, x: [f64; 2]) -> [bool; 2] {
        let g = self.gamma;
        let sr = self.dl_sig[0] * x[0];
        let st = self.dl_sig[1] * x[1];
        let (nr, nt) = (self.dl_noise[0], self.dl_noise[1]);
        if self.tdma {
            return [sr >= g * nr, st >= g * nt];
        }
        let (ar, at) = (self.alpha_r, self.alpha_t);
        let ok_r = match self.order.at_r {
            User::Reflect => sr * ar >= g * (sr * at + nr),
            User::Transmit => sr * at >= g * (sr * ar + nr) && sr * ar >= g * nr,
        };
        let ok_t = match self.order.at_t {
            User::Reflect => st * ar >= g * (st * at + nt) && st * at >= g * (nt + self.sic_eps * st * ar),
            User::Transmit => st * at >= g * (st * ar + nt),
        };
        [ok_r, ok_t]
    }

    /// Uplink decode success `[U_r, U_t]`; the AP decodes `U_t` first.
    fn uplink(&self, x: [f64; 2]) -> [bool; 2] {
        let g = self.gamma;
        let yr = self.ul_gain[0] * x[0];
        let yt = self.ul_gain[1] * x[1];
        if self.tdma {
            return [yr >= g * self.ul_noise, yt >= g * self.ul_noise];
        }
        let ok_t = yt >= g * (yr + self.ul_noise);
        [ok_t && yr >= g * self.ul_noise, ok_t]
    }

    fn run_trial(&self, draws: &[[f64; 2]], st: &mut TrialStats) {
        let q = self.q_slots;
        let mut power_fail = [false; 2];
        let mut down_fail = [false; 2];
        let mut up_fail = [false; 2];
        let mut level = [0.0; 2];
        let mut lev: [Option<LeveledBuffer>; 2] = [None, None];
        for k in 0..2 {
            match self.levels {
                Some(n) => lev[k] = Some(LeveledBuffer::new(self.initial_c, self.c_max[k], n)),
                None => level[k] = self.initial_c,
            }
        }
        for (slot, x) in draws[..q].iter().enumerate() {
            for k in 0..2 {
                let e = self.harvest[k] * x[k];
                let ok = if !self.buffered {
                    e >= self.e_s[k]
                } else if let Some(b) = lev[k] {
                    let (nb, out) = leveled_buffer_step(b, e, self.e_s[k]);
                    lev[k] = Some(nb);
                    !out
                } else {
                    level[k] += e - self.e_s[k];
                    level[k] >= 0.0
                };
                if ok {
                    st.slot_sufficient[slot][k] += 1;
                } else {
                    power_fail[k] = true;
                }
            }
            let d = self.downlink(*x);
            let u = self.uplink(*x);
            for k in 0..2 {
                if !d[k] {
                    down_fail[k] = true;
                    st.slot_down_fail[k] += 1;
                }
                if !u[k] {
                    up_fail[k] = true;
                    st.slot_up_fail[k] += 1;
                }
            }
        }
        st.n_trials += 1;
        for k in 0..2 {
            st.power_outage[k] += power_fail[k] as u64;
            st.io_down[k] += down_fail[k] as u64;
            st.io_up[k] += up_fail[k] as u64;
            st.joint_down[k] += (power_fail[k] || down_fail[k]) as u64;
            st.joint_up[k] += (power_fail[k] || up_fail[k]) as u64;
            if st.residual_tracked {
                let r = match lev[k] {
                    Some(b) => b.level,
                    None => level[k],
                };
                st.residual_sum[k].add(r);
                st.residual_sumsq[k].add(r * r);
            }
        }
        let sd = (!down_fail[0]) as u64 + (!down_fail[1]) as u64;
        let su = (!up_fail[0]) as u64 + (!up_fail[1]) as u64;
        st.psi_down_sum += sd;
        st.psi_down_sumsq += sd * sd;
        st.psi_up_sum += su;
        st.psi_up_sumsq += su * su;
    }
}

/// True when two configurations can share channel draws in one grid run.
pub fn channel_compatible(a: &SystemParams, b: &SystemParams) -> bool {
    a.geometry == b.geometry
        && a.fading == b.fading
        && a.direct_link == b.direct_link
        && a.n_elements == b.n_elements
        && a.swipt.antennas == b.swipt.antennas
}

/// Runs `n_trials` trials of one configuration.
pub fn run_trials(params: &SystemParams, variant: &VariantConfig, n_trials: u64, seed: u64) -> Result<TrialStats> {
    Ok(run_trials_grid(std::slice::from_ref(params), variant, n_trials, seed)?.remove(0))
}

/// Runs the same channel draws through several parameter points that differ
/// only in quantities that do not change the channel law (power split,
/// allocation, SNR, buffer, horizon, ...). Each point's statistics equal
/// what [`run_trials`] would return for it with the same seed.
pub fn run_trials_grid(
    points: &[SystemParams],
    variant: &VariantConfig,
    n_trials: u64,
    seed: u64,
) -> Result<Vec<TrialStats>> {
    if n_trials == 0 {
        return Err(Error::Domain("need at least one trial".into()));
    }
    let Some(first) = points.first() else {
        return Ok(Vec::new());
    };
    variant.validate()?;
    for p in points {
        p.validate()?;
        if !channel_compatible(first, p) {
            return Err(Error::Domain("grid points must share geometry, fading, elements and antennas".into()));
        }
    }
    let q_max = points.iter().map(|p| p.q_slots).max().unwrap_or(1);
    let evals: Vec<PointEval> = points.iter().map(|p| PointEval::new(p, variant)).collect();
    let n_chunks = n_trials.div_ceil(CHUNK);
    let chunks: Vec<Vec<TrialStats>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| -> Result<Vec<TrialStats>> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let mut sampler = ChannelSampler::new(first, variant)?;
            let mut stats: Vec<TrialStats> = points.iter().map(|p| TrialStats::empty(p, variant, seed)).collect();
            let todo = CHUNK.min(n_trials - c * CHUNK);
            let mut draws = vec![[0.0; 2]; q_max];
            for _ in 0..todo {
                for d in draws.iter_mut() {
                    *d = sampler.draw(&mut rng);
                }
                for (e, s) in evals.iter().zip(stats.iter_mut()) {
                    e.run_trial(&draws, s);
                }
            }
            Ok(stats)
        })
        .collect::<Result<_>>()?;
    let mut out: Vec<TrialStats> = points.iter().map(|p| TrialStats::empty(p, variant, seed)).collect();
    for chunk in &chunks {
        for (o, s) in out.iter_mut().zip(chunk) {
            o.merge(s);
        }
    }
    Ok(out)
}

/// Samples of the per-antenna composite gain `P = h0 + sum_i h_i g_i` of
/// user `k`, for checking the Gamma fit.
pub fn sample_composite(p: &SystemParams, k: User, n: usize, seed: u64) -> Result<Vec<f64>> {
    let l = p.links(k)?;
    let (hs, gs) = (l.ap_ris.sampler(), l.ris_user.sampler());
    let ds = l.direct.map(|d| d.sampler());
    let n_chunks = (n as u64).div_ceil(CHUNK);
    let parts: Vec<Vec<f64>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let todo = CHUNK.min(n as u64 - c * CHUNK);
            (0..todo)
                .map(|_| {
                    let mut x = ds.as_ref().map_or(0.0, |d| d.sample(&mut rng));
                    for _ in 0..p.n_elements {
                        x += (hs.sample_power(&mut rng) * gs.sample_power(&mut rng)).sqrt();
                    }
                    x
                })
                .collect()
        })
        .collect();
    Ok(parts.concat())
}
