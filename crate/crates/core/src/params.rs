//! Complete parameter set of one system configuration.

use serde::{Deserialize, Serialize};

use crate::channel::{
    cascade_moment, composite_moments, gamma_fit, pathloss, sum_moments, GammaFit, Geometry,
    NakagamiParams, RawMoments, User,
};
use crate::energy::{consumption, uplink_power, ConsumptionParams, SwiptParams};
use crate::error::{Error, Result};
use crate::link::NomaParams;
use crate::quadrature::{GhMode, MAX_NODES};

/// Tolerance on the conservation constraints `beta_r + beta_t = 1` and
/// `alpha_r + alpha_t = 1`.
pub const SUM_TOL: f64 = 1e-12;

/// Nakagami shapes of the three link classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FadingShapes {
    pub direct: f64,
    pub ap_ris: f64,
    pub ris_user: f64,
}

impl Default for FadingShapes {
    fn default() -> Self {
        Self { direct: 2.0, ap_ris: 2.0, ris_user: 2.0 }
    }
}

/// Small-scale laws of the links seen by one user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserLinks {
    pub direct: Option<NakagamiParams>,
    pub ap_ris: NakagamiParams,
    pub ris_user: NakagamiParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub geometry: Geometry,
    pub fading: FadingShapes,
    pub direct_link: bool,
    pub n_elements: usize,
    pub swipt: SwiptParams,
    pub consumption: ConsumptionParams,
    pub noma: NomaParams,
    pub initial_c: f64,
    pub q_slots: usize,
    pub gh_nodes: usize,
    pub gh_mode: GhMode,
    /// Round `L chi` to an integer in the uplink integrals.
    pub gh_integer_shape: bool,
}

impl Default for SystemParams {
    fn default() -> Self {
        let mut p = Self {
            geometry: Geometry::default(),
            fading: FadingShapes::default(),
            direct_link: true,
            n_elements: 18,
            swipt: SwiptParams::default(),
            consumption: ConsumptionParams::default(),
            noma: NomaParams::default(),
            initial_c: 1e-6,
            q_slots: 5,
            gh_nodes: 30,
            gh_mode: GhMode::Adaptive,
            gh_integer_shape: false,
        };
        p.set_snr_db(25.0);
        p
    }
}

fn constraint(constraint: &'static str, message: String) -> Error {
    Error::Constraint { constraint, message }
}

fn in_open_unit(x: f64) -> bool {
    x > 0.0 && x < 1.0
}

impl SystemParams {
    pub fn snr_db(&self) -> f64 {
        10.0 * (self.swipt.p_ap / self.noma.n0).log10()
    }

    /// Sets `N0` so that `P_AP / N0` equals `db`.
    pub fn set_snr_db(&mut self, db: f64) {
        self.noma.n0 = self.swipt.p_ap / 10f64.powf(db / 10.0);
    }

    pub fn with_snr_db(mut self, db: f64) -> Self {
        self.set_snr_db(db);
        self
    }

    pub fn beta(&self, k: User) -> f64 {
        match k {
            User::Reflect => self.swipt.beta_r,
            User::Transmit => self.swipt.beta_t,
        }
    }

    pub fn alpha(&self, k: User) -> f64 {
        match k {
            User::Reflect => self.noma.alpha_r,
            User::Transmit => self.noma.alpha_t,
        }
    }

    /// Sets `beta_r` and its complement.
    pub fn set_beta_r(&mut self, beta_r: f64) {
        self.swipt.beta_r = beta_r;
        self.swipt.beta_t = 1.0 - beta_r;
    }

    /// Sets `alpha_r` and its complement.
    pub fn set_alpha_r(&mut self, alpha_r: f64) {
        self.noma.alpha_r = alpha_r;
        self.noma.alpha_t = 1.0 - alpha_r;
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        let s = &self.swipt;
        if !(in_open_unit(s.beta_r) && in_open_unit(s.beta_t)) {
            return Err(constraint("C1", format!("need 0 < beta_r, beta_t < 1, got beta_r={}, beta_t={}", s.beta_r, s.beta_t)));
        }
        if (s.beta_r + s.beta_t - 1.0).abs() > SUM_TOL {
            return Err(constraint("C2", format!("need beta_r + beta_t = 1, got {}", s.beta_r + s.beta_t)));
        }
        let n = &self.noma;
        if !(in_open_unit(n.alpha_r) && in_open_unit(n.alpha_t)) {
            return Err(constraint("C6", format!("need 0 < alpha_r, alpha_t < 1, got alpha_r={}, alpha_t={}", n.alpha_r, n.alpha_t)));
        }
        if (n.alpha_r + n.alpha_t - 1.0).abs() > SUM_TOL {
            return Err(constraint("C7", format!("need alpha_r + alpha_t = 1, got {}", n.alpha_r + n.alpha_t)));
        }
        if !(0.0..=1.0).contains(&s.theta) {
            return Err(constraint("theta", format!("need 0 <= theta <= 1, got {}", s.theta)));
        }
        if !(s.eta > 0.0 && s.eta <= 1.0) {
            return Err(constraint("eta", format!("need 0 < eta <= 1, got {}", s.eta)));
        }
        if !(s.p_ap > 0.0 && s.p_ap.is_finite()) {
            return Err(constraint("p_ap", format!("need a positive finite transmit power, got {}", s.p_ap)));
        }
        if !(s.t_s > 0.0) {
            return Err(constraint("t_s", format!("need a positive symbol time, got {}", s.t_s)));
        }
        if s.antennas == 0 {
            return Err(constraint("antennas", "need at least one antenna".into()));
        }
        if self.n_elements == 0 {
            return Err(constraint("n_elements", "need at least one element".into()));
        }
        if !(n.n0 > 0.0 && n.n0.is_finite()) {
            return Err(constraint("n0", format!("need a positive finite noise power, got {}", n.n0)));
        }
        if !(n.r_target >= 0.0 && n.r_target.is_finite()) {
            return Err(constraint("r_target", format!("need a nonnegative target rate, got {}", n.r_target)));
        }
        if self.q_slots == 0 {
            return Err(constraint("q_slots", "need at least one slot".into()));
        }
        if !(self.initial_c >= 0.0 && self.initial_c.is_finite()) {
            return Err(constraint("initial_c", format!("need a nonnegative initial charge, got {}", self.initial_c)));
        }
        let c = &self.consumption;
        for (name, v) in [("m_bits", c.m_bits), ("e_c", c.e_c), ("e_tp", c.e_tp), ("comp_fraction", c.comp_fraction)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(constraint(name, format!("need a nonnegative value, got {v}")));
            }
        }
        for (name, v) in [("m_direct", self.fading.direct), ("m_ap_ris", self.fading.ap_ris), ("m_ris_user", self.fading.ris_user)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(constraint(name, format!("need a positive Nakagami shape, got {v}")));
            }
        }
        if !(1..=MAX_NODES).contains(&self.gh_nodes) {
            return Err(constraint("gh_nodes", format!("need 1..={MAX_NODES} nodes, got {}", self.gh_nodes)));
        }
        Ok(())
    }

    pub fn links(&self, k: User) -> Result<UserLinks> {
        let g = &self.geometry;
        let direct = if self.direct_link {
            Some(NakagamiParams::new(self.fading.direct, pathloss(g.ap_user(k), g)?)?)
        } else {
            None
        };
        Ok(UserLinks {
            direct,
            ap_ris: NakagamiParams::new(self.fading.ap_ris, pathloss(g.ap_ris(), g)?)?,
            ris_user: NakagamiParams::new(self.fading.ris_user, pathloss(g.ris_user(k), g)?)?,
        })
    }

    /// Raw moments of the per-antenna composite gain with `elements` RIS elements.
    pub fn composite(&self, k: User, elements: usize) -> Result<RawMoments> {
        let l = self.links(k)?;
        let v = RawMoments {
            mu1: cascade_moment(1, &l.ap_ris, &l.ris_user),
            mu2: cascade_moment(2, &l.ap_ris, &l.ris_user),
        };
        let sum = sum_moments(&vec![v; elements]);
        Ok(composite_moments(l.direct.as_ref(), sum))
    }

    pub fn fit_with_elements(&self, k: User, elements: usize) -> Result<GammaFit> {
        let m = self.composite(k, elements)?;
        gamma_fit(m.mu1, m.mu2, self.swipt.antennas)
    }

    pub fn fit(&self, k: User) -> Result<GammaFit> {
        self.fit_with_elements(k, self.n_elements)
    }

    /// Per-slot consumption `E_s` of user `k`.
    pub fn e_s(&self, k: User) -> f64 {
        consumption(&self.consumption, self.geometry.ap_user(k))
    }

    /// Uplink transmit power of user `k`.
    pub fn uplink_power(&self, k: User) -> f64 {
        uplink_power(&self.consumption, self.geometry.ap_user(k), self.swipt.t_s)
    }
}
