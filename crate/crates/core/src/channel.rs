//! Nakagami-m fading, cascaded-channel moments and the Gamma moment match
//! of the per-antenna composite gain.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{gamma_p, ln_gamma};

/// Which user a quantity belongs to: the reflection-side `U_r` or the
/// transmission-side `U_t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum User {
    Reflect,
    Transmit,
}

impl User {
    pub const BOTH: [User; 2] = [User::Reflect, User::Transmit];

    pub fn index(self) -> usize {
        match self {
            User::Reflect => 0,
            User::Transmit => 1,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            User::Reflect => "r",
            User::Transmit => "t",
        }
    }

    pub fn other(self) -> User {
        match self {
            User::Reflect => User::Transmit,
            User::Transmit => User::Reflect,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NakagamiParams {
    pub m: f64,
    pub omega: f64,
}

impl NakagamiParams {
    pub fn new(m: f64, omega: f64) -> Result<Self> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::Domain(format!("Nakagami shape must be positive, got {m}")));
        }
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::Domain(format!("Nakagami spread must be positive, got {omega}")));
        }
        Ok(Self { m, omega })
    }

    /// `E[h^n]`.
    pub fn moment(&self, n: u32) -> f64 {
        let half = n as f64 / 2.0;
        (ln_gamma(self.m + half) - ln_gamma(self.m) + half * (self.omega / self.m).ln()).exp()
    }

    pub fn sampler(&self) -> NakagamiSampler {
        NakagamiSampler::new(*self)
    }
}

/// Draws one Nakagami-m magnitude, `sqrt(Gamma(m, omega/m))`.
pub fn sample_nakagami<R: Rng + ?Sized>(params: &NakagamiParams, rng: &mut R) -> f64 {
    params.sampler().sample(rng)
}

/// Reusable Nakagami sampler. Small integer shapes use the product of
/// uniforms, other shapes go through `rand_distr::Gamma`.
#[derive(Debug, Clone)]
pub struct NakagamiSampler {
    kind: SamplerKind,
    scale: f64,
}

#[derive(Debug, Clone)]
enum SamplerKind {
    Erlang(u32),
    General(Gamma<f64>),
}

impl NakagamiSampler {
    pub fn new(p: NakagamiParams) -> Self {
        let scale = p.omega / p.m;
        let kind = if p.m.fract() == 0.0 && p.m <= 8.0 {
            SamplerKind::Erlang(p.m as u32)
        } else {
            SamplerKind::General(Gamma::new(p.m, 1.0).expect("validated shape"))
        };
        Self { kind, scale }
    }

    /// Squared magnitude `h^2`.
    #[inline]
    pub fn sample_power<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let g = match &self.kind {
            SamplerKind::Erlang(k) => {
                let mut prod = 1.0;
                for _ in 0..*k {
                    prod *= 1.0 - rng.random::<f64>();
                }
                -prod.ln()
            }
            SamplerKind::General(d) => d.sample(rng),
        };
        g * self.scale
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sample_power(rng).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub ap: Point,
    pub ris: Point,
    pub user_t: Point,
    pub user_r: Point,
    pub tau_db: f64,
    pub vartheta: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            ap: Point::new(0.0, 0.0),
            ris: Point::new(16.0, 0.0),
            user_t: Point::new(16.0, 2.0),
            user_r: Point::new(16.0, -3.0),
            tau_db: -2.0,
            vartheta: 2.0,
        }
    }
}

impl Geometry {
    pub fn validate(&self) -> Result<()> {
        let pts = [self.ap, self.ris, self.user_t, self.user_r];
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                if !(pts[i].distance(&pts[j]) > 0.0) {
                    return Err(Error::Domain("geometry points must be distinct".into()));
                }
            }
        }
        if !(self.vartheta >= 0.0) {
            return Err(Error::Domain(format!("path-loss exponent must be >= 0, got {}", self.vartheta)));
        }
        Ok(())
    }

    pub fn user(&self, k: User) -> Point {
        match k {
            User::Reflect => self.user_r,
            User::Transmit => self.user_t,
        }
    }

    pub fn ap_ris(&self) -> f64 {
        self.ap.distance(&self.ris)
    }

    pub fn ris_user(&self, k: User) -> f64 {
        self.ris.distance(&self.user(k))
    }

    pub fn ap_user(&self, k: User) -> f64 {
        self.ap.distance(&self.user(k))
    }
}

/// Large-scale spread `10^(tau_db/10) / d^vartheta`.
pub fn pathloss(distance: f64, geometry: &Geometry) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::Domain(format!("distance must be positive, got {distance}")));
    }
    Ok(10f64.powf(geometry.tau_db / 10.0) / distance.powf(geometry.vartheta))
}

/// `E[(h g)^n]` for independent Nakagami legs `h` (AP-RIS) and `g` (RIS-user).
pub fn cascade_moment(n: u32, ris_leg: &NakagamiParams, user_leg: &NakagamiParams) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let (m1, m2) = (ris_leg.m, user_leg.m);
    let half = n as f64 / 2.0;
    let ln_lambda = 0.5 * ((m1 * m2) / (ris_leg.omega * user_leg.omega)).ln();
    (-(n as f64) * ln_lambda + ln_gamma(m1 + half) + ln_gamma(m2 + half)
        - ln_gamma(m1)
        - ln_gamma(m2))
    .exp()
}

/// First two raw moments of a random variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawMoments {
    pub mu1: f64,
    pub mu2: f64,
}

impl RawMoments {
    pub fn variance(&self) -> f64 {
        self.mu2 - self.mu1 * self.mu1
    }
}

/// Moments of `G = sum_i V_i` for independent element cascades, each given
/// by its own first and second moments.
pub fn sum_moments(per_element: &[RawMoments]) -> RawMoments {
    let mut mu1 = 0.0;
    let mut mu2 = 0.0;
    let mut cross = 0.0;
    for v in per_element {
        cross += v.mu1 * mu1;
        mu1 += v.mu1;
        mu2 += v.mu2;
    }
    RawMoments { mu1, mu2: mu2 + 2.0 * cross }
}

/// Moments of `P = h0 + G` with an independent direct link `h0`; `None`
/// means no direct path.
pub fn composite_moments(direct: Option<&NakagamiParams>, sum: RawMoments) -> RawMoments {
    match direct {
        None => sum,
        Some(d) => {
            let (d1, d2) = (d.moment(1), d.moment(2));
            RawMoments { mu1: d1 + sum.mu1, mu2: d2 + sum.mu2 + 2.0 * d1 * sum.mu1 }
        }
    }
}

/// Moment-matched Gamma law of the per-antenna gain `P ~ Gamma(chi, phi)`,
/// so that `Z = sum_l P_l ~ Gamma(L chi, phi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaFit {
    pub chi: f64,
    pub phi: f64,
    pub antennas: usize,
}

pub fn gamma_fit(mu_p1: f64, mu_p2: f64, antennas: usize) -> Result<GammaFit> {
    let var = mu_p2 - mu_p1 * mu_p1;
    if !(var > 0.0) || !(mu_p1 > 0.0) {
        return Err(Error::Fit(format!("need positive mean and variance, got mu1={mu_p1}, var={var}")));
    }
    if antennas == 0 {
        return Err(Error::Fit("antenna count must be at least 1".into()));
    }
    Ok(GammaFit { chi: mu_p1 * mu_p1 / var, phi: mu_p1 / var, antennas })
}

impl GammaFit {
    /// Shape of `Z`, `L chi`.
    pub fn shape(&self) -> f64 {
        self.antennas as f64 * self.chi
    }

    /// `L chi` rounded to the nearest integer, at least 1.
    pub fn rounded_shape(&self) -> u64 {
        (self.shape().round() as u64).max(1)
    }

    pub fn mean_z(&self) -> f64 {
        self.shape() / self.phi
    }

    pub fn var_z(&self) -> f64 {
        self.shape() / (self.phi * self.phi)
    }

    /// `E[Z^2] = L chi (L chi + 1) / phi^2`.
    pub fn mean_z_sq(&self) -> f64 {
        let n = self.shape();
        n * (n + 1.0) / (self.phi * self.phi)
    }

    /// Per-antenna law evaluated at `x`.
    pub fn cdf_p(&self, x: f64) -> f64 {
        gamma_p(self.chi, self.phi * x)
    }

    pub fn cdf_z(&self, z: f64) -> f64 {
        gamma_p(self.shape(), self.phi * z)
    }

    /// `Pr(Z^2 <= y)`.
    pub fn cdf_z_sq(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        gamma_p(self.shape(), self.phi * y.sqrt())
    }

    /// Log density of `Z^2` at `x > 0`.
    pub fn ln_pdf_z_sq(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let n = self.shape();
        n * self.phi.ln() - self.phi * x.sqrt() + 0.5 * (n - 2.0) * x.ln()
            - std::f64::consts::LN_2
            - ln_gamma(n)
    }
}

/// Kolmogorov-Smirnov distance between a sample and a continuous CDF. Sorts
/// `samples` in place.
pub fn ks_distance(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(|a, b| a.total_cmp(b));
    let n = samples.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in samples.iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nakagami_moments_rayleigh() {
        let p = NakagamiParams::new(1.0, 1.0).unwrap();
        assert!((p.moment(1) - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-14);
        assert!((p.moment(2) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(NakagamiParams::new(0.0, 1.0).is_err());
        assert!(NakagamiParams::new(2.0, -1.0).is_err());
        assert!(gamma_fit(1.0, 1.0, 2).is_err());
        assert!(pathloss(0.0, &Geometry::default()).is_err());
    }

    #[test]
    fn sum_moments_pairs() {
        let v = RawMoments { mu1: 0.3, mu2: 0.2 };
        let s = sum_moments(&[v, v, v]);
        assert!((s.mu1 - 0.9).abs() < 1e-15);
        assert!((s.mu2 - (0.6 + 6.0 * 0.09)).abs() < 1e-15);
    }
}
