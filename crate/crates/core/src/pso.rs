//! Penalty-based particle swarm allocation of the STAR-RIS splitting ratios
//! and NOMA power factors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{GammaFit, User};
use crate::error::{Error, Result};
use crate::link::{
    fits, info_outage_horizon, joint_outage, power_outages, throughput, uplink_outages, AnalyticBuffer,
    UplinkQuadrature,
};
use crate::params::SystemParams;

/// Bound keeping `beta_r` and `alpha_r` strictly inside `(0, 1)`.
pub const EDGE: f64 = 1e-3;

/// A particle position `(beta_r, beta_t, alpha_r, alpha_t)`.
pub type Position = [f64; 4];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PsoHyper {
    pub n_particles: usize,
    pub n_iterations: usize,
    pub inertia: f64,
    pub c1: f64,
    pub c2: f64,
    /// Outage penalty; `None` means `1e3 R T_s`.
    pub lambda1: Option<f64>,
    /// Fairness penalty; `None` means `1e3 R T_s`.
    pub lambda2: Option<f64>,
    pub th_r: f64,
    pub th_t: f64,
    pub jfi_th: f64,
    /// Half-width of the uniform initial velocities.
    pub v_init: f64,
}

impl Default for PsoHyper {
    fn default() -> Self {
        Self {
            n_particles: 30,
            n_iterations: 100,
            inertia: 0.72,
            c1: 1.49,
            c2: 1.49,
            lambda1: None,
            lambda2: None,
            th_r: 0.5,
            th_t: 0.5,
            jfi_th: 0.8,
            v_init: 0.1,
        }
    }
}

impl PsoHyper {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Domain(m));
        if self.n_particles == 0 {
            return bad("need at least one particle".into());
        }
        for (name, v) in [("inertia", self.inertia), ("c1", self.c1), ("c2", self.c2), ("v_init", self.v_init)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be nonnegative, got {v}"));
            }
        }
        for (name, v) in [("lambda1", self.lambda1), ("lambda2", self.lambda2)] {
            if let Some(v) = v {
                if !(v > 0.0) {
                    return bad(format!("{name} must be positive, got {v}"));
                }
            }
        }
        for (name, v) in [("th_r", self.th_r), ("th_t", self.th_t), ("jfi_th", self.jfi_th)] {
            if !(v > 0.0 && v <= 1.0) {
                return bad(format!("{name} must lie in (0, 1], got {v}"));
            }
        }
        Ok(())
    }

    pub fn penalties(&self, p: &SystemParams) -> (f64, f64) {
        let d = 1e3 * p.noma.r_target * p.swipt.t_s;
        (self.lambda1.unwrap_or(d), self.lambda2.unwrap_or(d))
    }
}

/// Jain's fairness index of two rates.
pub fn jfi(rate_t: f64, rate_r: f64) -> Result<f64> {
    if !(rate_t >= 0.0 && rate_r >= 0.0) {
        return Err(Error::Domain(format!("rates must be nonnegative, got {rate_t}, {rate_r}")));
    }
    let sq = rate_t * rate_t + rate_r * rate_r;
    if sq == 0.0 {
        return Err(Error::Domain("fairness of two zero rates is undefined".into()));
    }
    Ok((rate_t + rate_r).powi(2) / (2.0 * sq))
}

/// Downlink rates `(R_t, R_r)` at the mean squared composite gains.
pub fn expected_downlink_rates(p: &SystemParams, fits: &[GammaFit; 2]) -> (f64, f64) {
    let s = &p.swipt;
    let ln0 = s.antennas as f64 * p.noma.n0;
    let xr = fits[User::Reflect.index()].mean_z_sq();
    let xt = fits[User::Transmit.index()].mean_z_sq();
    let sr = s.theta * s.beta_r * s.p_ap * xr;
    let st = s.theta * s.beta_t * s.p_ap * xt;
    let rt = (st * p.noma.alpha_t / ln0).ln_1p() / std::f64::consts::LN_2;
    let rr = (sr * p.noma.alpha_r / (sr * p.noma.alpha_t + ln0)).ln_1p() / std::f64::consts::LN_2;
    (rt, rr)
}

/// Clamps `beta_r`, `alpha_r` into `[EDGE, 1 - EDGE]` and sets their
/// complements.
pub fn project(d: Position) -> Position {
    let br = d[0].clamp(EDGE, 1.0 - EDGE);
    let ar = d[2].clamp(EDGE, 1.0 - EDGE);
    [br, 1.0 - br, ar, 1.0 - ar]
}

/// Everything the fitness is built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub fitness: f64,
    pub psi_up: f64,
    /// Uplink joint outage `[U_r, U_t]`.
    pub joint_up: [f64; 2],
    pub jfi: f64,
    pub feasible: bool,
}

/// Evaluates candidates of one base configuration; caches the channel fits
/// and quadrature rule, which do not depend on the candidate.
#[derive(Debug, Clone)]
pub struct Objective {
    base: SystemParams,
    fits: [GammaFit; 2],
    quad: UplinkQuadrature,
    hyper: PsoHyper,
}

impl Objective {
    pub fn new(base: &SystemParams, hyper: &PsoHyper) -> Result<Self> {
        base.validate()?;
        hyper.validate()?;
        Ok(Self {
            base: base.clone(),
            fits: fits(base)?,
            quad: UplinkQuadrature::from_params(base),
            hyper: *hyper,
        })
    }

    pub fn params_at(&self, d: &Position) -> SystemParams {
        let mut p = self.base.clone();
        p.swipt.beta_r = d[0];
        p.swipt.beta_t = d[1];
        p.noma.alpha_r = d[2];
        p.noma.alpha_t = d[3];
        p
    }

    pub fn evaluate(&self, d: &Position) -> Evaluation {
        let p = self.params_at(d);
        let q = p.q_slots;
        let po = power_outages(&p, &self.fits, AnalyticBuffer::Buffered);
        let up = uplink_outages(&p, &self.fits, &self.quad).map(|x| info_outage_horizon(x, q));
        let psi_up = throughput(up[0], up[1], p.noma.r_target, p.swipt.t_s);
        let joint_up = [joint_outage(po[0], up[0]), joint_outage(po[1], up[1])];
        let (rt, rr) = expected_downlink_rates(&p, &self.fits);
        let fairness = jfi(rt, rr).unwrap_or(f64::NAN);
        let h = &self.hyper;
        let (l1, l2) = h.penalties(&p);
        let fitness = psi_up - l1 * (joint_up[0] - h.th_r).max(0.0) - l1 * (joint_up[1] - h.th_t).max(0.0)
            + l2 * (fairness - h.jfi_th).min(0.0);
        let fitness = if fitness.is_nan() { f64::NEG_INFINITY } else { fitness };
        Evaluation {
            fitness,
            psi_up,
            joint_up,
            jfi: fairness,
            feasible: joint_up[0] < h.th_r && joint_up[1] < h.th_t && fairness > h.jfi_th,
        }
    }

    pub fn fitness(&self, d: &Position) -> f64 {
        self.evaluate(d).fitness
    }
}

/// Penalized fitness of one candidate.
pub fn penalty_fitness(candidate: &Position, params: &SystemParams, hyper: &PsoHyper) -> f64 {
    match Objective::new(params, hyper) {
        Ok(o) => o.fitness(candidate),
        Err(_) => f64::NEG_INFINITY,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub position: Position,
    pub velocity: Position,
    pub best_position: Position,
    pub best_fitness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwarmState {
    pub particles: Vec<Particle>,
    pub global_best: Position,
    pub global_best_fitness: f64,
    pub iteration: usize,
    pub evaluations: usize,
}

fn evaluate_all<F>(positions: &[Position], f: &F) -> Vec<f64>
where
    F: Fn(&Position) -> f64 + Sync,
{
    positions.par_iter().map(f).collect()
}

impl SwarmState {
    /// Random feasible positions with small random velocities.
    pub fn init<R: Rng, F>(hyper: &PsoHyper, f: &F, rng: &mut R) -> Self
    where
        F: Fn(&Position) -> f64 + Sync,
    {
        let mut pos = Vec::with_capacity(hyper.n_particles);
        let mut vel = Vec::with_capacity(hyper.n_particles);
        for _ in 0..hyper.n_particles {
            let br = rng.random_range(EDGE..1.0 - EDGE);
            let ar = rng.random_range(EDGE..1.0 - EDGE);
            pos.push(project([br, 0.0, ar, 0.0]));
            let mut v = [0.0; 4];
            for x in v.iter_mut() {
                *x = (2.0 * rng.random::<f64>() - 1.0) * hyper.v_init;
            }
            vel.push(v);
        }
        Self::from_positions(pos, vel, f)
    }

    /// Swarm at the given positions, each its own personal best.
    pub fn from_positions<F>(positions: Vec<Position>, velocities: Vec<Position>, f: &F) -> Self
    where
        F: Fn(&Position) -> f64 + Sync,
    {
        let fit = evaluate_all(&positions, f);
        let particles: Vec<Particle> = positions
            .into_iter()
            .zip(velocities)
            .zip(&fit)
            .map(|((p, v), &s)| Particle { position: p, velocity: v, best_position: p, best_fitness: s })
            .collect();
        let mut state = Self {
            global_best: particles[0].best_position,
            global_best_fitness: particles[0].best_fitness,
            particles,
            iteration: 0,
            evaluations: fit.len(),
        };
        state.refresh_global();
        state
    }

    fn refresh_global(&mut self) {
        for p in &self.particles {
            if p.best_fitness > self.global_best_fitness {
                self.global_best_fitness = p.best_fitness;
                self.global_best = p.best_position;
            }
        }
    }
}

/// One swarm iteration: velocity and position update, projection, personal
/// and global best refresh.
pub fn step<R: Rng, F>(state: &SwarmState, hyper: &PsoHyper, f: &F, rng: &mut R) -> SwarmState
where
    F: Fn(&Position) -> f64 + Sync,
{
    let mut next = state.clone();
    let g = state.global_best;
    for p in next.particles.iter_mut() {
        for j in 0..4 {
            let r1: f64 = rng.random();
            let r2: f64 = rng.random();
            p.velocity[j] = hyper.inertia * p.velocity[j]
                + hyper.c1 * r1 * (p.best_position[j] - p.position[j])
                + hyper.c2 * r2 * (g[j] - p.position[j]);
        }
        let mut d = p.position;
        for j in 0..4 {
            d[j] += p.velocity[j];
        }
        p.position = project(d);
    }
    let positions: Vec<Position> = next.particles.iter().map(|p| p.position).collect();
    let fit = evaluate_all(&positions, f);
    for (p, s) in next.particles.iter_mut().zip(fit) {
        if s > p.best_fitness {
            p.best_fitness = s;
            p.best_position = p.position;
        }
    }
    next.evaluations += positions.len();
    next.iteration += 1;
    next.refresh_global();
    next
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsoResult {
    pub best: Position,
    pub evaluation: Evaluation,
    /// Global-best fitness after initialization and after each iteration.
    pub trace: Vec<f64>,
    /// Global-best uplink throughput alongside `trace`.
    pub trace_psi: Vec<f64>,
    pub evaluations: usize,
    pub feasible: bool,
}

impl PsoResult {
    /// First iteration after which the global best improves by less than
    /// `rel_tol` of its final magnitude.
    pub fn stabilized_at(&self, rel_tol: f64) -> usize {
        let last = *self.trace.last().expect("trace is never empty");
        let tol = rel_tol * last.abs().max(f64::MIN_POSITIVE);
        self.trace.iter().position(|&v| last - v <= tol).unwrap_or(self.trace.len() - 1)
    }
}

/// Runs the swarm for `hyper.n_iterations` iterations from a seeded start.
pub fn optimize(params: &SystemParams, hyper: &PsoHyper, seed: u64) -> Result<PsoResult> {
    let obj = Objective::new(params, hyper)?;
    let f = |d: &Position| obj.fitness(d);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = SwarmState::init(hyper, &f, &mut rng);
    let mut trace = vec![state.global_best_fitness];
    let mut trace_psi = vec![obj.evaluate(&state.global_best).psi_up];
    for _ in 0..hyper.n_iterations {
        state = step(&state, hyper, &f, &mut rng);
        trace.push(state.global_best_fitness);
        trace_psi.push(obj.evaluate(&state.global_best).psi_up);
    }
    let evaluation = obj.evaluate(&state.global_best);
    Ok(PsoResult {
        best: state.global_best,
        evaluation,
        trace,
        trace_psi,
        evaluations: state.evaluations,
        feasible: evaluation.feasible,
    })
}

/// Uplink throughput of a fixed allocation at `snr_db`.
pub fn fixed_throughput(params: &SystemParams, allocation: Position, snr_db: f64) -> Result<f64> {
    let base = params.clone().with_snr_db(snr_db);
    let obj = Objective::new(&base, &PsoHyper::default())?;
    Ok(obj.evaluate(&project(allocation)).psi_up)
}

/// SNR shift in dB the fixed allocation needs to reach `target_psi`, found by
/// bisection on `[snr_db, snr_db + max_shift]`. `None` when the target is out
/// of reach within `max_shift`.
pub fn equivalent_snr_gain(
    params: &SystemParams,
    allocation: Position,
    snr_db: f64,
    target_psi: f64,
    max_shift: f64,
) -> Result<Option<f64>> {
    let at = |s: f64| fixed_throughput(params, allocation, snr_db + s);
    if at(0.0)? >= target_psi {
        return Ok(Some(0.0));
    }
    if at(max_shift)? < target_psi {
        return Ok(None);
    }
    let (mut lo, mut hi) = (0.0, max_shift);
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if at(mid)? >= target_psi {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}
