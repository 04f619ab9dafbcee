//! Experiment files: base parameters, one sweep axis and a list of variants.

use std::collections::HashSet;
use std::path::Path;

use anyhow::{bail, Context};
use serde::Deserialize;
use starswipt_core::mc::{BufferModel, Csi, DecodingOrder, LegSharing, Scheme, Sic, TdmaRate};
use starswipt_core::pso::Position;
use starswipt_core::{GhMode, Point, PsoHyper, SystemParams, User, VariantConfig};

/// Flat overrides of [`SystemParams`]; every key is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamOverrides {
    pub p_ap: Option<f64>,
    pub antennas: Option<usize>,
    pub eta: Option<f64>,
    pub theta: Option<f64>,
    pub beta_r: Option<f64>,
    pub beta_t: Option<f64>,
    pub t_s: Option<f64>,
    pub m_bits: Option<f64>,
    pub e_c: Option<f64>,
    pub e_tp: Option<f64>,
    pub comp_fraction: Option<f64>,
    pub alpha_r: Option<f64>,
    pub alpha_t: Option<f64>,
    pub r_target: Option<f64>,
    pub snr_db: Option<f64>,
    pub n0: Option<f64>,
    pub n_elements: Option<usize>,
    pub initial_c: Option<f64>,
    pub q_slots: Option<usize>,
    pub gh_nodes: Option<usize>,
    pub gh_mode: Option<GhMode>,
    pub gh_integer_shape: Option<bool>,
    pub direct_link: Option<bool>,
    pub m_direct: Option<f64>,
    pub m_ap_ris: Option<f64>,
    pub m_ris_user: Option<f64>,
    pub tau_db: Option<f64>,
    pub vartheta: Option<f64>,
    pub ap: Option<[f64; 2]>,
    pub ris: Option<[f64; 2]>,
    pub user_t: Option<[f64; 2]>,
    pub user_r: Option<[f64; 2]>,
}

fn set<T: Copy>(dst: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *dst = v;
    }
}

fn point(v: Option<[f64; 2]>) -> Option<Point> {
    v.map(|[x, y]| Point::new(x, y))
}

impl ParamOverrides {
    /// Applies the overrides; a lone `beta_r`/`beta_t` (or `alpha_*`) sets
    /// its complement too.
    pub fn apply(&self, p: &mut SystemParams) -> anyhow::Result<()> {
        if self.snr_db.is_some() && self.n0.is_some() {
            bail!("set either snr_db or n0, not both");
        }
        let s = &mut p.swipt;
        set(&mut s.p_ap, self.p_ap);
        set(&mut s.antennas, self.antennas);
        set(&mut s.eta, self.eta);
        set(&mut s.theta, self.theta);
        set(&mut s.t_s, self.t_s);
        match (self.beta_r, self.beta_t) {
            (Some(r), None) => p.set_beta_r(r),
            (None, Some(t)) => p.set_beta_r(1.0 - t),
            (r, t) => {
                set(&mut p.swipt.beta_r, r);
                set(&mut p.swipt.beta_t, t);
            }
        }
        match (self.alpha_r, self.alpha_t) {
            (Some(r), None) => p.set_alpha_r(r),
            (None, Some(t)) => p.set_alpha_r(1.0 - t),
            (r, t) => {
                set(&mut p.noma.alpha_r, r);
                set(&mut p.noma.alpha_t, t);
            }
        }
        let c = &mut p.consumption;
        set(&mut c.m_bits, self.m_bits);
        set(&mut c.e_c, self.e_c);
        set(&mut c.e_tp, self.e_tp);
        set(&mut c.comp_fraction, self.comp_fraction);
        set(&mut p.noma.r_target, self.r_target);
        set(&mut p.noma.n0, self.n0);
        if let Some(db) = self.snr_db {
            p.set_snr_db(db);
        }
        set(&mut p.n_elements, self.n_elements);
        set(&mut p.initial_c, self.initial_c);
        set(&mut p.q_slots, self.q_slots);
        set(&mut p.gh_nodes, self.gh_nodes);
        set(&mut p.gh_mode, self.gh_mode);
        set(&mut p.gh_integer_shape, self.gh_integer_shape);
        set(&mut p.direct_link, self.direct_link);
        set(&mut p.fading.direct, self.m_direct);
        set(&mut p.fading.ap_ris, self.m_ap_ris);
        set(&mut p.fading.ris_user, self.m_ris_user);
        let g = &mut p.geometry;
        set(&mut g.tau_db, self.tau_db);
        set(&mut g.vartheta, self.vartheta);
        set(&mut g.ap, point(self.ap));
        set(&mut g.ris, point(self.ris));
        set(&mut g.user_t, point(self.user_t));
        set(&mut g.user_r, point(self.user_r));
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Theta,
    SnrDb,
    NElements,
    InitialC,
    QSlots,
    Iterations,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Theta => "theta",
            Axis::SnrDb => "snr_db",
            Axis::NElements => "n_elements",
            Axis::InitialC => "initial_c",
            Axis::QSlots => "q_slots",
            Axis::Iterations => "iterations",
        }
    }

    pub fn is_integer(self) -> bool {
        matches!(self, Axis::NElements | Axis::QSlots | Axis::Iterations)
    }

    /// Sets the axis quantity in `p`. The iteration axis only affects the
    /// swarm and leaves `p` unchanged.
    pub fn apply(self, value: f64, p: &mut SystemParams) {
        match self {
            Axis::Theta => p.swipt.theta = value,
            Axis::SnrDb => p.set_snr_db(value),
            Axis::NElements => p.n_elements = value as usize,
            Axis::InitialC => p.initial_c = value,
            Axis::QSlots => p.q_slots = value as usize,
            Axis::Iterations => {}
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSection {
    axis: Axis,
    values: Vec<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PsoSection {
    n_particles: Option<usize>,
    n_iterations: Option<usize>,
    inertia: Option<f64>,
    c1: Option<f64>,
    c2: Option<f64>,
    lambda1: Option<f64>,
    lambda2: Option<f64>,
    th_r: Option<f64>,
    th_t: Option<f64>,
    jfi_th: Option<f64>,
    v_init: Option<f64>,
    /// Fixed `(beta_r, alpha_r)` the optimum is compared against.
    baseline: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantSpec {
    pub name: Option<String>,
    #[serde(default)]
    pub scheme: Scheme,
    pub phase_bits: Option<u32>,
    /// Residual interference fraction after SIC; absent means perfect SIC.
    pub sic_residual: Option<f64>,
    #[serde(default)]
    pub csi: Csi,
    pub levels: Option<u8>,
    pub c_max_slots: Option<f64>,
    /// Two letters from `{r, t}`: first decoded at `U_t`, then at `U_r`.
    pub decoding_order: Option<String>,
    pub legs: Option<LegSharing>,
    pub tdma_rate: Option<TdmaRate>,
    #[serde(default)]
    pub params: ParamOverrides,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentFile {
    name: Option<String>,
    trials: Option<u64>,
    seed: Option<u64>,
    sweep: Option<SweepSection>,
    #[serde(default)]
    params: ParamOverrides,
    #[serde(default)]
    pso: PsoSection,
    #[serde(default)]
    variants: Vec<VariantSpec>,
}

/// One resolved variant: its engine configuration and base parameters.
#[derive(Debug, Clone)]
pub struct Variant {
    pub name: String,
    pub config: VariantConfig,
    /// Whether the file chose the leg-sharing model explicitly.
    pub legs_explicit: bool,
    pub params: SystemParams,
}

#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub name: String,
    pub axis: Axis,
    pub values: Vec<f64>,
    pub variants: Vec<Variant>,
    pub trials: u64,
    pub seed: u64,
    pub pso: PsoHyper,
    pub baseline: Position,
}

pub const DEFAULT_TRIALS: u64 = 100_000;
pub const DEFAULT_SEED: u64 = 1;

fn parse_order(s: &str) -> anyhow::Result<DecodingOrder> {
    let user = |c: char| match c {
        'r' => Ok(User::Reflect),
        't' => Ok(User::Transmit),
        _ => bail!("decoding order letters must be r or t, got {s:?}"),
    };
    let c: Vec<char> = s.chars().collect();
    if c.len() != 2 {
        bail!("decoding order needs two letters, got {s:?}");
    }
    Ok(DecodingOrder { at_t: user(c[0])?, at_r: user(c[1])? })
}

impl VariantSpec {
    pub fn to_config(&self) -> anyhow::Result<VariantConfig> {
        let phase_bits = match (self.scheme, self.phase_bits) {
            (Scheme::DiscretePhase, None) => 4,
            (_, b) => b.unwrap_or(0),
        };
        let v = VariantConfig {
            scheme: self.scheme,
            phase_bits,
            sic: self.sic_residual.map_or(Sic::Perfect, Sic::Imperfect),
            csi: self.csi,
            buffer_model: self.levels.map_or(BufferModel::TwoState, BufferModel::Levels),
            decoding_order: self.decoding_order.as_deref().map(parse_order).transpose()?.unwrap_or_default(),
            legs: self.legs.unwrap_or_default(),
            tdma_rate: self.tdma_rate.unwrap_or_default(),
            c_max_slots: self.c_max_slots,
        };
        v.validate()?;
        Ok(v)
    }
}

fn check_params(p: &SystemParams, at: &str) -> anyhow::Result<()> {
    p.validate().with_context(|| format!("{at}: invalid parameters"))
}

fn parse_file(text: &str, format: &str) -> anyhow::Result<ExperimentFile> {
    match format {
        "json" => {
            let de = &mut serde_json::Deserializer::from_str(text);
            serde_path_to_error::deserialize(de).map_err(|e| anyhow::anyhow!("at `{}`: {}", e.path(), e.inner()))
        }
        _ => {
            let de = toml::Deserializer::parse(text)?;
            serde_path_to_error::deserialize(de).map_err(|e| anyhow::anyhow!("at `{}`: {}", e.path(), e.inner()))
        }
    }
}

/// Parses and validates an experiment given as TOML (`format = "toml"`) or
/// JSON text. `default_name` names the experiment when the file does not.
pub fn parse_spec(text: &str, format: &str, default_name: &str) -> anyhow::Result<ExperimentSpec> {
    let f = parse_file(text, format)?;
    let mut base = SystemParams::default();
    f.params.apply(&mut base).context("params")?;
    check_params(&base, "params")?;

    let (axis, values) = match f.sweep {
        Some(s) => (s.axis, s.values),
        None => (Axis::Theta, vec![base.swipt.theta]),
    };
    if values.is_empty() {
        bail!("sweep.values: need at least one value");
    }
    if let Some(w) = values.windows(2).find(|w| !(w[1] > w[0])) {
        bail!("sweep.values: must be strictly increasing, got {} then {}", w[0], w[1]);
    }
    if axis.is_integer() {
        if let Some(v) = values.iter().find(|v| !(v.fract() == 0.0 && **v >= 0.0)) {
            bail!("sweep.values: axis {} takes nonnegative integers, got {v}", axis.name());
        }
    }

    let p = &f.pso;
    let d = PsoHyper::default();
    let pso = PsoHyper {
        n_particles: p.n_particles.unwrap_or(d.n_particles),
        n_iterations: p.n_iterations.unwrap_or(d.n_iterations),
        inertia: p.inertia.unwrap_or(d.inertia),
        c1: p.c1.unwrap_or(d.c1),
        c2: p.c2.unwrap_or(d.c2),
        lambda1: p.lambda1.or(d.lambda1),
        lambda2: p.lambda2.or(d.lambda2),
        th_r: p.th_r.unwrap_or(d.th_r),
        th_t: p.th_t.unwrap_or(d.th_t),
        jfi_th: p.jfi_th.unwrap_or(d.jfi_th),
        v_init: p.v_init.unwrap_or(d.v_init),
    };
    pso.validate().context("pso")?;
    let [br, ar] = p.baseline.unwrap_or([0.3, 0.5]);
    let baseline = [br, 1.0 - br, ar, 1.0 - ar];

    let specs = if f.variants.is_empty() { vec![VariantSpec::default()] } else { f.variants };
    let mut variants = Vec::with_capacity(specs.len());
    let mut names = HashSet::new();
    for (i, s) in specs.iter().enumerate() {
        let at = format!("variants[{i}]");
        let config = s.to_config().with_context(|| at.clone())?;
        let mut params = base.clone();
        s.params.apply(&mut params).with_context(|| format!("{at}.params"))?;
        check_params(&params, &format!("{at}.params"))?;
        for &v in &values {
            let mut q = params.clone();
            axis.apply(v, &mut q);
            check_params(&q, &format!("{at} at {} = {v}", axis.name()))?;
        }
        let name = s.name.clone().unwrap_or_else(|| config.label());
        if name.is_empty() || name.contains(['/', '\\']) {
            bail!("{at}.name: {name:?} is not usable as a file name");
        }
        if !names.insert(name.clone()) {
            bail!("{at}.name: duplicate variant name {name:?}");
        }
        variants.push(Variant { name, config, legs_explicit: s.legs.is_some(), params });
    }

    let trials = f.trials.unwrap_or(DEFAULT_TRIALS);
    if trials == 0 {
        bail!("trials: need at least one trial");
    }
    Ok(ExperimentSpec {
        name: f.name.unwrap_or_else(|| default_name.to_string()),
        axis,
        values,
        variants,
        trials,
        seed: f.seed.unwrap_or(DEFAULT_SEED),
        pso,
        baseline,
    })
}

/// Reads an experiment file; `.json` files are JSON, anything else TOML.
pub fn load_config(path: &Path) -> anyhow::Result<ExperimentSpec> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let format = match path.extension().and_then(|e| e.to_str()) {
        Some("json") => "json",
        _ => "toml",
    };
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("experiment");
    parse_spec(&text, format, stem).with_context(|| format!("in {}", path.display()))
}

impl ExperimentSpec {
    /// Parameters of `variant` at every axis value.
    pub fn points(&self, variant: &Variant) -> Vec<SystemParams> {
        self.values
            .iter()
            .map(|&v| {
                let mut p = variant.params.clone();
                self.axis.apply(v, &mut p);
                p
            })
            .collect()
    }
}
