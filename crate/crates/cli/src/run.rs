//! Subcommand drivers. Each writes one CSV per variant into the output
//! directory; `validate` adds an agreement report.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use starswipt_core::link::analytic_metrics;
use starswipt_core::mc::{channel_compatible, run_trials, run_trials_grid, Estimate, LegSharing, Scheme};
use starswipt_core::pso::{equivalent_snr_gain, fixed_throughput, optimize};
use starswipt_core::{AnalyticBuffer, LinkMetrics, SystemParams, TrialStats, User};

use crate::config::{Axis, ExperimentSpec, Variant};
use crate::output::{axis_value, num, opt, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Analyze,
    Simulate,
    Sweep,
    Validate,
}

/// How an analytic/MC pair is judged by `validate`.
#[derive(Debug, Clone, Copy)]
enum Check {
    /// Probability: agree within `3 se` or `floor`; skipped when the
    /// analytic value is below `min_p`.
    Prob { floor: f64, min_p: f64 },
    /// Agree within `3 se` or the given fraction of the analytic value.
    Relative(f64),
    /// Reported, never judged.
    Info,
}

struct Metric {
    name: &'static str,
    analytic: fn(&LinkMetrics) -> f64,
    mc: fn(&TrialStats) -> Option<Estimate>,
    check: Check,
}

const R: usize = 0;
const T: usize = 1;

const METRICS: [Metric; 14] = [
    Metric { name: "po_r", analytic: |a| a.p_po[R], mc: |s| Some(s.power_outage(User::Reflect)), check: Check::Prob { floor: 0.0, min_p: 1e-4 } },
    Metric { name: "po_t", analytic: |a| a.p_po[T], mc: |s| Some(s.power_outage(User::Transmit)), check: Check::Prob { floor: 0.0, min_p: 1e-4 } },
    Metric { name: "io_down_r", analytic: |a| a.p_io_down[R], mc: |s| Some(s.io_down(User::Reflect)), check: Check::Prob { floor: 0.005, min_p: 0.0 } },
    Metric { name: "io_down_t", analytic: |a| a.p_io_down[T], mc: |s| Some(s.io_down(User::Transmit)), check: Check::Prob { floor: 0.005, min_p: 0.0 } },
    Metric { name: "io_up_r", analytic: |a| a.p_io_up[R], mc: |s| Some(s.io_up(User::Reflect)), check: Check::Prob { floor: 0.01, min_p: 0.0 } },
    Metric { name: "io_up_t", analytic: |a| a.p_io_up[T], mc: |s| Some(s.io_up(User::Transmit)), check: Check::Prob { floor: 0.01, min_p: 0.0 } },
    Metric { name: "joint_down_r", analytic: |a| a.p_joint_down[R], mc: |s| Some(s.joint_down(User::Reflect)), check: Check::Info },
    Metric { name: "joint_down_t", analytic: |a| a.p_joint_down[T], mc: |s| Some(s.joint_down(User::Transmit)), check: Check::Info },
    Metric { name: "joint_up_r", analytic: |a| a.p_joint_up[R], mc: |s| Some(s.joint_up(User::Reflect)), check: Check::Info },
    Metric { name: "joint_up_t", analytic: |a| a.p_joint_up[T], mc: |s| Some(s.joint_up(User::Transmit)), check: Check::Info },
    Metric { name: "psi_down", analytic: |a| a.psi_down, mc: |s| Some(s.psi_down()), check: Check::Info },
    Metric { name: "psi_up", analytic: |a| a.psi_up, mc: |s| Some(s.psi_up()), check: Check::Info },
    Metric { name: "residual_r", analytic: |a| a.residual[R], mc: |s| s.residual(User::Reflect), check: Check::Relative(0.01) },
    Metric { name: "residual_t", analytic: |a| a.residual[T], mc: |s| s.residual(User::Transmit), check: Check::Relative(0.01) },
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Skip,
    Info,
}

impl Status {
    fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Skip => "skip",
            Status::Info => "info",
        }
    }
}

/// Judges one analytic value against an MC estimate from `n` trials.
fn judge(check: Check, analytic: f64, est: Estimate, n: u64) -> (Status, f64) {
    match check {
        Check::Info => (Status::Info, f64::NAN),
        Check::Prob { floor, min_p } => {
            if analytic < min_p {
                return (Status::Skip, f64::NAN);
            }
            // null-hypothesis spread keeps the test meaningful when the MC
            // count is 0 or n
            let se = est.se.max((analytic * (1.0 - analytic) / n as f64).max(0.0).sqrt());
            let tol = (3.0 * se).max(floor);
            (if (analytic - est.mean).abs() <= tol { Status::Pass } else { Status::Fail }, tol)
        }
        Check::Relative(f) => {
            let tol = (3.0 * est.se).max(f * analytic.abs());
            (if (analytic - est.mean).abs() <= tol { Status::Pass } else { Status::Fail }, tol)
        }
    }
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub checks: usize,
    pub failures: Vec<String>,
}

fn analytic_points(variant: &Variant, points: &[SystemParams]) -> anyhow::Result<Option<Vec<LinkMetrics>>> {
    if !variant.config.has_analytic() {
        return Ok(None);
    }
    let buffer = match variant.config.scheme {
        Scheme::BufferLess => AnalyticBuffer::BufferLess,
        _ => AnalyticBuffer::Buffered,
    };
    let m = points.iter().map(|p| analytic_metrics(p, buffer)).collect::<Result<Vec<_>, _>>()?;
    Ok(Some(m))
}

fn simulate_points(spec: &ExperimentSpec, variant: &Variant, points: &[SystemParams], legs: LegSharing) -> anyhow::Result<Vec<TrialStats>> {
    let mut cfg = variant.config;
    cfg.legs = legs;
    let stats = if points.iter().all(|p| channel_compatible(&points[0], p)) {
        run_trials_grid(points, &cfg, spec.trials, spec.seed)?
    } else {
        points.iter().map(|p| run_trials(p, &cfg, spec.trials, spec.seed)).collect::<Result<Vec<_>, _>>()?
    };
    Ok(stats)
}

fn out_path(out_dir: &Path, spec: &ExperimentSpec, suffix: &str) -> PathBuf {
    out_dir.join(format!("{}_{}.csv", spec.name, suffix))
}

/// Runs `analyze`, `simulate`, `sweep` or `validate`.
pub fn run_grid(mode: Mode, spec: &ExperimentSpec, out_dir: &Path) -> anyhow::Result<Outcome> {
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let with_analytic = mode != Mode::Simulate;
    let with_mc = mode != Mode::Analyze;
    let mut outcome = Outcome::default();
    let mut report = if mode == Mode::Validate {
        let h = ["variant", "axis", "value", "metric", "analytic", "mc", "se", "tolerance", "status"].map(String::from);
        Some(Table::create(&out_path(out_dir, spec, "validation"), &h)?)
    } else {
        None
    };

    for variant in &spec.variants {
        let points = spec.points(variant);
        let analytic = if with_analytic { analytic_points(variant, &points)? } else { None };
        let legs = match mode {
            Mode::Validate if !variant.legs_explicit => LegSharing::Independent,
            _ => variant.config.legs,
        };
        let mc = if with_mc { Some(simulate_points(spec, variant, &points, legs)?) } else { None };

        let mut header = vec![spec.axis.name().to_string()];
        for m in &METRICS {
            if with_analytic {
                header.push(format!("{}_analytic", m.name));
            }
            if with_mc {
                header.push(format!("{}_mc", m.name));
                header.push(format!("{}_se", m.name));
            }
        }
        if with_mc {
            header.push("trials".into());
            header.push("seed".into());
        }
        let mut table = Table::create(&out_path(out_dir, spec, &variant.name), &header)?;

        for (i, &x) in spec.values.iter().enumerate() {
            let xv = axis_value(x, spec.axis.is_integer());
            let mut row = vec![xv.clone()];
            for m in &METRICS {
                let a = analytic.as_ref().map(|a| (m.analytic)(&a[i]));
                let e = mc.as_ref().and_then(|s| (m.mc)(&s[i]));
                if with_analytic {
                    row.push(opt(a));
                }
                if with_mc {
                    row.push(opt(e.map(|e| e.mean)));
                    row.push(opt(e.map(|e| e.se)));
                }
                if let (Some(rep), Some(a), Some(e)) = (report.as_mut(), a, e) {
                    if a.is_nan() {
                        continue;
                    }
                    let (status, tol) = judge(m.check, a, e, spec.trials);
                    if status == Status::Pass || status == Status::Fail {
                        outcome.checks += 1;
                    }
                    if status == Status::Fail {
                        outcome.failures.push(format!(
                            "{} {}={} {}: analytic {} vs mc {} (tolerance {})",
                            variant.name, spec.axis.name(), xv, m.name, num(a), num(e.mean), num(tol)
                        ));
                    }
                    rep.row(&[
                        variant.name.clone(),
                        spec.axis.name().to_string(),
                        xv.clone(),
                        m.name.to_string(),
                        num(a),
                        num(e.mean),
                        num(e.se),
                        num(tol),
                        status.as_str().to_string(),
                    ])?;
                }
            }
            if let Some(s) = &mc {
                row.push(s[i].n_trials.to_string());
                row.push(s[i].seed.to_string());
            }
            table.row(&row)?;
        }
        outcome.files.push(table.finish()?);
    }
    if let Some(r) = report {
        outcome.files.push(r.finish()?);
    }
    Ok(outcome)
}

/// Runs the swarm. On the `iterations` axis the trace is reported at the
/// listed iterations; on any other axis the swarm runs once per point and
/// the optimum is compared with the fixed baseline allocation.
pub fn run_optimize(spec: &ExperimentSpec, out_dir: &Path) -> anyhow::Result<Outcome> {
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let mut outcome = Outcome::default();
    for variant in &spec.variants {
        if variant.config.scheme != Scheme::Proposed || !variant.config.has_analytic() {
            bail!("variant {}: the swarm optimizes the proposed scheme only", variant.name);
        }
        let path = out_path(out_dir, spec, &variant.name);
        let path = if spec.axis == Axis::Iterations {
            let mut hyper = spec.pso;
            hyper.n_iterations = *spec.values.last().expect("values are never empty") as usize;
            let r = optimize(&variant.params, &hyper, spec.seed)?;
            let h = ["iteration", "fitness", "psi_up"].map(String::from);
            let mut t = Table::create(&path, &h)?;
            for &v in &spec.values {
                let i = v as usize;
                t.row(&[i.to_string(), num(r.trace[i]), num(r.trace_psi[i])])?;
            }
            t.finish()?
        } else {
            let h = [
                spec.axis.name(),
                "beta_r",
                "beta_t",
                "alpha_r",
                "alpha_t",
                "fitness",
                "psi_up",
                "joint_up_r",
                "joint_up_t",
                "jfi",
                "feasible",
                "baseline_psi_up",
                "gain_db",
                "evaluations",
                "seed",
            ]
            .map(String::from);
            let mut t = Table::create(&path, &h)?;
            for (x, p) in spec.values.iter().zip(spec.points(variant)) {
                let r = optimize(&p, &spec.pso, spec.seed)?;
                let e = r.evaluation;
                let base = fixed_throughput(&p, spec.baseline, p.snr_db())?;
                let gain = equivalent_snr_gain(&p, spec.baseline, p.snr_db(), e.psi_up, 10.0)?;
                t.row(&[
                    axis_value(*x, spec.axis.is_integer()),
                    num(r.best[0]),
                    num(r.best[1]),
                    num(r.best[2]),
                    num(r.best[3]),
                    num(e.fitness),
                    num(e.psi_up),
                    num(e.joint_up[R]),
                    num(e.joint_up[T]),
                    num(e.jfi),
                    e.feasible.to_string(),
                    num(base),
                    opt(gain),
                    r.evaluations.to_string(),
                    spec.seed.to_string(),
                ])?;
            }
            t.finish()?
        };
        outcome.files.push(path);
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn judge_uses_null_spread_at_zero_count() {
        let e = Estimate { mean: 1.0, se: 0.0 };
        let (s, _) = judge(Check::Prob { floor: 0.0, min_p: 0.0 }, 0.9999, e, 1000);
        assert_eq!(s, Status::Pass);
        let (s, _) = judge(Check::Prob { floor: 0.0, min_p: 0.0 }, 0.5, e, 1000);
        assert_eq!(s, Status::Fail);
    }

    #[test]
    fn judge_skips_rare_events() {
        let e = Estimate { mean: 0.0, se: 0.0 };
        let (s, _) = judge(Check::Prob { floor: 0.0, min_p: 1e-4 }, 1e-6, e, 1000);
        assert_eq!(s, Status::Skip);
    }
}
