use proptest::prelude::*;
use starswipt_core::channel::{gamma_fit, GammaFit};
use starswipt_core::energy::{
    buffer_less_outage, buffered_outage, p11, p11_noncentral, p11_series, residual_energy,
};
use starswipt_core::link::{
    downlink_outage_r, downlink_outage_t, info_outage_horizon, joint_outage, power_outages,
    uplink_outages, UplinkQuadrature,
};
use starswipt_core::mc::{leveled_buffer_step, LeveledBuffer};
use starswipt_core::pso::{jfi, optimize, project, Objective, Position, PsoHyper};
use starswipt_core::*;

fn table_fits() -> [GammaFit; 2] {
    let p = SystemParams::default();
    [p.fit(User::Reflect).unwrap(), p.fit(User::Transmit).unwrap()]
}

fn swipt(theta: f64, beta_r: f64) -> SwiptParams {
    SwiptParams { theta, beta_r, beta_t: 1.0 - beta_r, ..SwiptParams::default() }
}

// Per-slot consumption at M = 1 is about 1.4e-7 J.
const E_S: f64 = 1.4e-7;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn fit_reproduces_moments(mu1 in 0.1f64..50.0, extra in 0.01f64..10.0, l in 1usize..4) {
        let mu2 = mu1 * mu1 * (1.0 + extra);
        let f = gamma_fit(mu1, mu2, l).unwrap();
        let lf = l as f64;
        prop_assert!((lf * f.chi / f.phi - lf * mu1).abs() <= 1e-12 * lf * mu1);
        let var = mu2 - mu1 * mu1;
        prop_assert!((lf * f.chi / (f.phi * f.phi) - lf * var).abs() <= 1e-12 * lf * var);
    }

    #[test]
    fn more_elements_raise_moments(n in 1usize..40, k in 0usize..2) {
        let p = SystemParams::default();
        let a = p.composite(User::BOTH[k], n).unwrap();
        let b = p.composite(User::BOTH[k], n + 1).unwrap();
        prop_assert!(b.mu1 > a.mu1 && b.mu2 > a.mu2);
    }

    #[test]
    fn p11_monotone(
        q in 1usize..8, k in 0usize..2,
        theta in 0.05f64..0.9, beta in 0.05f64..0.9, c in 0.0f64..1e-6,
        dc in 0.0f64..1e-6, dtheta in 0.0f64..0.09, dbeta in 0.0f64..0.09,
        pscale in 1.0f64..2.0, eta in 0.3f64..0.9, es_scale in 1.0f64..2.0,
    ) {
        let fit = &table_fits()[k];
        let s = SwiptParams { eta, ..swipt(theta, 0.5) };
        let base = p11(q, fit, &s, beta, E_S, c);
        let tol = 1e-12;
        prop_assert!((0.0..=1.0).contains(&base));
        prop_assert!(p11(q, fit, &s, beta, E_S, c + dc) >= base - tol);
        prop_assert!(p11(q, fit, &s, beta + dbeta, E_S, c) >= base - tol);
        let more_power = SwiptParams { p_ap: s.p_ap * pscale, ..s };
        let more_eta = SwiptParams { eta: (eta * pscale).min(1.0), ..s };
        let more_theta = SwiptParams { theta: theta + dtheta, ..s };
        prop_assert!(p11(q, fit, &more_power, beta, E_S, c) >= base - tol);
        prop_assert!(p11(q, fit, &more_eta, beta, E_S, c) >= base - tol);
        prop_assert!(p11(q, fit, &more_theta, beta, E_S, c) <= base + tol);
        prop_assert!(p11(q, fit, &s, beta, E_S * es_scale, c) <= base + tol);
    }

    #[test]
    fn outage_grows_with_horizon(q in 1usize..10, k in 0usize..2, theta in 0.05f64..0.95, c in 0.0f64..1e-6) {
        let fit = &table_fits()[k];
        let s = swipt(theta, 0.65);
        let a = buffered_outage(q, fit, &s, 0.65, E_S, c);
        let b = buffered_outage(q + 1, fit, &s, 0.65, E_S, c);
        prop_assert!(b >= a - 1e-12);
    }

    #[test]
    fn marcum_matches_series(
        half in 1usize..5, k in 0usize..2, theta in 0.05f64..0.95,
        beta in 0.05f64..0.95, c in 0.0f64..1e-6, m in 0.5f64..3.0,
    ) {
        let q = 2 * half;
        let fit = &table_fits()[k];
        let s = swipt(theta, beta);
        let a = p11_noncentral(q, fit, &s, beta, E_S * m, c);
        let b = p11_series(q, fit, &s, beta, E_S * m, c).unwrap();
        prop_assert!((a - b).abs() < 1e-8, "q={} marcum {} series {}", q, a, b);
    }

    // The Gamma law of Z and the Gaussian-Z noncentral model differ in
    // skewness; the gap peaks near the median at about 0.0114.
    #[test]
    fn first_slot_forms_close(k in 0usize..2, theta in 0.05f64..0.95, beta in 0.05f64..0.95, m in 0.5f64..3.0) {
        let fit = &table_fits()[k];
        let s = swipt(theta, beta);
        let a = p11(1, fit, &s, beta, E_S * m, 0.0);
        let b = p11_noncentral(1, fit, &s, beta, E_S * m, 0.0);
        prop_assert!((a - b).abs() < 0.012, "gamma {} marcum {}", a, b);
    }

    #[test]
    fn downlink_monotone(
        theta in 0.05f64..0.9, beta in 0.05f64..0.9, alpha_r in 0.55f64..0.95,
        snr in 0.0f64..30.0, d in 0.0f64..0.09, pscale in 1.0f64..10.0,
    ) {
        let [fr, ft] = table_fits();
        let mut p = SystemParams::default().with_snr_db(snr);
        p.set_alpha_r(alpha_r);
        let s = swipt(theta, beta);
        let n = p.noma;
        let r0 = downlink_outage_r(&fr, &n, &s);
        let t0 = downlink_outage_t(&ft, &n, &SwiptParams { beta_t: beta, ..s });
        let tol = 1e-12;
        for s2 in [
            SwiptParams { p_ap: s.p_ap * pscale, ..s },
            SwiptParams { theta: theta + d, ..s },
            SwiptParams { beta_r: beta + d, ..s },
        ] {
            prop_assert!(downlink_outage_r(&fr, &n, &s2) <= r0 + tol);
        }
        for s2 in [
            SwiptParams { p_ap: s.p_ap * pscale, beta_t: beta, ..s },
            SwiptParams { theta: theta + d, beta_t: beta, ..s },
            SwiptParams { beta_t: beta + d, ..s },
        ] {
            prop_assert!(downlink_outage_t(&ft, &n, &s2) <= t0 + tol);
        }
    }

    #[test]
    fn downlink_certain_without_power_margin(alpha_r in 0.05f64..0.95, r in 0.1f64..3.0) {
        let [fr, ft] = table_fits();
        let mut n = NomaParams { r_target: r, ..NomaParams::default() };
        n.alpha_r = alpha_r;
        n.alpha_t = 1.0 - alpha_r;
        prop_assume!(n.alpha_r <= n.alpha_t * n.gamma_th());
        let s = SwiptParams::default();
        prop_assert_eq!(downlink_outage_r(&fr, &n, &s), 1.0);
        prop_assert_eq!(downlink_outage_t(&ft, &n, &s), 1.0);
    }

    #[test]
    fn joint_outage_bounds(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let j = joint_outage(a, b);
        prop_assert!(j >= a.max(b) - 1e-15 && j <= a + b + 1e-15 && j <= 1.0);
    }

    #[test]
    fn horizon_strictly_increasing(p in 0.01f64..0.99, q in 1usize..6) {
        prop_assert!(info_outage_horizon(p, q + 1) > info_outage_horizon(p, q));
    }

    #[test]
    fn fairness_range(a in 0.0f64..10.0, b in 0.001f64..10.0) {
        let j = jfi(a, b).unwrap();
        prop_assert!((0.5 - 1e-12..=1.0 + 1e-12).contains(&j));
    }

    #[test]
    fn projection_idempotent(b in -0.5f64..1.5, a in -0.5f64..1.5, x in -1.0f64..2.0, y in -1.0f64..2.0) {
        let once = project([b, x, a, y]);
        prop_assert_eq!(project(once), once);
        prop_assert!((once[0] + once[1] - 1.0).abs() < 1e-15);
        prop_assert!((once[2] + once[3] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn leveled_buffer_stays_on_grid(
        levels in 3u8..5, c_max in 1e-7f64..1e-5,
        start in 0.0f64..2e-5, steps in proptest::collection::vec((0.0f64..4e-6, 0.0f64..4e-6), 1..10),
    ) {
        let mut b = LeveledBuffer::new(start, c_max, levels);
        let d = c_max / (levels as f64 - 1.0);
        for (h, e) in steps {
            let before = b.level;
            let (next, outage) = leveled_buffer_step(b, h, e);
            prop_assert_eq!(outage, before + h < e);
            prop_assert!(next.level >= 0.0 && next.level <= c_max);
            let k = next.level / d;
            prop_assert!((k - k.round()).abs() < 1e-9);
            b = next;
        }
    }
}

// Fitness with penalty weights scaled by `s`.
fn scaled(p: &SystemParams, s: f64) -> Objective {
    let h = PsoHyper { lambda1: Some(2e-3 * s), lambda2: Some(3e-3 * s), ..PsoHyper::default() };
    Objective::new(p, &h).unwrap()
}

fn pso_setup() -> SystemParams {
    let mut p = SystemParams::default();
    p.swipt.theta = 0.1;
    p.noma.r_target = 0.5;
    p.set_snr_db(30.0);
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn penalty_scales_linearly(br in 0.0f64..1.0, ar in 0.0f64..1.0, s in 0.1f64..10.0) {
        let p = pso_setup();
        let d: Position = project([br, 0.0, ar, 0.0]);
        let a = scaled(&p, 1.0).evaluate(&d);
        let b = scaled(&p, s).evaluate(&d);
        let tol = 1e-12 * (1.0 + a.fitness.abs() * s);
        prop_assert!((b.fitness - b.psi_up - s * (a.fitness - a.psi_up)).abs() <= tol);
        if a.feasible {
            prop_assert_eq!(a.fitness, b.fitness);
        }
    }

    #[test]
    fn swarm_trace_monotone_and_reproducible(seed in 0u64..1000) {
        let p = pso_setup();
        let h = PsoHyper { n_particles: 6, n_iterations: 6, ..PsoHyper::default() };
        let a = optimize(&p, &h, seed).unwrap();
        prop_assert!(a.trace.windows(2).all(|w| w[1] >= w[0]));
        let b = optimize(&p, &h, seed).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn feasible_candidates_ignore_penalty_scale() {
    let p = pso_setup();
    let h = PsoHyper { n_particles: 10, n_iterations: 10, ..PsoHyper::default() };
    let best = optimize(&p, &h, 7).unwrap();
    assert!(best.feasible);
    for s in [0.01, 1.0, 100.0] {
        assert_eq!(scaled(&p, s).evaluate(&best.best).fitness, best.evaluation.psi_up);
    }
}

fn theta_snr_grid() -> Vec<SystemParams> {
    let mut out = Vec::new();
    for theta in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let mut p = SystemParams::default();
        p.swipt.theta = theta;
        out.push(p);
    }
    for snr in [0.0, 7.5, 15.0, 22.5, 30.0] {
        out.push(SystemParams::default().with_snr_db(snr));
    }
    out
}

#[test]
fn quadrature_converged_at_thirty_nodes() {
    for p in theta_snr_grid() {
        let fits = link::fits(&p).unwrap();
        let mut q60 = p.clone();
        q60.gh_nodes = 60;
        let a = uplink_outages(&p, &fits, &UplinkQuadrature::from_params(&p));
        let b = uplink_outages(&q60, &fits, &UplinkQuadrature::from_params(&q60));
        for k in 0..2 {
            assert!((a[k] - b[k]).abs() < 1e-4, "theta {} snr {}: {} vs {}", p.swipt.theta, p.snr_db(), a[k], b[k]);
        }
    }
}

// Where the mean harvest covers the consumption the buffer can only help.
#[test]
fn buffered_beats_buffer_less_when_sustainable() {
    let mut checked = 0;
    for m_bits in [0.5, 1.0, 2.0, 3.0] {
        for theta in [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9] {
            for beta_r in [0.3, 0.5, 0.65, 0.8] {
                for initial_c in [0.0, 1e-7, 1e-6] {
                    let mut p = SystemParams::default();
                    p.consumption.m_bits = m_bits;
                    p.swipt.theta = theta;
                    p.set_beta_r(beta_r);
                    p.initial_c = initial_c;
                    let fits = link::fits(&p).unwrap();
                    let buf = power_outages(&p, &fits, AnalyticBuffer::Buffered);
                    let bl = power_outages(&p, &fits, AnalyticBuffer::BufferLess);
                    for k in User::BOTH {
                        let i = k.index();
                        let r = residual_energy(p.q_slots, &fits[i], &p.swipt, p.beta(k), p.e_s(k), 0.0);
                        if r.sustainable {
                            checked += 1;
                            assert!(buf[i] <= bl[i] + 1e-12, "M {m_bits} theta {theta} beta {beta_r} C {initial_c} {k:?}");
                        }
                    }
                }
            }
        }
    }
    assert!(checked > 50);
}

#[test]
fn buffer_less_uses_first_slot_only() {
    let p = SystemParams::default();
    let fits = link::fits(&p).unwrap();
    let bl = power_outages(&p, &fits, AnalyticBuffer::BufferLess);
    for k in User::BOTH {
        let i = k.index();
        let p1 = p11(1, &fits[i], &p.swipt, p.beta(k), p.e_s(k), 0.0);
        assert_eq!(bl[i], buffer_less_outage(p1, p.q_slots));
    }
}
