use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion, Throughput};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use starswipt_core::energy::p11;
use starswipt_core::link::{analytic_metrics, fits, uplink_outages, UplinkQuadrature};
use starswipt_core::mc::{run_trials, LegSharing, Scheme};
use starswipt_core::pso::{step, Objective};
use starswipt_core::*;

fn closed_forms(c: &mut Criterion) {
    let p = SystemParams::default();
    let fit = p.fit(User::Reflect).unwrap();
    let e_s = p.e_s(User::Reflect);
    let mut g = c.benchmark_group("closed_form");
    g.bench_function("p11_q1", |b| b.iter(|| p11(1, black_box(&fit), &p.swipt, p.swipt.beta_r, e_s, 0.0)));
    g.bench_function("p11_q5", |b| b.iter(|| p11(5, black_box(&fit), &p.swipt, p.swipt.beta_r, e_s, 0.0)));
    let f = fits(&p).unwrap();
    for nodes in [30, 60] {
        let quad = UplinkQuadrature::new(nodes, GhMode::Adaptive, false);
        g.bench_function(format!("uplink_gh{nodes}"), |b| b.iter(|| uplink_outages(black_box(&p), &f, &quad)));
    }
    g.bench_function("all_metrics", |b| b.iter(|| analytic_metrics(black_box(&p), AnalyticBuffer::Buffered).unwrap()));
    g.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let p = SystemParams::default();
    let n = 20_000;
    let mut g = c.benchmark_group("monte_carlo");
    g.sample_size(10);
    g.throughput(Throughput::Elements(n));
    for (name, legs) in [("physical", LegSharing::Physical), ("independent", LegSharing::Independent)] {
        let v = VariantConfig::new(Scheme::Proposed).with_legs(legs);
        g.bench_function(name, |b| b.iter(|| run_trials(&p, &v, n, 1).unwrap()));
    }
    g.finish();
}

fn swarm(c: &mut Criterion) {
    let mut p = SystemParams::default();
    p.swipt.theta = 0.1;
    p.noma.r_target = 0.5;
    p.set_snr_db(30.0);
    let hyper = PsoHyper::default();
    let obj = Objective::new(&p, &hyper).unwrap();
    let f = |d: &pso::Position| obj.fitness(d);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let state = SwarmState::init(&hyper, &f, &mut rng);
    c.bench_function("pso_step", |b| {
        b.iter(|| {
            let mut rng = ChaCha8Rng::seed_from_u64(2);
            step(black_box(&state), &hyper, &f, &mut rng)
        })
    });
}

criterion_group!(benches, closed_forms, monte_carlo, swarm);
criterion_main!(benches);
