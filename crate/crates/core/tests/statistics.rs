//! Distributional checks of the samplers and estimators.

use anderson_core::events::{
    check_inclusions, estimate_event_probs, estimate_gj, measure_c_eps, EventConfig,
};
use anderson_core::exec::Sequential;
use anderson_core::hnorm::{inner_product_bilinear, inner_product_quadrature, g_from_path, QuadratureConfig};
use anderson_core::bounds::BoundConstants;
use anderson_core::moments::{estimate_moment, simulate_solution_fk, FkConfig, FkSimulator, InitialCondition, MomentConfig, Variant};
use anderson_core::paths::{sample_bm, sample_bridge, sample_pinned, TimeGrid};
use anderson_core::rng::{Domain, StreamKey};
use anderson_core::stats::MeanAccumulator;
use anderson_core::CovarianceKernel;

#[test]
fn bm_endpoint_variance() {
    let g = TimeGrid::new(0.8, 1).unwrap();
    let mut acc = MeanAccumulator::default();
    for s in 0..100_000 {
        acc.push(sample_bm(g, &[0.0], StreamKey::new(1, Domain::BrownianPath, s)).coord(1, 0));
    }
    assert!((acc.variance() / 0.8 - 1.0).abs() < 0.03);
}

#[test]
fn bridge_quarter_point_law() {
    let t = 1.2;
    let half = TimeGrid::new(t / 2.0, 8).unwrap();
    let mut acc = MeanAccumulator::default();
    for s in 0..100_000 {
        acc.push(sample_bridge(half, 0.0, 0.0, StreamKey::new(2, Domain::Bridge, s)).coord(4, 0));
    }
    assert!(acc.mean().abs() <= 3.0 * acc.stderr());
    assert!((acc.variance() / (t / 8.0) - 1.0).abs() < 0.03);
}

#[test]
fn pinned_endpoint_law() {
    let t = 1.0;
    let mut acc = MeanAccumulator::default();
    for s in 0..50_000 {
        let p = sample_pinned(t, 0.3, 1.5, 16, StreamKey::new(3, Domain::EventPaths, s)).unwrap();
        acc.push(p.coord(16, 0));
    }
    assert!((acc.mean() - 1.5).abs() <= 3.0 * acc.stderr());
    assert!((acc.variance() / (t / 2.0) - 1.0).abs() < 0.03);
}

fn ks_statistic(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[test]
fn mixed_pinned_paths_are_brownian() {
    let (t, x, k, n) = (1.0, 0.2, 64, 10_000u64);
    let g = TimeGrid::new(t, k).unwrap();
    let sup = |p: &anderson_core::PathSample| (0..=k).map(|i| p.coord(i, 0).abs()).fold(0.0, f64::max);
    let direct: Vec<f64> = (0..n).map(|s| sup(&sample_bm(g, &[x], StreamKey::new(4, Domain::BrownianPath, s)))).collect();
    let mixed: Vec<f64> = (0..n)
        .map(|s| {
            let mut rng = StreamKey::new(4, Domain::HypothesisSampling, s).rng();
            let r = x + (t / 2.0).sqrt() * rng.normal();
            sup(&sample_pinned(t, x, r, k, StreamKey::new(4, Domain::EventPaths, s)).unwrap())
        })
        .collect();
    let d = ks_statistic(direct, mixed);
    let crit = 1.628 * (2.0 / n as f64).sqrt();
    assert!(d < crit, "KS distance {d} >= {crit}");
}

#[test]
fn moment_root_is_monotone_in_n() {
    let kern = CovarianceKernel::fbm(0.3).unwrap();
    let mut prev: Option<(f64, f64)> = None;
    for n in 1..=4 {
        let cfg = MomentConfig {
            n,
            t: 1.0,
            x: vec![0.5],
            kernel: kern.clone(),
            h: 0.3,
            u0: InitialCondition::Constant(1.0),
            samples: 20_000,
            steps: 32,
            seed: 9,
            variant: Variant::Skorohod,
            allow_large: false,
        };
        let e = estimate_moment(&cfg, &Sequential).unwrap();
        let root = e.log_mean / n as f64;
        let se = e.stderr_log / n as f64;
        if let Some((p, pse)) = prev {
            assert!(root >= p - 3.0 * (se * se + pse * pse).sqrt(), "n = {n}: {root} < {p}");
        }
        prev = Some((root, se));
    }
}

#[test]
fn quadrature_converges_to_bilinear() {
    let (h, k) = (0.25, 64);
    let kern = CovarianceKernel::fbm(0.75).unwrap();
    let g = TimeGrid::new(1.0, k).unwrap();
    let mut errs = Vec::new();
    for (per_cell, inner) in [(2, 32), (4, 64), (8, 128)] {
        let qc = QuadratureConfig {
            outer_nodes: per_cell * k,
            inner_nodes: inner,
            ..Default::default()
        };
        let mut worst = 0.0f64;
        for s in 0..5 {
            let p = sample_bm(g, &[0.3], StreamKey::new(6, Domain::BrownianPath, s));
            let exact = inner_product_bilinear(&g_from_path(&p, 1.0, &[0.3]).unwrap(), &g_from_path(&p, 1.0, &[0.3]).unwrap(), &kern, h).unwrap();
            let q = inner_product_quadrature(&p, &p, &kern, h, &qc).unwrap().value;
            worst = worst.max((q - exact).abs() / (1.0 + exact.abs()));
        }
        errs.push(worst);
    }
    assert!(errs[2] < 1e-2, "{errs:?}");
    let order = (errs[0] / errs[2]).log2() / 2.0;
    assert!(order > 0.5, "{errs:?}");
}

#[test]
fn fk_first_moment_is_one() {
    let cfg = FkConfig {
        t: 0.5,
        x: 0.0,
        kernel: CovarianceKernel::fbm(0.25).unwrap(),
        h: 0.3,
        u0: InitialCondition::Constant(1.0),
        z_grid: (0..=160).map(|i| -4.0 + 0.05 * i as f64).collect(),
        steps: 16,
        inner_samples: 20,
        seed: 8,
    };
    let sim = FkSimulator::new(&cfg).unwrap();
    let mut acc = MeanAccumulator::default();
    for w in 0..1000 {
        acc.push(sim.draw(w).value);
    }
    assert!((acc.mean() - 1.0).abs() <= 3.0 * acc.stderr(), "{} ± {}", acc.mean(), acc.stderr());
    assert_eq!(simulate_solution_fk(&cfg, 3).unwrap(), sim.draw(3));
}

fn ev(m: f64, x_j: f64) -> EventConfig {
    EventConfig {
        t: 1.0,
        m,
        x_j,
        eps: 0.25,
        samples: 20_000,
        steps: 128,
        c_eps: 1.0,
    }
}

#[test]
fn a1_and_a2_floors() {
    let p = estimate_event_probs(&ev(2.0, 0.0), 5.0, 1, &Sequential).unwrap();
    assert!(p.p[0].p_hat >= 0.875 - 3.0 * p.p[0].stderr);
    let p = estimate_event_probs(&ev(4.0, 0.0), 8.0, 1, &Sequential).unwrap();
    assert!(p.p[1].p_hat >= 0.5 - 3.0 * p.p[1].stderr);
    assert!(p.p_all.p_hat >= p.structure_bound - 3.0 * p.p_all.stderr);
}

#[test]
fn z_and_y_events_are_uncorrelated() {
    // Small M keeps both indicators away from certainty.
    let c = EventConfig { samples: 40_000, ..ev(0.4, 0.0) };
    let p = estimate_event_probs(&c, 1.0, 5, &Sequential).unwrap();
    let rho = p.zy_correlation.expect("informative parameters");
    assert!(rho.abs() <= 3.0 / (c.samples as f64).sqrt(), "correlation {rho}");
}

#[test]
fn pinning_identity_at_informative_m() {
    let c = EventConfig { samples: 10_000, steps: 64, ..ev(0.5, 0.1) };
    let g = estimate_gj(&c, 3, 33, &Sequential).unwrap();
    assert!(g.direct.p_hat > 0.05, "uninformative: {}", g.direct.p_hat);
    let comb = (g.direct.stderr.powi(2) + g.pinned.stderr.powi(2)).sqrt();
    assert!((g.direct.p_hat - g.pinned.p_hat).abs() <= 3.0 * comb, "{g:?}");
    // An informative M also shows that the negative branch matters.
    assert!(g.pinned.p_hat - g.pinned_positive.p_hat > 0.0);
}

#[test]
fn conditional_probability_at_least_half_at_c1eps_scale() {
    let e = measure_c_eps(1.0, 0.25, 128, 20_000, 4, &Sequential).unwrap();
    let bc = BoundConstants {
        h: 0.25,
        alpha: 0.75,
        beta: 0.75,
        d: 1,
        kernel_c1: 1.0,
        kernel_c2: 1.0,
        q00: 0.0,
        c_h: 1.0,
        eps: 0.25,
        c_eps: e.c_eps,
    };
    let m = bc.c_1eps();
    let c = EventConfig { samples: 2000, c_eps: e.c_eps, ..ev(m, 0.0) };
    for r in [2.0 * m, 2.5 * m, 3.0 * m] {
        let p = estimate_event_probs(&c, r, 2, &Sequential).unwrap();
        assert!(p.p_all.p_hat >= 0.5 - 3.0 * p.p_all.stderr);
    }
}

#[test]
fn inclusions_hold_and_mutations_surface() {
    let c = EventConfig { samples: 5000, ..ev(1.0, 0.2) };
    let rep = check_inclusions(&c, 2.5, 7, 5000, 16.0, &Sequential).unwrap();
    assert_eq!(rep.violations(), 0);
    assert!(rep.a34 > 0 && rep.a12 > 0);
    // Far below the chaining constant the holder implication must break.
    let tight = check_inclusions(&c, 2.5, 7, 5000, 0.5, &Sequential).unwrap();
    assert!(tight.holder_violations > 0);
}
