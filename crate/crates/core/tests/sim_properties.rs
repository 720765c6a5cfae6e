use policybound_core::sim::{aggregate, draw_accepted, draw_latent, Replication};
use policybound_core::{
    draw_dataset, make_illustration, run_replication, run_replications, AcceptanceRule, DGPParams, Estimator, Norm,
    StudyConfig, TauRule,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn treatment_shares_at_a_million_units() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = 1_000_000;
    let latent = draw_latent(&DGPParams::default(), n, &mut rng);
    let mut c = [0usize; 3];
    for l in &latent {
        c[l.m as usize] += 1;
    }
    let shares = c.map(|k| k as f64 / n as f64);
    for (got, want) in shares.iter().zip([0.33, 0.26, 0.41]) {
        assert!((got - want).abs() < 0.01, "{shares:?}");
    }
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    sxy / x.iter().map(|a| (a - mx) * (a - mx)).sum::<f64>()
}

#[test]
fn realised_effects_follow_version_cate_slopes() {
    let ds = draw_dataset(&DGPParams::default(), 100_000, 8).unwrap();
    for (m, want) in [(1, 1.125), (2, -1.6875)] {
        let (x, y): (Vec<f64>, Vec<f64>) =
            ds.latent.iter().zip(&ds.true_ite).filter(|(l, _)| l.m1 == m).map(|(l, &v)| (l.x, v)).unzip();
        let b = slope(&x, &y);
        assert!((b - want).abs() < 0.02, "m={m}: {b}");
    }
}

#[test]
fn average_version_effects_at_a_million_units() {
    let ds = draw_dataset(&DGPParams { periods: 2, ..DGPParams::default() }, 1_000_000, 9).unwrap();
    for (m, want) in [(1usize, 1.0), (2, -1.5)] {
        let mean = ds.potential.iter().map(|p| p[m] - p[0]).sum::<f64>() / ds.potential.len() as f64;
        assert!((mean - want).abs() < 0.01, "m={m}: {mean}");
    }
}

#[test]
fn draws_are_reproducible_and_consistent() {
    let a = draw_dataset(&DGPParams::default(), 50, 1).unwrap();
    let b = draw_dataset(&DGPParams::default(), 50, 1).unwrap();
    assert_eq!(a, b);
    let t = a.panel.n_periods();
    for (i, l) in a.latent.iter().enumerate() {
        assert_eq!(l.m, if l.a { l.m1 } else { 0 });
        assert_eq!(a.panel.outcome(i, t), a.potential[i][l.m as usize]);
    }
}

#[test]
fn acceptance_rate_at_fifty_units() {
    let mut cfg = StudyConfig::new(50, 2000, 31);
    cfg.acceptance = AcceptanceRule::VersionLevels;
    let rejected: usize = (0..cfg.reps).map(|r| draw_accepted(&cfg, r).unwrap().1).sum();
    let rate = cfg.reps as f64 / (cfg.reps + rejected) as f64;
    assert!(rate > 0.99, "{rate}");
}

#[test]
fn replications_do_not_depend_on_evaluation_order() {
    let cfg = StudyConfig::new(25, 40, 5);
    let forward: Vec<Replication> = (0..cfg.reps).map(|r| run_replication(&cfg, r).unwrap()).collect();
    let mut backward: Vec<Replication> = (0..cfg.reps).rev().map(|r| run_replication(&cfg, r).unwrap()).collect();
    backward.reverse();
    assert_eq!(forward, backward);
    let report = aggregate(&cfg, &forward).unwrap();
    assert_eq!(report, run_replications(&cfg).unwrap());
    let again = run_replications(&cfg).unwrap();
    for (a, b) in report.estimators.iter().zip(&again.estimators) {
        assert_eq!(a.treated_coverage.to_bits(), b.treated_coverage.to_bits());
        assert_eq!(a.control_power_and_sign.to_bits(), b.control_power_and_sign.to_bits());
    }
}

#[test]
fn larger_z_never_lowers_coverage_or_raises_power() {
    let zs = [0.5, 1.0, 2.0, 3.0];
    for r in 0..30 {
        let mut prev: Option<(f64, f64, f64, f64)> = None;
        for &z in &zs {
            let mut cfg = StudyConfig::new(25, 30, 13);
            cfg.rule = TauRule::norm_based(Norm::L1Mean, z).unwrap();
            let rep = run_replication(&cfg, r).unwrap();
            let m = rep.metrics[Estimator::Tau as usize].unwrap();
            let cur = (m.treated.coverage, m.control.coverage, m.treated.power_and_sign, m.control.power_and_sign);
            if let Some(p) = prev {
                assert!(cur.0 >= p.0 && cur.1 >= p.1 && cur.2 <= p.2 && cur.3 <= p.3, "rep {r} z {z}");
            }
            prev = Some(cur);
        }
    }
}

#[test]
fn failure_budget_is_enforced() {
    let cfg = StudyConfig::new(15, 10, 1);
    let mut reps: Vec<Replication> = (0..10).map(|r| run_replication(&cfg, r).unwrap()).collect();
    reps[3].metrics[4] = None;
    assert!(matches!(aggregate(&cfg, &reps), Err(policybound_core::Error::TooManyFailures { failed: 1, reps: 10 })));
}

#[test]
fn illustration_bundle() {
    let ill = make_illustration(1).unwrap();
    assert_eq!(ill.params.sigma_xu, 0.25);
    let mid = ill.curves.iter().find(|c| c.x.abs() < 1e-12).unwrap();
    assert_eq!((mid.cate1, mid.cate2), (1.0, -1.5));
    assert!((mid.mixture_cate + 0.25).abs() < 1e-15);
    assert_eq!(ill.scatter.len(), 1000);
    // versions select on X: E[X | M(1) = 2] = E[XΦ(X)] / E[Φ(X)] = 1/√π, and −1/√π for version 1
    let shift = 1.0 / std::f64::consts::PI.sqrt();
    for (m, ex) in [(1, -shift), (2, shift)] {
        let want = policybound_core::version_cate(&ill.params, m, ex).unwrap();
        let v: Vec<f64> = ill.scatter.iter().filter(|s| s.version == m).map(|s| s.ite).collect();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        assert!((mean - want).abs() < 0.15, "m={m}: {mean} vs {want}");
    }
}
