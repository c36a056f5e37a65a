use barropt::mc::{simulate_paths, simulate_value, SimConfig, SimError};
use barropt_core::{BarrierSet, HyperExpJumps, LevyModel, Phase, RewardFunction, ScaleFunctions, ValueFunction};
use proptest::prelude::*;

fn reference() -> (LevyModel, ScaleFunctions, RewardFunction) {
    let m = LevyModel::brownian(2.4, 2.0, 0.2).unwrap();
    let sf = ScaleFunctions::new(&m).unwrap();
    (m, sf, RewardFunction::reference_rational())
}

fn three() -> BarrierSet {
    BarrierSet::new(vec![0.916486, 1.149661, 2.192379]).unwrap()
}

#[test]
fn start_at_zero_is_immediate_ruin() {
    let (m, _, r) = reference();
    let cfg = SimConfig { n_paths: 1000, x0: 0.0, ..SimConfig::default() };
    let est = simulate_value(&m, &r, &three(), &cfg).unwrap();
    assert_eq!(est.mean, 0.0);
    assert_eq!(est.n_ruined, 1000);
}

#[test]
fn reference_multibarrier_value_matches() {
    let (m, sf, r) = reference();
    let vf = ValueFunction::new(&sf, &r, three()).unwrap();
    let cfg = SimConfig { n_paths: 100_000, x0: 1.5, bridge: true, ..SimConfig::default() };
    let est = simulate_value(&m, &r, &three(), &cfg).unwrap();
    let v = vf.value(1.5);
    assert!((est.mean - v).abs() < 3.0 * est.stderr, "{} +/- {} vs {v}", est.mean, est.stderr);
    assert!(est.truncation_bound < 1e-10);
}

#[test]
fn push_region_start_adds_the_lump() {
    // The same streams drive both runs, so after the initial push the paths
    // coincide.
    let (m, _, r) = reference();
    let b = BarrierSet::single(0.9165).unwrap();
    let at_b = SimConfig { n_paths: 2000, x0: 0.9165, ..SimConfig::default() };
    let above = SimConfig { x0: 2.4, ..at_b.clone() };
    let low = simulate_value(&m, &r, &b, &at_b).unwrap();
    let high = simulate_value(&m, &r, &b, &above).unwrap();
    let lump = r.lump_reward(2.4, 0.9165).unwrap();
    assert!((high.mean - lump - low.mean).abs() < 1e-12, "{} vs {}", high.mean - lump, low.mean);
}

#[test]
fn same_seed_same_estimate_for_any_worker_count() {
    let (m, _, r) = reference();
    let cfg = SimConfig { n_paths: 4000, x0: 1.3, ..SimConfig::default() };
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| simulate_value(&m, &r, &three(), &cfg).unwrap())
    };
    let a = run(1);
    let b = run(4);
    assert_eq!(a, b);
    let other = simulate_value(&m, &r, &three(), &SimConfig { seed: 7, ..cfg.clone() }).unwrap();
    assert_ne!(a.mean, other.mean);
}

#[test]
fn halving_dt_moves_the_estimate_less_than_two_stderr() {
    let (m, _, r) = reference();
    let base = SimConfig { n_paths: 40_000, x0: 1.5, bridge: true, dt: 2e-4, ..SimConfig::default() };
    let coarse = simulate_value(&m, &r, &three(), &base).unwrap();
    let fine = simulate_value(&m, &r, &three(), &SimConfig { dt: 1e-4, seed: 43, ..base }).unwrap();
    let se = coarse.stderr.hypot(fine.stderr);
    assert!((coarse.mean - fine.mean).abs() < 2.0 * se, "{} vs {}", coarse.mean, fine.mean);
}

#[test]
fn antithetic_pairs_agree_with_the_formula() {
    let (m, sf, r) = reference();
    let b = BarrierSet::single(1.2).unwrap();
    let vf = ValueFunction::new(&sf, &r, b.clone()).unwrap();
    let cfg = SimConfig { n_paths: 40_000, x0: 0.7, antithetic: true, bridge: true, ..SimConfig::default() };
    let est = simulate_value(&m, &r, &b, &cfg).unwrap();
    let v = vf.value(0.7);
    assert!((est.mean - v).abs() < 3.0 * est.stderr, "{} +/- {} vs {v}", est.mean, est.stderr);
    let odd = SimConfig { n_paths: 41, ..cfg };
    assert!(matches!(simulate_value(&m, &r, &b, &odd), Err(SimError::Config(_))));
}

#[test]
fn jump_model_single_barrier_matches() {
    let jumps = HyperExpJumps::new(0.8, vec![Phase { p: 0.3, alpha: 1.0 }, Phase { p: 0.7, alpha: 4.0 }]).unwrap();
    let m = LevyModel::new(2.0, 1.0, 0.2, Some(jumps)).unwrap();
    let sf = ScaleFunctions::new(&m).unwrap();
    let r = RewardFunction::reference_rational();
    let b = BarrierSet::single(1.0).unwrap();
    let vf = ValueFunction::new(&sf, &r, b.clone()).unwrap();
    let cfg = SimConfig { n_paths: 20_000, x0: 0.6, dt: 1e-3, horizon: 100.0, bridge: true, ..SimConfig::default() };
    let est = simulate_value(&m, &r, &b, &cfg).unwrap();
    let v = vf.value(0.6);
    assert!((est.mean - v).abs() < 3.0 * est.stderr, "{} +/- {} vs {v}", est.mean, est.stderr);
}

#[test]
fn invalid_configurations() {
    let (m, _, r) = reference();
    let cfg = SimConfig { dt: 0.5, horizon: 0.5, ..SimConfig::default() };
    assert!(matches!(simulate_value(&m, &r, &three(), &cfg), Err(SimError::Config(_))));
    let jumps = HyperExpJumps::new(1.0, vec![Phase { p: 1.0, alpha: 2.0 }]).unwrap();
    let jm = LevyModel::new(2.0, 1.0, 0.2, Some(jumps)).unwrap();
    assert!(matches!(
        simulate_value(&jm, &r, &three(), &SimConfig::default()),
        Err(SimError::UnsupportedModel(_))
    ));
    assert!(simulate_paths(&m, &r, &three(), &SimConfig { n_paths: 10, ..SimConfig::default() }, 11).is_err());
}

#[test]
fn traced_paths_are_well_formed() {
    let (m, _, r) = reference();
    let bset = three();
    let levels = bset.levels();
    let cfg = SimConfig { n_paths: 100, x0: 3.0, horizon: 20.0, ..SimConfig::default() };
    let rows = simulate_paths(&m, &r, &bset, &cfg, 100).unwrap();
    let mut seen = 0;
    for path in 0..100 {
        let p: Vec<_> = rows.iter().filter(|r| r.path == path).collect();
        seen += 1;
        assert!(p.windows(2).all(|w| w[1].l >= w[0].l), "L decreased on path {path}");
        assert!(p.windows(2).all(|w| w[1].regime <= w[0].regime), "regime rose on path {path}");
        assert!(p.windows(2).all(|w| w[1].t > w[0].t));
        assert!(p.iter().all(|r| r.x <= levels[2 * r.regime] + 1e-12));
        assert!(p.iter().filter(|r| r.ruined).count() <= 1);
    }
    assert_eq!(seen, 100);
    // Starting above the top barrier pushes straight down to it.
    assert!(rows.iter().filter(|r| r.t == 0.0).all(|r| r.x == levels[2] && r.regime == 1));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn control_and_reward_never_decrease(b in 0.2..2.5f64, x0 in 0.0..4.0f64, seed in any::<u64>(), bridge in any::<bool>()) {
        let (m, _, r) = reference();
        let bset = BarrierSet::single(b).unwrap();
        let cfg = SimConfig { n_paths: 8, x0, seed, bridge, horizon: 5.0, dt: 1e-3, ..SimConfig::default() };
        let rows = simulate_paths(&m, &r, &bset, &cfg, 8).unwrap();
        for w in rows.windows(2).filter(|w| w[0].path == w[1].path) {
            prop_assert!(w[1].l >= w[0].l);
            prop_assert!(w[1].reward >= w[0].reward);
            prop_assert!(w[1].x <= b + 1e-12);
        }
    }
}
