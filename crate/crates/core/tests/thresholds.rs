use proptest::prelude::*;
use vrd_core::devsim::{DeviceSpec, RowId};
use vrd_core::errmodel::ModelParams;
use vrd_core::montecarlo::run_trials;
use vrd_core::profiler::{profile_device, summarize, weak_row_census};
use vrd_core::svard::{
    assign_thresholds, generate_trace, simulate_chronus, simulate_para, Bin, RowThreshold, ThresholdMap,
    ThresholdPolicy, TraceKind, DEFAULT_EXTRA_DEMOTION_FRACTION, DEFAULT_PARA_EPSILON,
};

fn rows(n: u32) -> Vec<RowId> {
    (0..n).map(|r| RowId::new(0, r)).collect()
}

fn kind(i: usize) -> TraceKind {
    TraceKind::all()[i % 4]
}

/// Pointwise-larger copy of `map`: each row gets `threshold + bump[i]`.
fn raised(map: &ThresholdMap, bump: &[u64]) -> ThresholdMap {
    let mut entries = std::collections::BTreeMap::new();
    for (i, (row, e)) in map.iter().enumerate() {
        let mut e = *e;
        e.threshold += bump[i % bump.len()];
        entries.insert(row, e);
    }
    ThresholdMap::from_entries(map.guarded, map.relaxed + 1_000_000, entries).unwrap()
}

fn varied_map(n: u32, seed: u64) -> ThresholdMap {
    let entries = rows(n)
        .into_iter()
        .enumerate()
        .map(|(i, row)| {
            let threshold = 16 + (seed.wrapping_mul(31).wrapping_add(i as u64 * 977) % 5000);
            (
                row,
                RowThreshold {
                    threshold,
                    bin: Bin::Relaxed,
                    demotions: 0,
                },
            )
        })
        .collect();
    ThresholdMap::from_entries(1, 100_000, entries).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn larger_thresholds_never_add_refreshes(seed in any::<u64>(), k in 0usize..4, bump in proptest::collection::vec(0u64..3000, 1..8)) {
        let map = varied_map(64, seed);
        let bigger = raised(&map, &bump);
        let trace = generate_trace(kind(k), &rows(64), 20_000, seed).unwrap();
        let p0 = simulate_para(&trace, &map, DEFAULT_PARA_EPSILON, seed ^ 1).unwrap();
        let p1 = simulate_para(&trace, &bigger, DEFAULT_PARA_EPSILON, seed ^ 1).unwrap();
        prop_assert!(p1.preventive_refreshes <= p0.preventive_refreshes);
        let c0 = simulate_chronus(&trace, &map).unwrap();
        let c1 = simulate_chronus(&trace, &bigger).unwrap();
        prop_assert!(c1.preventive_refreshes <= c0.preventive_refreshes);
    }

    #[test]
    fn chronus_never_lets_a_row_exceed_half_threshold(seed in any::<u64>(), k in 0usize..4) {
        let map = varied_map(32, seed);
        let trace = generate_trace(kind(k), &rows(32), 30_000, seed).unwrap();
        let stats = simulate_chronus(&trace, &map).unwrap();
        let worst = map.iter().map(|(_, e)| (e.threshold / 2).max(1)).max().unwrap();
        prop_assert!(stats.max_counter_seen.unwrap() <= worst);
        // per-row: activations between refreshes never exceed the trigger
        let mut since = std::collections::HashMap::new();
        for r in &trace.activations {
            let t = (map.threshold(*r).unwrap() / 2).max(1);
            let c = since.entry(*r).or_insert(0u64);
            *c += 1;
            prop_assert!(*c <= t);
            if *c == t {
                *c = 0;
            }
        }
    }

    #[test]
    fn chronus_single_row_count_is_exact(a in 0u64..50_000, rdt in 1u64..5000, seed in any::<u64>()) {
        let map = ThresholdMap::uniform(&rows(8), rdt).unwrap();
        let trace = generate_trace(TraceKind::SingleRowHammer, &rows(8), a, seed).unwrap();
        let stats = simulate_chronus(&trace, &map).unwrap();
        prop_assert_eq!(stats.preventive_refreshes, a / (rdt / 2).max(1));
        let expected = if a == 0 { 0.0 } else { 1000.0 * stats.preventive_refreshes as f64 / a as f64 };
        prop_assert!((stats.refresh_rate_per_kilo_act - expected).abs() < 1e-12);
    }

    #[test]
    fn mitigations_are_deterministic(seed in any::<u64>(), k in 0usize..4) {
        let map = varied_map(40, 3);
        let t1 = generate_trace(kind(k), &rows(40), 5000, seed).unwrap();
        let t2 = generate_trace(kind(k), &rows(40), 5000, seed).unwrap();
        prop_assert_eq!(simulate_para(&t1, &map, 1e-15, 7).unwrap(), simulate_para(&t2, &map, 1e-15, 7).unwrap());
        prop_assert_eq!(simulate_chronus(&t1, &map).unwrap(), simulate_chronus(&t2, &map).unwrap());
    }
}

#[test]
fn two_bin_map_on_worst_case_device() {
    let mut d = DeviceSpec::worst_case().build(0x5EED).unwrap();
    let run = profile_device(&mut d, 20).unwrap();
    let s = summarize(&run).unwrap();
    let oversized = assign_thresholds(&s, ThresholdPolicy::OneSizeFitsAll, DEFAULT_EXTRA_DEMOTION_FRACTION).unwrap();
    let svard = assign_thresholds(&s, ThresholdPolicy::SvardTwoBin, DEFAULT_EXTRA_DEMOTION_FRACTION).unwrap();

    assert_eq!(svard.len(), d.tested_rows().len());
    assert_eq!(svard.guarded, s.reference_rdt_min * 79 / 100);
    assert!(svard.guarded < svard.relaxed);
    let frac = svard.count_in(Bin::Guarded) as f64 / svard.len() as f64;
    assert!((frac - 0.20).abs() <= 0.02, "guarded fraction {frac}");
    assert!(svard.dominates(&oversized));

    let universe: Vec<RowId> = d.tested_rows().to_vec();
    for seed in 0..3 {
        let trace = generate_trace(TraceKind::Uniform, &universe, 50_000, seed).unwrap();
        let a = simulate_para(&trace, &oversized, DEFAULT_PARA_EPSILON, seed).unwrap();
        let b = simulate_para(&trace, &svard, DEFAULT_PARA_EPSILON, seed).unwrap();
        assert!(b.refresh_rate_per_kilo_act < a.refresh_rate_per_kilo_act);
        // larger thresholds: counters catch up less often than PARA fires
        let c = simulate_chronus(&trace, &svard).unwrap();
        assert!(c.refresh_rate_per_kilo_act <= b.refresh_rate_per_kilo_act);
    }
}

#[test]
fn demoting_weak_rows_lengthens_time_to_failure() {
    let mut d = DeviceSpec::worst_case().build(0x5EED).unwrap();
    let run = profile_device(&mut d, 20).unwrap();
    let s = summarize(&run).unwrap();
    let census = weak_row_census(&run.matrix);
    let mut map = assign_thresholds(&s, ThresholdPolicy::SvardTwoBin, DEFAULT_EXTRA_DEMOTION_FRACTION).unwrap();
    for &row in &census.weak_rows {
        let before = map.threshold(row).unwrap();
        map.demote(row).unwrap();
        assert_eq!(map.threshold(row).unwrap(), (before / 2).max(1));
    }

    // flipped locations leave L once detected
    let p = ModelParams::new(12, 5);
    let horizon = 3_000_000;
    let kept = run_trials(&p, 300, horizon, 17).unwrap();
    let removed = run_trials(&p.clone().with_removal(true), 300, horizon, 17).unwrap();
    let mean = |e: &vrd_core::Ensemble| {
        e.results
            .iter()
            .map(|r| r.first_failure_epoch.unwrap_or(horizon) as f64)
            .sum::<f64>()
            / e.results.len() as f64
    };
    assert!(mean(&removed) > 5.0 * mean(&kept));
}
