use proptest::prelude::*;
use vrd_core::devsim::{ChipGeometry, ConditionPreset, DeviceModel, DeviceSpec, Fraction, RowDistribution};
use vrd_core::profiler::{
    bitflip_census_at, coarse_min_scan, measure_row_rdt, profile_device, rdt_percentile, summarize, weak_row_census,
    HammerGrid,
};

fn small_device(seed: u64, jitter: f64, rows_per_bank: u32, temp: u32) -> DeviceModel {
    let geometry = ChipGeometry {
        banks: 2,
        rows_per_bank,
        bits_per_row: 1024,
        tested_row_fraction: Fraction { num: 1, den: 4 },
    };
    let dist = RowDistribution {
        jitter_half_width: jitter,
        weak_rows_per_bank: 3,
        ..Default::default()
    };
    let preset = ConditionPreset::standard(temp, 35).unwrap();
    DeviceModel::new(geometry, dist, preset, seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn flips_grow_with_hammer_count(seed in any::<u64>(), jitter in 0.0..0.3f64, a in 1u64..40_000, b in 1u64..40_000) {
        let mut d = small_device(seed, jitter, 64, 50);
        let e = d.begin_episode();
        let (lo, hi) = (a.min(b), a.max(b));
        for &row in d.tested_rows() {
            let small = d.hammer(row, lo, e).unwrap();
            let large = d.hammer(row, hi, e).unwrap();
            prop_assert!(small.is_subset(&large));
            let rdt = d.oracle_true_rdt(row, e).unwrap();
            prop_assert_eq!(d.hammer(row, rdt, e).unwrap().is_empty(), false);
            if rdt > 1 {
                prop_assert!(d.hammer(row, rdt - 1, e).unwrap().is_empty());
            }
        }
    }

    #[test]
    fn realized_rdt_stays_in_jitter_band(seed in any::<u64>(), jitter in 0.0..0.3f64, episodes in 1usize..6) {
        let mut d = small_device(seed, jitter, 64, 80);
        let scale = d.preset().rdt_scale;
        for _ in 0..episodes {
            let e = d.begin_episode();
            for &row in d.tested_rows() {
                let base = d.row_model(row).unwrap().base_rdt as f64;
                let rdt = d.oracle_true_rdt(row, e).unwrap() as f64;
                prop_assert!(rdt >= (base * (1.0 - jitter) * scale).floor().max(1.0));
                prop_assert!(rdt <= (base * (1.0 + jitter) * scale).ceil());
            }
        }
    }

    #[test]
    fn measured_rdt_brackets_truth(seed in any::<u64>(), jitter in 0.0..0.3f64, start in 1u64..6000, step in 1u64..700, len in 1u64..60) {
        let mut d = small_device(seed, jitter, 64, 65);
        let grid = HammerGrid::new(start, start + step * (len - 1), step).unwrap();
        let e = d.begin_episode();
        for &row in d.tested_rows() {
            let truth = d.oracle_true_rdt(row, e).unwrap();
            let m = measure_row_rdt(&d, row, &grid, e).unwrap();
            match m.rdt {
                Some(v) => {
                    prop_assert!(grid.contains(v));
                    prop_assert!(v >= truth && (v < truth + step || v == grid.start));
                    prop_assert!(!m.flips.is_empty());
                }
                None => prop_assert!(truth > grid.stop),
            }
        }
    }

    #[test]
    fn coarse_scan_is_grid_ceiling_of_minimum(seed in any::<u64>(), jitter in 0.0..0.3f64) {
        let mut d = small_device(seed, jitter, 128, 50);
        let e = d.begin_episode();
        let grid = HammerGrid::coarse();
        let true_min = d.tested_rows().iter().map(|&r| d.oracle_true_rdt(r, e).unwrap()).min().unwrap();
        match grid.ceiling(true_min) {
            Some(expected) => prop_assert_eq!(coarse_min_scan(&d, &grid).unwrap(), expected),
            None => prop_assert!(coarse_min_scan(&d, &grid).is_err()),
        }
    }

    #[test]
    fn percentile_matches_brute_force(values in proptest::collection::vec(proptest::option::weighted(0.9, 1u64..500), 1..80), q in 0.01..0.99f64) {
        let r = values.len();
        // brute force: largest observed v with at least ceil((1-q)R) rows >= v
        let need = ((1.0 - q) * r as f64 - 1e-9).ceil().max(1.0) as usize;
        let expected = values
            .iter()
            .flatten()
            .copied()
            .filter(|&v| values.iter().filter(|x| x.is_none_or(|x| x >= v)).count() >= need)
            .max();
        let at_or_above_sentinel = values.iter().filter(|x| x.is_none()).count() >= need;
        match rdt_percentile(&values, q) {
            Ok(v) => {
                prop_assert!(!at_or_above_sentinel);
                prop_assert_eq!(Some(v), expected);
            }
            Err(_) => prop_assert!(at_or_above_sentinel),
        }
    }

    #[test]
    fn census_cumulative_is_monotone(seed in any::<u64>(), hc in 3000u64..12_000, reps in 1usize..15) {
        let mut d = small_device(seed, 0.15, 64, 50);
        let c = bitflip_census_at(&mut d, hc, reps).unwrap();
        prop_assert_eq!(c.cumulative_unique.len(), reps);
        prop_assert!(c.cumulative_unique.windows(2).all(|w| w[0] <= w[1]));
        let mut total = 0;
        for (i, n) in c.new_unique.iter().enumerate() {
            total += n;
            prop_assert_eq!(total, c.cumulative_unique[i]);
            prop_assert!(*n <= c.flips_per_repetition[i]);
        }
    }
}

#[test]
fn profiling_is_deterministic_per_seed() {
    let run = |seed| {
        let mut d = small_device(seed, 0.1, 256, 50);
        let p = profile_device(&mut d, 20).unwrap();
        summarize(&p).unwrap()
    };
    assert_eq!(run(5), run(5));
    assert_ne!(run(5).reference_column, run(6).reference_column);
}

#[test]
fn worst_case_device_small_campaign() {
    let mut d = DeviceSpec::worst_case().build(0x5EED).unwrap();
    let run = profile_device(&mut d, 50).unwrap();
    let s = summarize(&run).unwrap();
    assert!(s.guardband_ratio > 0.0 && s.guardband_ratio <= 1.0);
    assert!(s.rdt_p10 > s.reference_rdt_min);
    assert!(run.grid.contains(s.rdt_p10));
    let c = weak_row_census(&run.matrix);
    assert!(c.delta_l >= c.unique_rows());
    assert!(c.n >= 1 && c.n <= c.delta_l);
}

#[test]
fn zero_jitter_profile_repeats_exactly() {
    let mut d = small_device(3, 0.0, 128, 50);
    let run = profile_device(&mut d, 8).unwrap();
    let s = summarize(&run).unwrap();
    assert_eq!(s.guardband_ratio, 1.0);
    for r in 0..run.matrix.rows.len() {
        let v = run.matrix.row_values(r);
        assert!(v.iter().all(|x| *x == v[0]));
    }
}
