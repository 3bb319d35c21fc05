//! RDT testing procedures and the statistics derived from repeated measurements.
//!
//! The flow is: a coarse sweep over a fixed hammer-count grid finds RDT_min,
//! a fine grid spanning [RDT_min/2, 2*RDT_min] is derived from it, and every
//! tested row is re-measured on that fine grid once per episode.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::devsim::{BitLocation, BitflipSet, DeviceModel, EpisodeId, RowId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HammerGrid {
    pub start: u64,
    pub stop: u64,
    pub step: u64,
}

impl HammerGrid {
    pub fn new(start: u64, stop: u64, step: u64) -> Result<Self> {
        if step == 0 || start == 0 || start > stop {
            return Err(Error::InvalidGrid(format!("start={start} stop={stop} step={step}")));
        }
        Ok(Self { start, stop, step })
    }

    /// 1,000 to 25,000 in steps of 1,000.
    pub fn coarse() -> Self {
        Self {
            start: 1_000,
            stop: 25_000,
            step: 1_000,
        }
    }

    /// [RDT_min/2, 2*RDT_min] in steps of RDT_min/30 (floored, at least 1).
    pub fn fine(rdt_min: u64) -> Result<Self> {
        if rdt_min == 0 {
            return Err(Error::InvalidGrid("RDT_min must be positive".into()));
        }
        Self::new((rdt_min / 2).max(1), rdt_min * 2, (rdt_min / 30).max(1))
    }

    pub fn points(&self) -> impl Iterator<Item = u64> + '_ {
        (self.start..=self.stop).step_by(self.step as usize)
    }

    pub fn len(&self) -> usize {
        ((self.stop - self.start) / self.step + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, hc: u64) -> bool {
        hc >= self.start && hc <= self.stop && (hc - self.start).is_multiple_of(self.step)
    }

    /// Smallest grid point >= `value`, if any.
    pub fn ceiling(&self, value: u64) -> Option<u64> {
        if value <= self.start {
            return Some(self.start);
        }
        let k = (value - self.start).div_ceil(self.step);
        let p = self.start + k * self.step;
        (p <= self.stop).then_some(p)
    }
}

/// Outcome of measuring one row: the first flipping grid point (`None` when no
/// grid point flips) and the bitflips seen there.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowMeasurement {
    pub rdt: Option<u64>,
    pub flips: BitflipSet,
}

/// Coarse sweep over the tested rows in the current episode. Returns the
/// smallest grid hammer count that flips any row.
pub fn coarse_min_scan(device: &DeviceModel, grid: &HammerGrid) -> Result<u64> {
    let episode = device.current_episode().ok_or(Error::NoEpisode)?;
    let mut best: Option<u64> = None;
    for &row in device.tested_rows() {
        for hc in grid.points() {
            if best.is_some_and(|b| hc >= b) {
                break;
            }
            if !device.hammer(row, hc, episode)?.is_empty() {
                best = Some(hc);
                break;
            }
        }
    }
    best.ok_or(Error::NoFlipInGrid { stop: grid.stop })
}

/// Ascending scan of the fine grid; stops at the first flipping point.
pub fn measure_row_rdt(
    device: &DeviceModel,
    row: RowId,
    grid: &HammerGrid,
    episode: EpisodeId,
) -> Result<RowMeasurement> {
    for hc in grid.points() {
        let flips = device.hammer(row, hc, episode)?;
        if !flips.is_empty() {
            return Ok(RowMeasurement { rdt: Some(hc), flips });
        }
    }
    Ok(RowMeasurement {
        rdt: None,
        flips: BitflipSet::empty(),
    })
}

/// Rows x iterations of measured RDT plus the flips seen at each measured point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdtMatrix {
    pub rows: Vec<RowId>,
    pub iterations: usize,
    pub grid: HammerGrid,
    /// Row-major: `values[row_index * iterations + iteration]`.
    values: Vec<Option<u64>>,
    flips: Vec<BitflipSet>,
}

impl RdtMatrix {
    pub fn from_parts(
        rows: Vec<RowId>,
        iterations: usize,
        grid: HammerGrid,
        values: Vec<Option<u64>>,
        flips: Vec<BitflipSet>,
    ) -> Result<Self> {
        let n = rows.len() * iterations;
        if values.len() != n || flips.len() != n {
            return Err(Error::Malformed(format!(
                "expected {n} cells, got {} values / {} flip logs",
                values.len(),
                flips.len()
            )));
        }
        Ok(Self {
            rows,
            iterations,
            grid,
            values,
            flips,
        })
    }

    pub fn value(&self, row_index: usize, iteration: usize) -> Option<u64> {
        self.values[row_index * self.iterations + iteration]
    }

    pub fn flips(&self, row_index: usize, iteration: usize) -> &BitflipSet {
        &self.flips[row_index * self.iterations + iteration]
    }

    pub fn row_values(&self, row_index: usize) -> &[Option<u64>] {
        let s = row_index * self.iterations;
        &self.values[s..s + self.iterations]
    }

    /// One measurement of every row (a single iteration).
    pub fn column(&self, iteration: usize) -> Vec<Option<u64>> {
        (0..self.rows.len()).map(|r| self.value(r, iteration)).collect()
    }

    /// Per-iteration minimum over rows; `None` when every row is above the grid.
    pub fn rdt_min_per_iteration(&self) -> Vec<Option<u64>> {
        (0..self.iterations)
            .map(|it| (0..self.rows.len()).filter_map(|r| self.value(r, it)).min())
            .collect()
    }
}

/// Measures every tested row once per episode for `iterations` episodes.
pub fn repeated_profile(device: &mut DeviceModel, grid: &HammerGrid, iterations: usize) -> Result<RdtMatrix> {
    let rows = device.tested_rows().to_vec();
    let mut values = vec![None; rows.len() * iterations];
    let mut flips = vec![BitflipSet::empty(); rows.len() * iterations];
    for it in 0..iterations {
        let episode = device.begin_episode();
        for (ri, &row) in rows.iter().enumerate() {
            let m = measure_row_rdt(device, row, grid, episode)?;
            values[ri * iterations + it] = m.rdt;
            flips[ri * iterations + it] = m.flips;
        }
    }
    RdtMatrix::from_parts(rows, iterations, *grid, values, flips)
}

/// Result of the full testing flow: coarse RDT_min, the derived fine grid, and
/// the repeated-measurement matrix.
#[derive(Debug, Clone)]
pub struct ProfileRun {
    pub coarse_rdt_min: u64,
    pub grid: HammerGrid,
    pub matrix: RdtMatrix,
}

pub fn profile_device(device: &mut DeviceModel, iterations: usize) -> Result<ProfileRun> {
    device.begin_episode();
    let coarse_rdt_min = coarse_min_scan(device, &HammerGrid::coarse())?;
    let grid = HammerGrid::fine(coarse_rdt_min)?;
    let matrix = repeated_profile(device, &grid, iterations)?;
    Ok(ProfileRun {
        coarse_rdt_min,
        grid,
        matrix,
    })
}

/// Rows and bit locations that flip at or below the largest per-iteration RDT_min.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakRowCensus {
    /// max over iterations of RDT_min.
    pub hammer_count: u64,
    pub weak_rows: Vec<RowId>,
    /// ΔL: unique bit locations.
    pub delta_l: usize,
    /// N: most flips seen in a single iteration.
    pub n: usize,
    pub per_row_flip_counts: Vec<(RowId, usize)>,
}

impl WeakRowCensus {
    pub fn unique_rows(&self) -> usize {
        self.weak_rows.len()
    }
}

pub fn weak_row_census(matrix: &RdtMatrix) -> WeakRowCensus {
    let hc = matrix.rdt_min_per_iteration().into_iter().flatten().max().unwrap_or(0);
    let mut locations = BTreeSet::new();
    let mut per_row: BTreeMap<RowId, usize> = BTreeMap::new();
    let mut per_iteration = vec![0usize; matrix.iterations];
    for (ri, &row) in matrix.rows.iter().enumerate() {
        for (it, count) in per_iteration.iter_mut().enumerate() {
            if matrix.value(ri, it).is_some_and(|v| v <= hc) {
                let f = matrix.flips(ri, it);
                locations.extend(f.iter().copied());
                *per_row.entry(row).or_default() += f.len();
                *count += f.len();
            }
        }
    }
    WeakRowCensus {
        hammer_count: hc,
        weak_rows: per_row.keys().copied().collect(),
        delta_l: locations.len(),
        n: per_iteration.into_iter().max().unwrap_or(0),
        per_row_flip_counts: per_row.into_iter().collect(),
    }
}

/// Rank of every row in one iteration (1 = smallest RDT). Rows above the grid
/// rank after all measured rows; ties resolve by row id.
pub fn iteration_ranks(matrix: &RdtMatrix, iteration: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..matrix.rows.len()).collect();
    order.sort_by_key(|&r| (matrix.value(r, iteration).unwrap_or(u64::MAX), matrix.rows[r]));
    let mut ranks = vec![0; order.len()];
    for (pos, r) in order.into_iter().enumerate() {
        ranks[r] = pos + 1;
    }
    ranks
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowRanks {
    pub row: RowId,
    pub ranks: Vec<usize>,
}

impl RowRanks {
    pub fn best(&self) -> usize {
        self.ranks.iter().copied().min().unwrap_or(0)
    }

    pub fn worst(&self) -> usize {
        self.ranks.iter().copied().max().unwrap_or(0)
    }

    pub fn count_at(&self, rank: usize) -> usize {
        self.ranks.iter().filter(|&&r| r == rank).count()
    }
}

/// Rank history across iterations for each weak row of the census.
pub fn rank_distribution(matrix: &RdtMatrix) -> Vec<RowRanks> {
    let census = weak_row_census(matrix);
    let all: Vec<Vec<usize>> = (0..matrix.iterations).map(|it| iteration_ranks(matrix, it)).collect();
    census
        .weak_rows
        .iter()
        .map(|row| {
            let ri = matrix
                .rows
                .iter()
                .position(|r| r == row)
                .expect("census rows come from the matrix");
            RowRanks {
                row: *row,
                ranks: all.iter().map(|ranks| ranks[ri]).collect(),
            }
        })
        .collect()
}

/// Curves from repeatedly hammering all tested rows at one hammer count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BitflipCensus {
    pub hammer_count: u64,
    pub flips_per_repetition: Vec<usize>,
    pub cumulative_unique: Vec<usize>,
    pub new_unique: Vec<usize>,
}

impl BitflipCensus {
    /// Share of all unique locations already visible after the first repetition.
    pub fn first_repetition_coverage(&self) -> f64 {
        match (self.cumulative_unique.first(), self.cumulative_unique.last()) {
            (Some(&first), Some(&last)) if last > 0 => first as f64 / last as f64,
            _ => 1.0,
        }
    }
}

pub fn bitflip_census_at(device: &mut DeviceModel, hammer_count: u64, repetitions: usize) -> Result<BitflipCensus> {
    if hammer_count == 0 {
        return Err(Error::ZeroHammerCount);
    }
    let rows = device.tested_rows().to_vec();
    let mut seen: BTreeSet<BitLocation> = BTreeSet::new();
    let mut census = BitflipCensus {
        hammer_count,
        flips_per_repetition: Vec::with_capacity(repetitions),
        cumulative_unique: Vec::with_capacity(repetitions),
        new_unique: Vec::with_capacity(repetitions),
    };
    for _ in 0..repetitions {
        let episode = device.begin_episode();
        let before = seen.len();
        let mut flips = 0;
        for &row in &rows {
            let set = device.hammer(row, hammer_count, episode)?;
            flips += set.len();
            seen.extend(set.iter().copied());
        }
        census.flips_per_repetition.push(flips);
        census.cumulative_unique.push(seen.len());
        census.new_unique.push(seen.len() - before);
    }
    Ok(census)
}

/// Largest measured value `v` such that at least `1 - q` of rows have RDT >= v.
/// Above-grid entries count as +infinity.
pub fn rdt_percentile(column: &[Option<u64>], q: f64) -> Result<u64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidPercentile(q));
    }
    if column.is_empty() {
        return Err(Error::EmptyColumn);
    }
    let mut sorted: Vec<u64> = column.iter().map(|v| v.unwrap_or(u64::MAX)).collect();
    sorted.sort_unstable();
    let need = required_at_or_above(sorted.len(), q);
    match sorted[sorted.len() - need] {
        u64::MAX => Err(Error::PercentileAboveGrid),
        v => Ok(v),
    }
}

/// Rows that must lie at or above the percentile value: ceil((1 - q) * rows).
pub(crate) fn required_at_or_above(rows: usize, q: f64) -> usize {
    let exact = (1.0 - q) * rows as f64;
    ((exact - 1e-9).ceil() as usize).clamp(1, rows)
}

/// Everything downstream consumers need from one profiling campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSummary {
    pub coarse_rdt_min: u64,
    pub grid: HammerGrid,
    pub iterations: usize,
    pub rdt_min_per_iteration: Vec<Option<u64>>,
    pub guardband_ratio: f64,
    /// RDT_min of the first (single, one-time) measurement.
    pub reference_rdt_min: u64,
    /// RDT_90%: 10th percentile of the first measurement.
    pub rdt_p10: u64,
    pub weak_rows: Vec<RowId>,
    pub max_flips_in_one_iteration: usize,
    pub unique_flip_locations: usize,
    /// Per-row RDT from the first measurement.
    pub reference_column: Vec<(RowId, Option<u64>)>,
}

pub fn summarize(run: &ProfileRun) -> Result<ProfileSummary> {
    let m = &run.matrix;
    if m.iterations == 0 || m.rows.is_empty() {
        return Err(Error::EmptyColumn);
    }
    let per_iteration = m.rdt_min_per_iteration();
    let present: Vec<u64> = per_iteration.iter().flatten().copied().collect();
    let (lo, hi) = match (present.iter().min(), present.iter().max()) {
        (Some(&lo), Some(&hi)) => (lo, hi),
        _ => return Err(Error::NoFlipInGrid { stop: run.grid.stop }),
    };
    let column = m.column(0);
    let reference_rdt_min = column
        .iter()
        .flatten()
        .copied()
        .min()
        .ok_or(Error::NoFlipInGrid { stop: run.grid.stop })?;
    let census = weak_row_census(m);
    Ok(ProfileSummary {
        coarse_rdt_min: run.coarse_rdt_min,
        grid: run.grid,
        iterations: m.iterations,
        rdt_min_per_iteration: per_iteration,
        guardband_ratio: lo as f64 / hi as f64,
        reference_rdt_min,
        rdt_p10: rdt_percentile(&column, 0.10)?,
        weak_rows: census.weak_rows,
        max_flips_in_one_iteration: census.n,
        unique_flip_locations: census.delta_l,
        reference_column: m.rows.iter().copied().zip(column).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::devsim::{ChipGeometry, ConditionPreset, Fraction, RowDistribution};

    fn geometry(rows_per_bank: u32) -> ChipGeometry {
        ChipGeometry {
            banks: 1,
            rows_per_bank,
            bits_per_row: 256,
            tested_row_fraction: Fraction::default(),
        }
    }

    /// Single tested row, base RDT exactly `rdt`, no jitter.
    fn single_row_device(rdt: u64) -> DeviceModel {
        let dist = RowDistribution {
            weak_rows_per_bank: 1,
            weak_rdt_range: (rdt, rdt),
            jitter_half_width: 0.0,
            max_cells_per_row: 1,
            ..Default::default()
        };
        DeviceModel::new(geometry(16), dist, ConditionPreset::reference(), 3).unwrap()
    }

    #[test]
    fn grid_points_and_ceiling() {
        let g = HammerGrid::coarse();
        assert_eq!(g.len(), 25);
        assert_eq!(g.points().last(), Some(25_000));
        assert_eq!(g.ceiling(7_150), Some(8_000));
        assert_eq!(g.ceiling(8_000), Some(8_000));
        assert_eq!(g.ceiling(25_001), None);
        let f = HammerGrid::fine(4_000).unwrap();
        assert_eq!((f.start, f.stop, f.step), (2_000, 8_000, 133));
        assert_eq!(HammerGrid::fine(20).unwrap().step, 1);
        assert!(HammerGrid::new(10, 5, 1).is_err());
        assert!(HammerGrid::new(1, 5, 0).is_err());
    }

    #[test]
    fn coarse_scan_rounds_up_to_grid() {
        let mut d = single_row_device(7_150);
        d.begin_episode();
        assert_eq!(coarse_min_scan(&d, &HammerGrid::coarse()).unwrap(), 8_000);
    }

    #[test]
    fn coarse_scan_reports_no_flip() {
        let mut d = single_row_device(26_000);
        d.begin_episode();
        assert!(matches!(
            coarse_min_scan(&d, &HammerGrid::coarse()),
            Err(Error::NoFlipInGrid { stop: 25_000 })
        ));
    }

    #[test]
    fn fine_measurement_edges() {
        let mut d = single_row_device(900);
        let e = d.begin_episode();
        let row = d.tested_rows()[0];
        let grid = HammerGrid::new(1_000, 2_000, 100).unwrap();
        assert_eq!(measure_row_rdt(&d, row, &grid, e).unwrap().rdt, Some(1_000));
        let mut d = single_row_device(2_500);
        let e = d.begin_episode();
        let m = measure_row_rdt(&d, row, &grid, e).unwrap();
        assert_eq!(m.rdt, None);
        assert!(m.flips.is_empty());
        let mut d = single_row_device(1_234);
        let e = d.begin_episode();
        assert_eq!(measure_row_rdt(&d, row, &grid, e).unwrap().rdt, Some(1_300));
    }

    #[test]
    fn one_iteration_and_zero_jitter_matrices() {
        let dist = RowDistribution {
            jitter_half_width: 0.0,
            weak_rows_per_bank: 2,
            ..Default::default()
        };
        let mut d = DeviceModel::new(geometry(512), dist, ConditionPreset::reference(), 11).unwrap();
        let run = profile_device(&mut d, 1).unwrap();
        assert_eq!(run.matrix.iterations, 1);
        assert!(rdt_percentile(&run.matrix.column(0), 0.1).is_ok());

        let run = profile_device(&mut d, 50).unwrap();
        for r in 0..run.matrix.rows.len() {
            let v = run.matrix.row_values(r);
            assert!(v.iter().all(|x| *x == v[0]));
        }
        let summary = summarize(&run).unwrap();
        assert_eq!(summary.guardband_ratio, 1.0);
        for rr in rank_distribution(&run.matrix) {
            assert_eq!(rr.best(), rr.worst());
        }
    }

    #[test]
    fn census_single_weak_cell() {
        let dist = RowDistribution {
            weak_rows_per_bank: 1,
            weak_rdt_range: (3_000, 3_000),
            min_rdt: 20_000,
            max_rdt: 30_000,
            jitter_half_width: 0.05,
            max_cells_per_row: 1,
            ..Default::default()
        };
        let mut d = DeviceModel::new(geometry(1024), dist, ConditionPreset::reference(), 2).unwrap();
        let run = profile_device(&mut d, 100).unwrap();
        let c = weak_row_census(&run.matrix);
        assert_eq!((c.delta_l, c.n, c.unique_rows()), (1, 1, 1));
    }

    #[test]
    fn ranks_are_permutations() {
        let mut d = DeviceModel::new(
            geometry(1024),
            RowDistribution::default(),
            ConditionPreset::reference(),
            8,
        )
        .unwrap();
        let run = profile_device(&mut d, 20).unwrap();
        for it in 0..20 {
            let mut r = iteration_ranks(&run.matrix, it);
            r.sort_unstable();
            assert_eq!(r, (1..=run.matrix.rows.len()).collect::<Vec<_>>());
        }
    }

    #[test]
    fn rank_ties_break_by_row_id() {
        let rows = vec![RowId::new(0, 9), RowId::new(0, 3), RowId::new(0, 5)];
        let grid = HammerGrid::new(1, 100, 1).unwrap();
        let m = RdtMatrix::from_parts(
            rows,
            1,
            grid,
            vec![Some(10), Some(10), None],
            vec![BitflipSet::empty(); 3],
        )
        .unwrap();
        assert_eq!(iteration_ranks(&m, 0), vec![2, 1, 3]);
    }

    #[test]
    fn percentile_hand_cases() {
        let col: Vec<Option<u64>> = (1..=10).map(Some).collect();
        assert_eq!(rdt_percentile(&col, 0.10).unwrap(), 2);
        let flat = vec![Some(77); 13];
        for q in [0.01, 0.1, 0.5, 0.99] {
            assert_eq!(rdt_percentile(&flat, q).unwrap(), 77);
        }
        assert!(matches!(rdt_percentile(&col, 0.0), Err(Error::InvalidPercentile(_))));
        assert!(matches!(rdt_percentile(&col, 1.0), Err(Error::InvalidPercentile(_))));
        assert!(matches!(
            rdt_percentile(&[Some(3), None, None, None, None, None, None, None, None, None], 0.1),
            Err(Error::PercentileAboveGrid)
        ));
        assert!(matches!(rdt_percentile(&[], 0.1), Err(Error::EmptyColumn)));
    }

    #[test]
    fn census_below_all_thresholds_is_zero() {
        let mut d = DeviceModel::new(
            geometry(512),
            RowDistribution::default(),
            ConditionPreset::reference(),
            8,
        )
        .unwrap();
        let c = bitflip_census_at(&mut d, 1, 20).unwrap();
        assert!(c.flips_per_repetition.iter().all(|&x| x == 0));
        assert!(c.cumulative_unique.iter().all(|&x| x == 0));
        assert!(bitflip_census_at(&mut d, 0, 1).is_err());
    }
}
