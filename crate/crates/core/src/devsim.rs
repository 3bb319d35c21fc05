//! Synthetic DRAM chip with variable read disturbance.
//!
//! Every tested row carries a base read disturbance threshold (RDT) and a set
//! of vulnerable cells. Each measurement episode redraws a multiplicative
//! jitter per row, so the realized RDT of a row is fixed within an episode
//! and varies across episodes. The ground truth stays behind [`DeviceModel::hammer`];
//! [`DeviceModel::oracle_true_rdt`] exists for verification only.

use std::collections::HashMap;
use std::fmt;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A row address inside the chip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RowId {
    pub bank: u32,
    pub row: u32,
}

impl RowId {
    pub fn new(bank: u32, row: u32) -> Self {
        Self { bank, row }
    }
}

impl fmt::Display for RowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.bank, self.row)
    }
}

/// A single bit inside a row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BitLocation {
    pub bank: u32,
    pub row: u32,
    pub bit: u32,
}

impl BitLocation {
    pub fn row_id(&self) -> RowId {
        RowId::new(self.bank, self.row)
    }
}

/// Bitflips observed in one victim row after one hammer call. Sorted, unique.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BitflipSet(Vec<BitLocation>);

impl BitflipSet {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn from_locations(mut locations: Vec<BitLocation>) -> Self {
        locations.sort_unstable();
        locations.dedup();
        Self(locations)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &BitLocation> {
        self.0.iter()
    }

    pub fn contains(&self, loc: &BitLocation) -> bool {
        self.0.binary_search(loc).is_ok()
    }

    pub fn is_subset(&self, other: &BitflipSet) -> bool {
        self.0.iter().all(|l| other.contains(l))
    }

    pub fn as_slice(&self) -> &[BitLocation] {
        &self.0
    }
}

/// Tested-row fraction as a rational number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fraction {
    pub num: u32,
    pub den: u32,
}

impl Default for Fraction {
    fn default() -> Self {
        Self { num: 1, den: 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChipGeometry {
    pub banks: u32,
    pub rows_per_bank: u32,
    pub bits_per_row: u32,
    #[serde(default)]
    pub tested_row_fraction: Fraction,
}

impl ChipGeometry {
    pub fn validate(&self) -> Result<()> {
        if self.banks == 0 || self.rows_per_bank == 0 || self.bits_per_row == 0 {
            return Err(Error::InvalidGeometry("all counts must be positive".into()));
        }
        let Fraction { num, den } = self.tested_row_fraction;
        if num == 0 || den == 0 || num > den {
            return Err(Error::InvalidGeometry(format!(
                "tested row fraction {num}/{den} must lie in (0, 1]"
            )));
        }
        Ok(())
    }

    pub fn tested_rows_per_bank(&self) -> u32 {
        let f = self.tested_row_fraction;
        ((self.rows_per_bank as u64 * f.num as u64) / f.den as u64).max(1) as u32
    }
}

/// One vulnerable cell. The cell flips once the hammer count reaches
/// `realized_rdt * threshold_multiplier`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellFault {
    pub bit_offset: u32,
    pub threshold_multiplier: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowModel {
    pub base_rdt: u64,
    pub jitter_half_width: f64,
    /// Sorted by multiplier; the first cell has multiplier 1.0.
    pub cells: Vec<CellFault>,
}

impl RowModel {
    fn realize(&self, u: f64, scale: f64) -> u64 {
        round_half_up(self.base_rdt as f64 * u * scale).max(1)
    }
}

/// Operating condition. Temperature and aggressor-on time only act through
/// `rdt_scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionPreset {
    pub temperature_c: u32,
    pub t_aggon_ns: u32,
    pub rdt_scale: f64,
}

impl ConditionPreset {
    pub const TEMPERATURES: [u32; 3] = [50, 65, 80];
    pub const T_AGGON: [u32; 3] = [35, 300, 1000];

    /// The tabulated RDT scale for a supported condition. (35 ns, 50 °C) is the
    /// reference point with scale 1.0.
    pub fn standard(temperature_c: u32, t_aggon_ns: u32) -> Result<Self> {
        let temp = match temperature_c {
            50 => 1.0,
            65 => 0.95,
            80 => 0.88,
            other => {
                return Err(Error::InvalidDeviceSpec(format!(
                    "unsupported temperature {other} C (expected 50, 65 or 80)"
                )))
            }
        };
        let aggon = match t_aggon_ns {
            35 => 1.0,
            300 => 0.62,
            1000 => 0.38,
            other => {
                return Err(Error::InvalidDeviceSpec(format!(
                    "unsupported tAggOn {other} ns (expected 35, 300 or 1000)"
                )))
            }
        };
        Ok(Self {
            temperature_c,
            t_aggon_ns,
            rdt_scale: temp * aggon,
        })
    }

    pub fn reference() -> Self {
        Self {
            temperature_c: 50,
            t_aggon_ns: 35,
            rdt_scale: 1.0,
        }
    }
}

impl Default for ConditionPreset {
    fn default() -> Self {
        Self::reference()
    }
}

/// Generative law for per-row base RDTs, cells and temporal jitter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RowDistribution {
    /// Median of the log-normal bulk population.
    pub median_rdt: f64,
    pub sigma: f64,
    pub min_rdt: u64,
    pub max_rdt: u64,
    /// Deliberately weak rows per bank, base RDT uniform in `weak_rdt_range`.
    pub weak_rows_per_bank: u32,
    pub weak_rdt_range: (u64, u64),
    pub jitter_half_width: f64,
    pub max_cells_per_row: u32,
    /// Extra cells get multipliers in (1, 1 + cell_spread].
    pub cell_spread: f64,
}

impl Default for RowDistribution {
    fn default() -> Self {
        Self {
            median_rdt: 12_000.0,
            sigma: 0.45,
            min_rdt: 4_000,
            max_rdt: 30_000,
            weak_rows_per_bank: 16,
            weak_rdt_range: (4_000, 5_200),
            jitter_half_width: 0.10,
            max_cells_per_row: 4,
            cell_spread: 0.25,
        }
    }
}

impl RowDistribution {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.jitter_half_width) {
            return Err(Error::InvalidDeviceSpec(format!(
                "jitter_half_width {} must lie in [0, 1)",
                self.jitter_half_width
            )));
        }
        if self.median_rdt.is_nan() || self.median_rdt <= 0.0 || self.sigma.is_nan() || self.sigma < 0.0 {
            return Err(Error::InvalidDeviceSpec(
                "median_rdt must be positive and sigma non-negative".into(),
            ));
        }
        if self.min_rdt == 0 || self.min_rdt > self.max_rdt {
            return Err(Error::InvalidDeviceSpec("need 0 < min_rdt <= max_rdt".into()));
        }
        let (lo, hi) = self.weak_rdt_range;
        if lo == 0 || lo > hi {
            return Err(Error::InvalidDeviceSpec(
                "need 0 < weak_rdt_range.0 <= weak_rdt_range.1".into(),
            ));
        }
        if self.max_cells_per_row == 0 {
            return Err(Error::InvalidDeviceSpec("max_cells_per_row must be positive".into()));
        }
        if self.cell_spread.is_nan() || self.cell_spread < 0.0 {
            return Err(Error::InvalidDeviceSpec("cell_spread must be non-negative".into()));
        }
        Ok(())
    }
}

/// Everything needed to build a device, as stored in JSON configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceSpec {
    pub geometry: ChipGeometry,
    #[serde(default)]
    pub distribution: RowDistribution,
    #[serde(default)]
    pub preset: ConditionPreset,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl DeviceSpec {
    /// Worst-case calibration: a single bank whose minimum RDT drifts by about
    /// 21% across 1000 episodes.
    pub fn worst_case() -> Self {
        Self {
            geometry: ChipGeometry {
                banks: 1,
                rows_per_bank: 8192,
                bits_per_row: 65_536,
                tested_row_fraction: Fraction::default(),
            },
            // bulk kept above the weak band so only the weak rows set RDT_min
            distribution: RowDistribution {
                median_rdt: 10_000.0,
                sigma: 0.30,
                min_rdt: 6_500,
                max_rdt: 30_000,
                weak_rows_per_bank: 6,
                weak_rdt_range: (4_000, 5_200),
                jitter_half_width: WORST_CASE_JITTER,
                max_cells_per_row: 3,
                cell_spread: 0.25,
            },
            preset: ConditionPreset::reference(),
            seed: Some(0x5EED),
        }
    }

    pub fn build(&self, seed: u64) -> Result<DeviceModel> {
        DeviceModel::new(self.geometry.clone(), self.distribution.clone(), self.preset, seed)
    }
}

/// Jitter half-width of the worst-case preset, tuned so the 1000-episode
/// min/max ratio of RDT_min sits near 0.79.
pub const WORST_CASE_JITTER: f64 = 0.12;

/// Opaque handle for one measurement episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EpisodeId(pub u64);

#[derive(Debug, Clone)]
pub struct DeviceModel {
    geometry: ChipGeometry,
    distribution: RowDistribution,
    preset: ConditionPreset,
    seed: u64,
    tested: Vec<RowId>,
    rows: Vec<RowModel>,
    index: HashMap<RowId, usize>,
    episode_rng: ChaCha8Rng,
    episode: Option<u64>,
    realized: Vec<u64>,
}

impl DeviceModel {
    pub fn new(
        geometry: ChipGeometry,
        distribution: RowDistribution,
        preset: ConditionPreset,
        seed: u64,
    ) -> Result<Self> {
        geometry.validate()?;
        distribution.validate()?;
        if preset.rdt_scale.is_nan() || preset.rdt_scale <= 0.0 {
            return Err(Error::InvalidDeviceSpec("rdt_scale must be positive".into()));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bulk = LogNormal::new(distribution.median_rdt.ln(), distribution.sigma)
            .map_err(|e| Error::InvalidDeviceSpec(e.to_string()))?;

        let per_bank = geometry.tested_rows_per_bank();
        let mut tested = Vec::with_capacity((per_bank * geometry.banks) as usize);
        let mut rows = Vec::with_capacity(tested.capacity());
        for bank in 0..geometry.banks {
            let mut picked: Vec<u32> = index::sample(&mut rng, geometry.rows_per_bank as usize, per_bank as usize)
                .into_iter()
                .map(|r| r as u32)
                .collect();
            picked.sort_unstable();

            let weak_count = distribution.weak_rows_per_bank.min(per_bank) as usize;
            let mut weak = vec![false; picked.len()];
            for i in index::sample(&mut rng, picked.len(), weak_count) {
                weak[i] = true;
            }

            for (row, is_weak) in picked.into_iter().zip(weak) {
                let base_rdt = if is_weak {
                    let (lo, hi) = distribution.weak_rdt_range;
                    rng.random_range(lo..=hi)
                } else {
                    let x: f64 = bulk.sample(&mut rng);
                    round_half_up(x).clamp(distribution.min_rdt, distribution.max_rdt)
                };
                let cells = draw_cells(&mut rng, &geometry, &distribution);
                tested.push(RowId::new(bank, row));
                rows.push(RowModel {
                    base_rdt,
                    jitter_half_width: distribution.jitter_half_width,
                    cells,
                });
            }
        }

        let index = tested.iter().enumerate().map(|(i, r)| (*r, i)).collect();
        let mut episode_rng = ChaCha8Rng::seed_from_u64(seed);
        episode_rng.set_stream(1);
        let realized = vec![0; tested.len()];

        Ok(Self {
            geometry,
            distribution,
            preset,
            seed,
            tested,
            rows,
            index,
            episode_rng,
            episode: None,
            realized,
        })
    }

    pub fn geometry(&self) -> &ChipGeometry {
        &self.geometry
    }

    pub fn distribution(&self) -> &RowDistribution {
        &self.distribution
    }

    pub fn preset(&self) -> ConditionPreset {
        self.preset
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Tested rows in (bank, row) order.
    pub fn tested_rows(&self) -> &[RowId] {
        &self.tested
    }

    pub fn row_model(&self, row: RowId) -> Result<&RowModel> {
        self.slot(row).map(|i| &self.rows[i])
    }

    pub fn current_episode(&self) -> Option<EpisodeId> {
        self.episode.map(EpisodeId)
    }

    /// Starts a new measurement episode, redrawing every row's jitter.
    pub fn begin_episode(&mut self) -> EpisodeId {
        let scale = self.preset.rdt_scale;
        for (slot, row) in self.realized.iter_mut().zip(&self.rows) {
            let r: f64 = self.episode_rng.random();
            let u = 1.0 + row.jitter_half_width * (2.0 * r - 1.0);
            *slot = row.realize(u, scale);
        }
        let next = self.episode.map_or(0, |e| e + 1);
        self.episode = Some(next);
        EpisodeId(next)
    }

    /// Hammers the aggressors of `row` `hammer_count` times each and returns
    /// the cells of `row` that flip.
    pub fn hammer(&self, row: RowId, hammer_count: u64, episode: EpisodeId) -> Result<BitflipSet> {
        if hammer_count == 0 {
            return Err(Error::ZeroHammerCount);
        }
        let slot = self.episode_slot(row, episode)?;
        let rdt = self.realized[slot];
        if hammer_count < rdt {
            return Ok(BitflipSet::empty());
        }
        let flips = self.rows[slot]
            .cells
            .iter()
            .filter(|c| hammer_count >= cell_threshold(rdt, c.threshold_multiplier))
            .map(|c| BitLocation {
                bank: row.bank,
                row: row.row,
                bit: c.bit_offset,
            })
            .collect();
        Ok(BitflipSet::from_locations(flips))
    }

    /// Test-only introspection of the realized RDT in the current episode.
    pub fn oracle_true_rdt(&self, row: RowId, episode: EpisodeId) -> Result<u64> {
        let slot = self.episode_slot(row, episode)?;
        Ok(self.realized[slot])
    }

    fn slot(&self, row: RowId) -> Result<usize> {
        self.index.get(&row).copied().ok_or(Error::UntestedRow(row))
    }

    fn episode_slot(&self, row: RowId, episode: EpisodeId) -> Result<usize> {
        let slot = self.slot(row)?;
        if self.episode != Some(episode.0) {
            return Err(Error::StaleEpisode {
                requested: episode.0,
                current: self.episode,
            });
        }
        Ok(slot)
    }
}

fn draw_cells(rng: &mut ChaCha8Rng, geometry: &ChipGeometry, dist: &RowDistribution) -> Vec<CellFault> {
    let count = rng.random_range(1..=dist.max_cells_per_row).min(geometry.bits_per_row);
    let offsets = index::sample(rng, geometry.bits_per_row as usize, count as usize);
    let mut cells: Vec<CellFault> = offsets
        .into_iter()
        .enumerate()
        .map(|(i, bit)| {
            let threshold_multiplier = if i == 0 {
                1.0
            } else {
                let r: f64 = rng.random();
                // (1 - r) lies in (0, 1], keeping extra cells strictly above the weakest one
                1.0 + dist.cell_spread * (1.0 - r)
            };
            CellFault {
                bit_offset: bit as u32,
                threshold_multiplier,
            }
        })
        .collect();
    cells.sort_by(|a, b| a.threshold_multiplier.total_cmp(&b.threshold_multiplier));
    cells
}

/// Smallest integer hammer count that flips a cell.
pub fn cell_threshold(realized_rdt: u64, multiplier: f64) -> u64 {
    if multiplier == 1.0 {
        realized_rdt
    } else {
        (realized_rdt as f64 * multiplier).ceil() as u64
    }
}

pub(crate) fn round_half_up(x: f64) -> u64 {
    (x + 0.5).floor().max(0.0) as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_geometry() -> ChipGeometry {
        ChipGeometry {
            banks: 2,
            rows_per_bank: 512,
            bits_per_row: 1024,
            tested_row_fraction: Fraction::default(),
        }
    }

    fn device(jitter: f64, seed: u64) -> DeviceModel {
        let dist = RowDistribution {
            jitter_half_width: jitter,
            weak_rows_per_bank: 4,
            ..Default::default()
        };
        DeviceModel::new(small_geometry(), dist, ConditionPreset::reference(), seed).unwrap()
    }

    #[test]
    fn same_seed_same_base_table() {
        let a = device(0.1, 42);
        let b = device(0.1, 42);
        assert_eq!(a.tested_rows(), b.tested_rows());
        assert_eq!(a.rows, b.rows);
        let c = device(0.1, 43);
        assert_ne!(a.rows, c.rows);
    }

    #[test]
    fn tested_subset_is_fraction_of_each_bank() {
        let d = device(0.1, 1);
        assert_eq!(d.tested_rows().len(), 2 * 32);
        assert!(d.tested_rows().windows(2).all(|w| w[0] < w[1]));
        for r in d.rows.iter() {
            assert!(!r.cells.is_empty());
            assert_eq!(r.cells[0].threshold_multiplier, 1.0);
            assert!(r.cells[1..].iter().all(|c| c.threshold_multiplier > 1.0));
        }
    }

    #[test]
    fn zero_jitter_episodes_identical() {
        let mut d = device(0.0, 5);
        let e0 = d.begin_episode();
        let first: Vec<u64> = d
            .tested_rows()
            .iter()
            .map(|r| d.oracle_true_rdt(*r, e0).unwrap())
            .collect();
        for _ in 0..20 {
            let e = d.begin_episode();
            let again: Vec<u64> = d
                .tested_rows()
                .iter()
                .map(|r| d.oracle_true_rdt(*r, e).unwrap())
                .collect();
            assert_eq!(first, again);
        }
        for (row, rdt) in d.tested_rows().iter().zip(&first) {
            assert_eq!(*rdt, d.row_model(*row).unwrap().base_rdt);
        }
    }

    #[test]
    fn episode_counter_increments() {
        let mut d = device(0.1, 5);
        assert_eq!(d.current_episode(), None);
        assert_eq!(d.begin_episode(), EpisodeId(0));
        assert_eq!(d.begin_episode(), EpisodeId(1));
        assert_eq!(d.current_episode(), Some(EpisodeId(1)));
    }

    #[test]
    fn hammer_threshold_edges() {
        let mut d = device(0.1, 9);
        let e = d.begin_episode();
        for row in d.tested_rows().to_vec() {
            let rdt = d.oracle_true_rdt(row, e).unwrap();
            assert!(d.hammer(row, rdt - 1, e).unwrap().is_empty());
            let at = d.hammer(row, rdt, e).unwrap();
            let weakest = d.row_model(row).unwrap().cells[0].bit_offset;
            assert!(at.contains(&BitLocation {
                bank: row.bank,
                row: row.row,
                bit: weakest
            }));
            let model = d.row_model(row).unwrap();
            let max_mult = model.cells.last().unwrap().threshold_multiplier;
            let all = d.hammer(row, cell_threshold(rdt, max_mult), e).unwrap();
            assert_eq!(all.len(), model.cells.len());
            // within-episode determinism
            assert_eq!(d.hammer(row, rdt + 17, e).unwrap(), d.hammer(row, rdt + 17, e).unwrap());
        }
    }

    #[test]
    fn hammer_errors() {
        let mut d = device(0.1, 9);
        let e = d.begin_episode();
        let row = d.tested_rows()[0];
        assert!(matches!(d.hammer(row, 0, e), Err(Error::ZeroHammerCount)));
        let untested = (0..512)
            .map(|r| RowId::new(0, r))
            .find(|r| !d.index.contains_key(r))
            .unwrap();
        assert!(matches!(d.hammer(untested, 10, e), Err(Error::UntestedRow(_))));
        assert!(matches!(d.oracle_true_rdt(untested, e), Err(Error::UntestedRow(_))));
        d.begin_episode();
        assert!(matches!(d.hammer(row, 10, e), Err(Error::StaleEpisode { .. })));
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut g = small_geometry();
        g.rows_per_bank = 0;
        assert!(DeviceModel::new(g, RowDistribution::default(), ConditionPreset::reference(), 1).is_err());
        let dist = RowDistribution {
            jitter_half_width: 1.0,
            ..Default::default()
        };
        assert!(DeviceModel::new(small_geometry(), dist, ConditionPreset::reference(), 1).is_err());
        let g = ChipGeometry {
            tested_row_fraction: Fraction { num: 3, den: 2 },
            ..small_geometry()
        };
        assert!(g.validate().is_err());
    }

    #[test]
    fn condition_presets() {
        assert_eq!(ConditionPreset::standard(50, 35).unwrap().rdt_scale, 1.0);
        assert!(ConditionPreset::standard(80, 35).unwrap().rdt_scale < 1.0);
        assert!(
            ConditionPreset::standard(50, 1000).unwrap().rdt_scale
                < ConditionPreset::standard(50, 300).unwrap().rdt_scale
        );
        assert!(ConditionPreset::standard(70, 35).is_err());
        assert!(ConditionPreset::standard(50, 36).is_err());
    }

    #[test]
    fn rdt_scale_multiplies_oracle() {
        let dist = RowDistribution {
            jitter_half_width: 0.1,
            weak_rows_per_bank: 4,
            ..Default::default()
        };
        let mut a = DeviceModel::new(small_geometry(), dist.clone(), ConditionPreset::reference(), 77).unwrap();
        let scaled = ConditionPreset {
            rdt_scale: 0.62,
            ..ConditionPreset::reference()
        };
        let mut b = DeviceModel::new(small_geometry(), dist, scaled, 77).unwrap();
        for _ in 0..10 {
            let ea = a.begin_episode();
            let eb = b.begin_episode();
            for row in a.tested_rows().to_vec() {
                let x = a.oracle_true_rdt(row, ea).unwrap() as f64 * 0.62;
                let y = b.oracle_true_rdt(row, eb).unwrap() as f64;
                assert!((x - y).abs() <= 1.0, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn spec_json_defaults() {
        let spec: DeviceSpec =
            serde_json::from_str(r#"{"geometry":{"banks":1,"rows_per_bank":64,"bits_per_row":128}}"#).unwrap();
        assert_eq!(spec.geometry.tested_row_fraction, Fraction { num: 1, den: 16 });
        assert_eq!(spec.distribution, RowDistribution::default());
        assert_eq!(spec.preset, ConditionPreset::reference());
        let back: DeviceSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn round_half_up_rounding() {
        assert_eq!(round_half_up(2.5), 3);
        assert_eq!(round_half_up(2.4999), 2);
        assert_eq!(round_half_up(7150.0), 7150);
    }
}
