//! Per-row threshold assignment and abstract PARA / Chronus overhead models
//! driven by synthetic activation traces.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::devsim::RowId;
use crate::error::{Error, Result};
use crate::profiler::ProfileSummary;

/// Guarded threshold as a fraction of RDT_min (a 21% margin).
pub const GUARDBAND_KEEP_PERCENT: u64 = 79;
pub const DEFAULT_EXTRA_DEMOTION_FRACTION: f64 = 0.10;
pub const DEFAULT_PARA_EPSILON: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdPolicy {
    OneSizeFitsAll,
    SvardTwoBin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bin {
    Guarded,
    Relaxed,
}

impl Bin {
    pub fn as_str(self) -> &'static str {
        match self {
            Bin::Guarded => "guarded",
            Bin::Relaxed => "relaxed",
        }
    }
}

impl std::str::FromStr for Bin {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "guarded" => Ok(Bin::Guarded),
            "relaxed" => Ok(Bin::Relaxed),
            other => Err(Error::Malformed(format!("unknown bin {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowThreshold {
    pub threshold: u64,
    pub bin: Bin,
    pub demotions: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThresholdMap {
    pub guarded: u64,
    pub relaxed: u64,
    entries: BTreeMap<RowId, RowThreshold>,
}

impl ThresholdMap {
    pub fn from_entries(guarded: u64, relaxed: u64, entries: BTreeMap<RowId, RowThreshold>) -> Result<Self> {
        if guarded == 0 || entries.values().any(|e| e.threshold == 0) {
            return Err(Error::ZeroThreshold);
        }
        if guarded >= relaxed {
            return Err(Error::InvalidParams(format!(
                "guarded threshold {guarded} is not below relaxed {relaxed}"
            )));
        }
        Ok(Self {
            guarded,
            relaxed,
            entries,
        })
    }

    /// Every row at the same threshold; mainly for tests and sweeps.
    pub fn uniform(rows: &[RowId], threshold: u64) -> Result<Self> {
        if threshold == 0 {
            return Err(Error::ZeroThreshold);
        }
        let entries = rows
            .iter()
            .map(|&r| {
                (
                    r,
                    RowThreshold {
                        threshold,
                        bin: Bin::Guarded,
                        demotions: 0,
                    },
                )
            })
            .collect();
        Ok(Self {
            guarded: threshold,
            relaxed: threshold.saturating_add(1),
            entries,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, row: RowId) -> Option<&RowThreshold> {
        self.entries.get(&row)
    }

    pub fn threshold(&self, row: RowId) -> Result<u64> {
        self.entries
            .get(&row)
            .map(|e| e.threshold)
            .ok_or(Error::UnknownRow(row))
    }

    pub fn rows(&self) -> impl Iterator<Item = RowId> + '_ {
        self.entries.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (RowId, &RowThreshold)> {
        self.entries.iter().map(|(r, e)| (*r, e))
    }

    pub fn count_in(&self, bin: Bin) -> usize {
        self.entries.values().filter(|e| e.bin == bin).count()
    }

    /// Halve the row's threshold (floor, never below 1).
    pub fn demote(&mut self, row: RowId) -> Result<u64> {
        let e = self.entries.get_mut(&row).ok_or(Error::UnknownRow(row))?;
        e.threshold = (e.threshold / 2).max(1);
        e.demotions += 1;
        Ok(e.threshold)
    }

    /// True when every row's threshold here is at least the one in `other`.
    pub fn dominates(&self, other: &ThresholdMap) -> bool {
        self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .all(|(r, e)| other.entries.get(r).is_some_and(|o| e.threshold >= o.threshold))
    }
}

pub fn demote_row(mut map: ThresholdMap, row: RowId) -> Result<ThresholdMap> {
    map.demote(row)?;
    Ok(map)
}

/// Build a per-row threshold map from a profile summary.
///
/// Guarded rows get floor(0.79 x RDT_min); relaxed rows get RDT_90%. Under
/// the two-bin policy, rows measured below RDT_90% are guarded, plus the next
/// `round(extra_demotion_fraction x rows)` lowest rows (ties broken by row id,
/// unmeasured rows last) to cover rows whose RDT drifts down over time.
pub fn assign_thresholds(
    profile: &ProfileSummary,
    policy: ThresholdPolicy,
    extra_demotion_fraction: f64,
) -> Result<ThresholdMap> {
    if profile.reference_column.is_empty() {
        return Err(Error::IncompleteProfile("per-row RDT column"));
    }
    if profile.reference_rdt_min == 0 {
        return Err(Error::IncompleteProfile("RDT_min"));
    }
    if profile.rdt_p10 == 0 {
        return Err(Error::IncompleteProfile("RDT_90%"));
    }
    if !(0.0..=1.0).contains(&extra_demotion_fraction) {
        return Err(Error::InvalidParams(format!(
            "extra demotion fraction {extra_demotion_fraction} outside [0, 1]"
        )));
    }
    let guarded = profile.reference_rdt_min * GUARDBAND_KEEP_PERCENT / 100;
    let relaxed = profile.rdt_p10;
    if guarded == 0 {
        return Err(Error::ZeroThreshold);
    }

    let mut order: Vec<(RowId, Option<u64>)> = profile.reference_column.clone();
    order.sort_by_key(|&(row, m)| (m.is_none(), m, row));
    let below = order.iter().filter(|(_, m)| m.is_some_and(|v| v < relaxed)).count();
    let extra = (extra_demotion_fraction * order.len() as f64).round() as usize;
    let guarded_count = match policy {
        ThresholdPolicy::OneSizeFitsAll => order.len(),
        ThresholdPolicy::SvardTwoBin => (below + extra).min(order.len()),
    };

    let entries = order
        .iter()
        .enumerate()
        .map(|(i, &(row, _))| {
            let bin = if i < guarded_count { Bin::Guarded } else { Bin::Relaxed };
            let threshold = if bin == Bin::Guarded { guarded } else { relaxed };
            (
                row,
                RowThreshold {
                    threshold,
                    bin,
                    demotions: 0,
                },
            )
        })
        .collect();
    ThresholdMap::from_entries(guarded, relaxed, entries)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TraceKind {
    Uniform,
    SingleRowHammer,
    /// Alternates between the two rows either side of one victim.
    DoubleSided,
    Zipf {
        #[serde(default = "default_zipf_exponent")]
        exponent: f64,
    },
}

fn default_zipf_exponent() -> f64 {
    1.0
}

impl TraceKind {
    pub fn all() -> [TraceKind; 4] {
        [
            TraceKind::Uniform,
            TraceKind::SingleRowHammer,
            TraceKind::DoubleSided,
            TraceKind::Zipf { exponent: 1.0 },
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            TraceKind::Uniform => "uniform",
            TraceKind::SingleRowHammer => "single-row-hammer",
            TraceKind::DoubleSided => "double-sided",
            TraceKind::Zipf { .. } => "zipf",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccessTrace {
    pub kind: TraceKind,
    pub length: u64,
    pub seed: u64,
    pub activations: Vec<RowId>,
}

/// Generate `length` activations over `universe` (in the given order, which
/// defines adjacency for double-sided traces).
pub fn generate_trace(kind: TraceKind, universe: &[RowId], length: u64, seed: u64) -> Result<AccessTrace> {
    if universe.is_empty() {
        return Err(Error::InvalidTrace("empty row universe".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = universe.len();
    let activations: Vec<RowId> = match kind {
        TraceKind::Uniform => (0..length).map(|_| universe[rng.random_range(0..n)]).collect(),
        TraceKind::SingleRowHammer => {
            let r = universe[rng.random_range(0..n)];
            vec![r; length as usize]
        }
        TraceKind::DoubleSided => {
            if n < 3 {
                return Err(Error::InvalidTrace("double-sided needs at least 3 rows".into()));
            }
            let victim = rng.random_range(1..n - 1);
            let pair = [universe[victim - 1], universe[victim + 1]];
            (0..length as usize).map(|i| pair[i % 2]).collect()
        }
        TraceKind::Zipf { exponent } => {
            let zipf = Zipf::new(n as f64, exponent).map_err(|e| Error::InvalidTrace(format!("zipf: {e}")))?;
            let mut ranked = universe.to_vec();
            ranked.shuffle(&mut rng);
            (0..length)
                .map(|_| ranked[zipf.sample(&mut rng) as usize - 1])
                .collect()
        }
    };
    Ok(AccessTrace {
        kind,
        length,
        seed,
        activations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mitigation {
    Para,
    Chronus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MitigationStats {
    pub mitigation: Mitigation,
    pub total_activations: u64,
    pub preventive_refreshes: u64,
    pub refresh_rate_per_kilo_act: f64,
    /// Largest per-row counter value reached (Chronus only).
    pub max_counter_seen: Option<u64>,
}

fn rate(refreshes: u64, activations: u64) -> f64 {
    if activations == 0 {
        0.0
    } else {
        1000.0 * refreshes as f64 / activations as f64
    }
}

/// PARA refresh probability for a row with threshold `rdt`.
pub fn para_probability(rdt: u64, epsilon: f64) -> f64 {
    -(epsilon.ln() / rdt as f64).exp_m1()
}

/// Probabilistic refresh: each activation of row r triggers a refresh with
/// probability `1 - epsilon^(1/RDT(r))`. One uniform draw per activation, so
/// two maps simulated with the same seed are coupled.
pub fn simulate_para(trace: &AccessTrace, map: &ThresholdMap, epsilon: f64, seed: u64) -> Result<MitigationStats> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParams(format!("PARA epsilon {epsilon} outside (0, 1)")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cache: FxHashMap<RowId, f64> = FxHashMap::default();
    let mut refreshes = 0u64;
    for &row in &trace.activations {
        let p = match cache.get(&row) {
            Some(&p) => p,
            None => {
                let t = map.threshold(row)?;
                if t == 0 {
                    return Err(Error::ZeroThreshold);
                }
                let p = para_probability(t, epsilon);
                cache.insert(row, p);
                p
            }
        };
        if rng.random::<f64>() < p {
            refreshes += 1;
        }
    }
    let total = trace.activations.len() as u64;
    Ok(MitigationStats {
        mitigation: Mitigation::Para,
        total_activations: total,
        preventive_refreshes: refreshes,
        refresh_rate_per_kilo_act: rate(refreshes, total),
        max_counter_seen: None,
    })
}

/// Chronus trigger point: floor(RDT/2), at least 1.
pub fn chronus_trigger(rdt: u64) -> u64 {
    (rdt / 2).max(1)
}

/// Counter-based refresh: a row's counter resets with a refresh each time it
/// reaches `chronus_trigger(RDT)`.
pub fn simulate_chronus(trace: &AccessTrace, map: &ThresholdMap) -> Result<MitigationStats> {
    let mut counters: FxHashMap<RowId, (u64, u64)> = FxHashMap::default();
    let mut refreshes = 0u64;
    let mut max_seen = 0u64;
    for &row in &trace.activations {
        let entry = match counters.get_mut(&row) {
            Some(e) => e,
            None => counters.entry(row).or_insert((chronus_trigger(map.threshold(row)?), 0)),
        };
        entry.1 += 1;
        max_seen = max_seen.max(entry.1);
        if entry.1 >= entry.0 {
            refreshes += 1;
            entry.1 = 0;
        }
    }
    let total = trace.activations.len() as u64;
    Ok(MitigationStats {
        mitigation: Mitigation::Chronus,
        total_activations: total,
        preventive_refreshes: refreshes,
        refresh_rate_per_kilo_act: rate(refreshes, total),
        max_counter_seen: Some(max_seen),
    })
}
