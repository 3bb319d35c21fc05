//! Trial ensembles over the error model: failure curves, MTTUE estimation,
//! an analytic validation oracle, and parameter sweeps.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::errmodel::{run_trial, ModelParams, Stepping, UncorrectableEvent};
use crate::error::{Error, Result};

/// Wall-clock length of one epoch: hammering every row of a bank once.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochClock {
    pub rows_hammered_per_epoch: u64,
    pub hammer_count: u64,
    /// One double-sided hammer (two activations).
    pub seconds_per_hammer: f64,
}

impl Default for EpochClock {
    fn default() -> Self {
        Self {
            rows_hammered_per_epoch: 262_144,
            hammer_count: 10_000,
            seconds_per_hammer: 90e-9,
        }
    }
}

impl EpochClock {
    pub fn epoch_seconds(&self) -> f64 {
        self.rows_hammered_per_epoch as f64 * self.hammer_count as f64 * self.seconds_per_hammer
    }
}

pub fn epoch_hours(clock: &EpochClock) -> f64 {
    clock.epoch_seconds() / 3600.0
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: u64,
    /// `None` means censored at the horizon.
    pub first_failure_epoch: Option<u64>,
    pub event: Option<UncorrectableEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureCurve {
    pub epochs: Vec<u64>,
    pub p_fail_by: Vec<f64>,
}

impl FailureCurve {
    /// P(failed by `epoch`) recomputed on arbitrary sample epochs.
    pub fn from_results(results: &[TrialResult], epochs: Vec<u64>) -> Self {
        let mut failures: Vec<u64> = results.iter().filter_map(|r| r.first_failure_epoch).collect();
        failures.sort_unstable();
        let trials = results.len().max(1) as f64;
        let p_fail_by = epochs
            .iter()
            .map(|&e| failures.partition_point(|&f| f <= e) as f64 / trials)
            .collect();
        Self { epochs, p_fail_by }
    }

    pub fn at(&self, epoch: u64) -> Option<f64> {
        self.epochs.binary_search(&epoch).ok().map(|i| self.p_fail_by[i])
    }

    pub fn last(&self) -> f64 {
        self.p_fail_by.last().copied().unwrap_or(0.0)
    }
}

/// Scrub boundaries (thinned to at most ~1000 points) merged with a
/// log-spaced grid, 10 points per decade, always including epoch 1 and the
/// horizon.
pub fn curve_epochs(horizon: u64, scrub_interval: u64) -> Vec<u64> {
    let mut pts = vec![1, horizon];
    let windows = horizon / scrub_interval;
    let stride = windows.div_ceil(1000).max(1);
    let mut w = stride;
    while w <= windows {
        pts.push(w * scrub_interval);
        w += stride;
    }
    let mut i = 0u32;
    loop {
        let e = 10f64.powf(i as f64 / 10.0).round() as u64;
        if e > horizon {
            break;
        }
        pts.push(e);
        i += 1;
    }
    pts.sort_unstable();
    pts.dedup();
    pts
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub params: ModelParams,
    pub trials: u64,
    pub horizon: u64,
    pub seed: u64,
    pub results: Vec<TrialResult>,
    pub curve: FailureCurve,
}

impl Ensemble {
    pub fn events(&self) -> impl Iterator<Item = (u64, &UncorrectableEvent)> {
        self.results
            .iter()
            .filter_map(|r| r.event.as_ref().map(|e| (r.trial, e)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnsembleOptions {
    pub trials: u64,
    pub horizon: u64,
    pub seed: u64,
    /// Parallelism hint; never changes results.
    pub threads: Option<usize>,
    pub stepping: Stepping,
}

impl EnsembleOptions {
    pub fn new(trials: u64, horizon: u64, seed: u64) -> Self {
        Self {
            trials,
            horizon,
            seed,
            threads: None,
            stepping: Stepping::Accelerated,
        }
    }
}

/// Independent stream for trial `t` of an ensemble seeded with `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

pub fn run_trials(params: &ModelParams, trials: u64, horizon: u64, seed: u64) -> Result<Ensemble> {
    run_trials_with(params, &EnsembleOptions::new(trials, horizon, seed))
}

pub fn run_trials_with(params: &ModelParams, opts: &EnsembleOptions) -> Result<Ensemble> {
    params.validate()?;
    if opts.trials == 0 {
        return Err(Error::ZeroTrials);
    }
    if opts.horizon < params.scrub_interval {
        return Err(Error::HorizonTooShort {
            horizon: opts.horizon,
            scrub_interval: params.scrub_interval,
        });
    }
    let one = |t: u64| {
        let mut rng = trial_rng(opts.seed, t);
        let event = run_trial(params, opts.horizon, &mut rng, opts.stepping);
        TrialResult {
            trial: t,
            first_failure_epoch: event.as_ref().map(|e| e.epoch),
            event,
        }
    };
    let results: Vec<TrialResult> = match opts.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::InvalidParams(e.to_string()))?
            .install(|| (0..opts.trials).into_par_iter().map(one).collect()),
        None => (0..opts.trials).into_par_iter().map(one).collect(),
    };
    let curve = FailureCurve::from_results(&results, curve_epochs(opts.horizon, params.scrub_interval));
    Ok(Ensemble {
        params: params.clone(),
        trials: opts.trials,
        horizon: opts.horizon,
        seed: opts.seed,
        results,
        curve,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MttueMethod {
    EmpiricalMean,
    HazardExtrapolated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MttueEstimate {
    pub mttue_epochs: f64,
    pub mttue_hours: f64,
    pub censored_fraction: f64,
    pub method: MttueMethod,
    pub trials: u64,
    pub failures: u64,
    /// Fitted per-window hazard, present for the extrapolated method.
    pub window_hazard: Option<f64>,
}

/// Mean time to the first uncorrectable error.
///
/// Without censoring this is the sample mean. Otherwise a constant per-window
/// hazard `h = failures / exposed windows` is fitted and each censored trial
/// contributes its horizon plus a geometric tail of mean `scrub_interval / h`.
pub fn estimate_mttue(
    results: &[TrialResult],
    horizon: u64,
    scrub_interval: u64,
    clock: &EpochClock,
) -> Result<MttueEstimate> {
    if results.is_empty() {
        return Err(Error::ZeroTrials);
    }
    let trials = results.len() as f64;
    let failures = results.iter().filter(|r| r.first_failure_epoch.is_some()).count();
    let censored = results.len() - failures;
    let exposure: f64 = results
        .iter()
        .map(|r| r.first_failure_epoch.unwrap_or(horizon) as f64)
        .sum();
    let censored_fraction = censored as f64 / trials;

    let (mttue_epochs, method, window_hazard) = if censored == 0 {
        (exposure / trials, MttueMethod::EmpiricalMean, None)
    } else if failures == 0 {
        return Err(Error::InsufficientFailures { horizon });
    } else {
        let h = failures as f64 / (exposure / scrub_interval as f64);
        let tail = censored_fraction * scrub_interval as f64 / h;
        (exposure / trials + tail, MttueMethod::HazardExtrapolated, Some(h))
    };
    Ok(MttueEstimate {
        mttue_epochs,
        mttue_hours: mttue_epochs * epoch_hours(clock),
        censored_fraction,
        method,
        trials: results.len() as u64,
        failures: failures as u64,
        window_hazard,
    })
}

/// Closed-form reference values for removal-free configurations.
pub mod oracle {
    use super::*;

    fn check(params: &ModelParams) -> Result<()> {
        params.validate()?;
        if params.removal_enabled {
            return Err(Error::OracleUnsupported("location removal".into()));
        }
        if !params.growth_aligned() {
            return Err(Error::OracleUnsupported("growth inside a scrub window".into()));
        }
        Ok(())
    }

    /// ln(i!) for i in 0..=n.
    fn ln_factorials(n: usize) -> Vec<f64> {
        let mut t = Vec::with_capacity(n + 1);
        t.push(0.0);
        for i in 1..=n {
            t.push(t[i - 1] + (i as f64).ln());
        }
        t
    }

    /// Distribution of distinct locations covered after `epochs` epochs, each
    /// drawing `m` of `k` locations without replacement.
    pub fn coverage_distribution(k: usize, m: usize, epochs: u64) -> Vec<f64> {
        let mut dist = vec![0.0; k + 1];
        dist[0] = 1.0;
        if m == 0 || k == 0 {
            return dist;
        }
        let lf = ln_factorials(k);
        let ln_choose = |n: usize, r: usize| lf[n] - lf[r] - lf[n - r];
        let total = ln_choose(k, m);
        for _ in 0..epochs {
            if dist[k] > 1.0 - 1e-15 {
                break;
            }
            let mut next = vec![0.0; k + 1];
            for (j, &pj) in dist.iter().enumerate() {
                if pj < 1e-300 {
                    continue;
                }
                let t_lo = m.saturating_sub(j);
                let t_hi = m.min(k - j);
                for t in t_lo..=t_hi {
                    let p = (ln_choose(k - j, t) + ln_choose(j, m - t) - total).exp();
                    next[j + t] += pj * p;
                }
            }
            dist = next;
        }
        dist
    }

    /// P(f distinct uniform addresses all land in different codewords), for
    /// f = 0..=max_f.
    pub fn no_collision_table(params: &ModelParams, max_f: usize) -> Vec<f64> {
        let a = params.flip_space_bits as f64;
        let b = params.codeword_data_bits as f64;
        let mut out = Vec::with_capacity(max_f + 1);
        let mut p = 1.0;
        out.push(p);
        for i in 0..max_f {
            let free = a - i as f64 * b;
            p *= if free <= 0.0 { 0.0 } else { free / (a - i as f64) };
            out.push(p);
        }
        out
    }

    /// Probability that window `w` fails, starting from a freshly drawn `L` of
    /// the size a removal-free run holds during that window.
    ///
    /// The set of locations flipped during the window is a uniformly random
    /// subset of `L`, hence of the flip space; its size follows the coverage
    /// distribution. The window fails iff that subset hits some codeword twice.
    pub fn window_failure_probability(params: &ModelParams, window_index: u64) -> Result<f64> {
        check(params)?;
        let k = params.locations_in_window(window_index) as usize;
        let m = (params.n as usize).min(k);
        let cover = coverage_distribution(k, m, params.scrub_interval);
        let nc = no_collision_table(params, k);
        Ok(cover.iter().zip(&nc).map(|(pf, pnc)| pf * (1.0 - pnc)).sum())
    }

    /// P(a fixed pair of locations both flip within one window).
    pub fn pair_coverage(k: u64, m: u64, epochs: u64) -> f64 {
        if k < 2 || m == 0 {
            return 0.0;
        }
        let (kf, mf) = (k as f64, m.min(k) as f64);
        let one_missed = 1.0 - mf / kf;
        let both_missed = (kf - mf) * (kf - mf - 1.0) / (kf * (kf - 1.0));
        let e = epochs as f64;
        (1.0 - 2.0 * one_missed.powf(e) + both_missed.max(0.0).powf(e)).clamp(0.0, 1.0)
    }

    /// MTTUE (epochs) of a removal-free run from a Poisson model of colliding
    /// location pairs: pairs appear as `L` grows, and each surviving pair
    /// fails a window with probability [`pair_coverage`].
    pub fn integrated_mttue(params: &ModelParams, max_windows: u64) -> Result<f64> {
        check(params)?;
        let s = params.scrub_interval;
        let p_pair = (params.codeword_data_bits as f64 - 1.0) / (params.flip_space_bits as f64 - 1.0);
        let pairs = |k: u64| (k as f64) * (k as f64 - 1.0) / 2.0 * p_pair;
        let mut born = 0.0;
        let mut alive = 0.0;
        let mut survival_prev = 1.0;
        let mut mean = 0.0;
        for w in 0..max_windows {
            let k = params.locations_in_window(w);
            let m = params.n.min(k);
            let total = pairs(k);
            alive += total - born;
            born = total;
            alive *= 1.0 - pair_coverage(k, m, s);
            let survival = (-(born - alive)).exp();
            let p = (m as f64 / k as f64).min(1.0);
            let offset = if p > 0.0 {
                (2.0 / p - 1.0 / (2.0 * p - p * p)).min(s as f64)
            } else {
                s as f64
            };
            mean += (survival_prev - survival) * ((w * s) as f64 + offset);
            survival_prev = survival;
            if survival < 1e-12 {
                return Ok(mean);
            }
        }
        Err(Error::OracleUnsupported(format!(
            "survival has not converged after {max_windows} windows"
        )))
    }
}

/// One labelled configuration of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub label: String,
    pub params: ModelParams,
    #[serde(default)]
    pub clock: EpochClock,
    /// Overrides the sweep-wide horizon.
    #[serde(default)]
    pub horizon: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub label: String,
    pub params: ModelParams,
    pub horizon: u64,
    pub estimate: MttueEstimate,
    #[serde(skip)]
    pub ensemble: Option<Ensemble>,
}

/// Seed of a labelled configuration: FNV-1a of the label mixed into the
/// master seed, so results depend only on (seed, label).
pub fn label_seed(seed: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h ^ seed.rotate_left(17)
}

pub fn sweep(
    configs: &[SweepConfig],
    trials: u64,
    horizon: u64,
    seed: u64,
    threads: Option<usize>,
) -> Result<Vec<SweepRow>> {
    configs
        .iter()
        .map(|c| {
            let h = c.horizon.unwrap_or(horizon);
            let opts = EnsembleOptions {
                trials,
                horizon: h,
                seed: label_seed(seed, &c.label),
                threads,
                stepping: Stepping::Accelerated,
            };
            let ens = run_trials_with(&c.params, &opts)?;
            let estimate = estimate_mttue(&ens.results, h, c.params.scrub_interval, &c.clock)?;
            Ok(SweepRow {
                label: c.label.clone(),
                params: c.params.clone(),
                horizon: h,
                estimate,
                ensemble: Some(ens),
            })
        })
        .collect()
}

/// Named series sets, one per failure-probability plot.
pub mod figures {
    use super::*;

    pub const NAMES: [&str; 5] = [
        "failure_probability",
        "failure_probability_new",
        "temperature_error_probability",
        "taggon_error_probability",
        "spatial_failure_probability",
    ];

    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    pub struct FigureRecipe {
        pub name: String,
        pub series: Vec<SweepConfig>,
    }

    fn series(label: &str, params: ModelParams, horizon: u64) -> SweepConfig {
        SweepConfig {
            label: label.into(),
            params,
            clock: EpochClock::default(),
            horizon: Some(horizon),
        }
    }

    /// Worst measured module: ΔL = 12, N = 5.
    pub fn worst_case() -> ModelParams {
        ModelParams::new(12, 5)
    }

    /// Best module with N > 1.
    pub fn best_case() -> ModelParams {
        ModelParams::new(2, 2)
    }

    /// Per-(module, condition) ΔL fitted to reference MTTUEs in hours, with N = 5
    /// and removal after detection.
    pub fn temperature_presets() -> Vec<SweepConfig> {
        vec![
            series("M12@50C", ModelParams::new(51, 5).with_removal(true), 3_000_000),
            series("M12@80C", ModelParams::new(176, 5).with_removal(true), 1_000_000),
        ]
    }

    pub fn taggon_presets() -> Vec<SweepConfig> {
        vec![
            series("M13@300ns", ModelParams::new(44, 5).with_removal(true), 3_000_000),
            series("M13@1000ns", ModelParams::new(222, 5).with_removal(true), 1_000_000),
        ]
    }

    /// N = ΔL with removal after detection.
    pub fn delta_l_sweep() -> Vec<SweepConfig> {
        [10u64, 100, 1000]
            .into_iter()
            .map(|dl| {
                series(
                    &format!("dL={dl}"),
                    ModelParams::new(dl, dl).with_removal(true),
                    2_000_000,
                )
            })
            .collect()
    }

    pub fn recipe(name: &str) -> Result<FigureRecipe> {
        let series = match name {
            "failure_probability" => vec![
                series("worst-case", worst_case(), 2_000_000),
                series("best-case", best_case(), 10_000_000),
            ],
            "failure_probability_new" => vec![
                series("no-removal", worst_case(), 2_000_000),
                series("removal", worst_case().with_removal(true), 2_000_000),
            ],
            "temperature_error_probability" => temperature_presets(),
            "taggon_error_probability" => taggon_presets(),
            "spatial_failure_probability" => delta_l_sweep(),
            other => {
                return Err(Error::InvalidParams(format!(
                    "unknown figure {other:?}; expected one of {NAMES:?}"
                )))
            }
        };
        Ok(FigureRecipe {
            name: name.into(),
            series,
        })
    }
}
