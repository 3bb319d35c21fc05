use std::path::PathBuf;
use std::time::{Instant, SystemTime};

use anyhow::{Context, Result};
use serde::Serialize;
use vrd_core::errmodel::Stepping;
use vrd_core::montecarlo::{
    estimate_mttue, figures, label_seed, oracle, run_trials_with, sweep, EnsembleOptions, MttueEstimate, SweepRow,
};
use vrd_core::persist;
use vrd_core::profiler::{bitflip_census_at, profile_device, summarize, weak_row_census, ProfileRun};
use vrd_core::svard::{
    assign_thresholds, generate_trace, simulate_chronus, simulate_para, Bin, MitigationStats, ThresholdMap,
    ThresholdPolicy,
};
use vrd_core::{DeviceModel, EpochClock, FailureCurve, ModelParams, ProfileSummary, WeakRowCensus};

use crate::config::{Command, RunConfig, DEFAULT_HORIZON};
use crate::manifest::ArtifactWriter;

/// Above this many windows the integrated oracle is skipped in `mttue` output.
const ORACLE_MAX_WINDOWS: u64 = 200_000;

pub struct RunOutcome {
    pub manifest: PathBuf,
    pub summary: String,
}

pub fn execute(cfg: &RunConfig, out_dir: PathBuf, threads: Option<usize>) -> Result<RunOutcome> {
    let started = SystemTime::now();
    let clock = Instant::now();
    let mut w = ArtifactWriter::new(&out_dir, cfg.command.name(), &cfg.hash())?;
    let summary = match cfg.command {
        Command::Profile => profile(cfg, &mut w)?,
        Command::Census => census(cfg, &mut w)?,
        Command::Model => model(cfg, &mut w, threads)?,
        Command::Mttue => mttue(cfg, &mut w, threads)?,
        Command::Sweep => run_sweep(cfg, &mut w, threads)?,
        Command::Svard => svard(cfg, &mut w)?,
        Command::Mitigate => mitigate(cfg, &mut w)?,
        Command::Report => report(cfg, &mut w, threads)?,
        Command::Validate => unreachable!("validate never executes a run"),
    };
    let manifest = w.finish(cfg, threads, started, clock)?;
    Ok(RunOutcome { manifest, summary })
}

fn seed(cfg: &RunConfig) -> u64 {
    cfg.seed.expect("resolved configs always carry a seed")
}

fn csv_bytes(f: impl FnOnce(&mut Vec<u8>) -> vrd_core::Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn device(cfg: &RunConfig) -> Result<DeviceModel> {
    let spec = cfg.device_spec().context("device spec missing from resolved config")?;
    Ok(spec.build(spec.seed.unwrap_or(seed(cfg)))?)
}

fn params(cfg: &RunConfig) -> Result<&ModelParams> {
    cfg.model_params()
        .context("model parameters missing from resolved config")
}

fn profiled(cfg: &RunConfig) -> Result<(DeviceModel, ProfileRun, ProfileSummary)> {
    let mut d = device(cfg)?;
    let run = profile_device(&mut d, cfg.iterations.unwrap_or(1))?;
    let s = summarize(&run)?;
    Ok((d, run, s))
}

#[derive(Serialize)]
struct ProfileReport<'a> {
    summary: &'a ProfileSummary,
    census: &'a WeakRowCensus,
}

fn profile(cfg: &RunConfig, w: &mut ArtifactWriter) -> Result<String> {
    let (_, run, s) = profiled(cfg)?;
    let census = weak_row_census(&run.matrix);
    w.write(
        "rdt-matrix",
        "csv",
        &csv_bytes(|b| persist::write_rdt_matrix_csv(b, &run.matrix))?,
    )?;
    w.write_json("flip-log", &persist::flip_log(&run.matrix))?;
    w.write_json(
        "summary",
        &ProfileReport {
            summary: &s,
            census: &census,
        },
    )?;
    Ok(format!(
        "guardband ratio {:.3}, RDT_min {} (first measurement), RDT_90% {}, dL {}, N {}",
        s.guardband_ratio, s.reference_rdt_min, s.rdt_p10, census.delta_l, census.n
    ))
}

fn census(cfg: &RunConfig, w: &mut ArtifactWriter) -> Result<String> {
    let mut d = device(cfg)?;
    let section = cfg.census.clone().unwrap_or(crate::config::CensusSection {
        hammer_count: None,
        repetitions: None,
    });
    let hc = match section.hammer_count {
        Some(hc) => hc,
        None => {
            let run = profile_device(&mut d, 1)?;
            summarize(&run)?.rdt_p10
        }
    };
    let c = bitflip_census_at(
        &mut d,
        hc,
        section.repetitions.unwrap_or(crate::config::DEFAULT_CENSUS_REPETITIONS),
    )?;
    w.write_json("census", &c)?;
    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record(["repetition", "flips", "cumulative_unique", "new_unique"])?;
    for i in 0..c.flips_per_repetition.len() {
        out.serialize((
            i + 1,
            c.flips_per_repetition[i],
            c.cumulative_unique[i],
            c.new_unique[i],
        ))?;
    }
    w.write("census", "csv", &out.into_inner()?)?;
    Ok(format!(
        "hammer count {hc}: {} unique locations, {:.1}% visible after the first repetition",
        c.cumulative_unique.last().copied().unwrap_or(0),
        100.0 * c.first_repetition_coverage()
    ))
}

fn options(cfg: &RunConfig, threads: Option<usize>, seed: u64) -> EnsembleOptions {
    EnsembleOptions {
        trials: cfg.trials.unwrap_or(crate::config::DEFAULT_TRIALS),
        horizon: cfg.horizon.unwrap_or(DEFAULT_HORIZON),
        seed,
        threads,
        stepping: Stepping::Accelerated,
    }
}

fn model(cfg: &RunConfig, w: &mut ArtifactWriter, threads: Option<usize>) -> Result<String> {
    let p = params(cfg)?;
    let ens = run_trials_with(p, &options(cfg, threads, seed(cfg)))?;
    let curves = [("model".to_string(), ens.curve.clone())];
    w.write("curve", "csv", &csv_bytes(|b| persist::write_curves_csv(b, &curves))?)?;
    w.write("events", "csv", &csv_bytes(|b| persist::write_events_csv(b, &ens))?)?;
    Ok(format!(
        "{} of {} trials failed within {} epochs",
        ens.events().count(),
        ens.trials,
        ens.horizon
    ))
}

#[derive(Serialize)]
struct MttueReport<'a> {
    params: &'a ModelParams,
    trials: u64,
    horizon: u64,
    seed: u64,
    clock: EpochClock,
    estimate: &'a MttueEstimate,
    /// Closed-form value for removal-free configurations.
    oracle_mttue_epochs: Option<f64>,
}

fn mttue(cfg: &RunConfig, w: &mut ArtifactWriter, threads: Option<usize>) -> Result<String> {
    let p = params(cfg)?;
    let opts = options(cfg, threads, seed(cfg));
    let clock = cfg.clock.unwrap_or_default();
    let ens = run_trials_with(p, &opts)?;
    let est = estimate_mttue(&ens.results, ens.horizon, p.scrub_interval, &clock)?;
    let oracle_mttue_epochs = if p.removal_enabled {
        None
    } else {
        oracle::integrated_mttue(p, ORACLE_MAX_WINDOWS).ok()
    };
    w.write_json(
        "mttue",
        &MttueReport {
            params: p,
            trials: opts.trials,
            horizon: opts.horizon,
            seed: opts.seed,
            clock,
            estimate: &est,
            oracle_mttue_epochs,
        },
    )?;
    let curves = [("mttue".to_string(), ens.curve.clone())];
    w.write("curve", "csv", &csv_bytes(|b| persist::write_curves_csv(b, &curves))?)?;
    Ok(format!(
        "MTTUE {:.6e} epochs ({:.6e} h), {:?}, {:.1}% censored",
        est.mttue_epochs,
        est.mttue_hours,
        est.method,
        100.0 * est.censored_fraction
    ))
}

fn labelled_curves(rows: &[SweepRow]) -> Vec<(String, FailureCurve)> {
    rows.iter()
        .filter_map(|r| r.ensemble.as_ref().map(|e| (r.label.clone(), e.curve.clone())))
        .collect()
}

fn sweep_table(rows: &[SweepRow]) -> String {
    rows.iter()
        .map(|r| {
            format!(
                "{}: {:.4e} epochs ({:.4e} h)",
                r.label, r.estimate.mttue_epochs, r.estimate.mttue_hours
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn run_sweep(cfg: &RunConfig, w: &mut ArtifactWriter, threads: Option<usize>) -> Result<String> {
    let configs = cfg
        .sweep
        .as_deref()
        .context("sweep list missing from resolved config")?;
    let opts = options(cfg, threads, seed(cfg));
    let rows = sweep(configs, opts.trials, opts.horizon, opts.seed, threads)?;
    w.write_json("sweep", &rows)?;
    w.write(
        "curves",
        "csv",
        &csv_bytes(|b| persist::write_curves_csv(b, &labelled_curves(&rows)))?,
    )?;
    Ok(sweep_table(&rows))
}

fn report(cfg: &RunConfig, w: &mut ArtifactWriter, threads: Option<usize>) -> Result<String> {
    let name = cfg.figure.as_deref().context("figure missing from resolved config")?;
    let mut recipe = figures::recipe(name)?;
    if let Some(h) = cfg.horizon {
        for s in &mut recipe.series {
            s.horizon = Some(h);
        }
    }
    let trials = cfg.trials.unwrap_or(crate::config::DEFAULT_TRIALS);
    let rows = sweep(&recipe.series, trials, DEFAULT_HORIZON, seed(cfg), threads)?;
    let curves = labelled_curves(&rows);
    w.write(name, "csv", &csv_bytes(|b| persist::write_curves_csv(b, &curves))?)?;
    w.write_json(&format!("{name}-mttue"), &rows)?;
    Ok(sweep_table(&rows))
}

#[derive(Serialize)]
struct SvardReport {
    policy: ThresholdPolicy,
    extra_demotion_fraction: f64,
    guarded_threshold: u64,
    relaxed_threshold: u64,
    rows: usize,
    guarded_rows: usize,
    relaxed_rows: usize,
    demoted_rows: usize,
    reference_rdt_min: u64,
    rdt_p10: u64,
    guardband_ratio: f64,
}

fn svard(cfg: &RunConfig, w: &mut ArtifactWriter) -> Result<String> {
    let section = cfg.svard.clone().unwrap_or_default();
    let (_, run, s) = profiled(cfg)?;
    let mut map = assign_thresholds(&s, section.policy, section.extra_demotion_fraction)?;
    let mut demoted = 0;
    if section.demote_weak_rows {
        for row in weak_row_census(&run.matrix).weak_rows {
            map.demote(row)?;
            demoted += 1;
        }
    }
    w.write(
        "thresholds",
        "csv",
        &csv_bytes(|b| persist::write_threshold_map_csv(b, &map))?,
    )?;
    let r = SvardReport {
        policy: section.policy,
        extra_demotion_fraction: section.extra_demotion_fraction,
        guarded_threshold: map.guarded,
        relaxed_threshold: map.relaxed,
        rows: map.len(),
        guarded_rows: map.count_in(Bin::Guarded),
        relaxed_rows: map.count_in(Bin::Relaxed),
        demoted_rows: demoted,
        reference_rdt_min: s.reference_rdt_min,
        rdt_p10: s.rdt_p10,
        guardband_ratio: s.guardband_ratio,
    };
    w.write_json("svard", &r)?;
    Ok(format!(
        "{} of {} rows guarded at {}, the rest relaxed at {}",
        r.guarded_rows, r.rows, r.guarded_threshold, r.relaxed_threshold
    ))
}

#[derive(Serialize)]
struct PolicyResult {
    policy: ThresholdPolicy,
    guarded_rows: usize,
    para: MitigationStats,
    chronus: MitigationStats,
}

#[derive(Serialize)]
struct MitigationReport {
    trace: vrd_core::TraceKind,
    length: u64,
    trace_seed: u64,
    para_seed: u64,
    epsilon: f64,
    results: Vec<PolicyResult>,
}

fn mitigate(cfg: &RunConfig, w: &mut ArtifactWriter) -> Result<String> {
    let section = cfg.mitigate.clone().unwrap_or_default();
    let (d, _, s) = profiled(cfg)?;
    let trace = generate_trace(section.trace, d.tested_rows(), section.length, seed(cfg))?;
    let para_seed = label_seed(seed(cfg), "para");
    let mut results = Vec::new();
    for policy in [ThresholdPolicy::OneSizeFitsAll, ThresholdPolicy::SvardTwoBin] {
        let map: ThresholdMap = assign_thresholds(&s, policy, section.extra_demotion_fraction)?;
        results.push(PolicyResult {
            policy,
            guarded_rows: map.count_in(Bin::Guarded),
            para: simulate_para(&trace, &map, section.epsilon, para_seed)?,
            chronus: simulate_chronus(&trace, &map)?,
        });
    }
    let text = results
        .iter()
        .map(|r| {
            format!(
                "{:?}: PARA {:.4} refreshes/kACT, Chronus {:.4} refreshes/kACT",
                r.policy, r.para.refresh_rate_per_kilo_act, r.chronus.refresh_rate_per_kilo_act
            )
        })
        .collect::<Vec<_>>()
        .join("\n");
    w.write_json(
        "mitigation",
        &MitigationReport {
            trace: section.trace,
            length: section.length,
            trace_seed: seed(cfg),
            para_seed,
            epsilon: section.epsilon,
            results,
        },
    )?;
    Ok(text)
}
