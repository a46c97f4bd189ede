//! The `simulate`, `compare`, `wue` and `profile` commands.
//!
//! Every flag can also be given through the environment variable shown in
//! `--help` (prefix `ECOORC_`); a flag on the command line wins.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use ecoorc_core::footprint::per_kwh_profile;
use ecoorc_core::scheduler::SchedulerConfig;
use ecoorc_core::simulator::{run_comparison, run_simulation, SimulationTrace, Strategy, Variant};
use ecoorc_core::wue::{hourly_wue_series, wet_bulb_f, WueModelConfig, DEFAULT_CYCLES};
use ecoorc_core::{Factor, FootprintVector};

use crate::datasets::{
    self, format_timestamp, output_path, parse_timestamp, write_csv, write_text,
};
use crate::report::{
    factor_chart, migration_chart, rank_profiles, round_rows, ComparisonRow, MigrationRow,
    ProfileRow, RunTotals, Summary, WueRow,
};
use crate::scenario::{load_scenario, Scenario};
use crate::svg::{LineChart, LineStyle, Series};

#[derive(Debug, Parser)]
#[command(
    name = "ecoorc",
    version,
    about = "Sustainability-aware placement of jobs across data centers"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one strategy and write per-round footprints.
    Simulate(SimulateArgs),
    /// Run several strategies on shared workloads over several seeds.
    Compare(CompareArgs),
    /// Estimate hourly WUE from weather.
    Wue(WueArgs),
    /// Per-kWh footprint of every facility, with rankings.
    Profile(ProfileArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long, env = "ECOORC_SCENARIO")]
    pub scenario: PathBuf,
    /// preference, carbon, water, land or ewaste.
    #[arg(long, env = "ECOORC_STRATEGY")]
    pub strategy: Option<Strategy>,
    #[arg(long, env = "ECOORC_SEED")]
    pub seed: Option<u64>,
    /// Minimum relative improvement before a running job migrates.
    #[arg(long, env = "ECOORC_ALPHA")]
    pub alpha: Option<f64>,
    #[arg(long, env = "ECOORC_MIGRATE", action = ArgAction::Set)]
    pub migrate: Option<bool>,
    #[arg(long, env = "ECOORC_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MigrateMode {
    On,
    Off,
    /// Run every strategy with and without migration.
    Both,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[arg(long, env = "ECOORC_SCENARIO")]
    pub scenario: PathBuf,
    /// Explicit seeds, comma separated.
    #[arg(
        long,
        env = "ECOORC_SEEDS",
        value_delimiter = ',',
        conflicts_with = "seed_count"
    )]
    pub seeds: Vec<u64>,
    /// Use this many consecutive seeds starting at the scenario seed.
    #[arg(long, env = "ECOORC_SEED_COUNT")]
    pub seed_count: Option<u64>,
    #[arg(
        long,
        env = "ECOORC_STRATEGIES",
        value_delimiter = ',',
        default_value = "preference,carbon,water,land"
    )]
    pub strategies: Vec<Strategy>,
    #[arg(long, env = "ECOORC_ALPHA")]
    pub alpha: Option<f64>,
    /// Migration setting; `both` adds a migration report.
    #[arg(long, env = "ECOORC_MIGRATE", value_enum)]
    pub migrate: Option<MigrateMode>,
    #[arg(long, env = "ECOORC_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct WueArgs {
    /// CSV with timestamp_utc,temp_c,dewpoint_c.
    #[arg(long, env = "ECOORC_WEATHER")]
    pub weather: PathBuf,
    /// Cycles of concentration of the cooling tower.
    #[arg(long = "s", env = "ECOORC_CYCLES", default_value_t = DEFAULT_CYCLES)]
    pub cycles: f64,
    /// Declared annual WUE drawn as a reference line.
    #[arg(long, env = "ECOORC_DECLARED")]
    pub declared: Option<f64>,
    #[arg(long, env = "ECOORC_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ProfileArgs {
    #[arg(long, env = "ECOORC_SCENARIO")]
    pub scenario: PathBuf,
    /// Hour to evaluate grid-mix regions at (RFC 3339); defaults to the
    /// simulation start.
    #[arg(long, env = "ECOORC_AT")]
    pub at: Option<String>,
    #[arg(long, env = "ECOORC_OUT")]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<Vec<PathBuf>> {
    match cli.command {
        Command::Simulate(a) => simulate(&a),
        Command::Compare(a) => compare(&a),
        Command::Wue(a) => wue(&a),
        Command::Profile(a) => profile(&a),
    }
}

fn out_dir(flag: &Option<PathBuf>, scenario: Option<&Scenario>) -> PathBuf {
    flag.clone()
        .or_else(|| scenario.and_then(|s| s.output_dir.clone()))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn load(path: &Path) -> Result<Scenario> {
    Ok(load_scenario(path)?)
}

fn scheduler_with(
    base: SchedulerConfig,
    alpha: Option<f64>,
    migrate: Option<bool>,
) -> Result<SchedulerConfig> {
    let mut s = base;
    if let Some(a) = alpha {
        s.alpha = a;
    }
    if let Some(m) = migrate {
        s.migration_enabled = m;
    }
    s.validate().context("--alpha")?;
    Ok(s)
}

fn write_factor_charts(
    dir: &Path,
    title: &str,
    rows: &[(String, u32, FootprintVector)],
    files: &mut Vec<PathBuf>,
) -> Result<()> {
    for f in Factor::ALL {
        let chart = factor_chart(title, f, rows.iter().map(|(l, t, v)| (l.as_str(), *t, *v)));
        let path = output_path(dir, &format!("{}.svg", f.name()))?;
        write_text(&path, &chart.to_svg())?;
        files.push(path);
    }
    Ok(())
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)?;
    Ok(())
}

pub fn simulate(args: &SimulateArgs) -> Result<Vec<PathBuf>> {
    let scenario = load(&args.scenario)?;
    let mut sim = scenario.simulation.clone();
    if let Some(s) = args.strategy {
        sim.strategy = s;
    }
    if let Some(seed) = args.seed {
        sim.seed = seed;
    }
    let sched = scheduler_with(scenario.scheduler, args.alpha, args.migrate)?;
    let trace = run_simulation(&sim, &scenario.fleet, &scenario.regions, &sched)
        .with_context(|| format!("simulating {}", scenario.name))?;

    let dir = out_dir(&args.out, Some(&scenario));
    let mut files = Vec::new();
    let rows = round_rows(&trace);
    let path = output_path(&dir, "rounds.csv")?;
    write_csv(&path, &rows)?;
    files.push(path);

    let summary = Summary::new(
        &scenario.name,
        vec![sim.seed],
        sim.clone(),
        sched,
        vec![RunTotals::new(sim.seed, &trace)],
    );
    let path = output_path(&dir, "summary.json")?;
    write_json(&path, &summary)?;
    files.push(path);

    let chart_rows: Vec<_> = rows
        .iter()
        .map(|r| (r.strategy.clone(), r.t_hour, r.footprint()))
        .collect();
    let title = format!("{} ({}, seed {})", scenario.name, trace.label, sim.seed);
    write_factor_charts(&dir, &title, &chart_rows, &mut files)?;
    Ok(files)
}

fn seeds(args: &CompareArgs, base: u64) -> Vec<u64> {
    if !args.seeds.is_empty() {
        args.seeds.clone()
    } else {
        let n = args.seed_count.unwrap_or(1);
        (0..n).map(|i| base.wrapping_add(i)).collect()
    }
}

const WITHOUT_MIGRATION: &str = "/no-migration";

pub fn compare(args: &CompareArgs) -> Result<Vec<PathBuf>> {
    let scenario = load(&args.scenario)?;
    if args.strategies.is_empty() {
        bail!("--strategies: at least one strategy is required");
    }
    let mut strategies = Vec::new();
    for s in &args.strategies {
        if !strategies.contains(s) {
            strategies.push(*s);
        }
    }
    let mode = args
        .migrate
        .unwrap_or(if scenario.scheduler.migration_enabled {
            MigrateMode::On
        } else {
            MigrateMode::Off
        });
    let base = scheduler_with(scenario.scheduler, args.alpha, None)?;
    let mut variants = Vec::new();
    for s in &strategies {
        if mode != MigrateMode::Off {
            variants.push(Variant::new(
                *s,
                SchedulerConfig {
                    migration_enabled: true,
                    ..base
                },
            ));
        }
        if mode != MigrateMode::On {
            let mut v = Variant::new(
                *s,
                SchedulerConfig {
                    migration_enabled: false,
                    ..base
                },
            );
            if mode == MigrateMode::Both {
                v.label.push_str(WITHOUT_MIGRATION);
            }
            variants.push(v);
        }
    }
    let seed_list = seeds(args, scenario.simulation.seed);
    if seed_list.is_empty() {
        bail!("--seed-count must be at least 1");
    }

    // Seeds are independent; each run owns its state.
    let results: Vec<Result<Vec<SimulationTrace>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = seed_list
            .iter()
            .map(|&seed| {
                let scenario = &scenario;
                let variants = &variants;
                scope.spawn(move || {
                    let mut sim = scenario.simulation.clone();
                    sim.seed = seed;
                    run_comparison(&sim, &scenario.fleet, &scenario.regions, variants)
                        .with_context(|| format!("comparing on {} with seed {seed}", scenario.name))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| bail!("a comparison run panicked"))
            })
            .collect()
    });
    let mut traces = Vec::with_capacity(seed_list.len());
    for r in results {
        traces.push(r?);
    }

    let dir = out_dir(&args.out, Some(&scenario));
    let mut files = Vec::new();
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    for (seed, ts) in seed_list.iter().zip(&traces) {
        for t in ts {
            rows.extend(
                round_rows(t)
                    .into_iter()
                    .map(|r| ComparisonRow::new(*seed, r)),
            );
            runs.push(RunTotals::new(*seed, t));
        }
    }
    let path = output_path(&dir, "comparison.csv")?;
    write_csv(&path, &rows)?;
    files.push(path);

    let summary = Summary::new(
        &scenario.name,
        seed_list.clone(),
        scenario.simulation.clone(),
        base,
        runs,
    );
    let path = output_path(&dir, "summary.json")?;
    write_json(&path, &summary)?;
    files.push(path);

    let chart_rows: Vec<_> = rows
        .iter()
        .map(|r| {
            let v = FootprintVector::from_array([r.carbon_g, r.water_l, r.land_g, r.ewaste_g]);
            (r.strategy.clone(), r.t_hour, v)
        })
        .collect();
    let title = format!("{} (mean of {} seed(s))", scenario.name, seed_list.len());
    write_factor_charts(&dir, &title, &chart_rows, &mut files)?;

    if mode == MigrateMode::Both {
        migration_report(
            &dir,
            &scenario.name,
            &strategies,
            &summary,
            &chart_rows,
            &mut files,
        )?;
    }
    Ok(files)
}

fn migration_report(
    dir: &Path,
    name: &str,
    strategies: &[Strategy],
    summary: &Summary,
    rows: &[(String, u32, FootprintVector)],
    files: &mut Vec<PathBuf>,
) -> Result<()> {
    let mut table = Vec::new();
    for s in strategies {
        let with_label = s.name().to_string();
        let without_label = format!("{}{WITHOUT_MIGRATION}", s.name());
        let (with, without) = (&summary.mean[&with_label], &summary.mean[&without_label]);
        for f in Factor::ALL {
            let (a, b) = (with.get(f), without.get(f));
            table.push(MigrationRow {
                strategy: with_label.clone(),
                factor: f.name().into(),
                with_migration: a,
                without_migration: b,
                relative_change: if b == 0.0 { 0.0 } else { (a - b) / b },
                mean_migrations: with.migrations,
            });
        }
    }
    let path = output_path(dir, "migration.csv")?;
    write_csv(&path, &table)?;
    files.push(path);

    for f in Factor::ALL {
        let per_round = |label: &str| {
            let mut acc: std::collections::BTreeMap<u32, (f64, usize)> = Default::default();
            for (_, t, v) in rows.iter().filter(|(l, _, _)| l == label) {
                let e = acc.entry(*t).or_insert((0.0, 0));
                e.0 += v.get(f);
                e.1 += 1;
            }
            acc.into_iter()
                .map(|(t, (s, n))| (t, s / n as f64))
                .collect::<Vec<_>>()
        };
        let pairs: Vec<_> = strategies
            .iter()
            .map(|s| {
                let with = per_round(s.name());
                let without = per_round(&format!("{}{WITHOUT_MIGRATION}", s.name()));
                (s.name().to_string(), with, without)
            })
            .collect();
        let chart = migration_chart(name, f, &pairs);
        let path = output_path(dir, &format!("migration_{}.svg", f.name()))?;
        write_text(&path, &chart.to_svg())?;
        files.push(path);
    }
    Ok(())
}

pub fn wue(args: &WueArgs) -> Result<Vec<PathBuf>> {
    let samples = datasets::read_weather(&args.weather)?;
    let cfg = WueModelConfig::new(args.cycles).context("--s")?;
    let series = hourly_wue_series(&samples, &cfg)?;
    let mut rows = Vec::with_capacity(samples.len());
    for (s, (_, w)) in samples.iter().zip(&series) {
        rows.push(WueRow {
            timestamp_utc: format_timestamp(s.timestamp),
            temp_c: s.temp_c,
            dewpoint_c: s.dewpoint_c,
            wet_bulb_f: wet_bulb_f(s)?,
            wue_l_per_kwh: *w,
        });
    }
    let dir = out_dir(&args.out, None);
    let mut files = Vec::new();
    let path = output_path(&dir, "wue.csv")?;
    write_csv(&path, &rows)?;
    files.push(path);

    let t0 = samples.first().map_or(0, |s| s.timestamp);
    let hours = |ts: i64| (ts - t0) as f64 / 3600.0;
    let mut chart = LineChart::new(
        format!("WUE from {}", args.weather.display()),
        "hours since first sample",
        "WUE (l/kWh)",
    );
    chart.y2_label = Some("wet-bulb temperature (°F)".into());
    chart.push(Series::new(
        "estimated WUE",
        series.iter().map(|(ts, w)| (hours(*ts), *w)).collect(),
    ));
    if let Some(d) = args.declared {
        let last = samples.last().map_or(0.0, |s| hours(s.timestamp));
        chart
            .push(Series::new("declared WUE", vec![(0.0, d), (last, d)]).styled(LineStyle::Dashed));
    }
    chart.push(
        Series::new(
            "wet-bulb temperature",
            rows.iter()
                .zip(&samples)
                .map(|(r, s)| (hours(s.timestamp), r.wet_bulb_f))
                .collect(),
        )
        .styled(LineStyle::Dotted)
        .on_secondary_axis(),
    );
    let path = output_path(&dir, "wue.svg")?;
    write_text(&path, &chart.to_svg())?;
    files.push(path);
    Ok(files)
}

pub fn profile(args: &ProfileArgs) -> Result<Vec<PathBuf>> {
    let scenario = load(&args.scenario)?;
    let at = match &args.at {
        Some(s) => parse_timestamp(s)
            .map_err(anyhow::Error::msg)
            .context("--at")?,
        None => scenario.simulation.start_timestamp,
    };
    let mut rows = Vec::with_capacity(scenario.fleet.len());
    for (dc, provider) in scenario.fleet.iter().zip(&scenario.providers) {
        let region = scenario
            .regions
            .profile_at(&dc.region, at)
            .with_context(|| format!("region of {}", dc.dc_id))?;
        let p = per_kwh_profile(dc, &region)?;
        rows.push(ProfileRow {
            dc_id: dc.dc_id.to_string(),
            provider: provider.clone(),
            region_id: dc.region.to_string(),
            carbon_g_per_kwh: p.carbon_g,
            water_l_per_kwh: p.water_l,
            land_g_per_kwh: p.land_g,
            ewaste_g_per_kwh: p.ewaste_g,
        });
    }
    let ranking = rank_profiles(&rows);
    let dir = out_dir(&args.out, Some(&scenario));
    let mut files = Vec::new();
    let path = output_path(&dir, "profiles.csv")?;
    write_csv(&path, &rows)?;
    files.push(path);
    let path = output_path(&dir, "ranking.csv")?;
    write_csv(&path, &ranking)?;
    files.push(path);

    for f in Factor::ALL {
        let best: Vec<&str> = ranking
            .iter()
            .filter(|r| r.factor == f.name())
            .take(3)
            .map(|r| r.dc_id.as_str())
            .collect();
        println!("{:<7} lowest: {}", f.name(), best.join(", "));
    }
    Ok(files)
}

/// Reads back a CSV written by one of the commands.
pub fn read_back<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    Ok(datasets::read_records(path)?)
}
