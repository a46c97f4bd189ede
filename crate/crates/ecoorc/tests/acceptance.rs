//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Runs without the libtest harness so the lines are
//! always shown.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use ecoorc::commands::{self, WueArgs};
use ecoorc::report::WueRow;
use ecoorc::{load_scenario, Scenario};
use ecoorc_core::footprint::{
    carbon_footprint, ewaste_footprint, footprint, land_offsite, land_onsite, lue, per_kwh_profile,
    water_offsite, water_onsite,
};
use ecoorc_core::gridmix::{
    mix_to_intensity, Fallback, Intensities, IntensityKind, PowerSource, RegionCatalog,
    SourceFactors, SourceMix,
};
use ecoorc_core::scheduler::{
    cost, normalize_profiles, CapacityMode, CostRow, Normalization, RoundInstance, SchedulerConfig,
    User,
};
use ecoorc_core::simulator::{
    generate_workload, run_simulation, run_with_workload, SimulationConfig, SimulationTrace,
    Strategy, Variant,
};
use ecoorc_core::wue::{hourly_wue_series, wue_estimate, WeatherSample, WueModelConfig};
use ecoorc_core::{
    DataCenterProfile, DcId, Factor, FactorWeights, FootprintVector, JobId, RegionId, RegionProfile,
};
use proptest::prelude::{any, prop, prop_assert, prop_assert_eq};
use proptest::strategy::Strategy as _;
use proptest::test_runner::{Config, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rel_close(got: f64, want: f64, rel: f64) -> bool {
    (got - want).abs() <= rel * want.abs().max(f64::MIN_POSITIVE)
}

/// Traces of one scenario: `runs[seed index][variant index]`.
struct Batch {
    scenario: Scenario,
    seeds: Vec<u64>,
    variants: Vec<Variant>,
    runs: Vec<Vec<SimulationTrace>>,
    slowest: Duration,
}

impl Batch {
    fn mean(&self, label: &str, f: Factor) -> f64 {
        let v = self.variants.iter().position(|v| v.label == label).unwrap();
        self.runs
            .iter()
            .map(|r| r[v].cumulative.get(f))
            .sum::<f64>()
            / self.runs.len() as f64
    }
}

const STRATEGIES: [Strategy; 4] = [
    Strategy::Preference,
    Strategy::Baseline(Factor::Carbon),
    Strategy::Baseline(Factor::Water),
    Strategy::Baseline(Factor::Land),
];

fn off_label(s: Strategy) -> String {
    format!("{}/no-migration", s.name())
}

/// Every bundled-scenario run used by the criteria: 10 seeds, four
/// strategies, with and without migration.
fn run_batch(name: &str) -> Batch {
    let scenario = load_scenario(&root().join(format!("scenarios/{name}.toml"))).unwrap();
    let base = scenario.scheduler;
    let mut variants = Vec::new();
    for s in STRATEGIES {
        variants.push(Variant::new(
            s,
            SchedulerConfig {
                migration_enabled: true,
                ..base
            },
        ));
        let mut v = Variant::new(
            s,
            SchedulerConfig {
                migration_enabled: false,
                ..base
            },
        );
        v.label = off_label(s);
        variants.push(v);
    }
    let seeds: Vec<u64> = (1..=10).collect();
    let mut runs = Vec::new();
    let mut slowest = Duration::ZERO;
    for &seed in &seeds {
        let cfg = SimulationConfig {
            seed,
            ..scenario.simulation.clone()
        };
        let workload = generate_workload(&cfg).unwrap();
        let mut per_seed = Vec::new();
        for v in &variants {
            let t = Instant::now();
            let trace =
                run_with_workload(&cfg, &workload, &scenario.fleet, &scenario.regions, v).unwrap();
            slowest = slowest.max(t.elapsed());
            per_seed.push(trace);
        }
        runs.push(per_seed);
    }
    Batch {
        scenario,
        seeds,
        variants,
        runs,
        slowest,
    }
}

struct Ctx {
    meta: Option<Batch>,
    cloud: Option<Batch>,
    /// (description, trace, facility capacities) of every concurrent-mode run.
    checked_capacity: Vec<(String, SimulationTrace, BTreeMap<DcId, u32>)>,
    batch_time: Duration,
}

impl Ctx {
    fn batches(&mut self) -> (&Batch, &Batch) {
        if self.meta.is_none() {
            let t = Instant::now();
            self.meta = Some(run_batch("meta"));
            self.cloud = Some(run_batch("cloud"));
            self.batch_time = t.elapsed();
            for b in [self.meta.as_ref().unwrap(), self.cloud.as_ref().unwrap()] {
                let caps: BTreeMap<DcId, u32> = b
                    .scenario
                    .fleet
                    .iter()
                    .map(|d| (d.dc_id.clone(), d.s_max))
                    .collect();
                for (seed, runs) in b.seeds.iter().zip(&b.runs) {
                    for t in runs {
                        self.checked_capacity.push((
                            format!("{} seed {seed} {}", b.scenario.name, t.label),
                            t.clone(),
                            caps.clone(),
                        ));
                    }
                }
            }
        }
        (self.meta.as_ref().unwrap(), self.cloud.as_ref().unwrap())
    }
}

fn equation_suite(_: &mut Ctx) -> Check {
    let t = Instant::now();
    let region = |ci, ewif, elif, wsf, cclf| RegionProfile {
        region_id: RegionId::new("R"),
        ci_grid: ci,
        ewif_grid: ewif,
        elif_grid: elif,
        wsf,
        cclf,
    };
    let dc = |pue, wue| DataCenterProfile::grid_only("D", "R", pue, wue);
    let mut cases: Vec<(&str, f64, f64)> = Vec::new();

    let mut onsite = dc(1.2, 0.0);
    onsite.p_onsite = 0.5;
    onsite.ci_onsite = 100.0;
    cases.push((
        "carbon, half on-site",
        carbon_footprint(1.0, &onsite, &region(300.0, 0.0, 0.0, 0.0, 0.0)),
        240.0,
    ));
    cases.push((
        "carbon, Iowa PUE",
        carbon_footprint(10.0, &dc(1.16, 0.0), &region(500.0, 0.0, 0.0, 0.0, 0.0)),
        5800.0,
    ));
    cases.push((
        "water on-site, Iowa WUE",
        water_onsite(2.0, &dc(1.16, 0.19), &region(0.0, 0.0, 0.0, 0.25, 0.0)),
        0.475,
    ));
    cases.push((
        "water off-site",
        water_offsite(1.0, &dc(1.16, 0.0), &region(0.0, 1.9, 0.0, 0.25, 0.0)),
        2.755,
    ));
    let mut iowa = dc(1.16, 0.19);
    iowa.area = Some(37904.0);
    iowa.annual_it_energy = Some(876_000_000.0);
    cases.push((
        "land use effectiveness, Iowa",
        lue(&iowa).map_err(|e| e.to_string())?,
        37904.0 / 876_000_000.0,
    ));
    let mut rounded = dc(1.0, 0.0);
    rounded.area = Some(43269.0);
    rounded.annual_it_energy = Some(1e9);
    cases.push((
        "land on-site",
        land_onsite(100.0, &rounded, &region(0.0, 0.0, 0.0, 0.0, 200.0))
            .map_err(|e| e.to_string())?,
        0.86538,
    ));
    cases.push((
        "land off-site",
        land_offsite(1.0, &dc(1.1, 0.0), &region(0.0, 0.0, 0.002, 0.0, 150.0)),
        0.33,
    ));
    let mut ew = dc(1.0, 0.0);
    ew.ewi = 0.4;
    cases.push(("e-waste", ewaste_footprint(50.0, &ew), 20.0));
    let profile =
        per_kwh_profile(&iowa, &region(437.0, 1.0, 0.01, 0.2, 300.0)).map_err(|e| e.to_string())?;
    cases.push(("per-kWh carbon, Iowa", profile.carbon_g, 1.16 * 437.0));
    let full =
        footprint(3.0, &iowa, &region(437.0, 1.0, 0.01, 0.2, 300.0)).map_err(|e| e.to_string())?;
    cases.push((
        "footprint scales per kWh profile",
        full.water_l,
        3.0 * profile.water_l,
    ));

    let factors = SourceFactors::new(
        [
            (
                PowerSource::Coal,
                Intensities {
                    ci_g_per_kwh: 820.0,
                    water_l_per_kwh: 0.0,
                    land_m2_per_kwh: 0.0,
                },
            ),
            (
                PowerSource::Wind,
                Intensities {
                    ci_g_per_kwh: 11.0,
                    water_l_per_kwh: 0.0,
                    land_m2_per_kwh: 0.0,
                },
            ),
        ],
        Fallback::Error,
    )
    .map_err(|e| e.to_string())?;
    let mix = SourceMix::new(
        RegionId::new("R"),
        [(PowerSource::Coal, 0.5), (PowerSource::Wind, 0.5)],
    )
    .map_err(|e| e.to_string())?;
    cases.push((
        "grid mix weighting",
        mix_to_intensity(&mix, &factors, IntensityKind::Carbon).map_err(|e| e.to_string())?,
        415.5,
    ));

    for (name, got, want) in &cases {
        ensure(rel_close(*got, *want, 1e-9), || {
            format!("{name}: got {got}, expected {want}")
        })?;
    }
    let elapsed = t.elapsed();
    ensure(elapsed < Duration::from_secs(1), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "{} examples within 1e-9 relative in {elapsed:?}",
        cases.len()
    ))
}

fn solver_exactness(_: &mut Ctx) -> Check {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2025);
    let mut worst = 0.0f64;
    for i in 0..200 {
        let dcs = rng.random_range(1..=4usize);
        let jobs = rng.random_range(1..=6usize);
        let cap = rng.random_range(1..=3u32);
        let alpha = [0.0, 0.1, 0.3][rng.random_range(0..3)];
        let mode = if i % 2 == 0 {
            CapacityMode::Concurrent
        } else {
            CapacityMode::Incoming
        };
        let mut load = vec![0u32; dcs];
        let rows: Vec<CostRow> = (0..jobs)
            .map(|j| {
                let mut current_dc = None;
                if rng.random_bool(0.5) {
                    let d = rng.random_range(0..dcs);
                    if load[d] < cap {
                        load[d] += 1;
                        current_dc = Some(d);
                    }
                }
                CostRow {
                    job: JobId(j as u64),
                    arrival_hour: rng.random_range(0..3),
                    current_dc,
                    costs: (0..dcs).map(|_| rng.random::<f64>()).collect(),
                }
            })
            .collect();
        let cfg = SchedulerConfig {
            alpha,
            capacity_mode: mode,
            ..SchedulerConfig::default()
        };
        let ids = (0..dcs).map(|d| DcId::new(format!("d{d}"))).collect();
        let inst = RoundInstance::from_costs(ids, vec![cap; dcs], rows, &cfg)
            .map_err(|e| e.to_string())?;
        let fast = inst.solve().map_err(|e| format!("instance {i}: {e}"))?;
        let slow = inst
            .brute_force()
            .map_err(|e| format!("instance {i}: {e}"))?;
        let gap = (fast.objective_value - slow.objective_value).abs();
        worst = worst.max(gap);
        ensure(gap <= 1e-9, || {
            format!(
                "instance {i}: solver {} vs exhaustive {}",
                fast.objective_value, slow.objective_value
            )
        })?;
    }
    let elapsed = t.elapsed();
    ensure(elapsed < Duration::from_secs(10), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "200 instances, largest objective gap {worst:e}, {elapsed:?}"
    ))
}

fn migration_trigger(ctx: &mut Ctx) -> Check {
    let (_, cloud) = ctx.batches();
    ensure(cloud.scenario.fleet.len() == 24, || {
        format!("cloud fleet has {} facilities", cloud.scenario.fleet.len())
    })?;
    ensure(
        cloud.scenario.simulation.lambda_per_hour == 10.0 && cloud.scenario.scheduler.alpha == 0.1,
        || "cloud scenario is not at lambda 10, alpha 0.1".into(),
    )?;
    let mut checked = 0;
    for (seed, runs) in cloud.seeds.iter().zip(&cloud.runs) {
        for t in runs.iter().filter(|t| !t.label.ends_with("/no-migration")) {
            for r in &t.records {
                for m in &r.decision.migrations {
                    checked += 1;
                    ensure(m.cost_after <= 0.9 * m.cost_before + 1e-12, || {
                        format!(
                            "seed {seed} {} hour {}: {} moved {}→{} at {} vs {}",
                            t.label, r.t_hour, m.job, m.from, m.to, m.cost_after, m.cost_before
                        )
                    })?;
                }
            }
        }
    }
    ensure(checked > 0, || {
        "no migrations happened, nothing was checked".into()
    })?;
    Ok(format!(
        "{checked} migrations over 40 runs of 72 h on 24 facilities, zero violations"
    ))
}

fn capacity(ctx: &mut Ctx) -> Check {
    ctx.batches();
    let mut rounds = 0;
    for (what, trace, caps) in &ctx.checked_capacity {
        for r in &trace.records {
            rounds += 1;
            let mut load: BTreeMap<&DcId, u32> = BTreeMap::new();
            for d in r.decision.placements.values() {
                *load.entry(d).or_default() += 1;
            }
            for (d, n) in load {
                ensure(n <= caps[d], || {
                    format!("{what} hour {}: {d} holds {n} > {}", r.t_hour, caps[d])
                })?;
            }
        }
    }
    ensure(
        ctx.checked_capacity
            .iter()
            .all(|(_, _, c)| c.values().all(|s| *s == 5)),
        || "a facility is not at 5 slots".into(),
    )?;
    Ok(format!(
        "{} runs, {rounds} rounds, never above 5 concurrent jobs",
        ctx.checked_capacity.len()
    ))
}

fn strategy_ordering(ctx: &mut Ctx) -> Check {
    let batch_time = {
        ctx.batches();
        ctx.batch_time
    };
    let (meta, cloud) = ctx.batches();
    let mut notes = Vec::new();
    for b in [meta, cloud] {
        for (f, winner) in [
            (Factor::Carbon, "carbon"),
            (Factor::Water, "water"),
            (Factor::Land, "land"),
        ] {
            let best = b.mean(winner, f);
            for s in STRATEGIES {
                let other = b.mean(s.name(), f);
                ensure(best <= other, || {
                    format!(
                        "{}: mean {} of {winner} is {best}, above {} at {other}",
                        b.scenario.name,
                        f.name(),
                        s.name()
                    )
                })?;
            }
        }
        notes.push(format!("{} slowest run {:?}", b.scenario.name, b.slowest));
    }
    ensure(cloud.slowest < Duration::from_secs(5), || {
        format!("a cloud run took {:?}", cloud.slowest)
    })?;
    ensure(batch_time < Duration::from_secs(600), || {
        format!("all runs took {batch_time:?}")
    })?;
    Ok(format!(
        "orderings hold on meta and cloud over 10 seeds; {}; all 160 runs {batch_time:?}",
        notes.join(", ")
    ))
}

fn migration_benefit(ctx: &mut Ctx) -> Check {
    let (meta, cloud) = ctx.batches();
    let mut detail = Vec::new();
    for b in [meta, cloud] {
        for f in [Factor::Carbon, Factor::Water, Factor::Land] {
            let s = Strategy::Baseline(f);
            let with = b.mean(s.name(), f);
            let without = b.mean(&off_label(s), f);
            ensure(with <= without, || {
                format!(
                    "{} {}: {with} with migration > {without} without",
                    b.scenario.name,
                    s.name()
                )
            })?;
            detail.push(format!(
                "{}/{} {:+.2}%",
                b.scenario.name,
                f.name(),
                100.0 * (with - without) / without
            ));
        }
    }
    Ok(detail.join(", "))
}

fn wue_model(_: &mut Ctx) -> Check {
    let cfg = WueModelConfig::new(10.0).map_err(|e| e.to_string())?;
    let at59 = wue_estimate(59.0, &cfg);
    ensure((at59 - 3.4475).abs() <= 1e-3, || {
        format!("59 °F gives {at59}")
    })?;
    let at20 = wue_estimate(20.0, &cfg);
    ensure(at20 == 0.0, || format!("20 °F gives {at20}"))?;

    let dir = root().join("data/weather");
    let mut files = 0;
    let mut hours = 0;
    let mut entries: Vec<_> = std::fs::read_dir(&dir)
        .map_err(|e| e.to_string())?
        .flatten()
        .map(|e| e.path())
        .collect();
    entries.sort();
    for path in entries
        .iter()
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
    {
        let samples = ecoorc::datasets::read_weather(path).map_err(|e| e.to_string())?;
        let series = hourly_wue_series(&samples, &cfg).map_err(|e| e.to_string())?;
        ensure(series.iter().all(|(_, w)| *w >= 0.0), || {
            format!("{} has a negative hour", path.display())
        })?;
        files += 1;
        hours += series.len();
    }

    let out = tempfile::tempdir().map_err(|e| e.to_string())?;
    commands::wue(&WueArgs {
        weather: dir.join("constant_tw59.csv"),
        cycles: 10.0,
        declared: None,
        out: Some(out.path().to_path_buf()),
    })
    .map_err(|e| format!("{e:#}"))?;
    let rows: Vec<WueRow> =
        commands::read_back(&out.path().join("wue.csv")).map_err(|e| e.to_string())?;
    ensure(rows.len() == 72, || format!("{} rows", rows.len()))?;
    ensure(
        rows.iter()
            .all(|r| (r.wue_l_per_kwh - 3.4475).abs() <= 1e-3),
        || "constant weather drifts from 3.4475".into(),
    )?;
    Ok(format!(
        "59 °F → {at59:.5}, 20 °F → 0, {hours} fixture hours over {files} files all ≥ 0"
    ))
}

fn workload_statistics(_: &mut Ctx) -> Check {
    let base = SimulationConfig {
        users: vec![User::new("u", FactorWeights::one_hot(Factor::Carbon))],
        ..SimulationConfig::default()
    };
    ensure(
        base.lambda_per_hour == 10.0 && base.horizon_hours == 72,
        || "defaults changed".into(),
    )?;
    let (mut jobs, mut power, mut life) = (0usize, 0.0, 0.0);
    for seed in 0..50 {
        let w = generate_workload(&SimulationConfig {
            seed,
            ..base.clone()
        })
        .map_err(|e| e.to_string())?;
        jobs += w.len();
        power += w.iter().map(|j| j.power_kw).sum::<f64>();
        life += w.iter().map(|j| f64::from(j.lifetime_hours)).sum::<f64>();
    }
    let mean_jobs = jobs as f64 / 50.0;
    let mean_power = power / jobs as f64;
    let mean_life = life / jobs as f64;
    ensure((684.0..=756.0).contains(&mean_jobs), || {
        format!("mean job count {mean_jobs}")
    })?;
    ensure(rel_close(mean_power, 5.25, 0.05), || {
        format!("mean power {mean_power}")
    })?;
    ensure(rel_close(mean_life, 3.0, 0.05), || {
        format!("mean lifetime {mean_life}")
    })?;
    Ok(format!(
        "mean {mean_jobs} jobs, {mean_power:.3} kW, {mean_life:.3} h over 50 seeds"
    ))
}

fn determinism(_: &mut Ctx) -> Check {
    let out = tempfile::tempdir().map_err(|e| e.to_string())?;
    let scenario = root().join("scenarios/cloud.toml");
    let run = || -> Result<(Vec<u8>, Vec<u8>), String> {
        let status = Command::new(env!("CARGO_BIN_EXE_ecoorc"))
            .args([
                "simulate",
                "--strategy",
                "preference",
                "--seed",
                "7",
                "--alpha",
                "0.1",
                "--migrate",
                "true",
            ])
            .arg("--scenario")
            .arg(&scenario)
            .arg("--out")
            .arg(out.path())
            .env("ECOORC_LOG", "error")
            .output()
            .map_err(|e| e.to_string())?;
        ensure(status.status.success(), || {
            String::from_utf8_lossy(&status.stderr).into_owned()
        })?;
        let read = |n: &str| std::fs::read(out.path().join(n)).map_err(|e| e.to_string());
        Ok((read("rounds.csv")?, read("summary.json")?))
    };
    let first = run()?;
    let second = run()?;
    ensure(first.0 == second.0, || "rounds.csv differs".into())?;
    ensure(first.1 == second.1, || "summary.json differs".into())?;
    Ok(format!(
        "rounds.csv ({} bytes) and summary.json ({} bytes) identical",
        first.0.len(),
        first.1.len()
    ))
}

fn fail<T: std::fmt::Debug>(name: &str, e: proptest::test_runner::TestError<T>) -> String {
    format!("{name}: {e}")
}

fn property_suites(_: &mut Ctx) -> Check {
    const CASES: u32 = 1000;
    let runner = || {
        TestRunner::new(Config {
            cases: CASES,
            failure_persistence: None,
            ..Config::default()
        })
    };

    let facility = (
        1.0..2.0f64,
        0.0..5.0f64,
        0.0..1.0f64,
        0.0..800.0f64,
        0.0..3.0f64,
        1.0..1e7f64,
        1e3..1e9f64,
    );
    let region = (
        0.0..1000.0f64,
        0.0..5.0f64,
        0.0..2.0f64,
        0.0..2.0f64,
        0.0..1500.0f64,
    );
    runner()
        .run(
            &(facility, region, 0.0..1e4f64, 0.0..1e4f64, 0.0..10.0f64),
            |(f, r, e1, e2, a)| {
                let dc = DataCenterProfile {
                    p_onsite: f.2,
                    ci_onsite: f.3,
                    ewif_onsite: f.4,
                    area: Some(f.5),
                    annual_it_energy: Some(f.6),
                    ..DataCenterProfile::grid_only("D", "R", f.0, f.1)
                };
                let reg = RegionProfile {
                    region_id: RegionId::new("R"),
                    ci_grid: r.0,
                    ewif_grid: r.1,
                    elif_grid: r.2,
                    wsf: r.3,
                    cclf: r.4,
                };
                let lhs = footprint(a * e1 + e2, &dc, &reg).unwrap();
                let rhs =
                    footprint(e1, &dc, &reg).unwrap().scale(a) + footprint(e2, &dc, &reg).unwrap();
                for (x, y) in lhs.to_array().into_iter().zip(rhs.to_array()) {
                    prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(y.abs()).max(1.0));
                }
                Ok(())
            },
        )
        .map_err(|e| fail("footprint linearity", e))?;

    let profiles = prop::collection::vec(prop::array::uniform4(0.0..100.0f64), 2..8);
    let affine = (
        prop::array::uniform4(0.01..100.0f64),
        prop::array::uniform4(-50.0..50.0f64),
    );
    let weights =
        prop::array::uniform4(0.0..1.0f64).prop_filter("nonzero", |w| w.iter().sum::<f64>() > 1e-6);
    runner()
        .run(
            &(profiles, affine, weights),
            |(raw, (scale, shift), weights)| {
                let user = User::new("u", FactorWeights::new(weights).unwrap());
                let argmin = |vs: Vec<[f64; 4]>| {
                    let m: BTreeMap<DcId, FootprintVector> = vs
                        .into_iter()
                        .enumerate()
                        .map(|(i, v)| (DcId::new(format!("d{i}")), FootprintVector::from_array(v)))
                        .collect();
                    let costs: Vec<(DcId, f64)> = normalize_profiles(&m, Normalization::MinMax)
                        .iter()
                        .map(|(d, p)| (d.clone(), cost(p, &user)))
                        .collect();
                    let best = costs.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
                    costs
                        .into_iter()
                        .filter(|c| c.1 <= best + 1e-9)
                        .map(|c| c.0)
                        .collect::<BTreeSet<_>>()
                };
                let mapped = raw
                    .iter()
                    .map(|v| std::array::from_fn(|i| scale[i] * v[i] + shift[i]))
                    .collect();
                prop_assert_eq!(argmin(raw), argmin(mapped));
                Ok(())
            },
        )
        .map_err(|e| fail("min-max argmin invariance", e))?;

    runner()
        .run(
            &(any::<u64>(), 1usize..=4, 1u32..=3, 0.0..4.0f64, 1u32..=8),
            |(seed, dcs, s_max, lambda, horizon)| {
                let fleet: Vec<DataCenterProfile> = (0..dcs)
                    .map(|i| DataCenterProfile {
                        s_max,
                        ..DataCenterProfile::grid_only(
                            DcId::new(format!("d{i}")),
                            RegionId::new(format!("r{i}")),
                            1.1 + 0.1 * i as f64,
                            i as f64,
                        )
                    })
                    .collect();
                let catalog = RegionCatalog::from_static((0..dcs).map(|i| RegionProfile {
                    region_id: RegionId::new(format!("r{i}")),
                    ci_grid: 100.0 + 90.0 * ((i * 3) % 4) as f64,
                    ewif_grid: 1.0,
                    elif_grid: 0.01,
                    wsf: 0.1,
                    cclf: 100.0,
                }));
                let cfg = SimulationConfig {
                    horizon_hours: horizon,
                    lambda_per_hour: lambda,
                    seed,
                    users: vec![User::new(
                        "u",
                        FactorWeights::new([0.5, 0.3, 0.2, 0.0]).unwrap(),
                    )],
                    ..SimulationConfig::default()
                };
                let trace =
                    run_simulation(&cfg, &fleet, &catalog, &SchedulerConfig::default()).unwrap();
                let (mut running, mut pending) = (0usize, 0usize);
                for r in &trace.records {
                    prop_assert_eq!(
                        running - r.retired + pending + r.arrivals,
                        r.active_jobs + r.deferred
                    );
                    prop_assert_eq!(r.decision.placements.len(), r.active_jobs);
                    running = r.active_jobs;
                    pending = r.deferred;
                }
                prop_assert_eq!(
                    trace.records.iter().map(|r| r.arrivals).sum::<usize>(),
                    generate_workload(&cfg).unwrap().len()
                );
                Ok(())
            },
        )
        .map_err(|e| fail("job conservation", e))?;

    let weather = prop::collection::vec((-15.0..45.0f64, 0.5..25.0f64), 0..30);
    runner()
        .run(&(weather, 0usize..30), |(temps, split)| {
            let samples: Vec<WeatherSample> = temps
                .iter()
                .enumerate()
                .map(|(i, (t, d))| WeatherSample {
                    timestamp: 3600 * i as i64,
                    temp_c: *t,
                    dewpoint_c: t - d,
                })
                .collect();
            let cfg = WueModelConfig::default();
            let k = split.min(samples.len());
            let mut joined = hourly_wue_series(&samples[..k], &cfg).unwrap();
            joined.extend(hourly_wue_series(&samples[k..], &cfg).unwrap());
            prop_assert_eq!(hourly_wue_series(&samples, &cfg).unwrap(), joined);
            Ok(())
        })
        .map_err(|e| fail("hourly WUE concatenation", e))?;

    Ok(format!("linearity, min-max argmin invariance, job conservation, WUE concatenation: {CASES} cases each"))
}

type Criterion = (u32, &'static str, fn(&mut Ctx) -> Check);

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "equation unit suite", equation_suite),
        (2, "solver exactness", solver_exactness),
        (3, "migration trigger soundness", migration_trigger),
        (4, "capacity", capacity),
        (5, "strategy orderings", strategy_ordering),
        (6, "migration benefit", migration_benefit),
        (7, "WUE model", wue_model),
        (8, "workload statistics", workload_statistics),
        (9, "determinism", determinism),
        (10, "property suites", property_suites),
    ];
    let mut ctx = Ctx {
        meta: None,
        cloud: None,
        checked_capacity: Vec::new(),
        batch_time: Duration::ZERO,
    };
    let mut failed = 0;
    for (id, name, check) in criteria {
        let t = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(|| check(&mut ctx))).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = t.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS criterion {id:>2} {name}: {detail} [{secs:.2} s]"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {id:>2} {name}: {why} [{secs:.2} s]");
            }
        }
    }

    // Not a numbered criterion: the cloud fleet spreads water more across
    // strategies than the meta fleet.
    let (meta, cloud) = ctx.batches();
    let spread = |b: &Batch| {
        let means: Vec<f64> = STRATEGIES
            .iter()
            .map(|s| b.mean(s.name(), Factor::Water))
            .collect();
        let avg = means.iter().sum::<f64>() / means.len() as f64;
        means.iter().map(|m| (m - avg).powi(2)).sum::<f64>() / means.len() as f64
    };
    let (m, c) = (spread(meta), spread(cloud));
    if c > m {
        println!("PASS supplementary water spread: cloud variance {c:.4e} > meta {m:.4e}");
    } else {
        failed += 1;
        println!("FAIL supplementary water spread: cloud variance {c:.4e} <= meta {m:.4e}");
    }

    if failed > 0 {
        println!("{failed} acceptance check(s) failed");
        std::process::exit(1);
    }
    println!("all acceptance checks passed");
}
