use std::collections::{BTreeMap, BTreeSet};

use ecoorc_core::footprint::{footprint, per_kwh_profile};
use ecoorc_core::gridmix::{
    mix_to_intensity, Fallback, Intensities, IntensityKind, PowerSource, RegionCatalog,
    SourceFactors, SourceMix,
};
use ecoorc_core::scheduler::{
    cost, normalize_profiles, CapacityMode, CostRow, Normalization, RoundInstance, SchedulerConfig,
    User,
};
use ecoorc_core::simulator::{
    generate_workload, run_simulation, SimulationConfig, Strategy as Scheme,
};
use ecoorc_core::wue::{hourly_wue_series, WeatherSample, WueModelConfig};
use ecoorc_core::{
    DataCenterProfile, DcId, FactorWeights, FootprintVector, JobId, RegionId, RegionProfile,
};
use proptest::prelude::*;

fn config() -> ProptestConfig {
    ProptestConfig::with_cases(1000)
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

prop_compose! {
    fn region()(ci in 0.0..1000.0, ewif in 0.0..5.0, elif in 0.0..2.0, wsf in 0.0..2.0, cclf in 0.0..1500.0)
        -> RegionProfile
    {
        RegionProfile { region_id: RegionId::new("R"), ci_grid: ci, ewif_grid: ewif, elif_grid: elif, wsf, cclf }
    }
}

prop_compose! {
    fn facility()(
        pue in 1.0..2.0,
        wue in 0.0..5.0,
        p_onsite in 0.0..1.0,
        ci_onsite in 0.0..800.0,
        ewif_onsite in 0.0..3.0,
        area in proptest::option::of(1.0..1e7),
        energy in 1e3..1e9,
        ewi in 0.0..10.0,
    ) -> DataCenterProfile
    {
        DataCenterProfile {
            p_onsite,
            ci_onsite,
            ewif_onsite,
            area,
            annual_it_energy: Some(energy),
            ewi,
            ..DataCenterProfile::grid_only("D", "R", pue, wue)
        }
    }
}

fn weights() -> impl Strategy<Value = FactorWeights> {
    prop::array::uniform4(0.0..1.0f64)
        .prop_filter("not all zero", |w| w.iter().sum::<f64>() > 1e-6)
        .prop_map(|w| FactorWeights::new(w).unwrap())
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn footprint_is_linear_in_energy(
        dc in facility(), r in region(), e1 in 0.0..1e4, e2 in 0.0..1e4, a in 0.0..10.0, b in 0.0..10.0,
    ) {
        let combined = footprint(a * e1 + b * e2, &dc, &r).unwrap();
        let parts = footprint(e1, &dc, &r).unwrap().scale(a) + footprint(e2, &dc, &r).unwrap().scale(b);
        for (x, y) in combined.to_array().into_iter().zip(parts.to_array()) {
            prop_assert!(close(x, y, 1e-9), "{x} vs {y}");
        }
        prop_assert!(combined.is_non_negative());
        let per_kwh = per_kwh_profile(&dc, &r).unwrap().scale(e1);
        for (x, y) in footprint(e1, &dc, &r).unwrap().to_array().into_iter().zip(per_kwh.to_array()) {
            prop_assert!(close(x, y, 1e-9));
        }
    }

    #[test]
    fn minmax_argmin_survives_positive_affine_maps(
        raw in prop::collection::vec(prop::array::uniform4(0.0..100.0f64), 2..8),
        scale in prop::array::uniform4(0.01..100.0f64),
        shift in prop::array::uniform4(-50.0..50.0f64),
        prefs in weights(),
    ) {
        let ids: Vec<DcId> = (0..raw.len()).map(|i| DcId::new(format!("d{i}"))).collect();
        let original: BTreeMap<DcId, FootprintVector> = ids.iter().cloned()
            .zip(raw.iter().map(|a| FootprintVector::from_array(*a)))
            .collect();
        let mapped: BTreeMap<DcId, FootprintVector> = ids.iter().cloned()
            .zip(raw.iter().map(|a| {
                let mut v = *a;
                for i in 0..4 {
                    v[i] = scale[i] * v[i] + shift[i];
                }
                FootprintVector::from_array(v)
            }))
            .collect();
        let user = User::new("u", prefs);
        let argmin = |m: &BTreeMap<DcId, FootprintVector>| {
            let n = normalize_profiles(m, Normalization::MinMax);
            let costs: Vec<(DcId, f64)> = n.iter().map(|(d, p)| (d.clone(), cost(p, &user))).collect();
            let best = costs.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
            costs.into_iter().filter(|c| c.1 <= best + 1e-9).map(|c| c.0).collect::<BTreeSet<_>>()
        };
        prop_assert_eq!(argmin(&original), argmin(&mapped));
    }

    #[test]
    fn wue_series_concatenates(
        temps in prop::collection::vec((-15.0..45.0f64, 0.5..25.0f64), 0..30),
        split in 0usize..30,
        s in 1.5..20.0f64,
    ) {
        let samples: Vec<WeatherSample> = temps.iter().enumerate()
            .map(|(i, (t, spread))| WeatherSample {
                timestamp: 1_747_008_000 + 3600 * i as i64,
                temp_c: *t,
                dewpoint_c: t - spread,
            })
            .collect();
        let cfg = WueModelConfig::new(s).unwrap();
        let k = split.min(samples.len());
        let whole = hourly_wue_series(&samples, &cfg).unwrap();
        let mut joined = hourly_wue_series(&samples[..k], &cfg).unwrap();
        joined.extend(hourly_wue_series(&samples[k..], &cfg).unwrap());
        prop_assert_eq!(&whole, &joined);
        prop_assert!(whole.iter().all(|(_, w)| *w >= 0.0));
    }

    #[test]
    fn mix_intensity_is_convex_linear_and_monotone(
        shares in prop::collection::vec(0.0..1.0f64, 9),
        ci in prop::collection::vec(0.0..1000.0f64, 9),
        bump_at in 0usize..9,
        bump in 0.0..500.0f64,
        k in 0.0..5.0f64,
    ) {
        let sources = &PowerSource::ALL[..9];
        prop_assume!(shares.iter().sum::<f64>() > 1e-3);
        let mix = SourceMix::from_generation(RegionId::new("R"), sources.iter().copied().zip(shares.iter().copied())).unwrap();
        let table = |c: &[f64]| SourceFactors::new(
            sources.iter().copied().zip(c.iter().map(|v| Intensities { ci_g_per_kwh: *v, water_l_per_kwh: 0.0, land_m2_per_kwh: 0.0 })),
            Fallback::Error,
        ).unwrap();
        let value = mix_to_intensity(&mix, &table(&ci), IntensityKind::Carbon).unwrap();

        let present: Vec<f64> = sources.iter().zip(&ci).filter(|(s, _)| mix.share(**s) > 0.0).map(|(_, c)| *c).collect();
        let lo = present.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = present.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(value >= lo - 1e-9 * hi.max(1.0) && value <= hi + 1e-9 * hi.max(1.0), "{value} not in [{lo}, {hi}]");

        let scaled: Vec<f64> = ci.iter().map(|c| c * k).collect();
        let v_scaled = mix_to_intensity(&mix, &table(&scaled), IntensityKind::Carbon).unwrap();
        prop_assert!(close(v_scaled, k * value, 1e-9));

        let mut bumped = ci.clone();
        bumped[bump_at] += bump;
        prop_assert!(mix_to_intensity(&mix, &table(&bumped), IntensityKind::Carbon).unwrap() >= value);
    }
}

#[derive(Debug, Clone)]
struct Instance {
    capacity: Vec<u32>,
    rows: Vec<CostRow>,
    cfg: SchedulerConfig,
}

fn instance() -> impl Strategy<Value = Instance> {
    (
        1usize..=4,
        0usize..=6,
        1u32..=3,
        prop::sample::select(vec![0.0, 0.1, 0.3]),
        any::<bool>(),
        any::<bool>(),
    )
        .prop_flat_map(|(dcs, jobs, cap, alpha, incoming, migration)| {
            let row = (
                prop::collection::vec(0.0..1.0f64, dcs),
                prop::option::of(0..dcs),
                0u32..3,
            );
            (
                prop::collection::vec(row, jobs),
                Just((dcs, cap, alpha, incoming, migration)),
            )
        })
        .prop_map(|(rows, (dcs, cap, alpha, incoming, migration))| {
            let mut per_dc = vec![0u32; dcs];
            let rows = rows
                .into_iter()
                .enumerate()
                .map(|(i, (costs, prev, arrival))| {
                    // Keep running jobs within capacity so instances are solvable.
                    let current_dc = prev.filter(|d| {
                        let ok = per_dc[*d] < cap;
                        if ok {
                            per_dc[*d] += 1;
                        }
                        ok
                    });
                    CostRow {
                        job: JobId(i as u64),
                        arrival_hour: arrival,
                        current_dc,
                        costs,
                    }
                })
                .collect();
            Instance {
                capacity: vec![cap; dcs],
                rows,
                cfg: SchedulerConfig {
                    alpha,
                    capacity_mode: if incoming {
                        CapacityMode::Incoming
                    } else {
                        CapacityMode::Concurrent
                    },
                    migration_enabled: migration,
                    ..SchedulerConfig::default()
                },
            }
        })
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn solver_matches_exhaustive_search(inst in instance()) {
        let ids: Vec<DcId> = (0..inst.capacity.len()).map(|i| DcId::new(format!("d{i}"))).collect();
        let built = RoundInstance::from_costs(ids, inst.capacity.clone(), inst.rows.clone(), &inst.cfg).unwrap();
        let fast = built.solve().unwrap();
        let slow = built.brute_force().unwrap();
        prop_assert!((fast.objective_value - slow.objective_value).abs() <= 1e-9,
            "{} vs {}", fast.objective_value, slow.objective_value);
        prop_assert_eq!(&fast.placements, &slow.placements);
        prop_assert_eq!(&fast.deferred, &slow.deferred);
    }
}

fn small_fleet(n: usize, s_max: u32) -> (Vec<DataCenterProfile>, RegionCatalog) {
    let fleet = (0..n)
        .map(|i| DataCenterProfile {
            s_max,
            area: Some(1e4 * (i + 1) as f64),
            annual_it_energy: Some(1e6),
            ..DataCenterProfile::grid_only(
                DcId::new(format!("d{i}")),
                RegionId::new(format!("r{i}")),
                1.1 + 0.1 * i as f64,
                0.5 * i as f64,
            )
        })
        .collect();
    let regions = (0..n).map(|i| RegionProfile {
        region_id: RegionId::new(format!("r{i}")),
        ci_grid: 100.0 + 150.0 * ((i * 7) % 5) as f64,
        ewif_grid: 0.5 + ((i * 3) % 4) as f64,
        elif_grid: 0.01 * ((i * 5) % 3) as f64,
        wsf: 0.2,
        cclf: 300.0,
    });
    (fleet, RegionCatalog::from_static(regions))
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn jobs_are_conserved(
        seed in any::<u64>(),
        dcs in 1usize..=4,
        s_max in 1u32..=3,
        lambda in 0.0..4.0f64,
        horizon in 1u32..=10,
        dt in 1u32..=3,
        strategy in prop::sample::select(Scheme::ALL.to_vec()),
        incoming in any::<bool>(),
    ) {
        let (fleet, catalog) = small_fleet(dcs, s_max);
        let cfg = SimulationConfig {
            horizon_hours: horizon,
            dt_hours: dt,
            lambda_per_hour: lambda,
            seed,
            users: vec![
                User::new("a", FactorWeights::new([1.0, 0.0, 0.0, 0.0]).unwrap()),
                User::new("b", FactorWeights::new([0.2, 0.5, 0.3, 0.0]).unwrap()),
            ],
            strategy,
            ..SimulationConfig::default()
        };
        let sched = SchedulerConfig {
            capacity_mode: if incoming { CapacityMode::Incoming } else { CapacityMode::Concurrent },
            ..SchedulerConfig::default()
        };
        let trace = run_simulation(&cfg, &fleet, &catalog, &sched).unwrap();
        let workload = generate_workload(&cfg).unwrap();
        prop_assert_eq!(trace.records.iter().map(|r| r.arrivals).sum::<usize>(), workload.len());

        let mut running = 0usize;
        let mut pending = 0usize;
        let mut total = FootprintVector::ZERO;
        for r in &trace.records {
            prop_assert_eq!(r.decision.placements.len(), r.active_jobs);
            prop_assert_eq!(r.decision.deferred.len(), r.deferred);
            for j in &r.decision.deferred {
                prop_assert!(!r.decision.placements.contains_key(j));
            }
            // What was running, minus retirements, plus the queue equals
            // what is placed or still waiting.
            prop_assert_eq!(running - r.retired + pending + r.arrivals, r.active_jobs + r.deferred);
            if !incoming {
                let mut load: BTreeMap<&DcId, u32> = BTreeMap::new();
                for d in r.decision.placements.values() {
                    *load.entry(d).or_default() += 1;
                }
                prop_assert!(load.values().all(|l| *l <= s_max));
            }
            running = r.active_jobs;
            pending = r.deferred;
            total += r.total;
        }
        for (x, y) in total.to_array().into_iter().zip(trace.cumulative.to_array()) {
            prop_assert!(close(x, y, 1e-12));
        }
    }
}
