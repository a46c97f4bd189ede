//! Rows and summaries written by the commands. Every CSV row type
//! deserializes from what it serializes.

use std::collections::BTreeMap;

use ecoorc_core::scheduler::SchedulerConfig;
use ecoorc_core::simulator::{SimulationConfig, SimulationTrace};
use ecoorc_core::{Factor, FootprintVector};
use serde::{Deserialize, Serialize};

use crate::datasets::decimal;
use crate::svg::{LineChart, LineStyle, Series};

/// One line of `rounds.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRow {
    pub t_hour: u32,
    pub strategy: String,
    #[serde(serialize_with = "decimal")]
    pub carbon_g: f64,
    #[serde(serialize_with = "decimal")]
    pub water_l: f64,
    #[serde(serialize_with = "decimal")]
    pub land_g: f64,
    #[serde(serialize_with = "decimal")]
    pub ewaste_g: f64,
    pub active_jobs: usize,
    pub migrations: usize,
    pub deferred: usize,
}

impl RoundRow {
    pub fn footprint(&self) -> FootprintVector {
        FootprintVector::from_array([self.carbon_g, self.water_l, self.land_g, self.ewaste_g])
    }
}

/// One line of `comparison.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub seed: u64,
    pub t_hour: u32,
    pub strategy: String,
    #[serde(serialize_with = "decimal")]
    pub carbon_g: f64,
    #[serde(serialize_with = "decimal")]
    pub water_l: f64,
    #[serde(serialize_with = "decimal")]
    pub land_g: f64,
    #[serde(serialize_with = "decimal")]
    pub ewaste_g: f64,
    pub active_jobs: usize,
    pub migrations: usize,
    pub deferred: usize,
}

impl ComparisonRow {
    pub fn new(seed: u64, r: RoundRow) -> Self {
        Self {
            seed,
            t_hour: r.t_hour,
            strategy: r.strategy,
            carbon_g: r.carbon_g,
            water_l: r.water_l,
            land_g: r.land_g,
            ewaste_g: r.ewaste_g,
            active_jobs: r.active_jobs,
            migrations: r.migrations,
            deferred: r.deferred,
        }
    }
}

pub fn round_rows(trace: &SimulationTrace) -> Vec<RoundRow> {
    trace
        .records
        .iter()
        .map(|r| RoundRow {
            t_hour: r.t_hour,
            strategy: trace.label.clone(),
            carbon_g: r.total.carbon_g,
            water_l: r.total.water_l,
            land_g: r.total.land_g,
            ewaste_g: r.total.ewaste_g,
            active_jobs: r.active_jobs,
            migrations: r.migrations,
            deferred: r.deferred,
        })
        .collect()
}

/// Cumulative result of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTotals {
    pub seed: u64,
    pub strategy: String,
    pub carbon_g: f64,
    pub water_l: f64,
    pub land_g: f64,
    pub ewaste_g: f64,
    pub migrations: usize,
    /// Sum over rounds of the jobs postponed in that round.
    pub deferred: usize,
}

impl RunTotals {
    pub fn new(seed: u64, trace: &SimulationTrace) -> Self {
        let c = trace.cumulative;
        Self {
            seed,
            strategy: trace.label.clone(),
            carbon_g: c.carbon_g,
            water_l: c.water_l,
            land_g: c.land_g,
            ewaste_g: c.ewaste_g,
            migrations: trace.total_migrations(),
            deferred: trace.records.iter().map(|r| r.deferred).sum(),
        }
    }

    pub fn footprint(&self) -> FootprintVector {
        FootprintVector::from_array([self.carbon_g, self.water_l, self.land_g, self.ewaste_g])
    }
}

/// Per-strategy mean over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanTotals {
    pub runs: usize,
    pub carbon_g: f64,
    pub water_l: f64,
    pub land_g: f64,
    pub ewaste_g: f64,
    pub migrations: f64,
    pub deferred: f64,
}

impl MeanTotals {
    pub fn get(&self, f: Factor) -> f64 {
        FootprintVector::from_array([self.carbon_g, self.water_l, self.land_g, self.ewaste_g])
            .get(f)
    }
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario: String,
    pub seeds: Vec<u64>,
    pub simulation: SimulationConfig,
    pub scheduler: SchedulerConfig,
    pub runs: Vec<RunTotals>,
    /// Keyed by strategy label.
    pub mean: BTreeMap<String, MeanTotals>,
}

impl Summary {
    pub fn new(
        scenario: &str,
        seeds: Vec<u64>,
        simulation: SimulationConfig,
        scheduler: SchedulerConfig,
        runs: Vec<RunTotals>,
    ) -> Self {
        let mut grouped: BTreeMap<String, Vec<&RunTotals>> = BTreeMap::new();
        for r in &runs {
            grouped.entry(r.strategy.clone()).or_default().push(r);
        }
        let mean = grouped
            .into_iter()
            .map(|(label, rs)| {
                let n = rs.len() as f64;
                let avg = |f: &dyn Fn(&RunTotals) -> f64| rs.iter().map(|r| f(r)).sum::<f64>() / n;
                let m = MeanTotals {
                    runs: rs.len(),
                    carbon_g: avg(&|r| r.carbon_g),
                    water_l: avg(&|r| r.water_l),
                    land_g: avg(&|r| r.land_g),
                    ewaste_g: avg(&|r| r.ewaste_g),
                    migrations: avg(&|r| r.migrations as f64),
                    deferred: avg(&|r| r.deferred as f64),
                };
                (label, m)
            })
            .collect();
        Self {
            scenario: scenario.into(),
            seeds,
            simulation,
            scheduler,
            runs,
            mean,
        }
    }
}

/// Per-round footprint of `factor`, one series per label in first-seen
/// order. Rounds with several rows of one label (several seeds) are
/// averaged.
pub fn factor_chart<'a>(
    title: &str,
    factor: Factor,
    rows: impl IntoIterator<Item = (&'a str, u32, FootprintVector)>,
) -> LineChart {
    let mut order: Vec<&str> = Vec::new();
    let mut acc: BTreeMap<&str, BTreeMap<u32, (f64, usize)>> = BTreeMap::new();
    for (label, t, v) in rows {
        if !acc.contains_key(label) {
            order.push(label);
        }
        let slot = acc.entry(label).or_default().entry(t).or_insert((0.0, 0));
        slot.0 += v.get(factor);
        slot.1 += 1;
    }
    let mut chart = LineChart::new(
        format!("{title}: {} per round", factor.name()),
        "hour",
        format!("{} ({})", factor.name(), factor.unit()),
    );
    for label in order {
        let points = acc[label]
            .iter()
            .map(|(t, (sum, n))| (f64::from(*t), sum / *n as f64))
            .collect();
        chart.push(Series::new(label, points));
    }
    chart
}

/// Label, cumulative series with migration, cumulative series without.
pub type MigrationPair = (String, Vec<(u32, f64)>, Vec<(u32, f64)>);

/// Mean running total of `factor` for the with/without-migration pair of
/// every strategy.
pub fn migration_chart(title: &str, factor: Factor, pairs: &[MigrationPair]) -> LineChart {
    let mut chart = LineChart::new(
        format!(
            "{title}: cumulative {} with and without migration",
            factor.name()
        ),
        "hour",
        format!("cumulative {} ({})", factor.name(), factor.unit()),
    );
    for (strategy, with, without) in pairs {
        let cum = |s: &[(u32, f64)]| {
            let mut total = 0.0;
            s.iter()
                .map(|(t, v)| {
                    total += v;
                    (f64::from(*t), total)
                })
                .collect::<Vec<_>>()
        };
        chart.push(Series::new(format!("{strategy} with migration"), cum(with)));
        chart.push(
            Series::new(format!("{strategy} without migration"), cum(without))
                .styled(LineStyle::Dashed),
        );
    }
    chart
}

/// One line of `migration.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MigrationRow {
    pub strategy: String,
    pub factor: String,
    #[serde(serialize_with = "decimal")]
    pub with_migration: f64,
    #[serde(serialize_with = "decimal")]
    pub without_migration: f64,
    /// (with − without) / without; 0 when both are 0.
    #[serde(serialize_with = "decimal")]
    pub relative_change: f64,
    #[serde(serialize_with = "decimal")]
    pub mean_migrations: f64,
}

/// One line of `profiles.csv`: impact of one kWh of IT energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub dc_id: String,
    pub provider: String,
    pub region_id: String,
    #[serde(serialize_with = "decimal")]
    pub carbon_g_per_kwh: f64,
    #[serde(serialize_with = "decimal")]
    pub water_l_per_kwh: f64,
    #[serde(serialize_with = "decimal")]
    pub land_g_per_kwh: f64,
    #[serde(serialize_with = "decimal")]
    pub ewaste_g_per_kwh: f64,
}

impl ProfileRow {
    pub fn get(&self, f: Factor) -> f64 {
        FootprintVector::from_array([
            self.carbon_g_per_kwh,
            self.water_l_per_kwh,
            self.land_g_per_kwh,
            self.ewaste_g_per_kwh,
        ])
        .get(f)
    }
}

/// One line of `ranking.csv`; rank 1 is the smallest impact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingRow {
    pub factor: String,
    pub rank: usize,
    pub dc_id: String,
    #[serde(serialize_with = "decimal")]
    pub value: f64,
}

/// Ranks facilities per factor, ascending, ties broken by id.
pub fn rank_profiles(rows: &[ProfileRow]) -> Vec<RankingRow> {
    let mut out = Vec::new();
    for f in Factor::ALL {
        let mut sorted: Vec<&ProfileRow> = rows.iter().collect();
        sorted.sort_by(|a, b| {
            a.get(f)
                .total_cmp(&b.get(f))
                .then_with(|| a.dc_id.cmp(&b.dc_id))
        });
        out.extend(sorted.into_iter().enumerate().map(|(i, r)| RankingRow {
            factor: f.name().into(),
            rank: i + 1,
            dc_id: r.dc_id.clone(),
            value: r.get(f),
        }));
    }
    out
}

/// One line of `wue.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WueRow {
    pub timestamp_utc: String,
    #[serde(serialize_with = "decimal")]
    pub temp_c: f64,
    #[serde(serialize_with = "decimal")]
    pub dewpoint_c: f64,
    #[serde(serialize_with = "decimal")]
    pub wet_bulb_f: f64,
    #[serde(serialize_with = "decimal")]
    pub wue_l_per_kwh: f64,
}
