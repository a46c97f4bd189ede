//! TOML scenario files.
//!
//! ```toml
//! name = "meta"
//! output_dir = "../out/meta"        # optional, relative to this file
//!
//! [simulation]                      # every key optional
//! horizon_hours = 72
//! dt_hours = 1
//! lambda_per_hour = 10.0
//! power_range_kw = [0.5, 10.0]
//! lifetime_range_h = [1, 5]
//! seed = 0
//! start = "2025-05-12T00:00:00Z"
//! strategy = "preference"
//!
//! [scheduler]                       # every key optional
//! alpha = 0.1
//! capacity_mode = "concurrent"      # or "incoming"
//! migration_enabled = true
//! normalization = "minmax"          # or "none"
//! infeasibility_policy = "defer"    # or "error"
//!
//! [data]
//! datacenters = "../data/meta_datacenters.csv"
//! regions = "../data/regions.csv"
//! strict = false                    # true: a facility without area is an error
//!
//! [grid]                            # needed when a region uses `mix`
//! mixes = "../data/grid_mixes.csv"
//! factors = "../data/source_factors.csv"
//! fallback = "known_mean"           # or "error", or { ci_g_per_kwh = .., water_l_per_kwh = .., land_m2_per_kwh = .. }
//! # cache_dir = "../cache"          # replaces `mixes` with the cached remote backend
//! # remote_url = "https://..."      # only with the `remote` feature
//! # token_env = "GRID_API_TOKEN"
//!
//! [[users]]
//! id = "alice"
//! carbon = 0.7
//! water = 0.15
//! land = 0.15
//! ```

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use ecoorc_core::gridmix::{
    Fallback, GridDataSource, GridLink, Intensities, MixTable, RegionCatalog, RegionEntry,
    SECONDS_PER_HOUR,
};
use ecoorc_core::scheduler::{SchedulerConfig, User};
use ecoorc_core::simulator::{SimulationConfig, Strategy, DEFAULT_START_TIMESTAMP};
use ecoorc_core::{DataCenterProfile, DcId, FactorWeights, RegionId};
use serde::Deserialize;

use crate::cache::{CachedSource, Unavailable};
use crate::datasets::{self, LoadError};

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    #[error(transparent)]
    Data(#[from] LoadError),
    #[error("{}: {} problem(s):\n  {}", path.display(), problems.len(), problems.join("\n  "))]
    Invalid {
        path: PathBuf,
        problems: Vec<String>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: String,
    output_dir: Option<PathBuf>,
    #[serde(default)]
    simulation: SimulationSection,
    #[serde(default)]
    scheduler: SchedulerSection,
    data: DataSection,
    grid: Option<GridSection>,
    #[serde(default)]
    users: Vec<UserSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulationSection {
    horizon_hours: Option<u32>,
    dt_hours: Option<u32>,
    lambda_per_hour: Option<f64>,
    power_range_kw: Option<(f64, f64)>,
    lifetime_range_h: Option<(u32, u32)>,
    seed: Option<u64>,
    start: Option<String>,
    strategy: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SchedulerSection {
    alpha: Option<f64>,
    capacity_mode: Option<ecoorc_core::scheduler::CapacityMode>,
    migration_enabled: Option<bool>,
    normalization: Option<ecoorc_core::scheduler::Normalization>,
    infeasibility_policy: Option<ecoorc_core::scheduler::InfeasibilityPolicy>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DataSection {
    datacenters: PathBuf,
    regions: PathBuf,
    #[serde(default)]
    strict: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSection {
    mixes: Option<PathBuf>,
    factors: PathBuf,
    #[serde(default)]
    fallback: FallbackSpec,
    cache_dir: Option<PathBuf>,
    remote_url: Option<String>,
    token_env: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(untagged)]
enum FallbackSpec {
    #[default]
    KnownMean,
    Named(String),
    Fixed(Intensities),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct UserSection {
    id: String,
    #[serde(default)]
    carbon: f64,
    #[serde(default)]
    water: f64,
    #[serde(default)]
    land: f64,
    #[serde(default)]
    ewaste: f64,
}

/// A loaded and cross-checked scenario.
pub struct Scenario {
    pub name: String,
    pub path: PathBuf,
    pub fleet: Vec<DataCenterProfile>,
    /// Provider column of each facility, in fleet order.
    pub providers: Vec<String>,
    pub regions: RegionCatalog,
    pub simulation: SimulationConfig,
    pub scheduler: SchedulerConfig,
    pub output_dir: Option<PathBuf>,
    /// Tolerated data gaps, already logged.
    pub warnings: Vec<String>,
}

impl std::fmt::Debug for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Scenario")
            .field("name", &self.name)
            .field("path", &self.path)
            .field("fleet", &self.fleet.len())
            .field("regions", &self.regions.ids().count())
            .finish_non_exhaustive()
    }
}

impl Scenario {
    pub fn dc(&self, id: &DcId) -> Option<&DataCenterProfile> {
        self.fleet.iter().find(|d| &d.dc_id == id)
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let file: ScenarioFile = toml::from_str(&text).map_err(|e| ScenarioError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut problems = Vec::new();
    let mut warnings = Vec::new();

    let sim = file.simulation;
    let mut simulation = SimulationConfig::default();
    if let Some(v) = sim.horizon_hours {
        simulation.horizon_hours = v;
    }
    if let Some(v) = sim.dt_hours {
        simulation.dt_hours = v;
    }
    if let Some(v) = sim.lambda_per_hour {
        simulation.lambda_per_hour = v;
    }
    if let Some(v) = sim.power_range_kw {
        simulation.power_range_kw = v;
    }
    if let Some(v) = sim.lifetime_range_h {
        simulation.lifetime_range_h = v;
    }
    if let Some(v) = sim.seed {
        simulation.seed = v;
    }
    simulation.start_timestamp = match sim.start.as_deref().map(datasets::parse_timestamp) {
        None => DEFAULT_START_TIMESTAMP,
        Some(Ok(ts)) => ts,
        Some(Err(e)) => {
            problems.push(format!("simulation.start: {e}"));
            DEFAULT_START_TIMESTAMP
        }
    };
    if let Some(s) = &sim.strategy {
        match s.parse::<Strategy>() {
            Ok(s) => simulation.strategy = s,
            Err(e) => problems.push(format!("simulation.strategy: {e}")),
        }
    }

    let mut seen_users = BTreeSet::new();
    for u in &file.users {
        if !seen_users.insert(u.id.clone()) {
            problems.push(format!("users.{}: id appears more than once", u.id));
        }
        match FactorWeights::new([u.carbon, u.water, u.land, u.ewaste]) {
            Ok(weights) => simulation.users.push(User::new(u.id.as_str(), weights)),
            Err(e) => problems.push(format!("users.{}: {e}", u.id)),
        }
    }
    if file.users.is_empty() && simulation.lambda_per_hour > 0.0 {
        problems.push("users: at least one user is required".into());
    }
    if problems.is_empty() {
        if let Err(e) = simulation.validate() {
            problems.push(format!("simulation: {e}"));
        }
    }

    let s = file.scheduler;
    let defaults = SchedulerConfig::default();
    let scheduler = SchedulerConfig {
        alpha: s.alpha.unwrap_or(defaults.alpha),
        capacity_mode: s.capacity_mode.unwrap_or(defaults.capacity_mode),
        migration_enabled: s.migration_enabled.unwrap_or(defaults.migration_enabled),
        normalization: s.normalization.unwrap_or(defaults.normalization),
        infeasibility_policy: s
            .infeasibility_policy
            .unwrap_or(defaults.infeasibility_policy),
    };
    if let Err(e) = scheduler.validate() {
        problems.push(format!("scheduler.alpha: {e}"));
    }

    // Data files: keep going after a failing file so every problem is listed.
    let dc_path = resolve(base, &file.data.datacenters);
    let records = collect(&mut problems, datasets::read_datacenters(&dc_path)).unwrap_or_default();
    let region_path = resolve(base, &file.data.regions);
    let region_entries =
        collect(&mut problems, datasets::read_regions(&region_path)).unwrap_or_default();

    let mut catalog = RegionCatalog::new();
    let mut mix_regions = Vec::new();
    for (id, entry) in region_entries {
        if matches!(entry, RegionEntry::FromMix { .. }) {
            mix_regions.push(id.clone());
        }
        catalog.insert(id, entry);
    }

    let mut fleet = Vec::with_capacity(records.len());
    let mut providers = Vec::with_capacity(records.len());
    let mut used_regions = BTreeSet::new();
    for r in records {
        let dc = &r.profile;
        if !catalog.contains(&dc.region) {
            problems.push(format!(
                "{} line {} ({}): region_id: unknown region {}",
                dc_path.display(),
                r.line,
                dc.dc_id,
                dc.region
            ));
        }
        used_regions.insert(dc.region.clone());
        if dc.area.is_none() {
            let msg = format!(
                "{} ({}): no area_m2; on-site land footprint is taken as 0",
                dc.dc_id, r.location
            );
            if file.data.strict {
                problems.push(msg);
            } else {
                log::warn!("{msg}");
                warnings.push(msg);
            }
        }
        fleet.push(r.profile);
        providers.push(r.provider);
    }

    let needs_grid: Vec<&RegionId> = mix_regions
        .iter()
        .filter(|r| used_regions.contains(*r))
        .collect();
    match (file.grid, needs_grid.is_empty()) {
        (None, false) => problems.push(format!(
            "grid: regions {} derive intensities from the grid mix but no [grid] section is given",
            join(&needs_grid)
        )),
        (None, true) => {}
        (Some(g), _) => {
            if let Some(link) = build_grid(base, g, &needs_grid, &simulation, &mut problems) {
                catalog = catalog.with_grid(link);
            }
        }
    }

    if !problems.is_empty() {
        return Err(ScenarioError::Invalid {
            path: path.to_path_buf(),
            problems,
        });
    }
    Ok(Scenario {
        name: file.name,
        path: path.to_path_buf(),
        fleet,
        providers,
        regions: catalog,
        simulation,
        scheduler,
        output_dir: file.output_dir.map(|p| resolve(base, &p)),
        warnings,
    })
}

fn collect<T>(problems: &mut Vec<String>, r: Result<T, LoadError>) -> Option<T> {
    match r {
        Ok(v) => Some(v),
        Err(LoadError::Invalid { path, problems: p }) => {
            problems.extend(p.into_iter().map(|m| format!("{}: {m}", path.display())));
            None
        }
        Err(e) => {
            problems.push(e.to_string());
            None
        }
    }
}

fn join(ids: &[&RegionId]) -> String {
    ids.iter()
        .map(|r| r.as_str())
        .collect::<Vec<_>>()
        .join(", ")
}

fn build_grid(
    base: &Path,
    g: GridSection,
    needed: &[&RegionId],
    sim: &SimulationConfig,
    problems: &mut Vec<String>,
) -> Option<GridLink> {
    let fallback = match g.fallback {
        FallbackSpec::KnownMean => Fallback::KnownMean,
        FallbackSpec::Fixed(f) => Fallback::Fixed(f),
        FallbackSpec::Named(n) => match n.as_str() {
            "known_mean" => Fallback::KnownMean,
            "error" => Fallback::Error,
            other => {
                problems.push(format!(
                    "grid.fallback: expected `known_mean`, `error` or a table of factors, found `{other}`"
                ));
                Fallback::KnownMean
            }
        },
    };
    let factors = collect(
        problems,
        datasets::read_source_factors(&resolve(base, &g.factors), fallback),
    )?;
    let backend: Box<dyn GridDataSource + Send + Sync> = match (g.mixes, g.cache_dir) {
        (Some(_), Some(_)) => {
            problems.push("grid: give either `mixes` or `cache_dir`, not both".into());
            return None;
        }
        (None, None) => {
            problems.push("grid: one of `mixes` or `cache_dir` is required".into());
            return None;
        }
        (Some(mixes), None) => {
            let table = collect(problems, datasets::read_mixes(&resolve(base, &mixes)))?;
            check_coverage(&table, needed, sim, problems);
            Box::new(table)
        }
        (None, Some(dir)) => {
            remote_backend(resolve(base, &dir), g.remote_url, g.token_env, problems)?
        }
    };
    Some(GridLink { backend, factors })
}

fn check_coverage(
    table: &MixTable,
    needed: &[&RegionId],
    sim: &SimulationConfig,
    problems: &mut Vec<String>,
) {
    let first = sim.start_timestamp;
    let last = first + i64::from(sim.horizon_hours.saturating_sub(1)) * SECONDS_PER_HOUR;
    for region in needed {
        if !table.regions().any(|r| r == *region) {
            problems.push(format!("grid.mixes: no mix rows for region {region}"));
            continue;
        }
        // Static regions have no range and cover every hour.
        if let Some((lo, hi)) = table.hour_range(region) {
            if lo > ecoorc_core::gridmix::hour_floor(first)
                || hi < ecoorc_core::gridmix::hour_floor(last)
            {
                problems.push(format!(
                    "grid.mixes: region {region} covers {} to {} but the simulation needs {} to {}",
                    datasets::format_timestamp(lo),
                    datasets::format_timestamp(hi),
                    datasets::format_timestamp(first),
                    datasets::format_timestamp(last)
                ));
            }
        }
    }
}

#[cfg(feature = "remote")]
fn remote_backend(
    dir: PathBuf,
    url: Option<String>,
    token_env: Option<String>,
    problems: &mut Vec<String>,
) -> Option<Box<dyn GridDataSource + Send + Sync>> {
    let Some(url) = url else {
        return Some(Box::new(CachedSource::<Unavailable>::offline(dir)));
    };
    let token = token_env.and_then(|k| std::env::var(k).ok());
    match crate::cache::HttpTransport::new(url, token) {
        Ok(t) => Some(Box::new(CachedSource::new(dir, t))),
        Err(e) => {
            problems.push(format!("grid.remote_url: {e}"));
            None
        }
    }
}

#[cfg(not(feature = "remote"))]
fn remote_backend(
    dir: PathBuf,
    url: Option<String>,
    _token_env: Option<String>,
    _problems: &mut Vec<String>,
) -> Option<Box<dyn GridDataSource + Send + Sync>> {
    if url.is_some() {
        log::warn!(
            "grid.remote_url ignored: built without the `remote` feature, reading {} only",
            dir.display()
        );
    }
    Some(Box::new(CachedSource::<Unavailable>::offline(dir)))
}
