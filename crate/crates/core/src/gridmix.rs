//! Regional grid intensities derived from a power-source mix.
//!
//! A region's carbon, water and land intensity is the share-weighted mean of
//! per-source intensity factors. Mixes come from a [`GridDataSource`]; the
//! in-memory [`MixTable`] backs the offline fixtures and the `ecoorc` crate
//! adds a cached remote backend.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::footprint::RegionProfile;
use crate::ids::RegionId;

/// Tolerance on the sum of shares in a mix.
pub const SHARE_SUM_TOLERANCE: f64 = 1e-6;

pub const SECONDS_PER_HOUR: i64 = 3600;

/// Start of the UTC hour containing `timestamp`.
pub fn hour_floor(timestamp: i64) -> i64 {
    timestamp.div_euclid(SECONDS_PER_HOUR) * SECONDS_PER_HOUR
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PowerSource {
    Coal,
    Gas,
    Nuclear,
    Wind,
    Solar,
    Hydro,
    Biomass,
    Oil,
    Geothermal,
    Other,
}

impl PowerSource {
    pub const ALL: [PowerSource; 10] = [
        PowerSource::Coal,
        PowerSource::Gas,
        PowerSource::Nuclear,
        PowerSource::Wind,
        PowerSource::Solar,
        PowerSource::Hydro,
        PowerSource::Biomass,
        PowerSource::Oil,
        PowerSource::Geothermal,
        PowerSource::Other,
    ];

    pub const fn name(self) -> &'static str {
        match self {
            PowerSource::Coal => "coal",
            PowerSource::Gas => "gas",
            PowerSource::Nuclear => "nuclear",
            PowerSource::Wind => "wind",
            PowerSource::Solar => "solar",
            PowerSource::Hydro => "hydro",
            PowerSource::Biomass => "biomass",
            PowerSource::Oil => "oil",
            PowerSource::Geothermal => "geothermal",
            PowerSource::Other => "other",
        }
    }
}

impl fmt::Display for PowerSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PowerSource {
    type Err = GridError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        PowerSource::ALL
            .into_iter()
            .find(|p| p.name() == lower)
            .ok_or(GridError::UnknownSourceName(lower))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GridError {
    #[error("unknown power source `{0}`")]
    UnknownSourceName(String),
    #[error("region {region}: share of {power_source} is {share}; shares must be finite and >= 0")]
    NegativeShare {
        region: RegionId,
        power_source: PowerSource,
        share: f64,
    },
    #[error("region {region}: shares sum to {sum}, expected 1")]
    SharesDoNotSumToOne { region: RegionId, sum: f64 },
    #[error("no intensity factors for power source {0} and no fallback configured")]
    MissingFactor(PowerSource),
    #[error("intensity factor for {power_source} must be finite and >= 0")]
    InvalidFactor { power_source: PowerSource },
    #[error("unknown region {0}")]
    UnknownRegion(RegionId),
    #[error("region {region}: no mix for hour {requested}; available hours {first}..={last}")]
    HourUnavailable {
        region: RegionId,
        requested: i64,
        first: i64,
        last: i64,
    },
    #[error("region {region}: duplicate mix for hour {hour}")]
    DuplicateHour { region: RegionId, hour: i64 },
    #[error("region {region}, hour {hour}: not in cache and remote fetching is disabled")]
    CacheMiss { region: RegionId, hour: i64 },
    #[error("remote grid data fetch failed: {0}")]
    Remote(String),
    #[error("region {0} derives intensities from a grid mix but no grid backend is configured")]
    NoBackend(RegionId),
}

/// Generation share per power source for one region and hour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceMix {
    pub region_id: RegionId,
    shares: BTreeMap<PowerSource, f64>,
}

impl SourceMix {
    pub fn new(
        region_id: RegionId,
        shares: impl IntoIterator<Item = (PowerSource, f64)>,
    ) -> Result<Self, GridError> {
        let mut map = BTreeMap::new();
        for (source, share) in shares {
            if !(share.is_finite() && share >= 0.0) {
                return Err(GridError::NegativeShare {
                    region: region_id,
                    power_source: source,
                    share,
                });
            }
            *map.entry(source).or_insert(0.0) += share;
        }
        let sum: f64 = map.values().sum();
        if (sum - 1.0).abs() > SHARE_SUM_TOLERANCE {
            return Err(GridError::SharesDoNotSumToOne {
                region: region_id,
                sum,
            });
        }
        Ok(Self {
            region_id,
            shares: map,
        })
    }

    /// Builds a mix from absolute generation (any unit), normalising to shares.
    pub fn from_generation(
        region_id: RegionId,
        generation: impl IntoIterator<Item = (PowerSource, f64)>,
    ) -> Result<Self, GridError> {
        let raw: Vec<_> = generation.into_iter().collect();
        let total: f64 = raw.iter().map(|(_, g)| g.max(0.0)).sum();
        if total <= 0.0 {
            return Err(GridError::SharesDoNotSumToOne {
                region: region_id,
                sum: 0.0,
            });
        }
        Self::new(
            region_id,
            raw.into_iter().map(|(s, g)| (s, g.max(0.0) / total)),
        )
    }

    pub fn shares(&self) -> &BTreeMap<PowerSource, f64> {
        &self.shares
    }

    pub fn share(&self, source: PowerSource) -> f64 {
        self.shares.get(&source).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IntensityKind {
    /// g CO2 / kWh
    Carbon,
    /// l / kWh
    Water,
    /// m² / kWh
    Land,
}

/// Per-kWh intensities of one power source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intensities {
    pub ci_g_per_kwh: f64,
    pub water_l_per_kwh: f64,
    pub land_m2_per_kwh: f64,
}

impl Intensities {
    pub fn get(&self, kind: IntensityKind) -> f64 {
        match kind {
            IntensityKind::Carbon => self.ci_g_per_kwh,
            IntensityKind::Water => self.water_l_per_kwh,
            IntensityKind::Land => self.land_m2_per_kwh,
        }
    }

    fn is_valid(&self) -> bool {
        [
            self.ci_g_per_kwh,
            self.water_l_per_kwh,
            self.land_m2_per_kwh,
        ]
        .iter()
        .all(|v| v.is_finite() && *v >= 0.0)
    }
}

/// What to use for a source present in a mix but absent from the factor
/// table.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub enum Fallback {
    /// Share-weighted mean of the sources in the same mix that do have
    /// factors.
    #[default]
    KnownMean,
    Fixed(Intensities),
    Error,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SourceFactors {
    table: BTreeMap<PowerSource, Intensities>,
    pub fallback: Fallback,
}

impl SourceFactors {
    pub fn new(
        entries: impl IntoIterator<Item = (PowerSource, Intensities)>,
        fallback: Fallback,
    ) -> Result<Self, GridError> {
        let mut table = BTreeMap::new();
        for (source, f) in entries {
            if !f.is_valid() {
                return Err(GridError::InvalidFactor {
                    power_source: source,
                });
            }
            table.insert(source, f);
        }
        if let Fallback::Fixed(f) = fallback {
            if !f.is_valid() {
                return Err(GridError::InvalidFactor {
                    power_source: PowerSource::Other,
                });
            }
        }
        Ok(Self { table, fallback })
    }

    pub fn get(&self, source: PowerSource) -> Option<&Intensities> {
        self.table.get(&source)
    }

    pub fn entries(&self) -> impl Iterator<Item = (PowerSource, &Intensities)> {
        self.table.iter().map(|(s, f)| (*s, f))
    }
}

/// Share-weighted intensity of a mix.
pub fn mix_to_intensity(
    mix: &SourceMix,
    factors: &SourceFactors,
    kind: IntensityKind,
) -> Result<f64, GridError> {
    let mut known = 0.0;
    let mut known_share = 0.0;
    let mut unknown_share = 0.0;
    let mut fixed = 0.0;
    let mut first_unknown = None;
    for (&source, &share) in &mix.shares {
        match factors.get(source) {
            Some(f) => {
                known += share * f.get(kind);
                known_share += share;
            }
            None => match factors.fallback {
                Fallback::Error => return Err(GridError::MissingFactor(source)),
                Fallback::Fixed(f) => fixed += share * f.get(kind),
                Fallback::KnownMean => {
                    unknown_share += share;
                    first_unknown.get_or_insert(source);
                }
            },
        }
    }
    if unknown_share > 0.0 {
        if known_share <= 0.0 {
            return Err(GridError::MissingFactor(
                first_unknown.unwrap_or(PowerSource::Other),
            ));
        }
        return Ok(known / known_share * (known_share + unknown_share) + fixed);
    }
    Ok(known + fixed)
}

/// Regional profile with carbon, water and land intensities derived from
/// the mix; scarcity and capture-loss factors passed through.
pub fn region_profile_from_mix(
    mix: &SourceMix,
    factors: &SourceFactors,
    wsf: f64,
    cclf: f64,
) -> Result<RegionProfile, GridError> {
    Ok(RegionProfile {
        region_id: mix.region_id.clone(),
        ci_grid: mix_to_intensity(mix, factors, IntensityKind::Carbon)?,
        ewif_grid: mix_to_intensity(mix, factors, IntensityKind::Water)?,
        elif_grid: mix_to_intensity(mix, factors, IntensityKind::Land)?,
        wsf,
        cclf,
    })
}

/// A provider of hourly grid mixes.
pub trait GridDataSource {
    /// The mix for `region` during the UTC hour containing `timestamp`.
    fn fetch_mix(&self, region: &RegionId, timestamp: i64) -> Result<SourceMix, GridError>;
}

impl<T: GridDataSource + ?Sized> GridDataSource for Box<T> {
    fn fetch_mix(&self, region: &RegionId, timestamp: i64) -> Result<SourceMix, GridError> {
        (**self).fetch_mix(region, timestamp)
    }
}

#[derive(Debug, Clone, Default)]
enum RegionMixes {
    #[default]
    Empty,
    Hourly(BTreeMap<i64, SourceMix>),
    Static(SourceMix),
}

/// In-memory hourly mixes, the offline fixture backend.
#[derive(Debug, Clone, Default)]
pub struct MixTable {
    regions: BTreeMap<RegionId, RegionMixes>,
}

impl MixTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds the mix for the hour containing `timestamp`.
    pub fn insert(&mut self, timestamp: i64, mix: SourceMix) -> Result<(), GridError> {
        let hour = hour_floor(timestamp);
        let region = mix.region_id.clone();
        let entry = self.regions.entry(region.clone()).or_default();
        if let RegionMixes::Empty | RegionMixes::Static(_) = entry {
            *entry = RegionMixes::Hourly(BTreeMap::new());
        }
        if let RegionMixes::Hourly(hours) = entry {
            if hours.insert(hour, mix).is_some() {
                return Err(GridError::DuplicateHour { region, hour });
            }
        }
        Ok(())
    }

    /// Uses one mix for every hour of a region.
    pub fn insert_static(&mut self, mix: SourceMix) {
        self.regions
            .insert(mix.region_id.clone(), RegionMixes::Static(mix));
    }

    pub fn regions(&self) -> impl Iterator<Item = &RegionId> {
        self.regions.keys()
    }

    /// First and last hour available for a region, if hourly.
    pub fn hour_range(&self, region: &RegionId) -> Option<(i64, i64)> {
        match self.regions.get(region)? {
            RegionMixes::Hourly(h) => Some((*h.keys().next()?, *h.keys().next_back()?)),
            _ => None,
        }
    }

    /// Every (hour, mix) row, hourly regions only.
    pub fn rows(&self) -> impl Iterator<Item = (i64, &SourceMix)> {
        self.regions.values().flat_map(|r| {
            let it: Box<dyn Iterator<Item = (i64, &SourceMix)>> = match r {
                RegionMixes::Hourly(h) => Box::new(h.iter().map(|(t, m)| (*t, m))),
                _ => Box::new(core::iter::empty()),
            };
            it
        })
    }
}

impl GridDataSource for MixTable {
    fn fetch_mix(&self, region: &RegionId, timestamp: i64) -> Result<SourceMix, GridError> {
        match self.regions.get(region) {
            None | Some(RegionMixes::Empty) => Err(GridError::UnknownRegion(region.clone())),
            Some(RegionMixes::Static(mix)) => Ok(mix.clone()),
            Some(RegionMixes::Hourly(hours)) => {
                let hour = hour_floor(timestamp);
                hours.get(&hour).cloned().ok_or_else(|| {
                    let first = hours.keys().next().copied().unwrap_or(hour);
                    let last = hours.keys().next_back().copied().unwrap_or(hour);
                    GridError::HourUnavailable {
                        region: region.clone(),
                        requested: hour,
                        first,
                        last,
                    }
                })
            }
        }
    }
}

/// How a region obtains its intensities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RegionEntry {
    Static(RegionProfile),
    /// Carbon, water and land intensities come from the grid mix of the
    /// current hour.
    FromMix {
        wsf: f64,
        cclf: f64,
    },
}

/// Grid backend plus the per-source factors used to interpret its mixes.
pub struct GridLink {
    pub backend: Box<dyn GridDataSource + Send + Sync>,
    pub factors: SourceFactors,
}

/// All regions of a scenario, resolvable at any hour.
#[derive(Default)]
pub struct RegionCatalog {
    entries: BTreeMap<RegionId, RegionEntry>,
    grid: Option<GridLink>,
}

impl RegionCatalog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_static(profiles: impl IntoIterator<Item = RegionProfile>) -> Self {
        let mut c = Self::new();
        for p in profiles {
            c.insert(p.region_id.clone(), RegionEntry::Static(p));
        }
        c
    }

    pub fn insert(&mut self, id: RegionId, entry: RegionEntry) {
        self.entries.insert(id, entry);
    }

    pub fn with_grid(mut self, grid: GridLink) -> Self {
        self.grid = Some(grid);
        self
    }

    pub fn contains(&self, id: &RegionId) -> bool {
        self.entries.contains_key(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &RegionId> {
        self.entries.keys()
    }

    pub fn entry(&self, id: &RegionId) -> Option<&RegionEntry> {
        self.entries.get(id)
    }

    /// Profile of `id` during the hour containing `timestamp`.
    pub fn profile_at(&self, id: &RegionId, timestamp: i64) -> Result<RegionProfile, GridError> {
        match self.entries.get(id) {
            None => Err(GridError::UnknownRegion(id.clone())),
            Some(RegionEntry::Static(p)) => Ok(p.clone()),
            Some(RegionEntry::FromMix { wsf, cclf }) => {
                let grid = self
                    .grid
                    .as_ref()
                    .ok_or_else(|| GridError::NoBackend(id.clone()))?;
                let mix = grid.backend.fetch_mix(id, timestamp)?;
                region_profile_from_mix(&mix, &grid.factors, *wsf, *cclf)
            }
        }
    }
}
