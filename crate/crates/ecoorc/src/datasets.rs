//! CSV loaders for fleets, regions, grid mixes, source factors and weather,
//! plus the shared number formatting used by every CSV this crate writes.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use ecoorc_core::gridmix::{
    Fallback, Intensities, MixTable, PowerSource, RegionEntry, SourceFactors, SourceMix,
};
use ecoorc_core::wue::WeatherSample;
use ecoorc_core::{DataCenterProfile, DcId, RegionId, RegionProfile};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize, Serializer};

/// Facilities without an `s_max` column get this many concurrent slots.
pub const DEFAULT_S_MAX: u32 = 5;

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Parse { path: PathBuf, message: String },
    #[error("{}: {} problem(s):\n  {}", path.display(), problems.len(), problems.join("\n  "))]
    Invalid {
        path: PathBuf,
        problems: Vec<String>,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> LoadError + '_ {
    move |source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_err(path: &Path, e: csv::Error) -> LoadError {
    let message = match e.position() {
        Some(p) => format!("line {}: {}", p.line(), csv_reason(&e)),
        None => e.to_string(),
    };
    LoadError::Parse {
        path: path.to_path_buf(),
        message,
    }
}

fn csv_reason(e: &csv::Error) -> String {
    match e.kind() {
        csv::ErrorKind::Deserialize { err, .. } => match err.field() {
            Some(i) => format!("field {}: {}", i + 1, err.kind()),
            None => err.kind().to_string(),
        },
        _ => e.to_string(),
    }
}

/// Reads every record of a headed CSV file. Items are paired with their
/// line number.
pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<(u64, T)>, LoadError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = reader.headers().map_err(|e| parse_err(path, e))?.clone();
    let mut out = Vec::new();
    let mut raw = csv::StringRecord::new();
    while reader
        .read_record(&mut raw)
        .map_err(|e| parse_err(path, e))?
    {
        let line = raw.position().map_or(0, |p| p.line());
        let record: T = raw.deserialize(Some(&headers)).map_err(|e| {
            let message = format!("line {line}: {}", csv_reason(&e));
            LoadError::Parse {
                path: path.to_path_buf(),
                message,
            }
        })?;
        out.push((line, record));
    }
    Ok(out)
}

/// Reads records, dropping line numbers.
pub fn read_records<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, LoadError> {
    Ok(read_csv(path)?.into_iter().map(|(_, r)| r).collect())
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), LoadError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut writer = csv::Writer::from_writer(file);
    for row in rows {
        writer.serialize(row).map_err(|e| parse_err(path, e))?;
    }
    writer.flush().map_err(io_err(path))
}

/// Writes an `f64` as its shortest round-trip decimal, never in exponent
/// form, so that files compare byte for byte.
pub fn decimal<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format_decimal(*v))
}

pub fn format_decimal(v: f64) -> String {
    if v == 0.0 {
        // Folds -0 into 0.
        "0".into()
    } else {
        format!("{v}")
    }
}

pub fn parse_timestamp(s: &str) -> Result<i64, String> {
    DateTime::parse_from_rfc3339(s.trim())
        .map(|t| t.timestamp())
        .map_err(|e| format!("`{s}` is not an RFC 3339 timestamp: {e}"))
}

pub fn format_timestamp(ts: i64) -> String {
    DateTime::<Utc>::from_timestamp(ts, 0)
        .map(|t| t.to_rfc3339_opts(SecondsFormat::Secs, true))
        .unwrap_or_else(|| ts.to_string())
}

fn finish<T>(path: &Path, value: T, problems: Vec<String>) -> Result<T, LoadError> {
    if problems.is_empty() {
        Ok(value)
    } else {
        Err(LoadError::Invalid {
            path: path.to_path_buf(),
            problems,
        })
    }
}

#[derive(Debug, Deserialize)]
struct DataCenterRow {
    dc_id: String,
    #[serde(default)]
    provider: String,
    #[serde(default)]
    location: String,
    region_id: String,
    pue: f64,
    wue_l_per_kwh: Option<f64>,
    water_withdrawal_ml: Option<f64>,
    facility_energy_mwh: Option<f64>,
    it_energy_mwh: Option<f64>,
    area_m2: Option<f64>,
    p_onsite: Option<f64>,
    ci_onsite_g_per_kwh: Option<f64>,
    ewif_onsite_l_per_kwh: Option<f64>,
    ewi_g_per_kwh: Option<f64>,
    s_max: Option<u32>,
}

/// A facility together with the descriptive columns of its row.
#[derive(Debug, Clone, PartialEq)]
pub struct DataCenterRecord {
    pub provider: String,
    pub location: String,
    pub profile: DataCenterProfile,
    pub line: u64,
}

/// Loads a fleet.
///
/// Annual IT energy falls back to facility energy divided by PUE, and WUE to
/// water withdrawal divided by IT energy. Facilities may lack an area; the
/// caller decides whether that is acceptable.
pub fn read_datacenters(path: &Path) -> Result<Vec<DataCenterRecord>, LoadError> {
    let rows: Vec<(u64, DataCenterRow)> = read_csv(path)?;
    let mut problems = Vec::new();
    let mut out = Vec::with_capacity(rows.len());
    let mut seen = BTreeMap::new();
    for (line, row) in rows {
        let at = format!("line {line} ({})", row.dc_id);
        if let Some(first) = seen.insert(row.dc_id.clone(), line) {
            problems.push(format!("{at}: dc_id already defined on line {first}"));
        }
        let it_mwh = row
            .it_energy_mwh
            .or_else(|| row.facility_energy_mwh.map(|f| f / row.pue));
        let wue = match (row.wue_l_per_kwh, row.water_withdrawal_ml, it_mwh) {
            (Some(w), _, _) => w,
            // Ml → l is 1e6, MWh → kWh is 1e3.
            (None, Some(ml), Some(mwh)) if mwh > 0.0 => ml * 1e3 / mwh,
            _ => {
                problems.push(format!(
                    "{at}: wue_l_per_kwh is empty and cannot be derived from \
                     water_withdrawal_ml and IT energy"
                ));
                0.0
            }
        };
        let profile = DataCenterProfile {
            dc_id: DcId::new(&row.dc_id),
            region: RegionId::new(&row.region_id),
            pue: row.pue,
            wue,
            p_onsite: row.p_onsite.unwrap_or(0.0),
            ci_onsite: row.ci_onsite_g_per_kwh.unwrap_or(0.0),
            ewif_onsite: row.ewif_onsite_l_per_kwh.unwrap_or(0.0),
            area: row.area_m2,
            annual_it_energy: it_mwh.map(|m| m * 1e3),
            ewi: row.ewi_g_per_kwh.unwrap_or(0.0),
            s_max: row.s_max.unwrap_or(DEFAULT_S_MAX),
        };
        for v in profile.violations() {
            problems.push(format!("{at}: {}: {}", v.field, v.message));
        }
        out.push(DataCenterRecord {
            provider: row.provider,
            location: row.location,
            profile,
            line,
        });
    }
    finish(path, out, problems)
}

#[derive(Debug, Serialize, Deserialize)]
struct RegionRow {
    region_id: String,
    ci_g_per_kwh: Option<f64>,
    ewif_l_per_kwh: Option<f64>,
    elif_m2_per_kwh: Option<f64>,
    wsf: f64,
    cclf_g_per_m2_year: f64,
    #[serde(default)]
    intensities: Option<String>,
}

/// Loads regions. Rows with `intensities = mix` take carbon, water and land
/// intensities from the grid mix of each hour; other rows are static.
pub fn read_regions(path: &Path) -> Result<Vec<(RegionId, RegionEntry)>, LoadError> {
    let rows: Vec<(u64, RegionRow)> = read_csv(path)?;
    let mut problems = Vec::new();
    let mut out = Vec::with_capacity(rows.len());
    let mut seen = BTreeMap::new();
    for (line, row) in rows {
        let at = format!("line {line} ({})", row.region_id);
        if let Some(first) = seen.insert(row.region_id.clone(), line) {
            problems.push(format!("{at}: region_id already defined on line {first}"));
        }
        let id = RegionId::new(&row.region_id);
        let kind = row.intensities.as_deref().unwrap_or("static");
        let entry = match kind {
            "mix" => {
                for (field, ok) in [
                    ("wsf", row.wsf.is_finite() && row.wsf >= 0.0),
                    (
                        "cclf_g_per_m2_year",
                        row.cclf_g_per_m2_year.is_finite() && row.cclf_g_per_m2_year >= 0.0,
                    ),
                ] {
                    if !ok {
                        problems.push(format!("{at}: {field}: must be finite and non-negative"));
                    }
                }
                RegionEntry::FromMix {
                    wsf: row.wsf,
                    cclf: row.cclf_g_per_m2_year,
                }
            }
            "static" | "" => {
                let mut need = |field: &str, v: Option<f64>| {
                    v.unwrap_or_else(|| {
                        problems.push(format!("{at}: {field}: required for a static region"));
                        0.0
                    })
                };
                let profile = RegionProfile {
                    region_id: id.clone(),
                    ci_grid: need("ci_g_per_kwh", row.ci_g_per_kwh),
                    ewif_grid: need("ewif_l_per_kwh", row.ewif_l_per_kwh),
                    elif_grid: need("elif_m2_per_kwh", row.elif_m2_per_kwh),
                    wsf: row.wsf,
                    cclf: row.cclf_g_per_m2_year,
                };
                for v in profile.violations() {
                    problems.push(format!("{at}: {}: {}", v.field, v.message));
                }
                RegionEntry::Static(profile)
            }
            other => {
                problems.push(format!(
                    "{at}: intensities: expected `static` or `mix`, found `{other}`"
                ));
                continue;
            }
        };
        out.push((id, entry));
    }
    finish(path, out, problems)
}

/// Writes static region rows readable by [`read_regions`].
pub fn write_regions(path: &Path, profiles: &[RegionProfile]) -> Result<(), LoadError> {
    #[derive(Serialize)]
    struct Row<'a> {
        region_id: &'a str,
        #[serde(serialize_with = "decimal")]
        ci_g_per_kwh: f64,
        #[serde(serialize_with = "decimal")]
        ewif_l_per_kwh: f64,
        #[serde(serialize_with = "decimal")]
        elif_m2_per_kwh: f64,
        #[serde(serialize_with = "decimal")]
        wsf: f64,
        #[serde(serialize_with = "decimal")]
        cclf_g_per_m2_year: f64,
        intensities: &'a str,
    }
    let rows: Vec<Row> = profiles
        .iter()
        .map(|p| Row {
            region_id: p.region_id.as_str(),
            ci_g_per_kwh: p.ci_grid,
            ewif_l_per_kwh: p.ewif_grid,
            elif_m2_per_kwh: p.elif_grid,
            wsf: p.wsf,
            cclf_g_per_m2_year: p.cclf,
            intensities: "static",
        })
        .collect();
    write_csv(path, &rows)
}

#[derive(Debug, Deserialize)]
struct MixRow {
    region_id: String,
    timestamp_utc: String,
    source: String,
    share: f64,
}

type MixGroup = (Vec<(PowerSource, f64)>, u64);

/// Loads hourly mixes in long format. A `timestamp_utc` of `*` declares a
/// static mix used for every hour of that region.
pub fn read_mixes(path: &Path) -> Result<MixTable, LoadError> {
    let rows: Vec<(u64, MixRow)> = read_csv(path)?;
    let mut problems = Vec::new();
    // (region, hour or None for static) → shares, first line
    let mut groups: BTreeMap<(String, Option<i64>), MixGroup> = BTreeMap::new();
    for (line, row) in rows {
        let hour = if row.timestamp_utc.trim() == "*" {
            None
        } else {
            match parse_timestamp(&row.timestamp_utc) {
                Ok(ts) => Some(ts),
                Err(e) => {
                    problems.push(format!("line {line}: timestamp_utc: {e}"));
                    continue;
                }
            }
        };
        let source = match row.source.parse::<PowerSource>() {
            Ok(s) => s,
            Err(e) => {
                problems.push(format!("line {line}: source: {e}"));
                continue;
            }
        };
        groups
            .entry((row.region_id, hour))
            .or_insert_with(|| (Vec::new(), line))
            .0
            .push((source, row.share));
    }
    let mut table = MixTable::new();
    let mut kinds: BTreeMap<String, bool> = BTreeMap::new();
    for ((region, hour), (shares, line)) in groups {
        let is_static = hour.is_none();
        if let Some(prev) = kinds.insert(region.clone(), is_static) {
            if prev != is_static {
                problems.push(format!(
                    "line {line}: region {region} mixes static (`*`) and hourly rows"
                ));
                continue;
            }
        }
        let mix = match SourceMix::new(RegionId::new(&region), shares) {
            Ok(m) => m,
            Err(e) => {
                problems.push(format!("line {line}: {e}"));
                continue;
            }
        };
        match hour {
            None => table.insert_static(mix),
            Some(ts) => {
                if let Err(e) = table.insert(ts, mix) {
                    problems.push(format!("line {line}: {e}"));
                }
            }
        }
    }
    finish(path, table, problems)
}

#[derive(Debug, Deserialize)]
struct FactorRow {
    source: String,
    ci_g_per_kwh: f64,
    water_l_per_kwh: f64,
    land_m2_per_kwh: f64,
}

pub fn read_source_factors(path: &Path, fallback: Fallback) -> Result<SourceFactors, LoadError> {
    let rows: Vec<(u64, FactorRow)> = read_csv(path)?;
    let mut problems = Vec::new();
    let mut entries = Vec::new();
    let mut seen = BTreeMap::new();
    for (line, row) in rows {
        let source = match row.source.parse::<PowerSource>() {
            Ok(s) => s,
            Err(e) => {
                problems.push(format!("line {line}: source: {e}"));
                continue;
            }
        };
        if let Some(first) = seen.insert(source, line) {
            problems.push(format!(
                "line {line}: {source} already defined on line {first}"
            ));
        }
        for (field, v) in [
            ("ci_g_per_kwh", row.ci_g_per_kwh),
            ("water_l_per_kwh", row.water_l_per_kwh),
            ("land_m2_per_kwh", row.land_m2_per_kwh),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                problems.push(format!(
                    "line {line}: {field}: must be finite and non-negative, got {v}"
                ));
            }
        }
        entries.push((
            source,
            Intensities {
                ci_g_per_kwh: row.ci_g_per_kwh,
                water_l_per_kwh: row.water_l_per_kwh,
                land_m2_per_kwh: row.land_m2_per_kwh,
            },
        ));
    }
    if !problems.is_empty() {
        return finish(path, SourceFactors::default(), problems);
    }
    SourceFactors::new(entries, fallback).map_err(|e| LoadError::Invalid {
        path: path.to_path_buf(),
        problems: vec![e.to_string()],
    })
}

#[derive(Debug, Deserialize)]
struct WeatherRow {
    timestamp_utc: String,
    temp_c: f64,
    dewpoint_c: f64,
}

/// Loads hourly weather. Problems are reported with their line number.
pub fn read_weather(path: &Path) -> Result<Vec<WeatherSample>, LoadError> {
    let rows: Vec<(u64, WeatherRow)> = read_csv(path)?;
    let mut problems = Vec::new();
    let mut out = Vec::with_capacity(rows.len());
    for (line, row) in rows {
        let timestamp = match parse_timestamp(&row.timestamp_utc) {
            Ok(t) => t,
            Err(e) => {
                problems.push(format!("line {line}: timestamp_utc: {e}"));
                continue;
            }
        };
        if !(row.temp_c.is_finite() && row.dewpoint_c.is_finite()) {
            problems.push(format!("line {line}: temperatures must be finite"));
        } else if row.dewpoint_c > row.temp_c {
            problems.push(format!(
                "line {line}: dewpoint_c {} is above temp_c {}",
                row.dewpoint_c, row.temp_c
            ));
        }
        if let Some(prev) = out.last().map(|s: &WeatherSample| s.timestamp) {
            if timestamp <= prev {
                problems.push(format!(
                    "line {line}: timestamp_utc {} does not follow the previous row",
                    row.timestamp_utc
                ));
            }
        }
        out.push(WeatherSample {
            timestamp,
            temp_c: row.temp_c,
            dewpoint_c: row.dewpoint_c,
        });
    }
    finish(path, out, problems)
}

/// Creates `dir` and returns the path of `name` inside it.
pub fn output_path(dir: &Path, name: &str) -> Result<PathBuf, LoadError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    Ok(dir.join(name))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), LoadError> {
    let mut f = File::create(path).map_err(io_err(path))?;
    f.write_all(text.as_bytes()).map_err(io_err(path))
}
