//! Remote grid-mix backend with an on-disk cache.
//!
//! Every (region, hour) response is stored verbatim in
//! `<cache_dir>/<sha256 of "region\nhour">.json`, where `hour` is the Unix
//! time of the start of the UTC hour. Later runs read the file instead of
//! calling the transport, so an offline run over a warmed cache sees exactly
//! the bytes of the first fetch.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ecoorc_core::gridmix::{hour_floor, GridDataSource, GridError, PowerSource, SourceMix};
use ecoorc_core::RegionId;
use sha2::{Digest, Sha256};

/// Fetches the raw power breakdown of one region and hour.
pub trait MixTransport: Send + Sync {
    fn fetch(&self, region: &RegionId, hour: i64) -> Result<Vec<u8>, String>;
}

pub struct CachedSource<T> {
    dir: PathBuf,
    transport: Option<T>,
}

impl<T: MixTransport> CachedSource<T> {
    pub fn new(dir: impl Into<PathBuf>, transport: T) -> Self {
        Self {
            dir: dir.into(),
            transport: Some(transport),
        }
    }

    /// Reads only from the cache; a missing entry is a cache miss.
    pub fn offline(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: dir.into(),
            transport: None,
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn cache_path(&self, region: &RegionId, hour: i64) -> PathBuf {
        self.dir.join(cache_file_name(region, hour))
    }

    /// Raw response for the hour containing `timestamp`, from the cache if
    /// present.
    pub fn fetch_bytes(&self, region: &RegionId, timestamp: i64) -> Result<Vec<u8>, GridError> {
        let hour = hour_floor(timestamp);
        let path = self.cache_path(region, hour);
        match fs::read(&path) {
            Ok(bytes) => return Ok(bytes),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(GridError::Remote(format!("{}: {e}", path.display()))),
        }
        let Some(transport) = &self.transport else {
            return Err(GridError::CacheMiss {
                region: region.clone(),
                hour,
            });
        };
        let bytes = transport
            .fetch(region, hour)
            .map_err(|e| GridError::Remote(format!("{region} at {hour}: {e}")))?;
        store(&self.dir, &path, &bytes)
            .map_err(|e| GridError::Remote(format!("{}: {e}", path.display())))?;
        Ok(bytes)
    }
}

impl<T: MixTransport> GridDataSource for CachedSource<T> {
    fn fetch_mix(&self, region: &RegionId, timestamp: i64) -> Result<SourceMix, GridError> {
        let bytes = self.fetch_bytes(region, timestamp)?;
        parse_breakdown(region, &bytes)
    }
}

pub fn cache_file_name(region: &RegionId, hour: i64) -> String {
    let digest = Sha256::digest(format!("{region}\n{hour}").as_bytes());
    format!("{}.json", hex::encode(digest))
}

// Writes to a private temporary file first so that readers never see a
// partial entry and concurrent writers of one key simply replace each other.
fn store(dir: &Path, path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

/// Turns a power-breakdown JSON document into a mix.
///
/// The consumption breakdown is preferred over production. Storage discharge
/// and unknown generation count as `other`; null entries are skipped.
pub fn parse_breakdown(region: &RegionId, bytes: &[u8]) -> Result<SourceMix, GridError> {
    let doc: serde_json::Value = serde_json::from_slice(bytes)
        .map_err(|e| GridError::Remote(format!("{region}: malformed response: {e}")))?;
    // Some responses wrap the hour in a `history` or `data` list.
    let doc = ["history", "data"]
        .iter()
        .find_map(|k| {
            doc.get(k)
                .and_then(|v| v.as_array())
                .and_then(|a| a.first())
        })
        .unwrap_or(&doc);
    let breakdown = ["powerConsumptionBreakdown", "powerProductionBreakdown"]
        .iter()
        .find_map(|k| doc.get(k).and_then(|v| v.as_object()))
        .ok_or_else(|| GridError::Remote(format!("{region}: response has no power breakdown")))?;
    let mut generation: BTreeMap<PowerSource, f64> = BTreeMap::new();
    for (name, value) in breakdown {
        let Some(v) = value.as_f64() else { continue };
        let source = name.parse().unwrap_or(PowerSource::Other);
        *generation.entry(source).or_insert(0.0) += v;
    }
    SourceMix::from_generation(region.clone(), generation)
}

/// Blocking HTTP transport for a power-breakdown history endpoint.
///
/// Requests `GET {base_url}/power-breakdown/past?zone=REGION&datetime=RFC3339`
/// with the token, if any, in the `auth-token` header.
#[cfg(feature = "remote")]
pub struct HttpTransport {
    client: reqwest::blocking::Client,
    base_url: String,
    token: Option<String>,
}

#[cfg(feature = "remote")]
impl HttpTransport {
    pub fn new(base_url: impl Into<String>, token: Option<String>) -> Result<Self, String> {
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(30))
            .build()
            .map_err(|e| e.to_string())?;
        Ok(Self {
            client,
            base_url: base_url.into().trim_end_matches('/').to_string(),
            token,
        })
    }
}

#[cfg(feature = "remote")]
impl MixTransport for HttpTransport {
    fn fetch(&self, region: &RegionId, hour: i64) -> Result<Vec<u8>, String> {
        let url = format!("{}/power-breakdown/past", self.base_url);
        let datetime = crate::datasets::format_timestamp(hour);
        let mut req = self
            .client
            .get(url)
            .query(&[("zone", region.as_str()), ("datetime", datetime.as_str())]);
        if let Some(t) = &self.token {
            req = req.header("auth-token", t);
        }
        let resp = req.send().map_err(|e| e.to_string())?;
        let status = resp.status();
        if !status.is_success() {
            return Err(format!("HTTP {status}"));
        }
        resp.bytes().map(|b| b.to_vec()).map_err(|e| e.to_string())
    }
}

/// Stands in for any transport when the `remote` feature is off.
pub struct Unavailable;

impl MixTransport for Unavailable {
    fn fetch(&self, _: &RegionId, _: i64) -> Result<Vec<u8>, String> {
        Err("built without the `remote` feature; only cached hours are available".into())
    }
}
