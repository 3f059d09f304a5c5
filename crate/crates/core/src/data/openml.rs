//! Minimal openML client with an on-disk cache.
//!
//! Layout: `{cache_dir}/{id}/description.json` plus `{cache_dir}/{id}/data.arff`.
//! A dataset directory is only ever created by renaming a completed temporary
//! directory, so a crash never leaves a partial entry behind.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{parse_arff, ArffOptions, Dataset};
use crate::{Error, Result};

pub const API_ROOT: &str = "https://www.openml.org/api/v1/json";
const DESCRIPTION_FILE: &str = "description.json";
const DATA_FILE: &str = "data.arff";

/// Raw HTTP access; `Ok(None)` means the server reported the resource as unknown.
pub trait Transport {
    fn get(&self, url: &str) -> Result<Option<Vec<u8>>>;
}

pub struct HttpTransport {
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new() -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(120)))
            .build();
        HttpTransport {
            agent: ureq::Agent::new_with_config(config),
        }
    }
}

impl Default for HttpTransport {
    fn default() -> Self {
        Self::new()
    }
}

impl Transport for HttpTransport {
    fn get(&self, url: &str) -> Result<Option<Vec<u8>>> {
        match self.agent.get(url).call() {
            Ok(response) => response
                .into_body()
                .with_config()
                .limit(512 * 1024 * 1024)
                .read_to_vec()
                .map(Some)
                .map_err(|e| Error::Network {
                    url: url.into(),
                    message: e.to_string(),
                }),
            // openML answers unknown ids with 404 and empty listings with 412.
            Err(ureq::Error::StatusCode(404 | 412)) => Ok(None),
            Err(e) => Err(Error::Network {
                url: url.into(),
                message: e.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DatasetRef {
    Id(u64),
    Name { name: String, version: u32 },
}

impl std::fmt::Display for DatasetRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DatasetRef::Id(id) => write!(f, "id {id}"),
            DatasetRef::Name { name, version } => write!(f, "{name} v{version}"),
        }
    }
}

impl std::str::FromStr for DatasetRef {
    type Err = Error;

    /// `1462`, `banknote-authentication` (version 1) or `diabetes:1`.
    fn from_str(s: &str) -> Result<Self> {
        if let Ok(id) = s.parse() {
            return Ok(DatasetRef::Id(id));
        }
        let (name, version) = match s.rsplit_once(':') {
            Some((n, v)) => (
                n,
                v.parse()
                    .map_err(|_| Error::InvalidParam(format!("bad openML version in {s:?}")))?,
            ),
            None => (s, 1),
        };
        if name.is_empty() {
            return Err(Error::InvalidParam("empty openML dataset name".into()));
        }
        Ok(DatasetRef::Name {
            name: name.into(),
            version,
        })
    }
}

/// The fields of an openML data description that the client uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Description {
    #[serde(deserialize_with = "de_u64")]
    pub id: u64,
    pub name: String,
    #[serde(deserialize_with = "de_u32")]
    pub version: u32,
    pub url: String,
    #[serde(default)]
    pub default_target_attribute: Option<String>,
    #[serde(default)]
    pub format: Option<String>,
}

#[derive(Debug, Clone)]
pub struct CachedDataset {
    pub description: Description,
    pub data_path: PathBuf,
}

pub struct OpenMlClient {
    cache_dir: PathBuf,
    transport: Box<dyn Transport + Send + Sync>,
    api_root: String,
}

impl OpenMlClient {
    pub fn new(cache_dir: impl Into<PathBuf>) -> Self {
        Self::with_transport(cache_dir, Box::new(HttpTransport::new()))
    }

    pub fn with_transport(cache_dir: impl Into<PathBuf>, transport: Box<dyn Transport + Send + Sync>) -> Self {
        OpenMlClient {
            cache_dir: cache_dir.into(),
            transport,
            api_root: API_ROOT.into(),
        }
    }

    pub fn cache_dir(&self) -> &Path {
        &self.cache_dir
    }

    /// Returns the cached files for `dataset`, downloading them on a miss.
    pub fn fetch(&self, dataset: &DatasetRef) -> Result<CachedDataset> {
        if let Some(hit) = self.lookup_cache(dataset)? {
            return Ok(hit);
        }
        let id = match dataset {
            DatasetRef::Id(id) => *id,
            DatasetRef::Name { name, version } => self.resolve_name(name, *version)?,
        };
        if let Some(hit) = self.lookup_cache(&DatasetRef::Id(id))? {
            return Ok(hit);
        }
        self.download(id)
    }

    /// Fetches and parses the dataset using its default target attribute.
    pub fn load(&self, dataset: &DatasetRef, options: &ArffOptions) -> Result<Dataset> {
        let cached = self.fetch(dataset)?;
        let text = std::fs::read_to_string(&cached.data_path).map_err(|e| Error::io(&cached.data_path, e))?;
        let mut options = options.clone();
        if options.target.is_none() {
            options.target = cached.description.default_target_attribute.clone();
        }
        parse_arff(&text, &options)
    }

    fn lookup_cache(&self, dataset: &DatasetRef) -> Result<Option<CachedDataset>> {
        match dataset {
            DatasetRef::Id(id) => self.read_entry(&self.cache_dir.join(id.to_string())),
            DatasetRef::Name { name, version } => {
                let Ok(entries) = std::fs::read_dir(&self.cache_dir) else {
                    return Ok(None);
                };
                let mut dirs: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
                dirs.sort();
                for dir in dirs {
                    if let Some(hit) = self.read_entry(&dir)? {
                        if hit.description.name == *name && hit.description.version == *version {
                            return Ok(Some(hit));
                        }
                    }
                }
                Ok(None)
            }
        }
    }

    fn read_entry(&self, dir: &Path) -> Result<Option<CachedDataset>> {
        let desc_path = dir.join(DESCRIPTION_FILE);
        let data_path = dir.join(DATA_FILE);
        if !desc_path.is_file() || !data_path.is_file() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(&desc_path).map_err(|e| Error::io(&desc_path, e))?;
        let description = serde_json::from_str(&text)?;
        Ok(Some(CachedDataset { description, data_path }))
    }

    fn resolve_name(&self, name: &str, version: u32) -> Result<u64> {
        #[derive(Deserialize)]
        struct Listing {
            data: ListingData,
        }
        #[derive(Deserialize)]
        struct ListingData {
            dataset: Vec<ListingEntry>,
        }
        #[derive(Deserialize)]
        struct ListingEntry {
            #[serde(deserialize_with = "de_u64")]
            did: u64,
        }
        let url = format!("{}/data/list/data_name/{name}/data_version/{version}", self.api_root);
        let body = self
            .transport
            .get(&url)?
            .ok_or_else(|| Error::DatasetNotFound(format!("{name} v{version}")))?;
        let listing: Listing = serde_json::from_slice(&body)
            .map_err(|e| Error::MalformedPayload(format!("dataset listing for {name}: {e}")))?;
        listing
            .data
            .dataset
            .first()
            .map(|d| d.did)
            .ok_or_else(|| Error::DatasetNotFound(format!("{name} v{version}")))
    }

    fn download(&self, id: u64) -> Result<CachedDataset> {
        #[derive(Deserialize)]
        struct Envelope {
            data_set_description: Description,
        }
        let url = format!("{}/data/{id}", self.api_root);
        let body = self
            .transport
            .get(&url)?
            .ok_or_else(|| Error::DatasetNotFound(format!("id {id}")))?;
        let description = serde_json::from_slice::<Envelope>(&body)
            .map_err(|e| Error::MalformedPayload(format!("description of id {id}: {e}")))?
            .data_set_description;
        if description.format.as_deref().is_some_and(|f| !f.eq_ignore_ascii_case("arff")) {
            return Err(Error::MalformedPayload(format!(
                "id {id} is stored as {:?}, only ARFF is supported",
                description.format
            )));
        }
        let data = self
            .transport
            .get(&description.url)?
            .ok_or_else(|| Error::DatasetNotFound(format!("data file of id {id}")))?;
        if data.is_empty() || !String::from_utf8_lossy(&data[..data.len().min(4096)]).to_ascii_lowercase().contains("@attribute") {
            return Err(Error::MalformedPayload(format!("data file of id {id} is empty or not ARFF")));
        }

        std::fs::create_dir_all(&self.cache_dir).map_err(|e| Error::io(&self.cache_dir, e))?;
        let staging = tempfile::Builder::new()
            .prefix(".partial-")
            .tempdir_in(&self.cache_dir)
            .map_err(|e| Error::io(&self.cache_dir, e))?;
        let desc_path = staging.path().join(DESCRIPTION_FILE);
        std::fs::write(&desc_path, serde_json::to_vec_pretty(&description)?).map_err(|e| Error::io(&desc_path, e))?;
        let data_path = staging.path().join(DATA_FILE);
        std::fs::write(&data_path, &data).map_err(|e| Error::io(&data_path, e))?;
        let target = self.cache_dir.join(id.to_string());
        let staged = staging.keep();
        if let Err(e) = std::fs::rename(&staged, &target) {
            let _ = std::fs::remove_dir_all(&staged);
            // Another process may have filled the entry concurrently.
            if let Some(hit) = self.read_entry(&target)? {
                return Ok(hit);
            }
            return Err(Error::io(&target, e));
        }
        Ok(CachedDataset {
            description,
            data_path: target.join(DATA_FILE),
        })
    }
}

fn de_u64<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<u64, D::Error> {
    use serde::de::Error as _;
    match serde_json::Value::deserialize(d)? {
        serde_json::Value::Number(n) => n.as_u64().ok_or_else(|| D::Error::custom("expected an integer")),
        serde_json::Value::String(s) => s.parse().map_err(D::Error::custom),
        other => Err(D::Error::custom(format!("expected an integer, got {other}"))),
    }
}

fn de_u32<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<u32, D::Error> {
    let v = de_u64(d)?;
    u32::try_from(v).map_err(serde::de::Error::custom)
}
