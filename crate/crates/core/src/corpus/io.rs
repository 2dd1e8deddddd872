use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use super::{normalize_tag, tokenize, Mashup, Repository, Service};
use crate::{Error, Result};

pub const SERVICES_FILE: &str = "services.jsonl";
pub const MASHUPS_FILE: &str = "mashups.jsonl";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ServiceRecord {
    id: String,
    name: String,
    description: String,
    #[serde(default)]
    tags: Vec<String>,
    #[serde(default)]
    provider: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MashupRecord {
    id: String,
    name: String,
    description: String,
    #[serde(default)]
    tags: Vec<String>,
    component_service_ids: Vec<String>,
}

/// Ids of the records removed by the ingestion filters.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DropReport {
    pub services_without_content: Vec<String>,
    pub mashups_without_content: Vec<String>,
    pub mashups_with_one_component: Vec<String>,
}

impl DropReport {
    pub fn total(&self) -> usize {
        self.services_without_content.len()
            + self.mashups_without_content.len()
            + self.mashups_with_one_component.len()
    }
}

fn read_records<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(path, e)),
    };
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| Error::Parse {
            file: path.display().to_string(),
            line: n + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

fn tag_set(tags: &[String]) -> BTreeSet<String> {
    tags.iter().filter_map(|t| normalize_tag(t)).collect()
}

/// Loads `services.jsonl` and `mashups.jsonl` from `dir`.
///
/// Services and mashups whose description tokenizes to nothing are dropped,
/// component references to dropped services are removed, and mashups left
/// with fewer than two components are dropped. A reference to an id that
/// never appeared in the services file is an integrity error.
pub fn load_repository(dir: &Path) -> Result<(Repository, DropReport)> {
    let service_recs: Vec<ServiceRecord> = read_records(&dir.join(SERVICES_FILE))?;
    let mashup_recs: Vec<MashupRecord> = read_records(&dir.join(MASHUPS_FILE))?;
    let mut report = DropReport::default();

    let mut services = Vec::new();
    let mut index: HashMap<String, Option<usize>> = HashMap::new();
    for rec in service_recs {
        let description = tokenize(&rec.description);
        if index.contains_key(&rec.id) {
            return Err(Error::Integrity(format!("duplicate service id {}", rec.id)));
        }
        if description.is_empty() {
            index.insert(rec.id.clone(), None);
            report.services_without_content.push(rec.id);
            continue;
        }
        index.insert(rec.id.clone(), Some(services.len()));
        services.push(Service {
            id: rec.id,
            name: rec.name,
            description,
            tags: tag_set(&rec.tags),
            provider: rec.provider,
        });
    }

    let mut mashups = Vec::new();
    for rec in mashup_recs {
        let mut components = Vec::new();
        for sid in &rec.component_service_ids {
            match index.get(sid) {
                None => {
                    return Err(Error::Integrity(format!(
                        "mashup {} references unknown service {sid}",
                        rec.id
                    )))
                }
                Some(None) => {}
                Some(Some(i)) => {
                    if !components.contains(i) {
                        components.push(*i);
                    }
                }
            }
        }
        let description = tokenize(&rec.description);
        if description.is_empty() {
            report.mashups_without_content.push(rec.id);
            continue;
        }
        if components.len() < 2 {
            report.mashups_with_one_component.push(rec.id);
            continue;
        }
        mashups.push(Mashup {
            id: rec.id,
            name: rec.name,
            description,
            tags: tag_set(&rec.tags),
            components,
        });
    }
    if report.total() > 0 {
        warn!(
            "dropped {} services without content, {} mashups without content, {} mashups with one component",
            report.services_without_content.len(),
            report.mashups_without_content.len(),
            report.mashups_with_one_component.len()
        );
    }
    Ok((Repository::new(services, mashups)?, report))
}

fn write_lines<T: Serialize>(path: &Path, records: impl Iterator<Item = T>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for rec in records {
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes the repository in the same line-delimited format
/// [`load_repository`] reads. Descriptions are written as their
/// space-joined tokens.
pub fn write_repository(repo: &Repository, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_lines(
        &dir.join(SERVICES_FILE),
        repo.services().iter().map(|s| ServiceRecord {
            id: s.id.clone(),
            name: s.name.clone(),
            description: s.description.join(" "),
            tags: s.tags.iter().cloned().collect(),
            provider: s.provider.clone(),
        }),
    )?;
    write_lines(
        &dir.join(MASHUPS_FILE),
        repo.mashups().iter().map(|m| MashupRecord {
            id: m.id.clone(),
            name: m.name.clone(),
            description: m.description.join(" "),
            tags: m.tags.iter().cloned().collect(),
            component_service_ids: m
                .components
                .iter()
                .map(|&c| repo.service(c).id.clone())
                .collect(),
        }),
    )
}
