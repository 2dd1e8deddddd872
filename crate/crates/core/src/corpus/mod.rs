//! Repository data model, ingestion, fold splitting and sampling.

mod folds;
mod io;
mod sampling;
mod synth;
mod tokenize;

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use folds::{make_folds, FoldSplit};
pub use io::{load_repository, write_repository, DropReport, MASHUPS_FILE, SERVICES_FILE};
pub use sampling::{generate_samples, write_samples, Purpose, Sample, SamplingConfig};
pub use synth::{synth_corpus, SynthConfig, SynthCorpus};
pub use tokenize::{normalize_tag, tokenize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Service {
    pub id: String,
    pub name: String,
    /// Tokenized description.
    pub description: Vec<String>,
    pub tags: BTreeSet<String>,
    pub provider: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mashup {
    pub id: String,
    pub name: String,
    /// Tokenized requirements text.
    pub description: Vec<String>,
    pub tags: BTreeSet<String>,
    /// Indices into [`Repository::services`], in record order.
    pub components: Vec<usize>,
}

/// Validated, immutable collection of services and mashups.
#[derive(Debug, Clone, PartialEq)]
pub struct Repository {
    services: Vec<Service>,
    mashups: Vec<Mashup>,
    service_index: HashMap<String, usize>,
    mashup_index: HashMap<String, usize>,
}

impl Repository {
    /// Builds a repository and checks the structural invariants: unique ids,
    /// non-empty descriptions, at least two distinct in-range components per
    /// mashup.
    pub fn new(services: Vec<Service>, mashups: Vec<Mashup>) -> Result<Self> {
        let mut service_index = HashMap::with_capacity(services.len());
        for (i, s) in services.iter().enumerate() {
            if s.description.is_empty() {
                return Err(Error::Integrity(format!("service {} has no description", s.id)));
            }
            if service_index.insert(s.id.clone(), i).is_some() {
                return Err(Error::Integrity(format!("duplicate service id {}", s.id)));
            }
        }
        let mut mashup_index = HashMap::with_capacity(mashups.len());
        for (i, m) in mashups.iter().enumerate() {
            if m.description.is_empty() {
                return Err(Error::Integrity(format!("mashup {} has no description", m.id)));
            }
            let distinct: BTreeSet<usize> = m.components.iter().copied().collect();
            if distinct.len() != m.components.len() {
                return Err(Error::Integrity(format!("mashup {} repeats a component", m.id)));
            }
            if m.components.len() < 2 {
                return Err(Error::Integrity(format!(
                    "mashup {} has fewer than two components",
                    m.id
                )));
            }
            if let Some(bad) = m.components.iter().find(|&&c| c >= services.len()) {
                return Err(Error::Integrity(format!(
                    "mashup {} references service index {bad}",
                    m.id
                )));
            }
            if mashup_index.insert(m.id.clone(), i).is_some() {
                return Err(Error::Integrity(format!("duplicate mashup id {}", m.id)));
            }
        }
        Ok(Self {
            services,
            mashups,
            service_index,
            mashup_index,
        })
    }

    pub fn empty() -> Self {
        Self::new(Vec::new(), Vec::new()).expect("empty repository is valid")
    }

    pub fn services(&self) -> &[Service] {
        &self.services
    }

    pub fn mashups(&self) -> &[Mashup] {
        &self.mashups
    }

    pub fn service(&self, idx: usize) -> &Service {
        &self.services[idx]
    }

    pub fn mashup(&self, idx: usize) -> &Mashup {
        &self.mashups[idx]
    }

    pub fn n_services(&self) -> usize {
        self.services.len()
    }

    pub fn n_mashups(&self) -> usize {
        self.mashups.len()
    }

    pub fn service_idx(&self, id: &str) -> Option<usize> {
        self.service_index.get(id).copied()
    }

    pub fn mashup_idx(&self, id: &str) -> Option<usize> {
        self.mashup_index.get(id).copied()
    }

    pub fn is_empty(&self) -> bool {
        self.mashups.is_empty() && self.services.is_empty()
    }
}

/// Sparse binary mashup x service matrix; an entry is one exactly when the
/// service is a component of the mashup.
#[derive(Debug, Clone, PartialEq)]
pub struct InvocationMatrix {
    n_services: usize,
    rows: Vec<Vec<usize>>,
}

impl InvocationMatrix {
    /// Matrix restricted to the given mashups; rows of all other mashups are
    /// empty. Used to keep held-out invocations out of training structures.
    pub fn for_mashups(repo: &Repository, mashups: &[usize]) -> Self {
        let mut rows = vec![Vec::new(); repo.n_mashups()];
        for &m in mashups {
            let mut row = repo.mashup(m).components.clone();
            row.sort_unstable();
            rows[m] = row;
        }
        Self {
            n_services: repo.n_services(),
            rows,
        }
    }

    pub fn get(&self, mashup: usize, service: usize) -> bool {
        self.rows
            .get(mashup)
            .is_some_and(|r| r.binary_search(&service).is_ok())
    }

    /// Sorted component indices of one mashup.
    pub fn row(&self, mashup: usize) -> &[usize] {
        &self.rows[mashup]
    }

    pub fn n_mashups(&self) -> usize {
        self.rows.len()
    }

    pub fn n_services(&self) -> usize {
        self.n_services
    }

    pub fn ones(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn density(&self) -> f64 {
        let cells = self.rows.len() * self.n_services;
        if cells == 0 {
            0.0
        } else {
            self.ones() as f64 / cells as f64
        }
    }

    /// All `(mashup, service)` one-entries in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(m, row)| row.iter().map(move |&s| (m, s)))
    }
}

pub fn build_invocation_matrix(repo: &Repository) -> InvocationMatrix {
    let all: Vec<usize> = (0..repo.n_mashups()).collect();
    InvocationMatrix::for_mashups(repo, &all)
}
