//! Synthetic recommendation dialogues: prompt templates, generation
//! backends, parsing into the corpus schema, and pool construction.

pub mod backend;
pub mod parse;
pub mod template;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use backend::{
    BackendError, DialogueGenerator, GenerationBackend, HttpChatBackend, HttpChatConfig, OfflineBackend, RetryPolicy,
    TOKEN_ENV,
};
pub use parse::{parse_generated, Rejection};
pub use template::{render_prompt, ItemRef, Language, PromptTemplate};

use crate::augment::sampling::{derive_seed, stable_hash};
use crate::augment::SyntheticPool;
use crate::corpus::{Dialogue, ItemCatalog};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolOptions {
    /// Generation attempts per item before it is skipped.
    pub max_attempts: u32,
    /// Upper bound on concurrent backend requests.
    pub concurrency: usize,
    pub id_prefix: String,
}

impl Default for PoolOptions {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            concurrency: 4,
            id_prefix: "syn-".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenerationStatus {
    Accepted,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationLogEntry {
    pub item_id: String,
    pub attempts: u32,
    pub status: GenerationStatus,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rejections: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoolBuild {
    pub pool: SyntheticPool,
    pub log: Vec<GenerationLogEntry>,
}

impl PoolBuild {
    pub fn skipped(&self) -> usize {
        self.log
            .iter()
            .filter(|e| e.status == GenerationStatus::Skipped)
            .count()
    }
}

/// Resolves item ids against the catalog.
pub fn items_from_catalog<S: AsRef<str>>(catalog: &ItemCatalog, ids: &[S]) -> Result<Vec<ItemRef>> {
    ids.iter()
        .map(|id| {
            let id = id.as_ref();
            catalog
                .name(id)
                .map(|name| ItemRef::new(id, name))
                .ok_or_else(|| Error::InvalidArgument(format!("item `{id}` is not in the catalog")))
        })
        .collect()
}

fn generate_one(
    backend: &dyn DialogueGenerator,
    template: &PromptTemplate,
    item: &ItemRef,
    seed: u64,
    options: &PoolOptions,
) -> std::result::Result<(Option<Dialogue>, GenerationLogEntry), BackendError> {
    let id = format!("{}{}", options.id_prefix, item.id);
    let mut rejections = Vec::new();
    for attempt in 0..options.max_attempts {
        let s = derive_seed(seed, &[stable_hash(&item.id), attempt as u64]);
        let raw = backend.generate(template, item, s)?;
        match parse_generated(&raw, item, &id) {
            Ok(d) => {
                return Ok((
                    Some(d),
                    GenerationLogEntry {
                        item_id: item.id.clone(),
                        attempts: attempt + 1,
                        status: GenerationStatus::Accepted,
                        rejections,
                    },
                ))
            }
            Err(r) => rejections.push(r.to_string()),
        }
    }
    log::warn!(
        "skipping item `{}` after {} rejected generation(s)",
        item.id,
        options.max_attempts
    );
    Ok((
        None,
        GenerationLogEntry {
            item_id: item.id.clone(),
            attempts: options.max_attempts,
            status: GenerationStatus::Skipped,
            rejections,
        },
    ))
}

/// Generates one accepted dialogue per item, retrying parser rejections up
/// to `options.max_attempts` times. Pool order follows `items` regardless of
/// completion order. Backend errors abort the build. When `output` is given
/// the pool is written there in the corpus schema.
pub fn build_pool(
    backend: &dyn DialogueGenerator,
    template: &PromptTemplate,
    items: &[ItemRef],
    seed: u64,
    options: &PoolOptions,
    output: Option<&Path>,
) -> Result<PoolBuild> {
    template.validate()?;
    if options.max_attempts == 0 {
        return Err(Error::InvalidArgument("max_attempts must be at least 1".into()));
    }
    let run = |item: &ItemRef| generate_one(backend, template, item, seed, options);

    #[cfg(feature = "parallel")]
    let results: Vec<_> = {
        use rayon::prelude::*;
        let workers = rayon::ThreadPoolBuilder::new()
            .num_threads(options.concurrency.max(1))
            .build()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        workers.install(|| items.par_iter().map(run).collect())
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<_> = items.iter().map(run).collect();

    let mut dialogues = Vec::new();
    let mut log = Vec::with_capacity(items.len());
    for r in results {
        let (d, entry) = r?;
        dialogues.extend(d);
        log.push(entry);
    }
    if dialogues.is_empty() {
        return Err(Error::NoDialoguesAccepted(items.len()));
    }
    let pool = SyntheticPool::new(dialogues)?;
    if let Some(path) = output {
        pool.save(path)?;
    }
    Ok(PoolBuild { pool, log })
}
