//! Item frequency, normalised popularity and the popular-item set.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, ItemCatalog, ItemId};
use crate::error::{Error, Result};

/// Decides which items count as popular.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThresholdPolicy {
    /// Popular when the training frequency is strictly greater than `min_count`.
    CountThreshold { min_count: u64 },
    /// The top `top_fraction` of the catalog by frequency. Items tied with
    /// the boundary frequency are all included; never-seen items never are.
    Quantile { top_fraction: f64 },
}

impl Default for ThresholdPolicy {
    fn default() -> Self {
        ThresholdPolicy::CountThreshold { min_count: 5 }
    }
}

impl ThresholdPolicy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ThresholdPolicy::CountThreshold { min_count } if min_count < 1 => Err(
                Error::InvalidPolicy(format!("min_count must be >= 1, got {min_count}")),
            ),
            ThresholdPolicy::Quantile { top_fraction }
                if !(top_fraction > 0.0 && top_fraction <= 1.0) =>
            {
                Err(Error::InvalidPolicy(format!(
                    "top_fraction must lie in (0, 1], got {top_fraction}"
                )))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PopularityTable {
    freq: BTreeMap<ItemId, u64>,
    pop: HashMap<ItemId, f64>,
    popular: BTreeSet<ItemId>,
    policy: ThresholdPolicy,
    max_freq: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopularityRecord {
    pub item_id: ItemId,
    pub freq: u64,
    pub pop: f64,
    pub is_popular: bool,
}

/// Training-split frequency of every catalog item. Each item counts at most
/// once per turn, whether it appears as a mention, a target, or both.
pub fn item_frequencies(corpus: &Corpus) -> BTreeMap<ItemId, u64> {
    let catalog = corpus.catalog();
    let mut freq: BTreeMap<ItemId, u64> = catalog.ids().map(|id| (id.to_string(), 0)).collect();
    for d in corpus.train() {
        for turn in &d.turns {
            for item in turn.items() {
                if let Some(c) = freq.get_mut(item) {
                    *c += 1;
                }
            }
        }
    }
    freq
}

pub fn build_popularity(corpus: &Corpus, policy: ThresholdPolicy) -> Result<PopularityTable> {
    PopularityTable::from_frequencies(item_frequencies(corpus), policy)
}

impl PopularityTable {
    /// Builds a table from per-item counts. Every catalog item must be present
    /// in `freq`, zero counts included.
    pub fn from_frequencies(freq: BTreeMap<ItemId, u64>, policy: ThresholdPolicy) -> Result<Self> {
        policy.validate()?;
        let max_freq = freq.values().copied().max().unwrap_or(0);
        let pop = freq
            .iter()
            .map(|(id, &f)| {
                let p = if max_freq == 0 {
                    0.0
                } else {
                    f as f64 / max_freq as f64
                };
                (id.clone(), p)
            })
            .collect();
        let popular = match policy {
            ThresholdPolicy::CountThreshold { min_count } => freq
                .iter()
                .filter(|(_, &f)| f > min_count)
                .map(|(id, _)| id.clone())
                .collect(),
            ThresholdPolicy::Quantile { top_fraction } => {
                let mut counts: Vec<u64> = freq.values().copied().collect();
                counts.sort_unstable_by(|a, b| b.cmp(a));
                let n_top = ((top_fraction * counts.len() as f64) - 1e-9).ceil().max(1.0) as usize;
                let boundary = counts.get(n_top.min(counts.len()).saturating_sub(1)).copied();
                match boundary {
                    Some(b) => freq
                        .iter()
                        .filter(|(_, &f)| f > 0 && f >= b)
                        .map(|(id, _)| id.clone())
                        .collect(),
                    None => BTreeSet::new(),
                }
            }
        };
        Ok(Self {
            freq,
            pop,
            popular,
            policy,
            max_freq,
        })
    }

    /// Normalised popularity in [0, 1]; 0 for items never seen in training
    /// or absent from the catalog.
    pub fn pop(&self, item: &str) -> f64 {
        self.pop.get(item).copied().unwrap_or(0.0)
    }

    pub fn freq(&self, item: &str) -> u64 {
        self.freq.get(item).copied().unwrap_or(0)
    }

    pub fn is_popular(&self, item: &str) -> bool {
        self.popular.contains(item)
    }

    pub fn popular_set(&self) -> &BTreeSet<ItemId> {
        &self.popular
    }

    pub fn frequencies(&self) -> &BTreeMap<ItemId, u64> {
        &self.freq
    }

    pub fn policy(&self) -> ThresholdPolicy {
        self.policy
    }

    pub fn max_freq(&self) -> u64 {
        self.max_freq
    }

    pub fn records(&self) -> Vec<PopularityRecord> {
        self.freq
            .iter()
            .map(|(id, &freq)| PopularityRecord {
                item_id: id.clone(),
                freq,
                pop: self.pop(id),
                is_popular: self.is_popular(id),
            })
            .collect()
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for rec in self.records() {
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Share of the catalog that lands in the popular set.
pub fn popular_item_ratio(table: &PopularityTable, catalog: &ItemCatalog) -> f64 {
    let n = table
        .popular_set()
        .iter()
        .filter(|id| catalog.contains(id))
        .count();
    n as f64 / catalog.len() as f64
}
