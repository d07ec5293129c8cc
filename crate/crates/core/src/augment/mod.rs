//! Training-corpus augmentation with synthetic single-item dialogues.

pub mod longtail;
pub mod plan;
pub mod sampling;

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use sha2::{Digest, Sha256};

pub use longtail::{longtail_report, LongtailReport};
pub use plan::{
    flat_corpus, materialize, pop_nudge, AnchorRecord, AugmentationPlan, MaterializeMode, Materialized,
    MaterializedBatch, PlanBatch, PlanHeader, PlanStats, PopNudgeParams, Strategy,
};
pub use sampling::{derive_seed, stream_rng, weighted_sample_without_replacement};

use crate::corpus::{load_dialogues, Corpus, Dialogue, ItemId, Provenance, Split};
use crate::error::{Error, Result};

/// Generated dialogues, each recommending exactly one item.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPool {
    dialogues: Vec<Dialogue>,
    item_of: HashMap<String, ItemId>,
    index: HashMap<String, usize>,
}

impl SyntheticPool {
    pub fn new(dialogues: Vec<Dialogue>) -> Result<Self> {
        let mut item_of = HashMap::with_capacity(dialogues.len());
        let mut index = HashMap::with_capacity(dialogues.len());
        let mut out = Vec::with_capacity(dialogues.len());
        for (i, mut d) in dialogues.into_iter().enumerate() {
            d.validate()?;
            let items: BTreeSet<&str> = d.items();
            if items.len() != 1 {
                return Err(Error::InvalidPool(format!(
                    "dialogue `{}` recommends {} distinct items, expected 1",
                    d.dialogue_id,
                    items.len()
                )));
            }
            let item = items.into_iter().next().unwrap_or_default().to_string();
            if index.insert(d.dialogue_id.clone(), i).is_some() {
                return Err(Error::DuplicateDialogue(d.dialogue_id));
            }
            item_of.insert(d.dialogue_id.clone(), item);
            d.split = Split::Train;
            d.provenance = Provenance::Synthetic;
            out.push(d);
        }
        Ok(Self {
            dialogues: out,
            item_of,
            index,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::new(load_dialogues(path)?)
    }

    pub fn dialogues(&self) -> &[Dialogue] {
        &self.dialogues
    }

    pub fn get(&self, id: &str) -> Option<&Dialogue> {
        self.index.get(id).map(|&i| &self.dialogues[i])
    }

    pub fn item_of(&self, id: &str) -> Option<&str> {
        self.item_of.get(id).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.dialogues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dialogues.is_empty()
    }

    pub fn write_jsonl<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        for d in &self.dialogues {
            serde_json::to_writer(&mut w, d)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).map_err(|e| Error::io(path, e))?;
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    /// SHA-256 over the pool's corpus-schema serialisation.
    pub fn digest(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to a Vec cannot fail");
        hex::encode(Sha256::digest(&buf))
    }
}

/// Adds every synthetic dialogue to the training split once. Validation and
/// test dialogues are left untouched.
pub fn once_aug(train: &Corpus, pool: &SyntheticPool) -> Result<Corpus> {
    let (catalog, mut dialogues) = train.clone().into_parts();
    dialogues.extend(pool.dialogues().iter().cloned());
    Corpus::new(catalog, dialogues)
}
