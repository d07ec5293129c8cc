use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::ItemId;
use crate::error::{Error, Result};

pub const DEFAULT_CUTOFFS: [usize; 2] = [10, 50];

/// One evaluated turn: the model's ranked list and the ground-truth targets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunEntry {
    pub dialogue_id: String,
    pub turn_index: usize,
    pub episode_index: usize,
    #[serde(rename = "ranked")]
    pub ranked_item_ids: Vec<ItemId>,
    #[serde(rename = "targets", default)]
    pub target_item_ids: Vec<ItemId>,
}

impl RunEntry {
    pub fn new<S: Into<String>, T: Into<String>>(
        dialogue_id: impl Into<String>,
        turn_index: usize,
        episode_index: usize,
        ranked: impl IntoIterator<Item = S>,
        targets: impl IntoIterator<Item = T>,
    ) -> Self {
        Self {
            dialogue_id: dialogue_id.into(),
            turn_index,
            episode_index,
            ranked_item_ids: ranked.into_iter().map(Into::into).collect(),
            target_item_ids: targets.into_iter().map(Into::into).collect(),
        }
    }

    /// Targets with duplicates removed, first occurrence order kept.
    pub fn distinct_targets(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.target_item_ids
            .iter()
            .map(String::as_str)
            .filter(|t| seen.insert(*t))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedRun {
    pub model_name: String,
    pub entries: Vec<RunEntry>,
    pub cutoffs: Vec<usize>,
}

impl RankedRun {
    pub fn new(model_name: impl Into<String>, entries: Vec<RunEntry>) -> Self {
        Self {
            model_name: model_name.into(),
            entries,
            cutoffs: DEFAULT_CUTOFFS.to_vec(),
        }
    }

    pub fn with_cutoffs(mut self, cutoffs: Vec<usize>) -> Self {
        self.cutoffs = cutoffs;
        self
    }

    /// Checks cutoffs and that no ranked list repeats an item.
    pub fn validate(&self) -> Result<()> {
        if self.cutoffs.is_empty() || self.cutoffs.contains(&0) {
            return Err(Error::InvalidRun(format!(
                "cutoffs must be positive, got {:?}",
                self.cutoffs
            )));
        }
        for e in &self.entries {
            let mut seen = HashSet::with_capacity(e.ranked_item_ids.len());
            if let Some(dup) = e.ranked_item_ids.iter().find(|i| !seen.insert(i.as_str())) {
                return Err(Error::InvalidRun(format!(
                    "{}#{}: item `{dup}` ranked twice",
                    e.dialogue_id, e.turn_index
                )));
            }
        }
        Ok(())
    }

    /// Loads a run file; the model name defaults to the file stem.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut entries = Vec::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            entries.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: n + 1,
                message: e.to_string(),
            })?);
        }
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "run".into());
        let run = RankedRun::new(name, entries);
        run.validate()?;
        Ok(run)
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for e in &self.entries {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}
