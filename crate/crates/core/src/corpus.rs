//! Corpus data model: item catalog, dialogues, turns and episode segmentation.
//!
//! Corpus and catalog files are line-delimited JSON. Item identifiers are
//! opaque strings; numeric identifiers in input files are accepted and kept
//! in their decimal form.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};

pub type ItemId = String;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItemCatalog {
    items: BTreeMap<ItemId, String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CatalogRecord {
    #[serde(deserialize_with = "id_string")]
    item_id: String,
    name: String,
}

impl ItemCatalog {
    pub fn new<I, K, V>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        let mut items = BTreeMap::new();
        for (id, name) in entries {
            let id = id.into();
            if id.is_empty() {
                return Err(Error::InvalidCatalog("empty item id".into()));
            }
            if items.insert(id.clone(), name.into()).is_some() {
                return Err(Error::InvalidCatalog(format!("duplicate item id `{id}`")));
            }
        }
        if items.is_empty() {
            return Err(Error::EmptyCatalog);
        }
        Ok(Self { items })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut entries = Vec::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: CatalogRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: n + 1,
                message: e.to_string(),
            })?;
            entries.push((rec.item_id, rec.name));
        }
        Self::new(entries)
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (id, name) in &self.items {
            let rec = CatalogRecord {
                item_id: id.clone(),
                name: name.clone(),
            };
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.items.contains_key(id)
    }

    pub fn name(&self, id: &str) -> Option<&str> {
        self.items.get(id).map(String::as_str)
    }

    /// Item ids in sorted order.
    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.items.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.items.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    Seeker,
    Recommender,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    #[default]
    Original,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: Speaker,
    pub text: String,
    #[serde(rename = "items", default, deserialize_with = "id_strings")]
    pub mentioned_item_ids: Vec<ItemId>,
    #[serde(rename = "targets", default, deserialize_with = "id_strings")]
    pub target_item_ids: Vec<ItemId>,
}

impl Turn {
    pub fn new(speaker: Speaker, text: impl Into<String>) -> Self {
        Self {
            speaker,
            text: text.into(),
            mentioned_item_ids: Vec::new(),
            target_item_ids: Vec::new(),
        }
    }

    pub fn with_items<S: Into<String>>(mut self, items: impl IntoIterator<Item = S>) -> Self {
        self.mentioned_item_ids = items.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_targets<S: Into<String>>(mut self, items: impl IntoIterator<Item = S>) -> Self {
        self.target_item_ids = items.into_iter().map(Into::into).collect();
        self
    }

    /// Distinct items touched by this turn, mentions and targets together.
    pub fn items(&self) -> BTreeSet<&str> {
        self.mentioned_item_ids
            .iter()
            .chain(&self.target_item_ids)
            .map(String::as_str)
            .collect()
    }

    pub fn has_targets(&self) -> bool {
        !self.target_item_ids.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dialogue {
    pub dialogue_id: String,
    pub split: Split,
    pub turns: Vec<Turn>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub episodes: Option<Vec<usize>>,
    #[serde(default)]
    pub provenance: Provenance,
}

impl Dialogue {
    pub fn new(id: impl Into<String>, split: Split, turns: Vec<Turn>) -> Self {
        Self {
            dialogue_id: id.into(),
            split,
            turns,
            episodes: None,
            provenance: Provenance::Original,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |reason: String| Error::InvalidDialogue {
            id: self.dialogue_id.clone(),
            reason,
        };
        if self.dialogue_id.is_empty() {
            return Err(invalid("empty dialogue id".into()));
        }
        if self.turns.is_empty() {
            return Err(invalid("dialogue has no turns".into()));
        }
        if let Some(eps) = &self.episodes {
            if eps.len() != self.turns.len() {
                return Err(invalid(format!(
                    "{} episode indices for {} turns",
                    eps.len(),
                    self.turns.len()
                )));
            }
            if eps[0] != 0 {
                return Err(invalid("episode indices must start at 0".into()));
            }
            if let Some(w) = eps.windows(2).find(|w| w[1] != w[0] && w[1] != w[0] + 1) {
                return Err(invalid(format!(
                    "episode index jumps from {} to {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(())
    }

    /// Distinct items mentioned or targeted anywhere in the dialogue.
    pub fn items(&self) -> BTreeSet<&str> {
        self.turns.iter().flat_map(Turn::items).collect()
    }

    pub fn episode_of(&self, turn_index: usize) -> Option<usize> {
        self.episodes.as_ref().and_then(|e| e.get(turn_index).copied())
    }

    pub fn episode_count(&self) -> Option<usize> {
        self.episodes.as_ref().and_then(|e| e.last()).map(|&e| e + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodePolicy {
    Explicit,
    #[default]
    AcceptBoundary,
}

impl FromStr for EpisodePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "explicit" => Ok(Self::Explicit),
            "accept_boundary" => Ok(Self::AcceptBoundary),
            other => Err(Error::InvalidArgument(format!("unknown episode policy `{other}`"))),
        }
    }
}

/// Episode index per turn: a new episode opens on the turn after any turn
/// that carries target items.
pub fn accept_boundary_indices(turns: &[Turn]) -> Vec<usize> {
    let mut out = Vec::with_capacity(turns.len());
    let mut episode = 0;
    let mut open_next = false;
    for turn in turns {
        if open_next {
            episode += 1;
        }
        out.push(episode);
        open_next = turn.has_targets();
    }
    out
}

pub fn segment_episodes(dialogue: &Dialogue, policy: EpisodePolicy) -> Result<Dialogue> {
    let mut out = dialogue.clone();
    match policy {
        EpisodePolicy::Explicit => {
            if dialogue.episodes.is_none() {
                return Err(Error::MissingEpisodes(dialogue.dialogue_id.clone()));
            }
        }
        EpisodePolicy::AcceptBoundary => {
            out.episodes = Some(accept_boundary_indices(&dialogue.turns));
        }
    }
    out.validate()?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    catalog: ItemCatalog,
    dialogues: Vec<Dialogue>,
    index: HashMap<String, usize>,
}

impl Corpus {
    pub fn new(catalog: ItemCatalog, dialogues: Vec<Dialogue>) -> Result<Self> {
        let mut index = HashMap::with_capacity(dialogues.len());
        for (i, d) in dialogues.iter().enumerate() {
            d.validate()?;
            if index.insert(d.dialogue_id.clone(), i).is_some() {
                return Err(Error::DuplicateDialogue(d.dialogue_id.clone()));
            }
        }
        Ok(Self {
            catalog,
            dialogues,
            index,
        })
    }

    pub fn catalog(&self) -> &ItemCatalog {
        &self.catalog
    }

    pub fn dialogues(&self) -> &[Dialogue] {
        &self.dialogues
    }

    pub fn into_parts(self) -> (ItemCatalog, Vec<Dialogue>) {
        (self.catalog, self.dialogues)
    }

    pub fn len(&self) -> usize {
        self.dialogues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dialogues.is_empty()
    }

    pub fn dialogue(&self, id: &str) -> Option<&Dialogue> {
        self.index.get(id).map(|&i| &self.dialogues[i])
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &Dialogue> {
        self.dialogues.iter().filter(move |d| d.split == split)
    }

    pub fn train(&self) -> impl Iterator<Item = &Dialogue> {
        self.split(Split::Train)
    }

    pub fn count(&self, split: Split) -> usize {
        self.split(split).count()
    }

    /// Returns a copy with every dialogue segmented under `policy`.
    pub fn segment(&self, policy: EpisodePolicy) -> Result<Corpus> {
        let dialogues = self
            .dialogues
            .iter()
            .map(|d| segment_episodes(d, policy))
            .collect::<Result<Vec<_>>>()?;
        Corpus::new(self.catalog.clone(), dialogues)
    }

    /// Mentions and targets that do not resolve against the catalog, counted
    /// once per turn.
    pub fn unknown_mentions(&self) -> Vec<UnknownMention> {
        let mut out = Vec::new();
        for d in &self.dialogues {
            for (t, turn) in d.turns.iter().enumerate() {
                for item in turn.items() {
                    if !self.catalog.contains(item) {
                        out.push(UnknownMention {
                            dialogue_id: d.dialogue_id.clone(),
                            turn_index: t,
                            item_id: item.to_string(),
                        });
                    }
                }
            }
        }
        out
    }

    pub fn summary(&self) -> LoadSummary {
        let unknown = self.unknown_mentions();
        LoadSummary {
            dialogues: self.len(),
            train: self.count(Split::Train),
            valid: self.count(Split::Valid),
            test: self.count(Split::Test),
            synthetic: self
                .dialogues
                .iter()
                .filter(|d| d.provenance == Provenance::Synthetic)
                .count(),
            catalog_items: self.catalog.len(),
            unknown_mentions: unknown.len(),
            unknown_item_ids: unknown.into_iter().map(|u| u.item_id).collect(),
        }
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for d in &self.dialogues {
            serde_json::to_writer(&mut w, d)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_jsonl(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UnknownMention {
    pub dialogue_id: String,
    pub turn_index: usize,
    pub item_id: ItemId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LoadSummary {
    pub dialogues: usize,
    pub train: usize,
    pub valid: usize,
    pub test: usize,
    pub synthetic: usize,
    pub catalog_items: usize,
    pub unknown_mentions: usize,
    pub unknown_item_ids: BTreeSet<ItemId>,
}

/// Reads line-delimited dialogue records. `label` names the source in errors.
pub fn read_dialogues<R: BufRead>(reader: R, label: &Path) -> Result<Vec<Dialogue>> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(label, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let d: Dialogue = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: label.to_path_buf(),
            line: n + 1,
            message: e.to_string(),
        })?;
        out.push(d);
    }
    Ok(out)
}

pub fn load_dialogues(path: impl AsRef<Path>) -> Result<Vec<Dialogue>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_dialogues(BufReader::new(file), path)
}

pub fn load_corpus(
    corpus_path: impl AsRef<Path>,
    catalog_path: impl AsRef<Path>,
) -> Result<(Corpus, LoadSummary)> {
    let catalog = ItemCatalog::load(catalog_path)?;
    let dialogues = load_dialogues(corpus_path)?;
    let corpus = Corpus::new(catalog, dialogues)?;
    let summary = corpus.summary();
    if summary.unknown_mentions > 0 {
        log::warn!(
            "{} mention(s) of {} item id(s) absent from the catalog",
            summary.unknown_mentions,
            summary.unknown_item_ids.len()
        );
    }
    Ok((corpus, summary))
}

/// `@<item_id>` tokens in an utterance, in order of appearance.
pub fn mention_tokens(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(pos) = rest.find('@') {
        let tail = &rest[pos + 1..];
        let end = tail
            .find(|c: char| !(c.is_alphanumeric() || c == '_' || c == '-'))
            .unwrap_or(tail.len());
        if end > 0 {
            out.push(&tail[..end]);
        }
        rest = &tail[end..];
    }
    out
}

#[derive(Deserialize)]
#[serde(untagged)]
enum IdRepr {
    Str(String),
    Int(i64),
}

impl From<IdRepr> for String {
    fn from(r: IdRepr) -> Self {
        match r {
            IdRepr::Str(s) => s,
            IdRepr::Int(i) => i.to_string(),
        }
    }
}

fn id_string<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<String, D::Error> {
    IdRepr::deserialize(d).map(Into::into)
}

fn id_strings<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<String>, D::Error> {
    Vec::<IdRepr>::deserialize(d).map(|v| v.into_iter().map(Into::into).collect())
}
