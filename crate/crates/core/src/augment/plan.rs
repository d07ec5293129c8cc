//! PopNudge planning: per-batch appendages of less-popular synthetic
//! dialogues, and materialisation of a plan into training data.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::sampling::{stream_rng, weighted_sample_without_replacement};
use super::SyntheticPool;
use crate::corpus::{Corpus, Dialogue};
use crate::error::{Error, Result};
use crate::par::Exec;
use crate::popularity::PopularityTable;

const SHUFFLE_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    OnceAug,
    PopNudge,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::OnceAug => "once_aug",
            Strategy::PopNudge => "pop_nudge",
        })
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "once_aug" => Ok(Strategy::OnceAug),
            "pop_nudge" => Ok(Strategy::PopNudge),
            other => Err(Error::InvalidArgument(format!("unknown strategy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorRecord {
    pub dialogue_id: String,
    /// Highest popularity among the anchor's items; 0 when it mentions none.
    pub anchor_pop: f64,
    /// Pool dialogues no more popular than the anchor.
    pub candidates: usize,
    pub appended: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanBatch {
    pub index: usize,
    pub anchors: Vec<AnchorRecord>,
    /// Union of the anchors' appendages, first occurrence order.
    pub appended: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanHeader {
    pub seed: u64,
    pub k: usize,
    pub batch_size: usize,
    pub strategy: Strategy,
    pub pool_digest: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentationPlan {
    pub header: PlanHeader,
    pub batches: Vec<PlanBatch>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PopNudgeParams {
    pub k: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub exec: Exec,
}

impl PopNudgeParams {
    pub fn new(k: usize, batch_size: usize, seed: u64) -> Self {
        Self {
            k,
            batch_size,
            seed,
            exec: Exec::default(),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum PlanLine {
    Header(PlanHeader),
    Batch(PlanBatch),
}

/// Summary counts over a plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct PlanStats {
    pub batches: usize,
    pub anchors: usize,
    /// Anchors whose retained candidate set was empty.
    pub anchors_without_candidates: usize,
    /// Anchors with fewer candidates than `k`; all of them were taken.
    pub anchors_short_of_k: usize,
    /// Appendages summed over batches after per-batch deduplication.
    pub appended_total: usize,
    pub distinct_appended: usize,
}

fn anchor_popularity(d: &Dialogue, table: &PopularityTable) -> f64 {
    d.items().into_iter().map(|i| table.pop(i)).fold(0.0, f64::max)
}

fn pool_item_pop(pool: &SyntheticPool, id: &str, table: &PopularityTable) -> f64 {
    pool.item_of(id).map_or(0.0, |i| table.pop(i))
}

/// Plans one pass of PopNudge over the training split.
///
/// Training dialogues are shuffled with `seed` and cut into batches. For each
/// anchor, pool dialogues whose item is more popular than the anchor are
/// dropped and `k` of the rest are drawn without replacement, weighted by item
/// popularity. Each anchor's draws come from a stream derived from
/// `(seed, batch, position)`, so serial and parallel planning agree.
pub fn pop_nudge(
    train: &Corpus,
    pool: &SyntheticPool,
    table: &PopularityTable,
    params: PopNudgeParams,
) -> Result<AugmentationPlan> {
    if pool.is_empty() {
        return Err(Error::EmptyPool);
    }
    if params.k == 0 || params.batch_size == 0 {
        return Err(Error::InvalidArgument("k and batch_size must be at least 1".into()));
    }

    let mut order: Vec<&Dialogue> = train.train().collect();
    order.shuffle(&mut stream_rng(params.seed, &[SHUFFLE_STREAM]));

    // Pool ordered by item popularity so each candidate set is a prefix.
    let mut by_pop: Vec<(f64, usize)> = pool
        .dialogues()
        .iter()
        .enumerate()
        .map(|(i, d)| (pool_item_pop(pool, &d.dialogue_id, table), i))
        .collect();
    by_pop.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let sorted_idx: Vec<usize> = by_pop.iter().map(|&(_, i)| i).collect();
    let weights: Vec<f64> = by_pop.iter().map(|&(p, _)| p).collect();

    let chunks: Vec<&[&Dialogue]> = order.chunks(params.batch_size).collect();
    let batches = params.exec.map(&chunks, |b, chunk| -> Result<PlanBatch> {
        let mut anchors = Vec::with_capacity(chunk.len());
        let mut seen = HashSet::new();
        let mut appended = Vec::new();
        for (p, d) in chunk.iter().enumerate() {
            let anchor_pop = anchor_popularity(d, table);
            let n = by_pop.partition_point(|&(pop, _)| pop <= anchor_pop);
            let mut rng = stream_rng(params.seed, &[b as u64, p as u64]);
            let picks = weighted_sample_without_replacement(&sorted_idx[..n], &weights[..n], params.k, &mut rng)?;
            let ids: Vec<String> = picks
                .into_iter()
                .map(|i| pool.dialogues()[i].dialogue_id.clone())
                .collect();
            for id in &ids {
                if seen.insert(id.clone()) {
                    appended.push(id.clone());
                }
            }
            anchors.push(AnchorRecord {
                dialogue_id: d.dialogue_id.clone(),
                anchor_pop,
                candidates: n,
                appended: ids,
            });
        }
        Ok(PlanBatch {
            index: b,
            anchors,
            appended,
        })
    });

    let plan = AugmentationPlan {
        header: PlanHeader {
            seed: params.seed,
            k: params.k,
            batch_size: params.batch_size,
            strategy: Strategy::PopNudge,
            pool_digest: pool.digest(),
        },
        batches: batches.into_iter().collect::<Result<Vec<_>>>()?,
    };
    let stats = plan.stats();
    if stats.anchors_without_candidates > 0 || stats.anchors_short_of_k > 0 {
        log::info!(
            "pop_nudge: {} anchor(s) without candidates, {} with fewer than k={} candidates",
            stats.anchors_without_candidates,
            stats.anchors_short_of_k,
            params.k
        );
    }
    Ok(plan)
}

impl AugmentationPlan {
    /// The Once-Aug schedule as a plan: one batch appending the whole pool.
    pub fn once_aug(pool: &SyntheticPool, seed: u64) -> Self {
        AugmentationPlan {
            header: PlanHeader {
                seed,
                k: 0,
                batch_size: 0,
                strategy: Strategy::OnceAug,
                pool_digest: pool.digest(),
            },
            batches: vec![PlanBatch {
                index: 0,
                anchors: Vec::new(),
                appended: pool.dialogues().iter().map(|d| d.dialogue_id.clone()).collect(),
            }],
        }
    }

    pub fn stats(&self) -> PlanStats {
        let mut distinct = HashSet::new();
        let mut s = PlanStats {
            batches: self.batches.len(),
            ..PlanStats::default()
        };
        for b in &self.batches {
            s.anchors += b.anchors.len();
            s.appended_total += b.appended.len();
            distinct.extend(b.appended.iter().map(String::as_str));
            for a in &b.anchors {
                if a.candidates == 0 {
                    s.anchors_without_candidates += 1;
                } else if a.candidates < self.header.k {
                    s.anchors_short_of_k += 1;
                }
            }
        }
        s.distinct_appended = distinct.len();
        s
    }

    /// Distinct appended synthetic ids in first-appearance order.
    pub fn distinct_appended(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.batches
            .iter()
            .flat_map(|b| b.appended.iter())
            .map(String::as_str)
            .filter(|id| seen.insert(*id))
            .collect()
    }

    /// Re-checks the plan against its inputs: every appended dialogue exists,
    /// none is more popular than its anchor, at most `k` per anchor, and batch
    /// unions match their anchors.
    pub fn verify(&self, train: &Corpus, pool: &SyntheticPool, table: &PopularityTable) -> Result<()> {
        let violation = |m: String| Err(Error::PlanInvariant(m));
        for b in &self.batches {
            let mut union = Vec::new();
            let mut seen = HashSet::new();
            for a in &b.anchors {
                let anchor = train
                    .dialogue(&a.dialogue_id)
                    .ok_or_else(|| Error::UnknownPlanDialogue(a.dialogue_id.clone()))?;
                let anchor_pop = anchor_popularity(anchor, table);
                if self.header.strategy == Strategy::PopNudge && a.appended.len() > self.header.k {
                    return violation(format!("anchor `{}` has {} appendages", a.dialogue_id, a.appended.len()));
                }
                for id in &a.appended {
                    if pool.get(id).is_none() {
                        return Err(Error::UnknownPlanDialogue(id.clone()));
                    }
                    let p = pool_item_pop(pool, id, table);
                    if p > anchor_pop {
                        return violation(format!(
                            "`{id}` (pop {p}) appended to less popular anchor `{}` (pop {anchor_pop})",
                            a.dialogue_id
                        ));
                    }
                    if seen.insert(id.as_str()) {
                        union.push(id.clone());
                    }
                }
            }
            if self.header.strategy == Strategy::PopNudge && union != b.appended {
                return violation(format!("batch {} union does not match its anchors", b.index));
            }
            for id in &b.appended {
                if pool.get(id).is_none() {
                    return Err(Error::UnknownPlanDialogue(id.clone()));
                }
            }
        }
        Ok(())
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        serde_json::to_writer(&mut w, &PlanLine::Header(self.header.clone()))?;
        w.write_all(b"\n")?;
        for b in &self.batches {
            serde_json::to_writer(&mut w, &PlanLine::Batch(b.clone()))?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    /// SHA-256 of the plan file contents.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_bytes()))
    }

    pub fn read_jsonl<R: BufRead>(reader: R, label: &Path) -> Result<Self> {
        let mut header = None;
        let mut batches = Vec::new();
        for (n, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(label, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: PlanLine = serde_json::from_str(&line).map_err(|e| Error::Parse {
                path: label.to_path_buf(),
                line: n + 1,
                message: e.to_string(),
            })?;
            match parsed {
                PlanLine::Header(h) if header.is_none() && batches.is_empty() => header = Some(h),
                PlanLine::Header(_) => {
                    return Err(Error::Parse {
                        path: label.to_path_buf(),
                        line: n + 1,
                        message: "unexpected second header".into(),
                    })
                }
                PlanLine::Batch(b) => batches.push(b),
            }
        }
        let header = header.ok_or_else(|| Error::Parse {
            path: label.to_path_buf(),
            line: 1,
            message: "missing plan header".into(),
        })?;
        Ok(Self { header, batches })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_jsonl(std::io::BufReader::new(file), path)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaterializeMode {
    BatchStream,
    FlatCorpus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaterializedBatch<'a> {
    pub index: usize,
    pub originals: Vec<&'a Dialogue>,
    pub appended: Vec<&'a Dialogue>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Materialized<'a> {
    Batches(Vec<MaterializedBatch<'a>>),
    Corpus(Corpus),
}

pub fn materialize<'a>(
    plan: &AugmentationPlan,
    train: &'a Corpus,
    pool: &'a SyntheticPool,
    mode: MaterializeMode,
) -> Result<Materialized<'a>> {
    let lookup_pool = |id: &str| pool.get(id).ok_or_else(|| Error::UnknownPlanDialogue(id.to_string()));
    match mode {
        MaterializeMode::BatchStream => plan
            .batches
            .iter()
            .map(|b| {
                let originals = b
                    .anchors
                    .iter()
                    .map(|a| {
                        train
                            .dialogue(&a.dialogue_id)
                            .ok_or_else(|| Error::UnknownPlanDialogue(a.dialogue_id.clone()))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let appended = b.appended.iter().map(|id| lookup_pool(id)).collect::<Result<Vec<_>>>()?;
                Ok(MaterializedBatch {
                    index: b.index,
                    originals,
                    appended,
                })
            })
            .collect::<Result<Vec<_>>>()
            .map(Materialized::Batches),
        MaterializeMode::FlatCorpus => {
            for a in plan.batches.iter().flat_map(|b| &b.anchors) {
                if train.dialogue(&a.dialogue_id).is_none() {
                    return Err(Error::UnknownPlanDialogue(a.dialogue_id.clone()));
                }
            }
            let (catalog, mut dialogues) = train.clone().into_parts();
            for id in plan.distinct_appended() {
                dialogues.push(lookup_pool(id)?.clone());
            }
            Corpus::new(catalog, dialogues).map(Materialized::Corpus)
        }
    }
}

/// Flat-corpus materialisation.
pub fn flat_corpus(plan: &AugmentationPlan, train: &Corpus, pool: &SyntheticPool) -> Result<Corpus> {
    match materialize(plan, train, pool, MaterializeMode::FlatCorpus)? {
        Materialized::Corpus(c) => Ok(c),
        Materialized::Batches(_) => unreachable!("flat mode yields a corpus"),
    }
}
