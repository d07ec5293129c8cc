use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::bias::{cep, popularity_coverage, ranking_utility, uiop};
use super::rank::rank_metrics;
use super::run::{RankedRun, RunEntry};
use super::{LogBase, Skip};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::par::{compensated_sum, Exec};
use crate::popularity::PopularityTable;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EvalConfig {
    pub log_base: LogBase,
    pub exec: Exec,
}

/// Aggregate of one metric over the evaluated entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: String,
    /// Absent when no entry was eligible.
    pub mean: Option<f64>,
    /// Population standard deviation.
    pub std: Option<f64>,
    pub n: usize,
    pub n_skipped: usize,
    pub skip_reasons: BTreeMap<String, usize>,
}

impl MetricSummary {
    fn from_values(metric: String, values: &[Result<f64, Skip>]) -> Self {
        let ok: Vec<f64> = values.iter().filter_map(|v| v.as_ref().ok().copied()).collect();
        let mut skip_reasons = BTreeMap::new();
        for v in values {
            if let Err(s) = v {
                *skip_reasons.entry(s.as_str().to_string()).or_insert(0) += 1;
            }
        }
        let n = ok.len();
        let (mean, std) = if n == 0 {
            (None, None)
        } else {
            let mean = compensated_sum(ok.iter().copied()) / n as f64;
            let var = compensated_sum(ok.iter().map(|x| (x - mean) * (x - mean))) / n as f64;
            (Some(mean), Some(var.sqrt()))
        };
        MetricSummary {
            metric,
            mean,
            std,
            n,
            n_skipped: values.len() - n,
            skip_reasons,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub model_name: String,
    pub entries: usize,
    pub metrics: Vec<MetricSummary>,
}

/// Flat record form used for the machine-readable report file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub model: String,
    #[serde(flatten)]
    pub summary: MetricSummary,
}

impl BiasReport {
    pub fn metric(&self, name: &str) -> Option<&MetricSummary> {
        self.metrics.iter().find(|m| m.metric == name)
    }

    pub fn mean(&self, name: &str) -> Option<f64> {
        self.metric(name).and_then(|m| m.mean)
    }

    pub fn records(&self) -> Vec<ReportRecord> {
        self.metrics
            .iter()
            .map(|m| ReportRecord {
                model: self.model_name.clone(),
                summary: m.clone(),
            })
            .collect()
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for r in self.records() {
            serde_json::to_writer(&mut w, &r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Rebuilds reports from records, grouped by model in first-seen order.
    pub fn from_records(records: Vec<ReportRecord>) -> Vec<BiasReport> {
        let mut out: Vec<BiasReport> = Vec::new();
        for r in records {
            match out.iter_mut().find(|b| b.model_name == r.model) {
                Some(b) => b.metrics.push(r.summary),
                None => out.push(BiasReport {
                    model_name: r.model,
                    entries: r.summary.n + r.summary.n_skipped,
                    metrics: vec![r.summary],
                }),
            }
        }
        out
    }

    /// Aligned text table: one row per metric.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "model: {} ({} entries)", self.model_name, self.entries);
        let _ = writeln!(
            s,
            "{:<16} {:>10} {:>10} {:>7} {:>9}  skip reasons",
            "metric", "mean", "std", "n", "skipped"
        );
        for m in &self.metrics {
            let reasons = m
                .skip_reasons
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect::<Vec<_>>()
                .join(",");
            let _ = writeln!(
                s,
                "{:<16} {:>10} {:>10} {:>7} {:>9}  {}",
                m.metric,
                fmt_opt(m.mean),
                fmt_opt(m.std),
                m.n,
                m.n_skipped,
                reasons
            );
        }
        s
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"))
}

/// Side-by-side comparison of model means across the union of metrics.
pub fn render_comparison(reports: &[BiasReport]) -> String {
    let mut metrics: Vec<&str> = Vec::new();
    for r in reports {
        for m in &r.metrics {
            if !metrics.contains(&m.metric.as_str()) {
                metrics.push(&m.metric);
            }
        }
    }
    let width = reports
        .iter()
        .map(|r| r.model_name.len())
        .max()
        .unwrap_or(5)
        .max(5);
    let mut s = String::new();
    let _ = write!(s, "{:<width$}", "model");
    for m in &metrics {
        let _ = write!(s, " {:>10}", m);
    }
    s.push('\n');
    for r in reports {
        let _ = write!(s, "{:<width$}", r.model_name);
        for m in &metrics {
            let _ = write!(s, " {:>10}", fmt_opt(r.mean(m)));
        }
        s.push('\n');
    }
    s
}

struct EntryScores {
    pop_bias: Result<f64, Skip>,
    utility: Result<f64, Skip>,
    coverage: Result<f64, Skip>,
    cep: Result<f64, Skip>,
    uiop: Result<f64, Skip>,
    rank: Result<Vec<super::rank::RankScores>, Skip>,
}

fn check_join(run: &RankedRun, corpus: &Corpus) -> Result<()> {
    let mut unknown = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for e in &run.entries {
        let key = format!("{}#{}", e.dialogue_id, e.turn_index);
        match corpus.dialogue(&e.dialogue_id) {
            Some(d) if e.turn_index < d.turns.len() => {
                if let Some(ep) = d.episode_of(e.turn_index) {
                    if ep != e.episode_index {
                        return Err(Error::InvalidRun(format!(
                            "{key}: episode_index {} but corpus segmentation says {ep}",
                            e.episode_index
                        )));
                    }
                }
            }
            _ => unknown.push(key.clone()),
        }
        if !seen.insert(key.clone()) {
            return Err(Error::InvalidRun(format!("{key}: duplicate run entry")));
        }
    }
    if unknown.is_empty() {
        Ok(())
    } else {
        Err(Error::UnknownRunEntries(unknown))
    }
}

/// Scores every entry of `run` and aggregates mean and standard deviation per
/// metric. Skipped entries are excluded from the aggregates and counted by
/// reason. Output is identical for serial and parallel execution.
pub fn evaluate_run(
    run: &RankedRun,
    corpus: &Corpus,
    table: &PopularityTable,
    config: &EvalConfig,
) -> Result<BiasReport> {
    run.validate()?;
    check_join(run, corpus)?;

    let mut by_episode: HashMap<(&str, usize), Vec<&RunEntry>> = HashMap::new();
    for e in &run.entries {
        by_episode
            .entry((e.dialogue_id.as_str(), e.episode_index))
            .or_default()
            .push(e);
    }
    let base = config.log_base;

    let scores = config.exec.map(&run.entries, |_, e| {
        let coverage = popularity_coverage(&e.ranked_item_ids, table);
        let utility = coverage.map(|_| ranking_utility(&e.ranked_item_ids, table, base));
        let pop_bias = match (utility, coverage) {
            (Ok(u), Ok(c)) => Ok(u * c),
            (Err(s), _) | (_, Err(s)) => Err(s),
        };
        let previous: &[&RunEntry] = match e.episode_index.checked_sub(1) {
            Some(prev) => by_episode
                .get(&(e.dialogue_id.as_str(), prev))
                .map_or(&[], Vec::as_slice),
            None => &[],
        };
        EntryScores {
            pop_bias,
            utility,
            coverage,
            cep: cep(e, previous, table, base),
            uiop: uiop(e, table, base),
            rank: rank_metrics(&e.ranked_item_ids, &e.target_item_ids, &run.cutoffs),
        }
    });

    let collect = |f: &dyn Fn(&EntryScores) -> Result<f64, Skip>| -> Vec<Result<f64, Skip>> {
        scores.iter().map(f).collect()
    };
    let mut metrics = vec![
        MetricSummary::from_values("pop_bias".into(), &collect(&|s| s.pop_bias)),
        MetricSummary::from_values("ranking_utility".into(), &collect(&|s| s.utility)),
        MetricSummary::from_values("pop_coverage".into(), &collect(&|s| s.coverage)),
        MetricSummary::from_values("cep".into(), &collect(&|s| s.cep)),
        MetricSummary::from_values("uiop".into(), &collect(&|s| s.uiop)),
    ];
    for (ci, &k) in run.cutoffs.iter().enumerate() {
        let pick = |f: fn(&super::rank::RankScores) -> f64| {
            collect(&move |s: &EntryScores| s.rank.as_ref().map(|r| f(&r[ci])).map_err(|e| *e))
        };
        metrics.push(MetricSummary::from_values(format!("hit@{k}"), &pick(|r| r.hit)));
        metrics.push(MetricSummary::from_values(format!("ndcg@{k}"), &pick(|r| r.ndcg)));
        metrics.push(MetricSummary::from_values(format!("mrr@{k}"), &pick(|r| r.mrr)));
    }

    Ok(BiasReport {
        model_name: run.model_name.clone(),
        entries: run.entries.len(),
        metrics,
    })
}
