//! Bias scores and rank-accuracy metrics over ranked runs.

pub mod bias;
pub mod rank;
pub mod report;
pub mod run;

use std::collections::HashSet;
use std::fmt;

pub use bias::{cep, cep_from_parts, pearson, popularity_bias, popularity_coverage, ranking_utility, uiop, ItemSet};
pub use rank::{rank_metrics, rank_scores, RankScores};
pub use report::{evaluate_run, render_comparison, BiasReport, EvalConfig, MetricSummary, ReportRecord};
pub use run::{RankedRun, RunEntry, DEFAULT_CUTOFFS};

use crate::corpus::Corpus;
use crate::error::{Error, Result};

/// Logarithm used by the ranking-utility discount.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub enum LogBase {
    #[default]
    Natural,
    Custom(f64),
}

impl LogBase {
    pub fn new(base: f64) -> Result<Self> {
        if !base.is_finite() || base <= 0.0 || base == 1.0 {
            return Err(Error::InvalidArgument(format!("invalid log base {base}")));
        }
        Ok(if base == std::f64::consts::E {
            LogBase::Natural
        } else {
            LogBase::Custom(base)
        })
    }

    pub fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Natural => x.ln(),
            LogBase::Custom(b) => x.ln() / b.ln(),
        }
    }
}

/// Why an entry was excluded from a metric's aggregate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Skip {
    EmptyList,
    NoTargets,
    FirstEpisode,
    NoPreviousEpisode,
    InsufficientOverlap,
}

impl Skip {
    pub fn as_str(self) -> &'static str {
        match self {
            Skip::EmptyList => "empty list",
            Skip::NoTargets => "no targets",
            Skip::FirstEpisode => "first episode",
            Skip::NoPreviousEpisode => "no previous episode entries",
            Skip::InsufficientOverlap => "insufficient overlap",
        }
    }
}

impl fmt::Display for Skip {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Share of catalog items mentioned or targeted anywhere in the training split.
pub fn initial_item_coverage(corpus: &Corpus) -> f64 {
    let catalog = corpus.catalog();
    let seen: HashSet<&str> = corpus
        .train()
        .flat_map(|d| d.turns.iter())
        .flat_map(|t| t.mentioned_item_ids.iter().chain(&t.target_item_ids))
        .map(String::as_str)
        .filter(|id| catalog.contains(id))
        .collect();
    seen.len() as f64 / catalog.len() as f64
}
