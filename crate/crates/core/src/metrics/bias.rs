//! Popularity-bias scores for a single ranked list: ranking utility,
//! popularity coverage, their product, and the cross-episode and
//! intent-oriented extensions.

use std::collections::{BTreeSet, HashSet};

use super::run::RunEntry;
use super::{LogBase, Skip};
use crate::popularity::PopularityTable;

/// Membership test for the popular-item set.
pub trait ItemSet {
    fn contains_item(&self, item: &str) -> bool;
}

impl ItemSet for BTreeSet<String> {
    fn contains_item(&self, item: &str) -> bool {
        self.contains(item)
    }
}

impl ItemSet for HashSet<String> {
    fn contains_item(&self, item: &str) -> bool {
        self.contains(item)
    }
}

impl ItemSet for [&str] {
    fn contains_item(&self, item: &str) -> bool {
        self.contains(&item)
    }
}

impl<const N: usize> ItemSet for [&str; N] {
    fn contains_item(&self, item: &str) -> bool {
        self.contains(&item)
    }
}

impl ItemSet for PopularityTable {
    fn contains_item(&self, item: &str) -> bool {
        self.is_popular(item)
    }
}

/// Position-discounted count of popular items: each popular item at 1-based
/// rank `r` contributes `1 / (log(r) + 1)`.
pub fn ranking_utility<S, P>(ranked: &[S], popular: &P, base: LogBase) -> f64
where
    S: AsRef<str>,
    P: ItemSet + ?Sized,
{
    ranked
        .iter()
        .enumerate()
        .filter(|(_, item)| popular.contains_item(item.as_ref()))
        .map(|(i, _)| 1.0 / (base.log((i + 1) as f64) + 1.0))
        .sum()
}

/// Fraction of the ranked list drawn from the popular set.
pub fn popularity_coverage<S, P>(ranked: &[S], popular: &P) -> Result<f64, Skip>
where
    S: AsRef<str>,
    P: ItemSet + ?Sized,
{
    if ranked.is_empty() {
        return Err(Skip::EmptyList);
    }
    let hits = ranked
        .iter()
        .filter(|item| popular.contains_item(item.as_ref()))
        .count();
    Ok(hits as f64 / ranked.len() as f64)
}

/// Ranking utility times popularity coverage.
pub fn popularity_bias<S, P>(ranked: &[S], popular: &P, base: LogBase) -> Result<f64, Skip>
where
    S: AsRef<str>,
    P: ItemSet + ?Sized,
{
    let coverage = popularity_coverage(ranked, popular)?;
    Ok(ranking_utility(ranked, popular, base) * coverage)
}

/// Pearson correlation, clamped to [-1, 1]. Returns 0 when either input is
/// constant. Inputs must have equal length of at least 2.
pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    let constant = |v: &[f64]| v.iter().all(|&x| x == v[0]);
    if xs.len() < 2 || constant(xs) || constant(ys) {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return 0.0;
    }
    (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
}

/// Cross-episode popularity from its parts: `bias * |rho|`, where `rho`
/// correlates the two popularity vectors aligned by rank and truncated to the
/// shorter one.
pub fn cep_from_parts(bias: f64, current_pops: &[f64], previous_pops: &[f64]) -> Result<f64, Skip> {
    let len = current_pops.len().min(previous_pops.len());
    if len < 2 {
        return Err(Skip::InsufficientOverlap);
    }
    let rho = pearson(&current_pops[..len], &previous_pops[..len]);
    Ok(bias * rho.abs())
}

/// Cross-episode popularity of `current` against the last recommendation
/// turn of the previous episode. `previous_episode` holds the run entries of
/// episode `current.episode_index - 1` in the same dialogue.
pub fn cep(
    current: &RunEntry,
    previous_episode: &[&RunEntry],
    table: &PopularityTable,
    base: LogBase,
) -> Result<f64, Skip> {
    if current.episode_index == 0 {
        return Err(Skip::FirstEpisode);
    }
    let previous = previous_episode
        .iter()
        .copied()
        .filter(|e| e.dialogue_id == current.dialogue_id && e.episode_index + 1 == current.episode_index)
        .max_by_key(|e| e.turn_index)
        .ok_or(Skip::NoPreviousEpisode)?;
    let bias = popularity_bias(&current.ranked_item_ids, table, base)?;
    let pops = |e: &RunEntry| e.ranked_item_ids.iter().map(|i| table.pop(i)).collect::<Vec<_>>();
    cep_from_parts(bias, &pops(current), &pops(previous))
}

/// Gap between the popularity of the target item and the popularity bias of
/// the recommendations, averaged over targets.
pub fn uiop(entry: &RunEntry, table: &PopularityTable, base: LogBase) -> Result<f64, Skip> {
    let targets = entry.distinct_targets();
    if targets.is_empty() {
        return Err(Skip::NoTargets);
    }
    let bias = popularity_bias(&entry.ranked_item_ids, table, base)?;
    let total: f64 = targets.iter().map(|t| (table.pop(t) - bias).abs()).sum();
    Ok(total / targets.len() as f64)
}
