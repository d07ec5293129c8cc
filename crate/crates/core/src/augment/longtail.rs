//! Before/after comparison of the training item-frequency distribution.

use serde::Serialize;

use crate::corpus::{Corpus, ItemId};
use crate::error::{Error, Result};
use crate::metrics::{initial_item_coverage, pearson};
use crate::popularity::item_frequencies;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ItemShift {
    pub item_id: ItemId,
    pub before: u64,
    pub after: u64,
    /// Competition rank by descending frequency (1 = most frequent).
    pub rank_before: usize,
    pub rank_after: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LongtailReport {
    pub items: Vec<ItemShift>,
    /// Spearman correlation of per-item frequencies, ties averaged.
    pub rank_correlation: f64,
    pub coverage_before: f64,
    pub coverage_after: f64,
    pub coverage_delta: f64,
    pub newly_covered: usize,
    pub decreased: usize,
    /// Frequencies sorted in descending order, ready to plot.
    pub curve_before: Vec<u64>,
    pub curve_after: Vec<u64>,
}

/// `1 + number of strictly larger values` for each entry.
pub fn competition_ranks(values: &[u64]) -> Vec<usize> {
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    values
        .iter()
        .map(|v| sorted.partition_point(|x| x > v) + 1)
        .collect()
}

/// Ascending ranks with ties sharing their average rank.
pub fn average_ranks(values: &[u64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by_key(|&i| values[i]);
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start;
        while end + 1 < order.len() && values[order[end + 1]] == values[order[start]] {
            end += 1;
        }
        let avg = (start + end) as f64 / 2.0 + 1.0;
        for &i in &order[start..=end] {
            ranks[i] = avg;
        }
        start = end + 1;
    }
    ranks
}

pub fn spearman(xs: &[u64], ys: &[u64]) -> f64 {
    if xs == ys {
        return 1.0;
    }
    pearson(&average_ranks(xs), &average_ranks(ys))
}

pub fn longtail_report(before: &Corpus, after: &Corpus) -> Result<LongtailReport> {
    if before.catalog() != after.catalog() {
        return Err(Error::InvalidArgument(
            "long-tail comparison needs both corpora on the same catalog".into(),
        ));
    }
    let fb = item_frequencies(before);
    let fa = item_frequencies(after);
    let ids: Vec<&ItemId> = fb.keys().collect();
    let vb: Vec<u64> = fb.values().copied().collect();
    let va: Vec<u64> = ids.iter().map(|id| fa[*id]).collect();
    let rb = competition_ranks(&vb);
    let ra = competition_ranks(&va);

    let items: Vec<ItemShift> = ids
        .iter()
        .enumerate()
        .map(|(i, id)| ItemShift {
            item_id: (*id).clone(),
            before: vb[i],
            after: va[i],
            rank_before: rb[i],
            rank_after: ra[i],
        })
        .collect();
    let coverage_before = initial_item_coverage(before);
    let coverage_after = initial_item_coverage(after);
    let mut curve_before = vb.clone();
    curve_before.sort_unstable_by(|a, b| b.cmp(a));
    let mut curve_after = va.clone();
    curve_after.sort_unstable_by(|a, b| b.cmp(a));

    Ok(LongtailReport {
        rank_correlation: spearman(&vb, &va),
        coverage_before,
        coverage_after,
        coverage_delta: coverage_after - coverage_before,
        newly_covered: items.iter().filter(|s| s.before == 0 && s.after > 0).count(),
        decreased: items.iter().filter(|s| s.after < s.before).count(),
        items,
        curve_before,
        curve_after,
    })
}
