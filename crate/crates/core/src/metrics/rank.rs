//! Hit ratio, NDCG and MRR at fixed cutoffs with binary relevance.

use std::collections::HashSet;

use serde::Serialize;

use super::Skip;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankScores {
    pub cutoff: usize,
    pub hit: f64,
    pub ndcg: f64,
    pub mrr: f64,
}

fn discount(rank: usize) -> f64 {
    1.0 / ((rank + 1) as f64).log2()
}

/// Scores one ranked list against its targets at a single cutoff. The ideal
/// ranking places every distinct target at the top.
pub fn rank_scores<S, T>(ranked: &[S], targets: &[T], cutoff: usize) -> Result<RankScores, Skip>
where
    S: AsRef<str>,
    T: AsRef<str>,
{
    let targets: HashSet<&str> = targets.iter().map(AsRef::as_ref).collect();
    if targets.is_empty() {
        return Err(Skip::NoTargets);
    }
    let mut dcg = 0.0;
    let mut first_hit = None;
    for (i, item) in ranked.iter().take(cutoff).enumerate() {
        if targets.contains(item.as_ref()) {
            dcg += discount(i + 1);
            first_hit.get_or_insert(i + 1);
        }
    }
    let ideal: f64 = (1..=targets.len().min(cutoff)).map(discount).sum();
    Ok(RankScores {
        cutoff,
        hit: if first_hit.is_some() { 1.0 } else { 0.0 },
        ndcg: if ideal > 0.0 { dcg / ideal } else { 0.0 },
        mrr: first_hit.map_or(0.0, |r| 1.0 / r as f64),
    })
}

pub fn rank_metrics<S, T>(ranked: &[S], targets: &[T], cutoffs: &[usize]) -> Result<Vec<RankScores>, Skip>
where
    S: AsRef<str>,
    T: AsRef<str>,
{
    cutoffs.iter().map(|&k| rank_scores(ranked, targets, k)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn second_position() {
        let s = rank_scores(&["b", "a"], &["a"], 2).unwrap();
        assert_eq!(s.hit, 1.0);
        assert_abs_diff_eq!(s.ndcg, 1.0 / 3f64.log2(), epsilon = 1e-15);
        assert_abs_diff_eq!(s.ndcg, 0.63093, epsilon = 1e-5);
        assert_eq!(s.mrr, 0.5);
    }

    #[test]
    fn top_position_is_ideal() {
        let s = rank_scores(&["a", "b"], &["a"], 10).unwrap();
        assert_eq!((s.hit, s.ndcg, s.mrr), (1.0, 1.0, 1.0));
    }

    #[test]
    fn outside_cutoff() {
        let s = rank_scores(&["b", "c", "a"], &["a"], 2).unwrap();
        assert_eq!((s.hit, s.ndcg, s.mrr), (0.0, 0.0, 0.0));
    }

    #[test]
    fn no_targets_skips() {
        let none: [&str; 0] = [];
        assert_eq!(rank_scores(&["a"], &none, 10), Err(Skip::NoTargets));
    }

    #[test]
    fn duplicate_targets_count_once() {
        let s = rank_scores(&["a", "b"], &["a", "a"], 10).unwrap();
        assert_eq!(s.ndcg, 1.0);
    }
}
