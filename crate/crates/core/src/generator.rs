//! The first-stage contract shared by every candidate generator.

use std::cmp::Ordering;

use crate::numkit::Real;

/// A first-stage recommender: ranks the assortment for a session.
pub trait CandidateGenerator: Send + Sync {
    /// The best `depth` items for `history`, best first. May return fewer
    /// when the generator scores fewer items.
    fn rank(&self, history: &[u32], depth: usize) -> Vec<u32>;

    fn num_items(&self) -> usize;

    fn name(&self) -> &str;

    /// Identifies the model's parameters; keys candidate caches.
    fn fingerprint(&self) -> String;
}

impl<G: CandidateGenerator + ?Sized> CandidateGenerator for &G {
    fn rank(&self, history: &[u32], depth: usize) -> Vec<u32> {
        (**self).rank(history, depth)
    }
    fn num_items(&self) -> usize {
        (**self).num_items()
    }
    fn name(&self) -> &str {
        (**self).name()
    }
    fn fingerprint(&self) -> String {
        (**self).fingerprint()
    }
}

impl<G: CandidateGenerator + ?Sized> CandidateGenerator for Box<G> {
    fn rank(&self, history: &[u32], depth: usize) -> Vec<u32> {
        (**self).rank(history, depth)
    }
    fn num_items(&self) -> usize {
        (**self).num_items()
    }
    fn name(&self) -> &str {
        (**self).name()
    }
    fn fingerprint(&self) -> String {
        (**self).fingerprint()
    }
}

/// Descending score, ties broken by ascending item index.
#[inline]
pub fn by_score_desc(a: &(u32, f64), b: &(u32, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// `rank(S)`: items ordered by descending score, ties by ascending index.
pub fn rank_scored(scored: &[(u32, f64)]) -> Vec<u32> {
    let mut v = scored.to_vec();
    v.sort_by(by_score_desc);
    v.into_iter().map(|(i, _)| i).collect()
}

/// Indices of the `n` largest `scores` in rank order.
pub fn top_n<T: Real>(scores: &[T], n: usize) -> Vec<u32> {
    let mut scored: Vec<(u32, f64)> = scores
        .iter()
        .enumerate()
        .map(|(i, s)| (i as u32, s.f64()))
        .collect();
    let n = n.min(scored.len());
    if n == 0 {
        return Vec::new();
    }
    if n < scored.len() {
        scored.select_nth_unstable_by(n - 1, by_score_desc);
        scored.truncate(n);
    }
    scored.sort_by(by_score_desc);
    scored.into_iter().map(|(i, _)| i).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ties_break_by_index() {
        assert_eq!(rank_scored(&[(3, 1.0), (1, 1.0), (2, 2.0)]), vec![2, 1, 3]);
        assert_eq!(top_n(&[0.5f32, 0.9, 0.5, 0.1], 3), vec![1, 0, 2]);
    }

    proptest! {
        #[test]
        fn top_n_is_prefix_of_full_rank(
            raw in prop::collection::vec(-20i32..20, 1..60),
            n in 0usize..70,
        ) {
            let scores: Vec<f64> = raw.iter().map(|&x| x as f64 / 4.0).collect();
            let full = rank_scored(
                &scores.iter().enumerate().map(|(i, &s)| (i as u32, s)).collect::<Vec<_>>(),
            );
            let top = top_n(&scores, n);
            prop_assert_eq!(&top[..], &full[..n.min(full.len())]);
        }
    }
}
