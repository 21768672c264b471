//! Seeded toy corpora with known structure, for tests and demos.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cfgen::{CfGenerator, SimilarityTable};
use crate::corpus::ProcessedCorpus;
use crate::error::{invalid, Result};
use crate::numkit::RngSeed;

/// A corpus whose next clicks concentrate at one rank of a fixed generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantedRankConfig {
    pub num_items: usize,
    /// Length of each anchor's generator list.
    pub list_len: usize,
    /// The next click is drawn from the first `top` ranks of the list.
    pub top: usize,
    /// 1-based rank that receives `planted_prob` of the clicks; the other
    /// ranks within `top` share the rest uniformly.
    pub planted_rank: usize,
    pub planted_prob: f64,
    pub train_sessions: usize,
    pub test_sessions: usize,
    pub session_len: usize,
    pub seed: u64,
}

impl Default for PlantedRankConfig {
    fn default() -> Self {
        Self {
            num_items: 100,
            list_len: 20,
            top: 10,
            planted_rank: 3,
            planted_prob: 0.6,
            train_sessions: 2000,
            test_sessions: 400,
            session_len: 5,
            seed: 7,
        }
    }
}

/// Builds the generator (a fixed random neighbor list per item) and a corpus
/// of sessions walking those lists.
pub fn planted_rank(cfg: &PlantedRankConfig) -> Result<(ProcessedCorpus, CfGenerator)> {
    if cfg.list_len >= cfg.num_items || cfg.top > cfg.list_len || cfg.top < 2 {
        return Err(invalid!("planted-rank: need 2 <= top <= list_len < num_items"));
    }
    if cfg.planted_rank == 0 || cfg.planted_rank > cfg.top {
        return Err(invalid!("planted-rank: planted_rank must be within 1..=top"));
    }
    if !(0.0..=1.0).contains(&cfg.planted_prob) || cfg.session_len < 2 {
        return Err(invalid!("planted-rank: bad probability or session length"));
    }
    let n = cfg.num_items;
    let mut rng = RngSeed(cfg.seed).substream("lists");
    let neighbors: Vec<Vec<(u32, f64)>> = (0..n)
        .map(|a| {
            sample(&mut rng, n - 1, cfg.list_len)
                .into_iter()
                .enumerate()
                .map(|(r, j)| {
                    let item = if j >= a { j + 1 } else { j };
                    (item as u32, 1.0 / (r + 1) as f64)
                })
                .collect()
        })
        .collect();

    let mut rng = RngSeed(cfg.seed).substream("sessions");
    let planted = cfg.planted_rank - 1;
    let mut walk = |count: usize| -> Vec<Vec<u32>> {
        (0..count)
            .map(|_| {
                let mut s = vec![rng.gen_range(0..n as u32)];
                while s.len() < cfg.session_len {
                    let list = &neighbors[*s.last().unwrap() as usize];
                    let r = if rng.gen_bool(cfg.planted_prob) {
                        planted
                    } else {
                        let r = rng.gen_range(0..cfg.top - 1);
                        if r >= planted { r + 1 } else { r }
                    };
                    s.push(list[r].0);
                }
                s
            })
            .collect()
    };
    let train = walk(cfg.train_sessions);
    let test = walk(cfg.test_sessions);
    let corpus = ProcessedCorpus::from_sessions("planted-rank", n, train, &test);
    let table = SimilarityTable {
        alpha: 0.5,
        width: cfg.list_len,
        neighbors,
        popularity: (0..n as u32).collect(),
    };
    Ok((corpus, CfGenerator::new(table)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::CandidateGenerator;

    #[test]
    fn targets_follow_the_planted_rank() {
        let cfg = PlantedRankConfig::default();
        let (corpus, g) = planted_rank(&cfg).unwrap();
        let mut at_rank = vec![0usize; cfg.list_len + 1];
        for e in &corpus.train {
            let list = g.rank(&e.history, cfg.list_len);
            let r = list.iter().position(|&y| y == e.target).unwrap();
            at_rank[r] += 1;
        }
        let share = at_rank[2] as f64 / corpus.train.len() as f64;
        assert!((share - 0.6).abs() < 0.03, "{share}");
        assert!(at_rank[cfg.top..].iter().all(|&c| c == 0));
        assert!(g.table.neighbors.iter().enumerate().all(|(a, l)| l.iter().all(|&(j, _)| j as usize != a)));
    }

    #[test]
    fn seeded() {
        let cfg = PlantedRankConfig { train_sessions: 50, ..Default::default() };
        let (a, _) = planted_rank(&cfg).unwrap();
        let (b, _) = planted_rank(&cfg).unwrap();
        assert_eq!(a, b);
    }
}
