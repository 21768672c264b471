//! Item-item collaborative filtering over session co-occurrence.
//!
//! Each training session contributes at most one to any count. The
//! similarity of a candidate `j` to an anchor `i` is the asymmetric cosine
//!
//! ```text
//! sim(i, j) = n_ij / (n_i^α · n_j^(1-α))
//! ```
//!
//! where `n_i` is the number of sessions containing `i` and `n_ij` the
//! number containing both. `α = 0.5` is plain cosine.

use rayon::prelude::*;

use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::corpus::ProcessedCorpus;
use crate::error::{invalid, Result};
use crate::generator::{by_score_desc, CandidateGenerator};

pub const DEFAULT_ALPHA: f64 = 0.5;
pub const DEFAULT_TABLE_WIDTH: usize = 500;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CfConfig {
    pub alpha: f64,
    pub table_width: usize,
}

impl Default for CfConfig {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            table_width: DEFAULT_TABLE_WIDTH,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CooccurrenceCounts {
    support: Vec<u32>,
    /// Per item: `(partner, n_ij)` sorted by partner, `n_ij > 0`.
    pairs: Vec<Vec<(u32, u32)>>,
}

impl CooccurrenceCounts {
    pub fn num_items(&self) -> usize {
        self.support.len()
    }

    /// `n_i`: number of sessions containing `item`.
    pub fn support(&self, item: u32) -> u32 {
        self.support[item as usize]
    }

    /// `n_ij`: number of sessions containing both items.
    pub fn pair(&self, i: u32, j: u32) -> u32 {
        let row = &self.pairs[i as usize];
        row.binary_search_by_key(&j, |&(p, _)| p)
            .map_or(0, |pos| row[pos].1)
    }

    pub fn partners(&self, item: u32) -> &[(u32, u32)] {
        &self.pairs[item as usize]
    }
}

pub fn build_counts(corpus: &ProcessedCorpus) -> Result<CooccurrenceCounts> {
    build_counts_from_sessions(&corpus.train_sessions, corpus.num_items())
}

pub fn build_counts_from_sessions(
    sessions: &[Vec<u32>],
    num_items: usize,
) -> Result<CooccurrenceCounts> {
    if sessions.is_empty() {
        return Err(invalid!("build_counts: no sessions"));
    }
    let deduped: Vec<Vec<u32>> = sessions
        .par_iter()
        .map(|s| {
            let mut s = s.clone();
            s.sort_unstable();
            s.dedup();
            s
        })
        .collect();
    if let Some(&bad) = deduped.iter().flatten().find(|&&i| i as usize >= num_items) {
        return Err(invalid!("build_counts: item {bad} outside vocabulary of {num_items}"));
    }

    let mut support = vec![0u32; num_items];
    for s in &deduped {
        for &i in s {
            support[i as usize] += 1;
        }
    }

    // Unordered pairs packed as (lo << 32 | hi); sorting makes the run-length
    // count independent of thread scheduling.
    let mut packed: Vec<u64> = deduped
        .par_iter()
        .flat_map_iter(|s| {
            s.iter().enumerate().flat_map(move |(a, &i)| {
                s[a + 1..].iter().map(move |&j| ((i as u64) << 32) | j as u64)
            })
        })
        .collect();
    packed.par_sort_unstable();

    let mut pairs: Vec<Vec<(u32, u32)>> = vec![Vec::new(); num_items];
    let mut idx = 0;
    while idx < packed.len() {
        let key = packed[idx];
        let run = packed[idx..].iter().take_while(|&&k| k == key).count();
        let (i, j) = ((key >> 32) as u32, key as u32);
        pairs[i as usize].push((j, run as u32));
        pairs[j as usize].push((i, run as u32));
        idx += run;
    }
    pairs.par_iter_mut().for_each(|row| row.sort_unstable());
    Ok(CooccurrenceCounts { support, pairs })
}

/// Pre-computed neighbor lists plus a popularity fallback.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityTable {
    pub alpha: f64,
    pub width: usize,
    /// Per anchor: `(candidate, score)` sorted by descending score, ties by index.
    pub neighbors: Vec<Vec<(u32, f64)>>,
    /// All items by descending session support, ties by index.
    pub popularity: Vec<u32>,
}

pub fn asym_cosine(counts: &CooccurrenceCounts, alpha: f64, width: usize) -> Result<SimilarityTable> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(invalid!("asym_cosine: alpha {alpha} outside [0, 1]"));
    }
    if width == 0 {
        return Err(invalid!("asym_cosine: table width must be positive"));
    }
    let neighbors = (0..counts.num_items() as u32)
        .into_par_iter()
        .map(|i| {
            let ni = counts.support(i) as f64;
            let mut row: Vec<(u32, f64)> = counts
                .partners(i)
                .iter()
                .map(|&(j, nij)| {
                    let nj = counts.support(j) as f64;
                    (j, nij as f64 / (ni.powf(alpha) * nj.powf(1.0 - alpha)))
                })
                .collect();
            row.sort_by(by_score_desc);
            row.truncate(width);
            row
        })
        .collect();
    let mut popularity: Vec<u32> = (0..counts.num_items() as u32).collect();
    popularity.sort_by_key(|&i| (std::cmp::Reverse(counts.support(i)), i));
    Ok(SimilarityTable {
        alpha,
        width,
        neighbors,
        popularity,
    })
}

impl SimilarityTable {
    pub fn num_items(&self) -> usize {
        self.neighbors.len()
    }

    /// Scores of the anchor's neighbors, if the anchor is known.
    pub fn neighbors_of(&self, anchor: u32) -> &[(u32, f64)] {
        self.neighbors
            .get(anchor as usize)
            .map_or(&[], Vec::as_slice)
    }

    /// The anchor's list for the last history item, extended with popular
    /// items (no duplicates, never the anchor) until it holds at least `k`.
    pub fn generate(&self, history: &[u32], k: usize) -> Vec<u32> {
        let Some(&anchor) = history.last() else {
            return self.popularity.iter().copied().take(k).collect();
        };
        let mut out: Vec<u32> = self.neighbors_of(anchor).iter().map(|&(j, _)| j).collect();
        if out.len() < k {
            let mut seen = vec![false; self.num_items()];
            for &j in &out {
                seen[j as usize] = true;
            }
            if let Some(s) = seen.get_mut(anchor as usize) {
                *s = true;
            }
            for &p in &self.popularity {
                if out.len() >= k {
                    break;
                }
                if !seen[p as usize] {
                    seen[p as usize] = true;
                    out.push(p);
                }
            }
        }
        out
    }
}

/// [`SimilarityTable`] as a generator.
#[derive(Clone, Debug)]
pub struct CfGenerator {
    pub table: SimilarityTable,
}

impl CfGenerator {
    pub fn new(table: SimilarityTable) -> Self {
        Self { table }
    }

    pub fn fit(corpus: &ProcessedCorpus, alpha: f64, width: usize) -> Result<Self> {
        let counts = build_counts(corpus)?;
        Ok(Self::new(asym_cosine(&counts, alpha, width)?))
    }

    pub fn config(&self) -> CfConfig {
        CfConfig {
            alpha: self.table.alpha,
            table_width: self.table.width,
        }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = Checkpoint::new("i2i-cf", &self.config());
        ck.table = Some(self.table.clone());
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> crate::Result<Self> {
        ck.expect_kind(&["i2i-cf"])?;
        let table = ck.table.clone().ok_or_else(|| {
            crate::Error::UnsupportedFormat("checkpoint: i2i-cf model without a similarity table".into())
        })?;
        Ok(Self::new(table))
    }
}

impl CandidateGenerator for CfGenerator {
    fn rank(&self, history: &[u32], depth: usize) -> Vec<u32> {
        let mut out = self.table.generate(history, depth);
        out.truncate(depth);
        out
    }

    fn num_items(&self) -> usize {
        self.table.num_items()
    }

    fn name(&self) -> &str {
        "i2i-cf"
    }

    fn fingerprint(&self) -> String {
        self.to_checkpoint().fingerprint()
    }
}
