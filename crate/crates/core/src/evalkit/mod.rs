//! Recall@N / MRR@N evaluation and the two experiment drivers built on it.

mod chart;
mod experiments;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::SessionExample;
use crate::error::{invalid, Result};
use crate::generator::CandidateGenerator;
use crate::reranker::TwoStage;

pub use chart::{line_chart_svg, Series};
pub use experiments::{ablate_cre, sweep_k, Ablation, AblationArm, KPoint, KSweep};

/// 1-based position of `target` in `list`, or `None` when absent.
pub fn rank_of_target(list: &[u32], target: u32) -> Option<usize> {
    list.iter().position(|&y| y == target).map(|i| i + 1)
}

/// Anything that turns a session history into a ranked list.
pub trait Recommender: Sync {
    /// At least the first `depth` recommendations (fewer only if the model
    /// ranks fewer items).
    fn recommend(&self, history: &[u32], depth: usize) -> Result<Vec<u32>>;

    fn id(&self) -> String;
}

/// A generator evaluated on its own.
pub struct Baseline<G>(pub G);

impl<G: CandidateGenerator> Recommender for Baseline<G> {
    fn recommend(&self, history: &[u32], depth: usize) -> Result<Vec<u32>> {
        Ok(self.0.rank(history, depth))
    }

    fn id(&self) -> String {
        self.0.name().to_string()
    }
}

impl<G: CandidateGenerator> Recommender for TwoStage<G> {
    fn recommend(&self, history: &[u32], depth: usize) -> Result<Vec<u32>> {
        TwoStage::recommend(self, history, depth)
    }

    fn id(&self) -> String {
        let prefix = if self.reranker.cfg.cre_enabled { "rrcre" } else { "rr" };
        format!("{prefix}-{}", self.generator.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub dataset: String,
    pub n: usize,
    pub recall: f64,
    pub mrr: f64,
    pub examples: usize,
    pub hits: usize,
    /// `rank_histogram[r - 1]` counts targets at rank `r`, for `r <= n`.
    pub rank_histogram: Vec<usize>,
    /// Targets absent from the first `n` recommendations.
    pub misses: usize,
    /// Fraction of targets present anywhere in the returned lists.
    pub coverage: f64,
    pub wall_clock_secs: f64,
}

pub const REPORT_CSV_HEADER: &str = "model,dataset,N,recall,mrr,examples";

impl EvalReport {
    /// Builds a report from a histogram of ranks within the cut-off.
    pub fn from_histogram(model: &str, dataset: &str, rank_histogram: Vec<usize>, examples: usize) -> Self {
        let n = rank_histogram.len();
        let hits: usize = rank_histogram.iter().sum();
        assert!(hits <= examples, "histogram counts more hits than examples");
        let (recall, mrr) = if examples == 0 {
            (0.0, 0.0)
        } else {
            (hits as f64 / examples as f64, exact_mrr(&rank_histogram, examples))
        };
        Self {
            model: model.to_string(),
            dataset: dataset.to_string(),
            n,
            recall,
            mrr,
            examples,
            hits,
            rank_histogram,
            misses: examples - hits,
            coverage: 0.0,
            wall_clock_secs: 0.0,
        }
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{:.6},{:.6},{}",
            self.model, self.dataset, self.n, self.recall, self.mrr, self.examples
        )
    }

    /// The report with its timing zeroed, for reproducibility comparisons.
    pub fn untimed(&self) -> Self {
        Self {
            wall_clock_secs: 0.0,
            ..self.clone()
        }
    }
}

/// Reports as CSV, header included.
pub fn reports_csv(reports: &[EvalReport]) -> String {
    let mut s = format!("{REPORT_CSV_HEADER}\n");
    for r in reports {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `Σ_r h[r-1] / r / examples`, summed as an exact fraction and rounded once.
fn exact_mrr(hist: &[usize], examples: usize) -> f64 {
    // running fraction num/den, kept reduced
    let (mut num, mut den) = (0u128, 1u128);
    for (i, &h) in hist.iter().enumerate() {
        if h == 0 {
            continue;
        }
        let r = (i + 1) as u128;
        let g = gcd(den, r);
        let Some(new_den) = (den / g).checked_mul(r) else {
            return float_mrr(hist, examples);
        };
        let Some(new_num) = num
            .checked_mul(new_den / den)
            .and_then(|a| (h as u128).checked_mul(new_den / r).and_then(|b| a.checked_add(b)))
        else {
            return float_mrr(hist, examples);
        };
        let g = gcd(new_num, new_den);
        (num, den) = (new_num / g, new_den / g);
    }
    let Some(den) = den.checked_mul(examples as u128) else {
        return float_mrr(hist, examples);
    };
    let g = gcd(num, den);
    let (num, den) = (num / g, den / g);
    // correctly rounded whenever both fit in 53 bits
    num as f64 / den as f64
}

fn float_mrr(hist: &[usize], examples: usize) -> f64 {
    let s: f64 = hist
        .iter()
        .enumerate()
        .map(|(i, &h)| h as f64 / (i + 1) as f64)
        .sum();
    s / examples as f64
}

/// Recall@N and MRR@N of `model` over `test`.
///
/// Targets outside the first `n` recommendations (including items the model
/// never ranks) count zero towards both metrics.
pub fn evaluate<R: Recommender + ?Sized>(
    model: &R,
    dataset: &str,
    test: &[SessionExample],
    n: usize,
) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(invalid!("evaluate: empty test set"));
    }
    if n == 0 {
        return Err(invalid!("evaluate: cut-off N must be at least 1"));
    }
    let start = Instant::now();
    let ranks = test
        .par_iter()
        .map(|e| {
            let list = model.recommend(&e.history, n)?;
            Ok(rank_of_target(&list, e.target))
        })
        .collect::<Result<Vec<Option<usize>>>>()?;
    let mut hist = vec![0usize; n];
    let mut listed = 0usize;
    for r in ranks.into_iter().flatten() {
        listed += 1;
        if r <= n {
            hist[r - 1] += 1;
        }
    }
    let mut report = EvalReport::from_histogram(&model.id(), dataset, hist, test.len());
    report.coverage = listed as f64 / test.len() as f64;
    report.wall_clock_secs = start.elapsed().as_secs_f64();
    Ok(report)
}

#[cfg(test)]
mod tests;
