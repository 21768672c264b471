use serde::{Deserialize, Serialize};

use crate::corpus::ProcessedCorpus;
use crate::error::{invalid, Result};
use crate::generator::CandidateGenerator;
use crate::reranker::{train_reranker, CandidateCache, RerankerConfig, RerankerTrainingLog, TwoStage};
use crate::training::TrainConfig;

use super::{evaluate, Baseline, EvalReport};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KPoint {
    pub k: usize,
    /// Training examples with the target in the top k.
    pub training_examples: usize,
    pub coverage: f64,
    pub report: EvalReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KSweep {
    pub generator: EvalReport,
    pub points: Vec<KPoint>,
    /// k with the highest recall (smallest on ties).
    pub best_k: usize,
    /// Smallest k whose recall is within `tolerance` of the best; past it the
    /// curve is flat or falling.
    pub plateau_from: usize,
    pub tolerance: f64,
}

impl KSweep {
    pub fn to_csv(&self) -> String {
        let n = self.generator.n;
        let mut s = format!("k,training_examples,coverage,recall_at_{n},mrr_at_{n}\n");
        for p in &self.points {
            s.push_str(&format!(
                "{},{},{:.6},{:.6},{:.6}\n",
                p.k, p.training_examples, p.coverage, p.report.recall, p.report.mrr
            ));
        }
        s
    }
}

/// Trains one re-ranker per `k` (otherwise identical configuration) and
/// evaluates each pipeline at cut-off `n` on the test split.
pub fn sweep_k<G: CandidateGenerator + ?Sized>(
    g: &G,
    corpus: &ProcessedCorpus,
    base: &RerankerConfig,
    train_cfg: &TrainConfig,
    ks: &[usize],
    n: usize,
    tolerance: f64,
) -> Result<KSweep> {
    if ks.is_empty() {
        return Err(invalid!("sweep-k: no k values given"));
    }
    let generator = evaluate(&Baseline(g), &corpus.dataset, &corpus.test, n)?;
    // one generator pass serves every k
    let depth = ks.iter().copied().max().unwrap_or(1).max(5);
    let cache = CandidateCache::build(g, corpus, depth);
    let mut points = Vec::with_capacity(ks.len());
    for &k in ks {
        log::info!("sweep-k: training with k = {k}");
        let cfg = RerankerConfig { k, ..base.clone() };
        let (reranker, log) = train_reranker(g, corpus, &cfg, train_cfg, Some(&cache))?;
        let report = evaluate(&TwoStage::new(g, reranker), &corpus.dataset, &corpus.test, n)?;
        points.push(KPoint {
            k,
            training_examples: log.surviving_examples,
            coverage: log.coverage,
            report,
        });
    }
    let best = points
        .iter()
        .map(|p| p.report.recall)
        .fold(f64::NEG_INFINITY, f64::max);
    let best_k = points.iter().find(|p| p.report.recall == best).map_or(0, |p| p.k);
    let plateau_from = points
        .iter()
        .find(|p| p.report.recall >= best - tolerance)
        .map_or(0, |p| p.k);
    Ok(KSweep {
        generator,
        points,
        best_k,
        plateau_from,
        tolerance,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationArm {
    pub log: RerankerTrainingLog,
    pub report: EvalReport,
}

/// The same re-ranker trained with and without rank embeddings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ablation {
    pub generator: EvalReport,
    pub rr: AblationArm,
    pub rrcre: AblationArm,
}

impl Ablation {
    /// Validation Recall@5 per check, both arms side by side.
    pub fn curve_csv(&self) -> String {
        let mut s = String::from("step,epoch,rr_recall_at_5,rrcre_recall_at_5\n");
        let (a, b) = (&self.rr.log.training.validation, &self.rrcre.log.training.validation);
        for (x, y) in a.iter().zip(b) {
            debug_assert_eq!(x.step, y.step);
            s.push_str(&format!("{},{},{:.6},{:.6}\n", x.step, x.epoch, x.recall_at_5, y.recall_at_5));
        }
        s
    }
}

/// Trains twice from identical seeds, differing only in `cre_enabled`, and
/// evaluates both pipelines at cut-off `n`.
pub fn ablate_cre<G: CandidateGenerator + ?Sized>(
    g: &G,
    corpus: &ProcessedCorpus,
    base: &RerankerConfig,
    train_cfg: &TrainConfig,
    n: usize,
) -> Result<Ablation> {
    let generator = evaluate(&Baseline(g), &corpus.dataset, &corpus.test, n)?;
    let cache = CandidateCache::build(g, corpus, base.k.max(5));
    let arm = |cre_enabled: bool| -> Result<AblationArm> {
        let cfg = RerankerConfig {
            cre_enabled,
            ..base.clone()
        };
        log::info!("ablate-cre: training with cre_enabled = {cre_enabled}");
        let (reranker, log) = train_reranker(g, corpus, &cfg, train_cfg, Some(&cache))?;
        let report = evaluate(&TwoStage::new(g, reranker), &corpus.dataset, &corpus.test, n)?;
        Ok(AblationArm { log, report })
    };
    let rr = arm(false)?;
    let rrcre = arm(true)?;
    Ok(Ablation { generator, rr, rrcre })
}
