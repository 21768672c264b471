use std::borrow::Cow;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::ProcessedCorpus;
use crate::error::{Error, Result};
use crate::generator::CandidateGenerator;
use crate::numkit::ParamSet;
use crate::training::{self, split_validation, TrainConfig, TrainingLog};

use super::cache::{generate_lists, CandidateCache};
use super::model::rerank_loss;
use super::pipeline::Reranker;
use super::{RerankerConfig, RerankerParams, SelectionScope};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RerankerTrainingLog {
    pub k: usize,
    /// Training-split examples offered to the filter.
    pub candidate_examples: usize,
    /// Those whose target is among the generator's top k.
    pub surviving_examples: usize,
    /// `surviving / candidate`: the generator's Recall@k on the training split.
    pub coverage: f64,
    pub training: TrainingLog,
}

/// Depth of generator lists needed for training and Recall@5 validation.
pub(crate) fn list_depth(cfg: &RerankerConfig) -> usize {
    cfg.k.max(5)
}

/// Trains a re-ranker on top of the frozen generator `g`.
///
/// Only examples whose target is among `g`'s top `k` are trained on, with
/// the target's position in that list as the label. Validation examples
/// are a seeded sample of all training examples and are scored end to end.
/// `cache`, when given, must have been built from the same generator and
/// corpus; it replaces querying `g` and changes nothing else.
pub fn train_reranker<G: CandidateGenerator + ?Sized>(
    g: &G,
    corpus: &ProcessedCorpus,
    cfg: &RerankerConfig,
    train_cfg: &TrainConfig,
    cache: Option<&CandidateCache>,
) -> Result<(Reranker, RerankerTrainingLog)> {
    cfg.validate()?;
    train_cfg.validate()?;
    if corpus.train.is_empty() {
        return Err(Error::EmptyCorpus("no training examples".into()));
    }
    let depth = list_depth(cfg);
    let lists: Cow<[Vec<u32>]> = match cache {
        Some(c) => {
            c.check(&g.fingerprint(), &corpus.fingerprint(), depth)?;
            if c.lists.len() != corpus.train.len() {
                return Err(Error::Config("candidate cache does not cover the corpus".into()));
            }
            if c.depth == depth {
                Cow::Borrowed(&c.lists[..])
            } else {
                Cow::Owned(c.lists.iter().map(|l| l[..l.len().min(depth)].to_vec()).collect())
            }
        }
        None => Cow::Owned(generate_lists(g, corpus, depth)),
    };

    let (train_idx, val_idx) =
        split_validation(corpus.train.len(), train_cfg.validation_fraction, train_cfg.seed());
    let survivors: Vec<(usize, usize)> = train_idx
        .iter()
        .filter_map(|&i| {
            let list = &lists[i];
            let top = &list[..cfg.k.min(list.len())];
            top.iter()
                .position(|&y| y == corpus.train[i].target)
                .map(|pos| (i, pos))
        })
        .collect();
    let coverage = if train_idx.is_empty() {
        0.0
    } else {
        survivors.len() as f64 / train_idx.len() as f64
    };
    log::info!(
        "re-ranker k={}: {} of {} training examples have the target in the top k (coverage {:.4})",
        cfg.k,
        survivors.len(),
        train_idx.len(),
        coverage
    );
    if survivors.is_empty() {
        return Err(Error::EmptyTrainingSet {
            k: cfg.k,
            coverage,
            examples: train_idx.len(),
        });
    }

    let params: RerankerParams<f32> =
        RerankerParams::init(corpus.num_items(), cfg, &mut train_cfg.seed().substream("init"))?;
    log::info!("re-ranker has {} parameters", params.num_params());
    let ids: Vec<usize> = (0..survivors.len()).collect();
    let (params, mut training) = training::train(
        params,
        &ids,
        train_cfg,
        |p, j, grads| {
            let (i, pos) = survivors[j];
            let list = &lists[i];
            let cands = &list[..cfg.k.min(list.len())];
            Ok(rerank_loss(p, cfg, &corpus.train[i].history, cands, pos, Some(grads))? as f64)
        },
        |p| {
            if val_idx.is_empty() {
                return Ok(None);
            }
            let model = Reranker::new(cfg.clone(), p.clone());
            let hits = val_idx
                .par_iter()
                .map(|&i| validation_hit(&model, &corpus.train[i].history, &lists[i], corpus.train[i].target))
                .collect::<Result<Vec<bool>>>()?;
            let n = hits.iter().filter(|&&h| h).count();
            Ok(Some(n as f64 / hits.len() as f64))
        },
    )?;
    training.validation_examples = val_idx.len();
    Ok((
        Reranker::new(cfg.clone(), params),
        RerankerTrainingLog {
            k: cfg.k,
            candidate_examples: train_idx.len(),
            surviving_examples: survivors.len(),
            coverage,
            training,
        },
    ))
}

fn validation_hit(model: &Reranker, history: &[u32], list: &[u32], target: u32) -> Result<bool> {
    let k = model.cfg.k.min(list.len());
    if k == 0 {
        return Ok(false);
    }
    let reranked = model.rerank(history, &list[..k])?;
    let top5 = match model.cfg.selection {
        SelectionScope::CandidatesOnly => reranked.iter().take(5).any(|&y| y == target),
        SelectionScope::ComposedList => reranked
            .iter()
            .chain(&list[k..])
            .take(5)
            .any(|&y| y == target),
    };
    Ok(top5)
}
