use rayon::prelude::*;

use crate::checkpoint::Checkpoint;
use crate::corpus::{ProcessedCorpus, SessionExample};
use crate::error::{Error, Result};
use crate::generator::{top_n, CandidateGenerator};
use crate::numkit::ParamSet;
use crate::training::{self, split_validation, TrainConfig, TrainingLog};

use super::encoder::{encode_with, example_loss, score_full};
use super::{EncoderKind, StampConfig, StampParams};

/// A trained STAMP (or STMO) model used as a candidate generator.
#[derive(Clone, Debug, PartialEq)]
pub struct StampModel {
    pub cfg: StampConfig,
    pub params: StampParams<f32>,
}

impl StampModel {
    pub fn new(cfg: StampConfig, params: StampParams<f32>) -> Self {
        Self { cfg, params }
    }

    /// One logit per item, or `None` for an empty or out-of-vocabulary history.
    pub fn logits(&self, history: &[u32]) -> Option<Vec<f32>> {
        let enc = encode_with(&self.params, &self.cfg, history).ok()?;
        Some(score_full(&self.params, &enc.h_u))
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint::new(self.name(), &self.cfg).with_params(&self.params)
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        ck.expect_kind(&["stamp", "stmo"])?;
        let cfg: StampConfig = ck.config()?;
        cfg.validate()?;
        let num_items = ck.tensor("item_emb")?.rows();
        let mut params = StampParams::zeros(num_items, cfg.d);
        ck.load_into(&mut params)?;
        Ok(Self::new(cfg, params))
    }
}

impl CandidateGenerator for StampModel {
    fn rank(&self, history: &[u32], depth: usize) -> Vec<u32> {
        match self.logits(history) {
            Some(l) => top_n(&l, depth),
            None => Vec::new(),
        }
    }

    fn num_items(&self) -> usize {
        self.params.num_items()
    }

    fn name(&self) -> &str {
        match self.cfg.kind {
            EncoderKind::Stamp => "stamp",
            EncoderKind::Stmo => "stmo",
        }
    }

    fn fingerprint(&self) -> String {
        self.to_checkpoint().fingerprint()
    }
}

/// Fraction of `examples` whose target is among the generator's top `n`.
pub(crate) fn recall_at<G: CandidateGenerator + ?Sized>(
    gen: &G,
    examples: &[&SessionExample],
    n: usize,
) -> f64 {
    if examples.is_empty() {
        return 0.0;
    }
    let hits: usize = examples
        .par_iter()
        .map(|e| gen.rank(&e.history, n).contains(&e.target) as usize)
        .sum();
    hits as f64 / examples.len() as f64
}

/// Trains the generator with full-softmax cross-entropy over all items.
///
/// A seeded 5% (by default) of the training examples is held out; Recall@5
/// on it is checked every `eval_every` steps and the best parameters win.
pub fn train_generator(
    corpus: &ProcessedCorpus,
    cfg: &StampConfig,
    train_cfg: &TrainConfig,
) -> Result<(StampModel, TrainingLog)> {
    cfg.validate()?;
    if corpus.train.is_empty() {
        return Err(Error::EmptyCorpus("no training examples".into()));
    }
    let params: StampParams<f32> = StampParams::init(
        corpus.num_items(),
        cfg,
        &mut train_cfg.seed().substream("init"),
    )?;
    let (train_idx, val_idx) =
        split_validation(corpus.train.len(), train_cfg.validation_fraction, train_cfg.seed());
    let val: Vec<&SessionExample> = val_idx.iter().map(|&i| &corpus.train[i]).collect();
    log::info!(
        "training {:?} generator: {} params, {} train / {} validation examples",
        cfg.kind,
        params.num_params(),
        train_idx.len(),
        val.len()
    );

    let (params, mut log) = training::train(
        params,
        &train_idx,
        train_cfg,
        |p, i, g| Ok(example_loss(p, cfg, &corpus.train[i], Some(g))? as f64),
        |p| {
            if val.is_empty() {
                return Ok(None);
            }
            let model = StampModel::new(cfg.clone(), p.clone());
            Ok(Some(recall_at(&model, &val, 5)))
        },
    )?;
    log.validation_examples = val.len();
    Ok((StampModel::new(cfg.clone(), params), log))
}
