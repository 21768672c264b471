//! Mini-batch Adam loop shared by the generator and the re-ranker.
//!
//! Per-example gradients are computed in fixed-size chunks that may run on
//! any thread; chunk results are summed in chunk order, so a run is
//! bit-reproducible regardless of the thread count.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{Adam, AdamConfig, ParamSet, Real, RngSeed};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Validate every this many optimizer steps (and once at the end).
    pub eval_every: u64,
    pub validation_fraction: f64,
    /// Global gradient-norm clip; off when `None`.
    pub clip: Option<f64>,
    /// Examples per gradient work unit. Part of the reduction order, so
    /// changing it changes results in the last bits.
    pub grad_chunk: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            batch_size: 512,
            epochs: 5,
            seed: 42,
            eval_every: 1000,
            validation_fraction: 0.05,
            clip: None,
            grad_chunk: 64,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }

    pub fn seed(&self) -> RngSeed {
        RngSeed(self.seed)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if self.batch_size == 0 || self.grad_chunk == 0 || self.eval_every == 0 {
            return Err(Error::Config(
                "batch_size, grad_chunk and eval_every must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::Config(format!(
                "validation_fraction {} not in [0, 1)",
                self.validation_fraction
            )));
        }
        if let Some(c) = self.clip {
            if !(c > 0.0) {
                return Err(Error::Config(format!("clip must be positive, got {c}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationPoint {
    pub step: u64,
    pub epoch: usize,
    pub recall_at_5: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub train_examples: usize,
    pub validation_examples: usize,
    pub steps: u64,
    pub first_batch_loss: Option<f64>,
    pub epoch_loss: Vec<f64>,
    pub validation: Vec<ValidationPoint>,
    /// Step of the returned parameters; `None` when no validation ran.
    pub best_step: Option<u64>,
    pub best_recall_at_5: Option<f64>,
}

impl TrainingLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("step,epoch,recall_at_5\n");
        for p in &self.validation {
            s.push_str(&format!("{},{},{:.6}\n", p.step, p.epoch, p.recall_at_5));
        }
        s
    }
}

/// Seeded split of `0..n` into (train, validation) index lists, both sorted.
pub fn split_validation(n: usize, fraction: f64, seed: RngSeed) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seed.substream("split"));
    let n_val = ((n as f64) * fraction).round() as usize;
    let mut val = idx[..n_val].to_vec();
    let mut train = idx[n_val..].to_vec();
    val.sort_unstable();
    train.sort_unstable();
    (train, val)
}

/// Trains `params` over `examples` (opaque example ids).
///
/// `loss_grad(params, example, grads)` returns the example's loss and adds
/// its gradient into `grads`. `validate(params)` returns Recall@5, or `None`
/// when there is nothing to validate on; the best-scoring parameters are
/// returned, or the final ones if validation never ran.
pub(crate) fn train<T, P, L, V>(
    mut params: P,
    examples: &[usize],
    cfg: &TrainConfig,
    loss_grad: L,
    mut validate: V,
) -> Result<(P, TrainingLog)>
where
    T: Real,
    P: ParamSet<T> + Clone + Send + Sync,
    L: Fn(&P, usize, &mut P) -> Result<f64> + Sync,
    V: FnMut(&P) -> Result<Option<f64>>,
{
    cfg.validate()?;
    let mut log = TrainingLog {
        train_examples: examples.len(),
        ..TrainingLog::default()
    };
    if cfg.epochs == 0 || examples.is_empty() {
        return Ok((params, log));
    }

    let mut adam: Adam<T> = Adam::new(cfg.adam(), &params);
    let mut shuffle = cfg.seed().substream("shuffle");
    let mut order = examples.to_vec();
    let mut best: Option<(f64, u64, P)> = None;
    let mut step = 0u64;
    let mut last_validated = 0u64;

    let mut check = |params: &P,
                     step: u64,
                     epoch: usize,
                     log: &mut TrainingLog,
                     best: &mut Option<(f64, u64, P)>|
     -> Result<()> {
        if let Some(r) = validate(params)? {
            log::info!("step {step} (epoch {epoch}): validation recall@5 = {r:.4}");
            log.validation.push(ValidationPoint {
                step,
                epoch,
                recall_at_5: r,
            });
            if best.as_ref().is_none_or(|(b, _, _)| r > *b) {
                *best = Some((r, step, params.clone()));
            }
        }
        Ok(())
    };

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let parts: Vec<Result<(P, f64)>> = batch
                .par_chunks(cfg.grad_chunk)
                .map(|chunk| {
                    let mut g = params.zeroed();
                    let mut loss = 0.0;
                    for &ex in chunk {
                        loss += loss_grad(&params, ex, &mut g)?;
                    }
                    Ok((g, loss))
                })
                .collect();
            let mut grads: Option<P> = None;
            let mut batch_loss = 0.0;
            for part in parts {
                let (g, l) = part?;
                batch_loss += l;
                match grads.as_mut() {
                    None => grads = Some(g),
                    Some(acc) => acc.accumulate(&g),
                }
            }
            let mut grads = grads.expect("non-empty batch");
            let mean_loss = batch_loss / batch.len() as f64;
            if !mean_loss.is_finite() {
                return Err(Error::Diverged {
                    step,
                    loss: mean_loss,
                });
            }
            log.first_batch_loss.get_or_insert(mean_loss);
            epoch_loss += batch_loss;
            grads.scale(T::of(1.0 / batch.len() as f64));
            if let Some(max_norm) = cfg.clip {
                let norm = grads.global_norm();
                if norm > max_norm {
                    grads.scale(T::of(max_norm / norm));
                }
            }
            adam.step(&mut params, &grads)?;
            step += 1;
            if step.is_multiple_of(cfg.eval_every) {
                check(&params, step, epoch, &mut log, &mut best)?;
                last_validated = step;
            }
        }
        let mean = epoch_loss / order.len() as f64;
        log::info!("epoch {epoch}: mean loss {mean:.5}");
        log.epoch_loss.push(mean);
    }
    if last_validated != step {
        check(&params, step, cfg.epochs, &mut log, &mut best)?;
    }
    log.steps = step;
    if !params.all_finite() {
        return Err(Error::Diverged {
            step,
            loss: f64::NAN,
        });
    }
    match best {
        Some((r, s, p)) => {
            log.best_step = Some(s);
            log.best_recall_at_5 = Some(r);
            Ok((p, log))
        }
        None => Ok((params, log)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_seeded_and_disjoint() {
        let (t, v) = split_validation(100, 0.05, RngSeed(1));
        assert_eq!(v.len(), 5);
        assert_eq!(t.len(), 95);
        assert!(v.iter().all(|i| !t.contains(i)));
        assert_eq!(split_validation(100, 0.05, RngSeed(1)), (t, v));
    }

    #[test]
    fn config_validation() {
        let bad = TrainConfig {
            lr: 0.0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!(TrainConfig::default().validate().is_ok());
    }
}
