//! Second stage: re-scores the generator's top-k candidates.
//!
//! ```text
//! h_u = E_STAMP(history)                    (own weights, own embeddings V)
//! h_e = tanh(W_e1ᵀ tanh(W_e2ᵀh_u + b_e2) + b_e1)
//! h_r = tanh(W_r1ᵀ tanh(W_r2ᵀh_u + b_r2) + b_r1)
//! s_i = V_{y_i}·h_e + W_CR[r_i]·h_r         (r_i = position of y_i in C)
//! P(y_i) = softmax(s)_i
//! ```
//!
//! `W_CR` holds one learned vector per rank position, shared by every
//! candidate list. With `cre_enabled = false` the second term is dropped.

mod cache;
mod model;
mod pipeline;
mod train;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numkit::{xavier_init_with, Matrix, ParamSet, Real};
use crate::stampgen::{EncoderKind, StampConfig, StampParams};

pub use cache::CandidateCache;
pub use model::{forward, rerank_loss, rerank_scores, RerankForward};
pub use pipeline::{compose_final, infer, Reranker, TwoStage};
pub use train::{train_reranker, RerankerTrainingLog};

/// Which list the validation Recall@5 is measured on during training.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionScope {
    /// The composed list: re-ranked candidates followed by the tail.
    #[default]
    ComposedList,
    /// The re-ranked candidates alone.
    CandidatesOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RerankerConfig {
    /// Number of generator candidates to re-rank.
    pub k: usize,
    pub d: usize,
    /// Width of the rank embeddings; `None` means `d`.
    pub d_cre: Option<usize>,
    pub cre_enabled: bool,
    /// Consecutive ranks sharing one rank embedding.
    pub cre_stride: usize,
    pub attention_normalized: bool,
    pub emb_init_std: f64,
    pub weight_init_std: f64,
    pub selection: SelectionScope,
}

impl Default for RerankerConfig {
    fn default() -> Self {
        let enc = StampConfig::default();
        Self {
            k: 100,
            d: enc.d,
            d_cre: None,
            cre_enabled: true,
            cre_stride: 1,
            attention_normalized: enc.attention_normalized,
            emb_init_std: enc.emb_init_std,
            weight_init_std: enc.weight_init_std,
            selection: SelectionScope::default(),
        }
    }
}

impl RerankerConfig {
    pub fn encoder(&self) -> StampConfig {
        StampConfig {
            kind: EncoderKind::Stamp,
            d: self.d,
            attention_normalized: self.attention_normalized,
            emb_init_std: self.emb_init_std,
            weight_init_std: self.weight_init_std,
        }
    }

    pub fn d_cre(&self) -> usize {
        self.d_cre.unwrap_or(self.d)
    }

    /// Rows of `W_CR`.
    pub fn cre_rows(&self) -> usize {
        self.k.div_ceil(self.cre_stride)
    }

    /// The `W_CR` row used for candidate position `pos`.
    #[inline]
    pub fn cre_row(&self, pos: usize) -> usize {
        pos / self.cre_stride
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(invalid!("re-ranker k must be at least 1"));
        }
        if self.d_cre == Some(0) {
            return Err(invalid!("d_cre must be at least 1"));
        }
        if self.cre_stride == 0 {
            return Err(invalid!("cre_stride must be at least 1"));
        }
        self.encoder().validate()
    }
}

/// Encoder, the two scoring MLPs and the rank-embedding matrix.
///
/// The encoder's item embeddings double as the candidate vectors `V_y`.
#[derive(Clone, Debug, PartialEq)]
pub struct RerankerParams<T> {
    pub encoder: StampParams<T>,
    pub w_e2: Matrix<T>,
    pub b_e2: Matrix<T>,
    pub w_e1: Matrix<T>,
    pub b_e1: Matrix<T>,
    pub w_r2: Matrix<T>,
    pub b_r2: Matrix<T>,
    /// `d × d_CRE`.
    pub w_r1: Matrix<T>,
    pub b_r1: Matrix<T>,
    /// `ceil(k / stride) × d_CRE`.
    pub w_cr: Matrix<T>,
}

impl<T: Real> RerankerParams<T> {
    pub fn zeros(num_items: usize, cfg: &RerankerConfig) -> Self {
        let (d, dc) = (cfg.d, cfg.d_cre());
        Self {
            encoder: StampParams::zeros(num_items, d),
            w_e2: Matrix::zeros(d, d),
            b_e2: Matrix::zeros(1, d),
            w_e1: Matrix::zeros(d, d),
            b_e1: Matrix::zeros(1, d),
            w_r2: Matrix::zeros(d, d),
            b_r2: Matrix::zeros(1, d),
            w_r1: Matrix::zeros(d, dc),
            b_r1: Matrix::zeros(1, dc),
            w_cr: Matrix::zeros(cfg.cre_rows(), dc),
        }
    }

    /// Encoder as in the generator; Xavier-uniform MLP and rank-embedding
    /// weights; zero biases.
    pub fn init<R: Rng + ?Sized>(num_items: usize, cfg: &RerankerConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let (d, dc) = (cfg.d, cfg.d_cre());
        let encoder = StampParams::init(num_items, &cfg.encoder(), rng)?;
        Ok(Self {
            encoder,
            w_e2: xavier_init_with(d, d, rng)?,
            b_e2: Matrix::zeros(1, d),
            w_e1: xavier_init_with(d, d, rng)?,
            b_e1: Matrix::zeros(1, d),
            w_r2: xavier_init_with(d, d, rng)?,
            b_r2: Matrix::zeros(1, d),
            w_r1: xavier_init_with(d, dc, rng)?,
            b_r1: Matrix::zeros(1, dc),
            w_cr: xavier_init_with(cfg.cre_rows(), dc, rng)?,
        })
    }

    pub fn num_items(&self) -> usize {
        self.encoder.num_items()
    }

    pub fn cast<U: Real>(&self) -> RerankerParams<U> {
        RerankerParams {
            encoder: self.encoder.cast(),
            w_e2: self.w_e2.cast(),
            b_e2: self.b_e2.cast(),
            w_e1: self.w_e1.cast(),
            b_e1: self.b_e1.cast(),
            w_r2: self.w_r2.cast(),
            b_r2: self.b_r2.cast(),
            w_r1: self.w_r1.cast(),
            b_r1: self.b_r1.cast(),
            w_cr: self.w_cr.cast(),
        }
    }
}

impl<T: Real> ParamSet<T> for RerankerParams<T> {
    fn tensors(&self) -> Vec<(&'static str, &Matrix<T>)> {
        let mut v = self.encoder.tensors();
        v.extend([
            ("mlp_e_w2", &self.w_e2),
            ("mlp_e_b2", &self.b_e2),
            ("mlp_e_w1", &self.w_e1),
            ("mlp_e_b1", &self.b_e1),
            ("mlp_r_w2", &self.w_r2),
            ("mlp_r_b2", &self.b_r2),
            ("mlp_r_w1", &self.w_r1),
            ("mlp_r_b1", &self.b_r1),
            ("cre", &self.w_cr),
        ]);
        v
    }

    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Matrix<T>)> {
        let mut v = self.encoder.tensors_mut();
        v.extend([
            ("mlp_e_w2", &mut self.w_e2),
            ("mlp_e_b2", &mut self.b_e2),
            ("mlp_e_w1", &mut self.w_e1),
            ("mlp_e_b1", &mut self.b_e1),
            ("mlp_r_w2", &mut self.w_r2),
            ("mlp_r_b2", &mut self.b_r2),
            ("mlp_r_w1", &mut self.w_r1),
            ("mlp_r_b1", &mut self.b_r1),
            ("cre", &mut self.w_cr),
        ]);
        v
    }
}
