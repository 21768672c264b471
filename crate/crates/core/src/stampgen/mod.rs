//! STAMP session encoder/decoder, with STMO as its last-item-only special case.
//!
//! ```text
//! m_s = mean(V_x0 .. V_x(l-1))
//! α_i = w0 · σ(W1ᵀV_xi + W2ᵀV_x(l-1) + W3ᵀm_s + b)
//! A_u = Σ α_i V_xi + m_s
//! h_x = tanh(W_xᵀA_u + b_x)
//! h_a = tanh(W_aᵀV_x(l-1) + b_a)
//! h_u = h_x ⊙ h_a
//! logits = V h_u
//! ```
//!
//! The gates `α_i` are not normalized unless `attention_normalized` is set,
//! in which case they are passed through a softmax over positions.

mod encoder;
mod train;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numkit::{normal_init, Matrix, ParamSet, Real};

pub use encoder::{
    attention, encode, encode_backward, encode_stmo, example_loss, score_full, AttentionOutput,
    SessionEncoding,
};
pub use train::{train_generator, StampModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    Stamp,
    Stmo,
}

/// Architecture switches shared by the generator and the re-ranker encoder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StampConfig {
    pub kind: EncoderKind,
    pub d: usize,
    pub attention_normalized: bool,
    /// Std-dev of the normal init for item embeddings.
    pub emb_init_std: f64,
    /// Std-dev of the normal init for encoder weight matrices.
    pub weight_init_std: f64,
}

impl Default for StampConfig {
    fn default() -> Self {
        Self {
            kind: EncoderKind::Stamp,
            d: 100,
            attention_normalized: false,
            emb_init_std: 0.002,
            weight_init_std: 0.05,
        }
    }
}

impl StampConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(invalid!("embedding size d must be at least 1"));
        }
        if !(self.emb_init_std > 0.0 && self.weight_init_std > 0.0) {
            return Err(invalid!("init std-devs must be positive"));
        }
        Ok(())
    }
}

/// Item embeddings plus attention and feed-forward weights.
///
/// `emb` holds one row per item (`|I| × d`); square weights are `d × d`
/// applied as `Wᵀx`; vectors are `1 × d`.
#[derive(Clone, Debug, PartialEq)]
pub struct StampParams<T> {
    pub emb: Matrix<T>,
    pub w1: Matrix<T>,
    pub w2: Matrix<T>,
    pub w3: Matrix<T>,
    pub w0: Matrix<T>,
    pub b_att: Matrix<T>,
    pub wx: Matrix<T>,
    pub bx: Matrix<T>,
    pub wa: Matrix<T>,
    pub ba: Matrix<T>,
}

impl<T: Real> StampParams<T> {
    pub fn zeros(num_items: usize, d: usize) -> Self {
        let sq = || Matrix::zeros(d, d);
        let vec = || Matrix::zeros(1, d);
        Self {
            emb: Matrix::zeros(num_items, d),
            w1: sq(),
            w2: sq(),
            w3: sq(),
            w0: vec(),
            b_att: vec(),
            wx: sq(),
            bx: vec(),
            wa: sq(),
            ba: vec(),
        }
    }

    /// Normal-initialized weights, zero biases.
    pub fn init<R: Rng + ?Sized>(num_items: usize, cfg: &StampConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        if num_items == 0 {
            return Err(invalid!("cannot build embeddings for an empty vocabulary"));
        }
        let d = cfg.d;
        let std = cfg.weight_init_std;
        Ok(Self {
            emb: normal_init(num_items, d, cfg.emb_init_std, rng)?,
            w1: normal_init(d, d, std, rng)?,
            w2: normal_init(d, d, std, rng)?,
            w3: normal_init(d, d, std, rng)?,
            w0: normal_init(1, d, std, rng)?,
            b_att: Matrix::zeros(1, d),
            wx: normal_init(d, d, std, rng)?,
            bx: Matrix::zeros(1, d),
            wa: normal_init(d, d, std, rng)?,
            ba: Matrix::zeros(1, d),
        })
    }

    pub fn d(&self) -> usize {
        self.emb.cols()
    }

    pub fn num_items(&self) -> usize {
        self.emb.rows()
    }

    pub fn cast<U: Real>(&self) -> StampParams<U> {
        StampParams {
            emb: self.emb.cast(),
            w1: self.w1.cast(),
            w2: self.w2.cast(),
            w3: self.w3.cast(),
            w0: self.w0.cast(),
            b_att: self.b_att.cast(),
            wx: self.wx.cast(),
            bx: self.bx.cast(),
            wa: self.wa.cast(),
            ba: self.ba.cast(),
        }
    }
}

impl<T: Real> ParamSet<T> for StampParams<T> {
    fn tensors(&self) -> Vec<(&'static str, &Matrix<T>)> {
        vec![
            ("item_emb", &self.emb),
            ("att_w1", &self.w1),
            ("att_w2", &self.w2),
            ("att_w3", &self.w3),
            ("att_w0", &self.w0),
            ("att_b", &self.b_att),
            ("ffn_wx", &self.wx),
            ("ffn_bx", &self.bx),
            ("ffn_wa", &self.wa),
            ("ffn_ba", &self.ba),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Matrix<T>)> {
        vec![
            ("item_emb", &mut self.emb),
            ("att_w1", &mut self.w1),
            ("att_w2", &mut self.w2),
            ("att_w3", &mut self.w3),
            ("att_w0", &mut self.w0),
            ("att_b", &mut self.b_att),
            ("ffn_wx", &mut self.wx),
            ("ffn_bx", &mut self.bx),
            ("ffn_wa", &mut self.wa),
            ("ffn_ba", &mut self.ba),
        ]
    }
}

#[cfg(test)]
mod tests;
