use crate::error::{invalid, Result};
use crate::numkit::{
    affine_tanh, affine_tanh_backward_acc, axpy, dot, softmax, softmax_xent, softmax_xent_backward,
    Real,
};
use crate::stampgen::{encode, encode_backward, SessionEncoding};

use super::{RerankerConfig, RerankerParams};

/// Forward state for one (history, candidates) pair.
#[derive(Clone, Debug, PartialEq)]
pub struct RerankForward<T> {
    pub enc: SessionEncoding<T>,
    pub e_hidden: Vec<T>,
    pub h_e: Vec<T>,
    /// Present only when rank embeddings are enabled.
    pub r_hidden: Option<Vec<T>>,
    pub h_r: Option<Vec<T>>,
    /// One unnormalized score per candidate.
    pub scores: Vec<T>,
}

pub fn forward<T: Real>(
    p: &RerankerParams<T>,
    cfg: &RerankerConfig,
    history: &[u32],
    cands: &[u32],
) -> Result<RerankForward<T>> {
    if cands.is_empty() {
        return Err(invalid!("re-rank: empty candidate list"));
    }
    if cands.len() > cfg.k {
        return Err(invalid!("re-rank: {} candidates exceed k = {}", cands.len(), cfg.k));
    }
    if let Some(&bad) = cands.iter().find(|&&y| y as usize >= p.num_items()) {
        return Err(invalid!("re-rank: candidate {bad} outside the vocabulary"));
    }
    if p.w_cr.rows() < cfg.cre_rows() {
        return Err(invalid!("re-rank: W_CR has {} rows, need {}", p.w_cr.rows(), cfg.cre_rows()));
    }
    let enc = encode(&p.encoder, history, cfg.attention_normalized)?;
    let e_hidden = affine_tanh(&enc.h_u, &p.w_e2, p.b_e2.as_slice())?;
    let h_e = affine_tanh(&e_hidden, &p.w_e1, p.b_e1.as_slice())?;
    let mut scores: Vec<T> = cands
        .iter()
        .map(|&y| dot(p.encoder.emb.row(y as usize), &h_e))
        .collect();
    let (r_hidden, h_r) = if cfg.cre_enabled {
        let r_hidden = affine_tanh(&enc.h_u, &p.w_r2, p.b_r2.as_slice())?;
        let h_r = affine_tanh(&r_hidden, &p.w_r1, p.b_r1.as_slice())?;
        for (pos, s) in scores.iter_mut().enumerate() {
            *s += dot(p.w_cr.row(cfg.cre_row(pos)), &h_r);
        }
        (Some(r_hidden), Some(h_r))
    } else {
        (None, None)
    };
    Ok(RerankForward {
        enc,
        e_hidden,
        h_e,
        r_hidden,
        h_r,
        scores,
    })
}

/// Probability of each candidate, in candidate order.
pub fn rerank_scores<T: Real>(
    p: &RerankerParams<T>,
    cfg: &RerankerConfig,
    history: &[u32],
    cands: &[u32],
) -> Result<Vec<T>> {
    Ok(softmax(&forward(p, cfg, history, cands)?.scores))
}

/// Cross-entropy against the candidate at `target_pos`; adds the gradient
/// into `grads` when given.
pub fn rerank_loss<T: Real>(
    p: &RerankerParams<T>,
    cfg: &RerankerConfig,
    history: &[u32],
    cands: &[u32],
    target_pos: usize,
    grads: Option<&mut RerankerParams<T>>,
) -> Result<T> {
    let f = forward(p, cfg, history, cands)?;
    let (loss, probs) = softmax_xent(&f.scores, target_pos)?;
    let Some(g) = grads else {
        return Ok(loss);
    };
    let g_s = softmax_xent_backward(&probs, target_pos);
    let d = cfg.d;

    let mut g_he = vec![T::zero(); d];
    for (&y, &gs) in cands.iter().zip(&g_s) {
        axpy(gs, p.encoder.emb.row(y as usize), &mut g_he);
        axpy(gs, &f.h_e, g.encoder.emb.row_mut(y as usize));
    }
    let g_hidden = affine_tanh_backward_acc(
        &f.e_hidden,
        &p.w_e1,
        &f.h_e,
        &g_he,
        &mut g.w_e1,
        g.b_e1.as_mut_slice(),
    );
    let mut g_hu = affine_tanh_backward_acc(
        &f.enc.h_u,
        &p.w_e2,
        &f.e_hidden,
        &g_hidden,
        &mut g.w_e2,
        g.b_e2.as_mut_slice(),
    );

    if let (Some(r_hidden), Some(h_r)) = (&f.r_hidden, &f.h_r) {
        let mut g_hr = vec![T::zero(); h_r.len()];
        for (pos, &gs) in g_s.iter().enumerate() {
            let row = cfg.cre_row(pos);
            axpy(gs, p.w_cr.row(row), &mut g_hr);
            axpy(gs, h_r, g.w_cr.row_mut(row));
        }
        let g_rh = affine_tanh_backward_acc(
            r_hidden,
            &p.w_r1,
            h_r,
            &g_hr,
            &mut g.w_r1,
            g.b_r1.as_mut_slice(),
        );
        let g_hu_r = affine_tanh_backward_acc(
            &f.enc.h_u,
            &p.w_r2,
            r_hidden,
            &g_rh,
            &mut g.w_r2,
            g.b_r2.as_mut_slice(),
        );
        axpy(T::one(), &g_hu_r, &mut g_hu);
    }

    encode_backward(&p.encoder, &cfg.encoder(), history, &f.enc, &g_hu, &mut g.encoder);
    Ok(loss)
}
