use crate::corpus::SessionExample;
use crate::error::{invalid, Result};
use crate::numkit::{
    affine_tanh_backward_acc, affine_tanh_unchecked, axpy, dot, sigmoid, softmax, softmax_xent,
    softmax_xent_backward, Real,
};

use super::{EncoderKind, StampConfig, StampParams};

#[derive(Clone, Debug, PartialEq)]
pub struct AttentionOutput<T> {
    /// `Σ α_i V_xi`.
    pub a: Vec<T>,
    /// Weight per history position.
    pub alpha: Vec<T>,
    /// Sigmoid gate vector per position.
    pub gates: Vec<Vec<T>>,
}

/// Forward state of one encoded session.
#[derive(Clone, Debug, PartialEq)]
pub struct SessionEncoding<T> {
    pub h_u: Vec<T>,
    pub h_x: Vec<T>,
    pub h_a: Vec<T>,
    pub a_u: Vec<T>,
    pub m_s: Vec<T>,
    pub attention: Option<AttentionOutput<T>>,
}

/// Positions sorted by embedding contents, so sums over the history do not
/// depend on the order of the items.
fn canonical_order<T: Real>(hist: &[&[T]]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..hist.len()).collect();
    order.sort_by(|&a, &b| {
        hist[a]
            .iter()
            .zip(hist[b])
            .map(|(x, y)| x.f64().total_cmp(&y.f64()))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    order
}

pub fn attention<T: Real>(
    hist: &[&[T]],
    v_last: &[T],
    v_avg: &[T],
    p: &StampParams<T>,
    normalized: bool,
) -> Result<AttentionOutput<T>> {
    let d = p.d();
    if hist.is_empty() {
        return Err(invalid!("attention over an empty history"));
    }
    if v_last.len() != d || v_avg.len() != d || hist.iter().any(|v| v.len() != d) {
        return Err(invalid!("attention: vectors must have length {d}"));
    }
    let mut shared = p.w2.t_matvec(v_last);
    axpy(T::one(), &p.w3.t_matvec(v_avg), &mut shared);
    axpy(T::one(), p.b_att.as_slice(), &mut shared);

    let mut gates = Vec::with_capacity(hist.len());
    let mut raw = Vec::with_capacity(hist.len());
    for v in hist {
        let mut g = p.w1.t_matvec(v);
        for (gi, &si) in g.iter_mut().zip(&shared) {
            *gi = sigmoid(*gi + si);
        }
        raw.push(dot(p.w0.as_slice(), &g));
        gates.push(g);
    }
    let order = canonical_order(hist);
    let alpha = if normalized {
        let sorted: Vec<T> = order.iter().map(|&i| raw[i]).collect();
        let mut alpha = vec![T::zero(); raw.len()];
        for (&i, p) in order.iter().zip(softmax(&sorted)) {
            alpha[i] = p;
        }
        alpha
    } else {
        raw
    };
    let mut a = vec![T::zero(); d];
    for &i in &order {
        axpy(alpha[i], hist[i], &mut a);
    }
    Ok(AttentionOutput { a, alpha, gates })
}

struct AttentionGrads<T> {
    hist: Vec<Vec<T>>,
    last: Vec<T>,
    avg: Vec<T>,
}

#[allow(clippy::too_many_arguments)]
fn attention_backward<T: Real>(
    hist: &[&[T]],
    v_last: &[T],
    v_avg: &[T],
    p: &StampParams<T>,
    out: &AttentionOutput<T>,
    normalized: bool,
    g_a: &[T],
    grads: &mut StampParams<T>,
) -> AttentionGrads<T> {
    let d = p.d();
    let g_alpha: Vec<T> = hist.iter().map(|v| dot(g_a, v)).collect();
    let g_raw: Vec<T> = if normalized {
        let mean: T = out.alpha.iter().zip(&g_alpha).map(|(&a, &g)| a * g).sum();
        out.alpha.iter().zip(&g_alpha).map(|(&a, &g)| a * (g - mean)).collect()
    } else {
        g_alpha
    };

    let mut g_hist = Vec::with_capacity(hist.len());
    let mut g_shared = vec![T::zero(); d];
    let w0 = p.w0.as_slice();
    for (i, v) in hist.iter().enumerate() {
        let gate = &out.gates[i];
        axpy(g_raw[i], gate, grads.w0.as_mut_slice());
        let g_pre: Vec<T> = (0..d)
            .map(|j| g_raw[i] * w0[j] * gate[j] * (T::one() - gate[j]))
            .collect();
        grads.w1.add_outer(v, &g_pre);
        let mut gv = p.w1.matvec(&g_pre);
        axpy(out.alpha[i], g_a, &mut gv);
        g_hist.push(gv);
        axpy(T::one(), &g_pre, &mut g_shared);
    }
    grads.w2.add_outer(v_last, &g_shared);
    grads.w3.add_outer(v_avg, &g_shared);
    axpy(T::one(), &g_shared, grads.b_att.as_mut_slice());
    AttentionGrads {
        hist: g_hist,
        last: p.w2.matvec(&g_shared),
        avg: p.w3.matvec(&g_shared),
    }
}

fn check_history<T: Real>(p: &StampParams<T>, history: &[u32]) -> Result<()> {
    if history.is_empty() {
        return Err(invalid!("cannot encode an empty history"));
    }
    if let Some(&bad) = history.iter().find(|&&i| i as usize >= p.num_items()) {
        return Err(invalid!(
            "history item {bad} outside vocabulary of {}",
            p.num_items()
        ));
    }
    Ok(())
}

/// Full STAMP encoder.
pub fn encode<T: Real>(
    p: &StampParams<T>,
    history: &[u32],
    normalized: bool,
) -> Result<SessionEncoding<T>> {
    check_history(p, history)?;
    let d = p.d();
    let hist: Vec<&[T]> = history.iter().map(|&i| p.emb.row(i as usize)).collect();
    let v_last = hist[hist.len() - 1];
    let mut m_s = vec![T::zero(); d];
    for i in canonical_order(&hist) {
        axpy(T::one(), hist[i], &mut m_s);
    }
    let inv_l = T::one() / T::of(hist.len() as f64);
    m_s.iter_mut().for_each(|x| *x *= inv_l);

    let att = attention(&hist, v_last, &m_s, p, normalized)?;
    let mut a_u = att.a.clone();
    axpy(T::one(), &m_s, &mut a_u);
    let h_x = affine_tanh_unchecked(&a_u, &p.wx, p.bx.as_slice());
    let h_a = affine_tanh_unchecked(v_last, &p.wa, p.ba.as_slice());
    let h_u = h_x.iter().zip(&h_a).map(|(&x, &a)| x * a).collect();
    Ok(SessionEncoding {
        h_u,
        h_x,
        h_a,
        a_u,
        m_s,
        attention: Some(att),
    })
}

/// STMO encoder: `tanh(W_aᵀ V_x(l-1))`, last item only, no bias.
pub fn encode_stmo<T: Real>(p: &StampParams<T>, history: &[u32]) -> Result<SessionEncoding<T>> {
    check_history(p, history)?;
    let d = p.d();
    let v_last = p.emb.row(history[history.len() - 1] as usize);
    let h_u = affine_tanh_unchecked(v_last, &p.wa, &vec![T::zero(); d]);
    Ok(SessionEncoding {
        h_a: h_u.clone(),
        h_u,
        h_x: Vec::new(),
        a_u: Vec::new(),
        m_s: Vec::new(),
        attention: None,
    })
}

pub(crate) fn encode_with<T: Real>(
    p: &StampParams<T>,
    cfg: &StampConfig,
    history: &[u32],
) -> Result<SessionEncoding<T>> {
    match cfg.kind {
        EncoderKind::Stamp => encode(p, history, cfg.attention_normalized),
        EncoderKind::Stmo => encode_stmo(p, history),
    }
}

/// Accumulates the gradient of `h_u` (given as `g_hu`) into `grads`.
pub fn encode_backward<T: Real>(
    p: &StampParams<T>,
    cfg: &StampConfig,
    history: &[u32],
    enc: &SessionEncoding<T>,
    g_hu: &[T],
    grads: &mut StampParams<T>,
) {
    let last = history[history.len() - 1] as usize;
    let v_last = p.emb.row(last);
    if cfg.kind == EncoderKind::Stmo {
        let mut unused_bias = vec![T::zero(); p.d()];
        let g_v = affine_tanh_backward_acc(v_last, &p.wa, &enc.h_u, g_hu, &mut grads.wa, &mut unused_bias);
        axpy(T::one(), &g_v, grads.emb.row_mut(last));
        return;
    }

    let att = enc.attention.as_ref().expect("STAMP encoding carries attention state");
    let g_hx: Vec<T> = g_hu.iter().zip(&enc.h_a).map(|(&g, &a)| g * a).collect();
    let g_ha: Vec<T> = g_hu.iter().zip(&enc.h_x).map(|(&g, &x)| g * x).collect();
    let mut g_last = affine_tanh_backward_acc(
        v_last,
        &p.wa,
        &enc.h_a,
        &g_ha,
        &mut grads.wa,
        grads.ba.as_mut_slice(),
    );
    let g_au = affine_tanh_backward_acc(
        &enc.a_u,
        &p.wx,
        &enc.h_x,
        &g_hx,
        &mut grads.wx,
        grads.bx.as_mut_slice(),
    );

    let hist: Vec<&[T]> = history.iter().map(|&i| p.emb.row(i as usize)).collect();
    let ag = attention_backward(
        &hist,
        v_last,
        &enc.m_s,
        p,
        att,
        cfg.attention_normalized,
        &g_au,
        grads,
    );
    axpy(T::one(), &ag.last, &mut g_last);
    let mut g_ms = g_au;
    axpy(T::one(), &ag.avg, &mut g_ms);
    let inv_l = T::one() / T::of(history.len() as f64);

    for (&item, g) in history.iter().zip(&ag.hist) {
        let row = grads.emb.row_mut(item as usize);
        axpy(T::one(), g, row);
        axpy(inv_l, &g_ms, row);
    }
    axpy(T::one(), &g_last, grads.emb.row_mut(last));
}

/// `V h_u`: one logit per item.
pub fn score_full<T: Real>(p: &StampParams<T>, h_u: &[T]) -> Vec<T> {
    p.emb.matvec(h_u)
}

/// Full-softmax cross-entropy for one example; adds the gradient into
/// `grads` when given.
pub fn example_loss<T: Real>(
    p: &StampParams<T>,
    cfg: &StampConfig,
    ex: &SessionExample,
    grads: Option<&mut StampParams<T>>,
) -> Result<T> {
    let enc = encode_with(p, cfg, &ex.history)?;
    let logits = score_full(p, &enc.h_u);
    let (loss, probs) = softmax_xent(&logits, ex.target as usize)?;
    if let Some(grads) = grads {
        let g_logits = softmax_xent_backward(&probs, ex.target as usize);
        let g_hu = p.emb.t_matvec(&g_logits);
        grads.emb.add_outer(&g_logits, &enc.h_u);
        encode_backward(p, cfg, &ex.history, &enc, &g_hu, grads);
    }
    Ok(loss)
}
