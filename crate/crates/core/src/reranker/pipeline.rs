use crate::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::generator::CandidateGenerator;

use super::model::forward;
use super::{RerankerConfig, RerankerParams};

/// `L_Y = L_CR : C̄` where `C̄ = L_YG[k..]` and `k = |reranked|`.
///
/// `reranked` must be a permutation of `L_YG[..k]`.
pub fn compose_final(l_yg: &[u32], reranked: &[u32]) -> Result<Vec<u32>> {
    let k = reranked.len();
    if k > l_yg.len() {
        return Err(Error::Internal(format!(
            "re-ranked list has {k} items but the generator returned {}",
            l_yg.len()
        )));
    }
    let mut a = l_yg[..k].to_vec();
    let mut b = reranked.to_vec();
    a.sort_unstable();
    b.sort_unstable();
    if a != b {
        return Err(Error::Internal(
            "re-ranked list is not a permutation of the generator's top-k".into(),
        ));
    }
    let mut out = Vec::with_capacity(l_yg.len());
    out.extend_from_slice(reranked);
    out.extend_from_slice(&l_yg[k..]);
    Ok(out)
}

/// A trained re-ranker.
#[derive(Clone, Debug, PartialEq)]
pub struct Reranker {
    pub cfg: RerankerConfig,
    pub params: RerankerParams<f32>,
}

impl Reranker {
    pub fn new(cfg: RerankerConfig, params: RerankerParams<f32>) -> Self {
        Self { cfg, params }
    }

    /// `cands` reordered by descending score; ties keep generator order.
    pub fn rerank(&self, history: &[u32], cands: &[u32]) -> Result<Vec<u32>> {
        let scores = forward(&self.params, &self.cfg, history, cands)?.scores;
        let mut order: Vec<usize> = (0..cands.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        Ok(order.into_iter().map(|i| cands[i]).collect())
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint::new("reranker", &self.cfg).with_params(&self.params)
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        ck.expect_kind(&["reranker"])?;
        let cfg: RerankerConfig = ck.config()?;
        cfg.validate()?;
        let num_items = ck.tensor("item_emb")?.rows();
        let mut params = RerankerParams::zeros(num_items, &cfg);
        ck.load_into(&mut params)?;
        Ok(Self::new(cfg, params))
    }
}

/// End-to-end: `G` ranks at least `depth` items, the top `k` are re-ranked
/// and the tail is appended unchanged.
pub fn infer<G: CandidateGenerator + ?Sized>(
    generator: &G,
    reranker: &Reranker,
    history: &[u32],
    depth: usize,
) -> Result<Vec<u32>> {
    let l_yg = generator.rank(history, depth.max(reranker.cfg.k));
    let k = reranker.cfg.k.min(l_yg.len());
    if k == 0 {
        return Ok(l_yg);
    }
    let reranked = reranker.rerank(history, &l_yg[..k])?;
    compose_final(&l_yg, &reranked)
}

/// A generator paired with its re-ranker.
pub struct TwoStage<G> {
    pub generator: G,
    pub reranker: Reranker,
}

impl<G: CandidateGenerator> TwoStage<G> {
    pub fn new(generator: G, reranker: Reranker) -> Self {
        Self { generator, reranker }
    }

    pub fn recommend(&self, history: &[u32], depth: usize) -> Result<Vec<u32>> {
        infer(&self.generator, &self.reranker, history, depth)
    }
}
