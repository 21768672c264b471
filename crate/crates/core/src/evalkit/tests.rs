use std::collections::HashMap;

use proptest::prelude::*;

use super::*;
use crate::reranker::RerankerConfig;
use crate::synthetic::{planted_rank, PlantedRankConfig};
use crate::training::TrainConfig;

/// Returns a stored list per history.
struct Fixed(HashMap<Vec<u32>, Vec<u32>>);

impl Recommender for Fixed {
    fn recommend(&self, history: &[u32], depth: usize) -> Result<Vec<u32>> {
        let _ = depth;
        Ok(self.0.get(history).cloned().unwrap_or_default())
    }
    fn id(&self) -> String {
        "fixed".into()
    }
}

/// One example per entry: the target sits at the given 1-based rank of a
/// 100-item list, or is absent.
fn fixture(ranks: &[Option<usize>]) -> (Fixed, Vec<SessionExample>) {
    let mut lists = HashMap::new();
    let mut test = Vec::new();
    for (i, r) in ranks.iter().enumerate() {
        let target = 1000 + i as u32;
        let mut list: Vec<u32> = (0..100).collect();
        if let Some(r) = r {
            list[r - 1] = target;
        }
        lists.insert(vec![i as u32], list);
        test.push(SessionExample::new(vec![i as u32], target));
    }
    (Fixed(lists), test)
}

#[test]
fn rank_examples() {
    assert_eq!(rank_of_target(&[7, 8, 9], 7), Some(1));
    assert_eq!(rank_of_target(&[7, 8, 9], 4), None);
    let l: Vec<u32> = (0..100).collect();
    assert_eq!(rank_of_target(&l, 19), Some(20));
    assert_eq!(rank_of_target(&[], 0), None);
}

#[test]
fn ten_example_fixture() {
    let ranks = [Some(1), Some(2), Some(3), Some(25), None, Some(1), Some(20), Some(4), Some(6), None];
    let (model, test) = fixture(&ranks);
    let r = evaluate(&model, "fixture", &test, 20).unwrap();
    assert_eq!(r.recall, 0.7);
    assert_eq!(r.mrr, 0.33);
    assert_eq!(r.hits, 7);
    assert_eq!(r.misses, 3);
    assert_eq!(r.coverage, 0.8);
    assert_eq!(r.rank_histogram[0], 2);
    assert_eq!(r.rank_histogram[19], 1);
}

#[test]
fn all_first() {
    let (model, test) = fixture(&[Some(1); 7]);
    let r = evaluate(&model, "x", &test, 20).unwrap();
    assert_eq!((r.recall, r.mrr), (1.0, 1.0));
}

#[test]
fn empty_inputs() {
    let (model, test) = fixture(&[Some(1)]);
    assert!(evaluate(&model, "x", &[], 20).is_err());
    assert!(evaluate(&model, "x", &test, 0).is_err());
}

#[test]
fn cutoff_beyond_list_length() {
    // 5-item lists: recall@50 equals recall@5
    let lists: HashMap<Vec<u32>, Vec<u32>> = (0..6u32).map(|i| (vec![i], (0..5).collect())).collect();
    let model = Fixed(lists);
    let test: Vec<SessionExample> = (0..6u32).map(|i| SessionExample::new(vec![i], i)).collect();
    let a = evaluate(&model, "x", &test, 5).unwrap();
    let b = evaluate(&model, "x", &test, 50).unwrap();
    assert_eq!(a.recall, b.recall);
    assert_eq!(a.mrr, b.mrr);
}

#[test]
fn mrr_matches_float_sum_and_survives_overflow() {
    let hist: Vec<usize> = (0..200).map(|i| (i * 7919) % 13).collect();
    let total: usize = hist.iter().sum::<usize>() + 5;
    let exact = exact_mrr(&hist, total);
    assert!((exact - float_mrr(&hist, total)).abs() < 1e-12);
    let small = [3usize, 0, 1];
    assert_eq!(exact_mrr(&small, 6), (3.0 + 1.0 / 3.0) / 6.0);
}

#[test]
fn csv_and_json() {
    let (model, test) = fixture(&[Some(1), Some(2)]);
    let r = evaluate(&model, "toy", &test, 20).unwrap();
    let csv = reports_csv(std::slice::from_ref(&r));
    assert_eq!(csv, "model,dataset,N,recall,mrr,examples\nfixed,toy,20,1.000000,0.750000,2\n");
    let back: EvalReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
    assert_eq!(back, r);
}

proptest! {
    #[test]
    fn bounded_and_order_independent(
        ranks in prop::collection::vec(prop::option::of(1usize..40), 1..60),
        seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        let (model, mut test) = fixture(&ranks);
        let a = evaluate(&model, "p", &test, 20).unwrap();
        prop_assert!(0.0 <= a.mrr && a.mrr <= a.recall && a.recall <= 1.0);
        test.shuffle(&mut crate::numkit::RngSeed(seed).rng());
        let b = evaluate(&model, "p", &test, 20).unwrap();
        prop_assert_eq!(a.untimed(), b.untimed());
    }
}

fn planted_small() -> (crate::corpus::ProcessedCorpus, crate::cfgen::CfGenerator) {
    planted_rank(&PlantedRankConfig {
        num_items: 50,
        train_sessions: 300,
        test_sessions: 100,
        ..PlantedRankConfig::default()
    })
    .unwrap()
}

fn quick() -> (RerankerConfig, TrainConfig) {
    (
        RerankerConfig { k: 10, d: 8, ..RerankerConfig::default() },
        TrainConfig { lr: 0.01, batch_size: 64, epochs: 1, seed: 5, ..TrainConfig::default() },
    )
}

#[test]
fn k_sweep_properties() {
    let (corpus, g) = planted_small();
    let (cfg, tc) = quick();
    let ks = [1, 3, 6, 10];
    let sweep = sweep_k(&g, &corpus, &cfg, &tc, &ks, 5, 0.01).unwrap();
    assert_eq!(sweep.points.len(), 4);

    // a single candidate cannot be reordered
    assert_eq!(sweep.points[0].report.recall, sweep.generator.recall);
    assert_eq!(sweep.points[0].report.mrr, sweep.generator.mrr);
    for w in sweep.points.windows(2) {
        assert!(w[0].training_examples <= w[1].training_examples);
    }
    // each point equals a run of its own
    let cfg6 = RerankerConfig { k: 6, ..cfg.clone() };
    let (r, log) = crate::reranker::train_reranker(&g, &corpus, &cfg6, &tc, None).unwrap();
    let alone = evaluate(&TwoStage::new(&g, r), &corpus.dataset, &corpus.test, 5).unwrap();
    assert_eq!(alone.untimed(), sweep.points[2].report.untimed());
    assert_eq!(log.surviving_examples, sweep.points[2].training_examples);
    assert!(ks.contains(&sweep.best_k) && ks.contains(&sweep.plateau_from));
    assert!(sweep.plateau_from <= sweep.best_k);
    assert!(sweep.to_csv().starts_with("k,training_examples,coverage,recall_at_5,mrr_at_5\n1,"));
}

#[test]
fn ablation_arms_share_filtering() {
    let (corpus, g) = planted_small();
    let (cfg, tc) = quick();
    let tc = TrainConfig { eval_every: 2, ..tc };
    let ab = ablate_cre(&g, &corpus, &cfg, &tc, 5).unwrap();
    assert_eq!(ab.rr.log.surviving_examples, ab.rrcre.log.surviving_examples);
    assert_eq!(ab.rr.report.model, "rr-i2i-cf");
    assert_eq!(ab.rrcre.report.model, "rrcre-i2i-cf");
    let curve = ab.curve_csv();
    assert_eq!(curve.lines().count(), 1 + ab.rr.log.training.validation.len());
    assert!(ab.rr.log.training.validation.len() > 1);
}

#[test]
fn svg_chart() {
    let svg = line_chart_svg(
        "recall <vs> k",
        "k",
        "recall@5",
        &[Series { name: "rrcre".into(), points: vec![(1.0, 0.2), (5.0, 0.4)] }],
    );
    assert!(svg.starts_with("<svg"));
    assert!(svg.contains("<polyline"));
    assert!(svg.contains("recall &lt;vs&gt; k"));
    assert!(line_chart_svg("empty", "x", "y", &[]).ends_with("</svg>\n"));
}
