use proptest::prelude::*;

use super::*;
use crate::corpus::{ProcessedCorpus, SessionExample};
use crate::generator::CandidateGenerator;
use crate::numkit::{grad_check, sigmoid, RngSeed};
use crate::training::TrainConfig;

fn small_params(num_items: usize, d: usize, seed: u64) -> StampParams<f64> {
    // Larger init than the training default so every path carries signal.
    let cfg = StampConfig {
        d,
        emb_init_std: 0.5,
        weight_init_std: 0.4,
        ..StampConfig::default()
    };
    let mut p = StampParams::init(num_items, &cfg, &mut RngSeed(seed).rng()).unwrap();
    let mut rng = RngSeed(seed + 1000).rng();
    for b in [&mut p.b_att, &mut p.bx, &mut p.ba] {
        *b = crate::numkit::normal_init(1, d, 0.3, &mut rng).unwrap();
    }
    p
}

fn cfg(d: usize, kind: EncoderKind, normalized: bool) -> StampConfig {
    StampConfig {
        kind,
        d,
        attention_normalized: normalized,
        ..StampConfig::default()
    }
}

// (Wᵀx)_j = Σ_i W[i][j] x_i, written out with explicit indices.
fn wt_x(w: &crate::numkit::Matrix<f64>, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; w.cols()];
    for j in 0..w.cols() {
        for i in 0..w.rows() {
            out[j] += w.get(i, j) * x[i];
        }
    }
    out
}

// Independent straight-line evaluation of the encoder.
fn reference_encode(p: &StampParams<f64>, history: &[u32]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let d = p.d();
    let l = history.len();
    let v = |i: usize| p.emb.row(history[i] as usize).to_vec();
    let mut ms = vec![0.0; d];
    for i in 0..l {
        for k in 0..d {
            ms[k] += v(i)[k] / l as f64;
        }
    }
    let last = v(l - 1);
    let t2 = wt_x(&p.w2, &last);
    let t3 = wt_x(&p.w3, &ms);
    let mut alpha = vec![0.0; l];
    let mut a = vec![0.0; d];
    for i in 0..l {
        let t1 = wt_x(&p.w1, &v(i));
        for k in 0..d {
            let gate = sigmoid(t1[k] + t2[k] + t3[k] + p.b_att.get(0, k));
            alpha[i] += p.w0.get(0, k) * gate;
        }
        for k in 0..d {
            a[k] += alpha[i] * v(i)[k];
        }
    }
    let au: Vec<f64> = (0..d).map(|k| a[k] + ms[k]).collect();
    let zx = wt_x(&p.wx, &au);
    let za = wt_x(&p.wa, &last);
    let hu = (0..d)
        .map(|k| (zx[k] + p.bx.get(0, k)).tanh() * (za[k] + p.ba.get(0, k)).tanh())
        .collect();
    (hu, alpha, a)
}

#[test]
fn single_item_attention() {
    let p = small_params(5, 4, 1);
    let v0 = p.emb.row(3);
    let out = attention(&[v0], v0, v0, &p, false).unwrap();
    assert_eq!(out.alpha.len(), 1);
    for k in 0..4 {
        assert!((out.a[k] - out.alpha[0] * v0[k]).abs() < 1e-15);
    }
}

#[test]
fn identical_items_get_identical_weights() {
    let p = small_params(5, 4, 2);
    let v = p.emb.row(1);
    let out = attention(&[v, v, v], v, v, &p, false).unwrap();
    assert_eq!(out.alpha[0], out.alpha[1]);
    assert_eq!(out.alpha[1], out.alpha[2]);
    let total: f64 = out.alpha.iter().sum();
    for k in 0..4 {
        assert!((out.a[k] - total * v[k]).abs() < 1e-12);
    }
}

#[test]
fn attention_rejects_bad_shapes() {
    let p = small_params(5, 4, 2);
    let v = p.emb.row(1);
    assert!(attention(&[], v, v, &p, false).is_err());
    assert!(attention(&[&v[..3]], v, v, &p, false).is_err());
}

#[test]
fn attention_and_encoder_match_reference() {
    let p = small_params(10, 4, 3);
    let history = [7u32, 2, 9];
    let (hu, alpha, a) = reference_encode(&p, &history);
    let enc = encode(&p, &history, false).unwrap();
    let att = enc.attention.as_ref().unwrap();
    for i in 0..3 {
        assert!((att.alpha[i] - alpha[i]).abs() < 1e-12);
    }
    for k in 0..4 {
        assert!((att.a[k] - a[k]).abs() < 1e-12);
        assert!((enc.h_u[k] - hu[k]).abs() < 1e-12);
        assert!((enc.h_u[k] - enc.h_x[k] * enc.h_a[k]).abs() == 0.0);
    }
}

#[test]
fn single_item_mean_is_its_embedding() {
    let p = small_params(6, 5, 4);
    let enc = encode(&p, &[4], false).unwrap();
    assert_eq!(enc.m_s, p.emb.row(4));
}

#[test]
fn zero_ffn_weights_collapse_to_biases() {
    let mut p = small_params(6, 5, 5);
    p.wx.fill(0.0);
    p.wa.fill(0.0);
    let enc = encode(&p, &[1, 2, 3], false).unwrap();
    for k in 0..5 {
        let expected = p.bx.get(0, k).tanh() * p.ba.get(0, k).tanh();
        assert!((enc.h_u[k] - expected).abs() < 1e-15);
    }
}

#[test]
fn empty_or_unknown_history() {
    let p = small_params(6, 5, 5);
    assert!(encode(&p, &[], false).is_err());
    assert!(encode(&p, &[6], false).is_err());
    assert!(encode_stmo(&p, &[]).is_err());
}

#[test]
fn stmo_uses_last_item_only() {
    let mut p = small_params(30, 6, 6);
    let a = encode_stmo(&p, &[1, 2, 3]).unwrap();
    let b = encode_stmo(&p, &[26, 3]).unwrap();
    assert_eq!(a.h_u, b.h_u);

    p.wa = crate::numkit::Matrix::identity(6);
    let e = encode_stmo(&p, &[4]).unwrap();
    for k in 0..6 {
        assert_eq!(e.h_u[k], p.emb.get(4, k).tanh());
    }
}

#[test]
fn full_scores() {
    let p = small_params(7, 3, 7);
    assert!(score_full(&p, &[0.0; 3]).iter().all(|&x| x == 0.0));
    let mut one_hot = StampParams::<f64>::zeros(3, 3);
    one_hot.emb = crate::numkit::Matrix::identity(3);
    assert_eq!(score_full(&one_hot, &[0.3, -1.0, 2.0]), vec![0.3, -1.0, 2.0]);
}

fn check_model_gradient(p: &StampParams<f64>, c: &StampConfig, examples: &[SessionExample]) -> f64 {
    let report = grad_check(
        |flat| {
            let mut q = p.clone();
            q.assign_flat(flat);
            let mut g = q.zeroed();
            let mut loss = 0.0;
            for ex in examples {
                loss += example_loss(&q, c, ex, Some(&mut g)).unwrap();
            }
            (loss, g.flatten())
        },
        &p.flatten(),
        1e-3,
    )
    .unwrap();
    report.max_rel_error
}

#[test]
fn full_model_gradient_check() {
    let examples = vec![
        SessionExample::new(vec![3, 7, 3, 12], 5),
        SessionExample::new(vec![19], 0),
        SessionExample::new(vec![4, 11], 11),
    ];
    for normalized in [false, true] {
        let p = small_params(20, 8, 8);
        let err = check_model_gradient(&p, &cfg(8, EncoderKind::Stamp, normalized), &examples);
        assert!(err < 1e-4, "normalized={normalized}: {err}");
    }
}

#[test]
fn stmo_gradient_check() {
    let p = small_params(12, 6, 9);
    let examples = vec![
        SessionExample::new(vec![1, 2], 3),
        SessionExample::new(vec![8], 8),
    ];
    let err = check_model_gradient(&p, &cfg(6, EncoderKind::Stmo, false), &examples);
    assert!(err < 1e-6, "{err}");
}

proptest! {
    #[test]
    fn invariant_to_permuting_all_but_last(
        mut prefix in prop::collection::vec(0u32..15, 1..6),
        last in 0u32..15,
        seed in 0u64..50,
        normalized in any::<bool>(),
    ) {
        let p = small_params(15, 4, seed);
        let mut h1 = prefix.clone();
        h1.push(last);
        prefix.reverse();
        prefix.rotate_left(1);
        let mut h2 = prefix;
        h2.push(last);
        let a = encode(&p, &h1, normalized).unwrap();
        let b = encode(&p, &h2, normalized).unwrap();
        prop_assert_eq!(a.h_u, b.h_u);
    }
}

/// Sessions following `next = (3 * cur + 1) mod n`.
fn rule_corpus(n: usize, sessions: usize, len: usize, seed: u64) -> ProcessedCorpus {
    use rand::Rng;
    let mut rng = RngSeed(seed).rng();
    let mut make = |count: usize| -> Vec<Vec<u32>> {
        (0..count)
            .map(|_| {
                let mut s = vec![rng.gen_range(0..n as u32)];
                while s.len() < len {
                    let cur = *s.last().unwrap();
                    s.push((3 * cur + 1) % n as u32);
                }
                s
            })
            .collect()
    };
    let train = make(sessions);
    let test = make(40);
    ProcessedCorpus::from_sessions("rule", n, train, &test)
}

fn quick_train_cfg() -> TrainConfig {
    TrainConfig {
        lr: 0.01,
        batch_size: 32,
        epochs: 5,
        seed: 3,
        eval_every: 1000,
        ..TrainConfig::default()
    }
}

#[test]
fn zero_epochs_returns_initial_params() {
    let corpus = rule_corpus(30, 20, 4, 1);
    let c = StampConfig { d: 8, ..StampConfig::default() };
    let tc = TrainConfig { epochs: 0, ..quick_train_cfg() };
    let (model, log) = train_generator(&corpus, &c, &tc).unwrap();
    let init: StampParams<f32> =
        StampParams::init(30, &c, &mut tc.seed().substream("init")).unwrap();
    assert_eq!(model.params, init);
    assert_eq!(log.steps, 0);
}

#[test]
fn learns_a_deterministic_next_item_rule() {
    let corpus = rule_corpus(50, 200, 6, 2);
    let c = StampConfig { d: 32, ..StampConfig::default() };
    let (model, log) = train_generator(&corpus, &c, &quick_train_cfg()).unwrap();

    let first = log.first_batch_loss.unwrap();
    let uniform = (50f64).ln();
    assert!((first - uniform).abs() < 0.1 * uniform, "first batch loss {first}");

    let hits = corpus
        .test
        .iter()
        .filter(|e| model.rank(&e.history, 1) == [e.target])
        .count();
    let recall1 = hits as f64 / corpus.test.len() as f64;
    assert!(recall1 >= 0.9, "recall@1 = {recall1}");
}

#[test]
fn training_is_bit_reproducible() {
    let corpus = rule_corpus(25, 40, 5, 3);
    let c = StampConfig { d: 8, ..StampConfig::default() };
    let tc = TrainConfig { epochs: 2, batch_size: 16, grad_chunk: 4, ..quick_train_cfg() };
    let (a, la) = train_generator(&corpus, &c, &tc).unwrap();
    let (b, lb) = train_generator(&corpus, &c, &tc).unwrap();
    assert_eq!(a, b);
    assert_eq!(la, lb);
    // a single-threaded pool must give the same bits
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let (s, _) = pool.install(|| train_generator(&corpus, &c, &tc)).unwrap();
    assert_eq!(a, s);
}
