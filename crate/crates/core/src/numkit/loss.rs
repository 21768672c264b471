use crate::error::{invalid, Result};

use super::Real;

/// Max-subtracted softmax.
pub fn softmax<T: Real>(logits: &[T]) -> Vec<T> {
    let max = logits
        .iter()
        .copied()
        .fold(T::neg_infinity(), |a, b| if b > a { b } else { a });
    let mut out: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: T = out.iter().copied().sum();
    out.iter_mut().for_each(|p| *p /= sum);
    out
}

/// `log softmax(logits)[index]`, computed via log-sum-exp.
pub fn log_softmax_at<T: Real>(logits: &[T], index: usize) -> T {
    let max = logits
        .iter()
        .copied()
        .fold(T::neg_infinity(), |a, b| if b > a { b } else { a });
    let sum: T = logits.iter().map(|&z| (z - max).exp()).sum();
    logits[index] - max - sum.ln()
}

/// Cross-entropy of `softmax(logits)` against `target`; returns `(loss, probs)`.
pub fn softmax_xent<T: Real>(logits: &[T], target: usize) -> Result<(T, Vec<T>)> {
    if logits.is_empty() {
        return Err(invalid!("softmax_xent: empty logits"));
    }
    if target >= logits.len() {
        return Err(invalid!(
            "softmax_xent: target {target} out of range for {} logits",
            logits.len()
        ));
    }
    let loss = -log_softmax_at(logits, target);
    Ok((loss, softmax(logits)))
}

/// `probs - onehot(target)`.
pub fn softmax_xent_backward<T: Real>(probs: &[T], target: usize) -> Vec<T> {
    let mut g = probs.to_vec();
    g[target] -= T::one();
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_logits() {
        let (loss, probs) = softmax_xent(&[0.7f64; 4], 2).unwrap();
        assert!((loss - 4f64.ln()).abs() < 1e-12);
        assert!((loss - 1.386294).abs() < 1e-6);
        for p in probs {
            assert!((p - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn saturated_logits_do_not_overflow() {
        let (loss, probs) = softmax_xent(&[30.0f32, -30.0], 0).unwrap();
        assert!(loss.abs() < 1e-6);
        assert!((probs[0] - 1.0).abs() < 1e-6 && probs[1] < 1e-6);
        let (loss, _) = softmax_xent(&[30.0f32, -30.0], 1).unwrap();
        assert!((loss - 60.0).abs() < 1e-4);
        assert!(softmax_xent(&[1e30f32, -1e30], 1).unwrap().0.is_finite());
    }

    #[test]
    fn matches_direct_formula() {
        // Hand evaluation: e^1, e^2, e^3.
        let (e1, e2, e3) = (1f64.exp(), 2f64.exp(), 3f64.exp());
        let z = e1 + e2 + e3;
        let (loss, probs) = softmax_xent(&[1.0f64, 2.0, 3.0], 0).unwrap();
        assert!((loss - (z / e1).ln()).abs() < 1e-12);
        assert!((loss - 2.407606).abs() < 1e-6);
        let g = softmax_xent_backward(&probs, 0);
        let expected = [e1 / z - 1.0, e2 / z, e3 / z];
        for (a, b) in g.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn target_out_of_range() {
        assert!(softmax_xent(&[1.0f64, 2.0], 2).is_err());
        assert!(softmax_xent::<f64>(&[], 0).is_err());
    }

    proptest! {
        #[test]
        fn probs_form_a_distribution(logits in prop::collection::vec(-50.0f32..50.0, 1..40)) {
            let (_, probs) = softmax_xent(&logits, 0).unwrap();
            let sum: f32 = probs.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-6);
            prop_assert!(probs.iter().all(|&p| (0.0..=1.0).contains(&p)));
        }
    }
}
