use super::{Matrix, Real};

/// A model's learnable tensors, exposed in a fixed order.
///
/// The order is part of the contract: checkpoints, optimizer state and
/// flattened gradient checks all rely on it.
pub trait ParamSet<T: Real> {
    fn tensors(&self) -> Vec<(&'static str, &Matrix<T>)>;
    fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Matrix<T>)>;

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|(_, m)| m.len()).sum()
    }

    fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for (_, m) in self.tensors() {
            out.extend(m.as_slice().iter().map(|x| x.f64()));
        }
        out
    }

    fn assign_flat(&mut self, flat: &[f64]) {
        let mut offset = 0;
        for (_, m) in self.tensors_mut() {
            for x in m.as_mut_slice() {
                *x = T::of(flat[offset]);
                offset += 1;
            }
        }
        assert_eq!(offset, flat.len(), "flat parameter vector has wrong length");
    }

    fn zero(&mut self) {
        for (_, m) in self.tensors_mut() {
            m.fill(T::zero());
        }
    }

    fn zeroed(&self) -> Self
    where
        Self: Clone,
    {
        let mut z = self.clone();
        z.zero();
        z
    }

    fn accumulate(&mut self, other: &Self) {
        for ((_, a), (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.add_assign(b);
        }
    }

    fn scale(&mut self, s: T) {
        for (_, m) in self.tensors_mut() {
            m.scale(s);
        }
    }

    fn global_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .map(|(_, m)| m.sum_sq().f64())
            .sum::<f64>()
            .sqrt()
    }

    fn all_finite(&self) -> bool {
        self.tensors().iter().all(|(_, m)| m.is_finite())
    }
}
