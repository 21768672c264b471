use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Result};

use super::{Matrix, Real};

/// Root seed. Every random stream in the crate derives from one of these.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RngSeed(pub u64);

impl RngSeed {
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    /// Independent named stream (`"init"`, `"shuffle"`, `"split"`, ...).
    pub fn substream(self, name: &str) -> ChaCha8Rng {
        let digest = Sha256::digest(name.as_bytes());
        let mut id = [0u8; 8];
        id.copy_from_slice(&digest[..8]);
        let mut rng = ChaCha8Rng::seed_from_u64(self.0);
        rng.set_stream(u64::from_le_bytes(id));
        rng
    }
}

/// Glorot-uniform matrix: entries in `±sqrt(6 / (rows + cols))`.
pub fn xavier_init<T: Real>(rows: usize, cols: usize, seed: RngSeed) -> Result<Matrix<T>> {
    xavier_init_with(rows, cols, &mut seed.rng())
}

pub fn xavier_init_with<T: Real, R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    rng: &mut R,
) -> Result<Matrix<T>> {
    if rows == 0 || cols == 0 {
        return Err(invalid!("xavier_init: zero dimension {rows}x{cols}"));
    }
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| T::of(rng.gen_range(-bound..=bound)))
        .collect();
    Matrix::from_vec(rows, cols, data)
}

/// Entries drawn from `N(0, std²)`.
pub fn normal_init<T: Real, R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    std: f64,
    rng: &mut R,
) -> Result<Matrix<T>> {
    if rows == 0 || cols == 0 {
        return Err(invalid!("normal_init: zero dimension {rows}x{cols}"));
    }
    let dist = Normal::new(0.0, std).map_err(|e| invalid!("normal_init: {e}"))?;
    let data = (0..rows * cols).map(|_| T::of(dist.sample(rng))).collect();
    Matrix::from_vec(rows, cols, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_entry_bound() {
        let m: Matrix<f64> = xavier_init(1, 1, RngSeed(7)).unwrap();
        assert!(m.get(0, 0).abs() <= 3f64.sqrt());
    }

    #[test]
    fn four_by_two_bound() {
        for s in 0..20 {
            let m: Matrix<f32> = xavier_init(4, 2, RngSeed(s)).unwrap();
            assert!(m.as_slice().iter().all(|x| x.abs() <= 1.0));
        }
    }

    #[test]
    fn large_sample_mean_is_near_zero() {
        let m: Matrix<f64> = xavier_init(100, 100, RngSeed(42)).unwrap();
        let mean = m.as_slice().iter().sum::<f64>() / m.len() as f64;
        // Frozen from the seed-42 stream.
        assert!(mean.abs() < 0.01, "mean = {mean}");
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(xavier_init::<f32>(0, 3, RngSeed(1)).is_err());
        assert!(xavier_init::<f32>(3, 0, RngSeed(1)).is_err());
    }

    #[test]
    fn deterministic_streams() {
        let a: Matrix<f32> = xavier_init(5, 6, RngSeed(3)).unwrap();
        let b: Matrix<f32> = xavier_init(5, 6, RngSeed(3)).unwrap();
        assert_eq!(a, b);
        let x: u64 = RngSeed(3).substream("shuffle").gen();
        let y: u64 = RngSeed(3).substream("split").gen();
        let z: u64 = RngSeed(3).substream("shuffle").gen();
        assert_ne!(x, y);
        assert_eq!(x, z);
    }
}
