use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Per-trajectory random stream.
///
/// Each trajectory owns the ChaCha stream selected by its index under a shared
/// master seed, so draws do not depend on scheduling or thread count.
#[derive(Clone, Debug)]
pub struct TrajectoryRng {
    inner: ChaCha8Rng,
}

impl TrajectoryRng {
    pub fn new(master_seed: u64, trajectory_index: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(master_seed);
        inner.set_stream(trajectory_index);
        Self { inner }
    }

    pub fn from_seed(seed: u64) -> Self {
        Self::new(seed, 0)
    }

    /// Uniform draw in `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    /// Bernoulli trial: `true` with probability `p`.
    #[inline]
    pub fn chance(&mut self, p: f64) -> bool {
        self.uniform() < p
    }
}
