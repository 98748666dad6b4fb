//! Fixtures shared by the benchmarks.

use mallows_core::{HitAndRun, Permutation};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn bench_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Chain state after `steps` transitions from the identity, so benchmarks
/// do not time the atypically ordered start.
pub fn warm_state(n: usize, beta: f64, steps: usize, seed: u64) -> Permutation {
    let mut kernel = HitAndRun::new(n, beta).expect("valid parameters");
    let mut rng = bench_rng(seed);
    let mut state = Permutation::identity(n);
    for _ in 0..steps {
        kernel.step(&mut state, &mut rng);
    }
    state
}
