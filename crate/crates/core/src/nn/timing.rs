use std::hint::black_box;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::activation::ActivationKind;

const WARMUP_ITERS: usize = 10;

/// Wall-clock totals for repeated elementwise passes of one activation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub activation: String,
    pub n_iters: usize,
    pub batch_size: usize,
    pub forward_ns: u128,
    pub backward_ns: u128,
}

/// Times `n_iters` forward (value) and backward (derivative) passes over a
/// fixed random batch in `[-5, 5]`, after a short untimed warm-up.
pub fn time_activation(kind: ActivationKind, n_iters: usize, batch_size: usize) -> TimingRecord {
    let n_iters = n_iters.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(0x71e);
    let xs: Vec<f64> = (0..batch_size).map(|_| rng.gen_range(-5.0..5.0)).collect();
    let mut out = vec![0.0; batch_size];

    for _ in 0..WARMUP_ITERS {
        kind.eval_slice(black_box(&xs), &mut out);
        kind.grad_slice(black_box(&xs), &mut out);
    }

    let start = Instant::now();
    for _ in 0..n_iters {
        kind.eval_slice(black_box(&xs), &mut out);
        black_box(&mut out);
    }
    let forward_ns = start.elapsed().as_nanos().max(1);

    let start = Instant::now();
    for _ in 0..n_iters {
        kind.grad_slice(black_box(&xs), &mut out);
        black_box(&mut out);
    }
    let backward_ns = start.elapsed().as_nanos().max(1);

    TimingRecord {
        activation: kind.name().to_string(),
        n_iters,
        batch_size,
        forward_ns,
        backward_ns,
    }
}
