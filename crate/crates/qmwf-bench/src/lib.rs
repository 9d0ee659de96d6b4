//! Instance generators shared by the benchmarks.

use qmwf_core::network::{QmwfConfig, QmwfModel};
use qmwf_core::rng::substream;
use qmwf_core::wavefunction::{normalize, SentenceMatrix, StateVector};
use rand::Rng;

/// Random unit-row sentence of `n` words in `m` dimensions.
pub fn random_sentence(seed: u64, n: usize, m: usize) -> SentenceMatrix {
    let mut rng = substream(seed, "bench-sentence");
    let rows: Vec<StateVector> = (0..n)
        .map(|_| {
            let v: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0) + 0.01).collect();
            normalize(&v).unwrap()
        })
        .collect();
    SentenceMatrix::new(rows).unwrap()
}

/// Model with the given shape, patch 1, linear pooling.
pub fn random_model(seed: u64, m: usize, r: usize, max_positions: usize) -> QmwfModel {
    let cfg = QmwfConfig {
        embed_dim: m,
        channels: r,
        patch_size: 1,
        shared_kernels: false,
        log_domain: false,
        epsilon: 1e-6,
        max_positions,
    };
    QmwfModel::init(cfg, seed).unwrap()
}
