//! Property tests for the invariants that hold across random inputs.

use proptest::prelude::*;
use qmwf_core::embedding::{encode_sentence, EmbeddingTable, Vocabulary};
use qmwf_core::eval::{
    mean_average_precision, mean_reciprocal_rank, p_at_1, RankedCandidates,
};
use qmwf_core::network::{forward, product_pool, QmwfConfig, QmwfModel};
use qmwf_core::tensor::{inner_product, projection_bruteforce, tensor_product, CpFactors};
use qmwf_core::wavefunction::{normalize, SentenceMatrix};

fn vector(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, len)
}

fn nonzero_vector(len: usize) -> impl Strategy<Value = Vec<f64>> {
    vector(len).prop_filter("needs usable norm", |v| {
        v.iter().map(|x| x * x).sum::<f64>() > 1e-4
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// The tensor product is linear in each argument slot.
    #[test]
    fn tensor_product_is_multilinear(
        a in vector(4),
        b in vector(4),
        c in vector(4),
        alpha in -2.0f64..2.0,
        beta in -2.0f64..2.0,
    ) {
        // (alpha·a + beta·b) ⊗ c == alpha·(a ⊗ c) + beta·(b ⊗ c)
        let combo: Vec<f64> = a.iter().zip(&b).map(|(x, y)| alpha * x + beta * y).collect();
        let lhs = tensor_product(&[combo, c.clone()]).unwrap();
        let ta = tensor_product(&[a, c.clone()]).unwrap();
        let tb = tensor_product(&[b, c]).unwrap();
        for ((l, x), y) in lhs.data().iter().zip(ta.data()).zip(tb.data()) {
            let want = alpha * x + beta * y;
            let tol = 1e-12 * want.abs().max(1.0);
            prop_assert!((l - want).abs() <= tol, "{l} vs {want}");
        }
    }

    /// Frobenius norm of a product tensor is the product of the row norms.
    #[test]
    fn product_norm_is_multiplicative(
        a in nonzero_vector(3),
        b in nonzero_vector(3),
        c in nonzero_vector(3),
    ) {
        let norms: f64 = [&a, &b, &c]
            .iter()
            .map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt())
            .product();
        let t = tensor_product(&[a, b, c]).unwrap();
        prop_assert!((t.frobenius_norm() - norms).abs() <= 1e-9 * norms.max(1.0));
    }

    /// Contracting a CP tensor against a product state equals the weighted
    /// sum of per-position inner products — the identity the network
    /// realizes.
    #[test]
    fn cp_contraction_factorizes(
        seed in 0u64..1000,
        n in 1usize..=4,
        m in 2usize..=5,
        r in 1usize..=6,
    ) {
        use qmwf_core::rng::substream;
        use rand::Rng;
        let mut rng = substream(seed, "prop-cp");
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..m).map(|_| rng.random_range(-1.0..1.0) + 0.1).collect())
            .collect();
        let mut weights = Vec::new();
        let mut factors = Vec::new();
        for _ in 0..r {
            weights.push(rng.random_range(-2.0..2.0));
            for _ in 0..n {
                factors.push((0..m).map(|_| rng.random_range(-1.0..1.0) + 0.05).collect());
            }
        }
        let f = CpFactors::new(n, m, weights, factors, false).unwrap();
        let global = qmwf_core::tensor::cp_reconstruct(&f).unwrap();
        let local = tensor_product(&rows).unwrap();
        let dense_route = inner_product(&global, &local).unwrap();
        let mut factored_route = 0.0;
        for rr in 0..r {
            let mut term = f.weights()[rr];
            for (i, row) in rows.iter().enumerate() {
                term *= f.factor(rr, i).iter().zip(row).map(|(e, x)| e * x).sum::<f64>();
            }
            factored_route += term;
        }
        let tol = 1e-9 * dense_route.abs().max(1.0);
        prop_assert!((dense_route - factored_route).abs() <= tol);
    }

    /// Scaling one channel response scales that channel's pooled product
    /// linearly and leaves the others alone.
    #[test]
    fn product_pool_scales_per_channel(
        row in prop::collection::vec(-2.0f64..2.0, 1..6),
        other in prop::collection::vec(-2.0f64..2.0, 1..6),
        c in -3.0f64..3.0,
        idx in any::<prop::sample::Index>(),
    ) {
        let base = product_pool(&[row.clone(), other.clone()]).unwrap();
        let i = idx.index(row.len());
        let mut scaled_row = row;
        scaled_row[i] *= c;
        let scaled = product_pool(&[scaled_row, other]).unwrap();
        let want = c * base[0];
        prop_assert!((scaled[0] - want).abs() <= 1e-12 * want.abs().max(1.0));
        prop_assert_eq!(scaled[1], base[1]);
    }

    /// Ranking metrics only see the order of scores, so any strictly
    /// monotone transformation leaves them unchanged.
    #[test]
    fn metrics_invariant_under_monotone_transforms(
        groups in prop::collection::vec(
            prop::collection::vec((0.0f64..1.0, any::<bool>()), 1..8),
            1..12,
        ),
        scale in 0.1f64..5.0,
        shift in -10.0f64..10.0,
    ) {
        let build = |transform: &dyn Fn(f64) -> f64| -> Vec<RankedCandidates> {
            groups
                .iter()
                .enumerate()
                .filter_map(|(i, g)| {
                    let mut scored: Vec<(f64, bool)> =
                        g.iter().map(|(s, l)| (transform(*s), *l)).collect();
                    if !scored.iter().any(|(_, l)| *l) {
                        scored[0].1 = true;
                    }
                    RankedCandidates::from_scores(&format!("q{i}"), scored).ok()
                })
                .collect()
        };
        let identity = build(&|s| s);
        let transformed = build(&|s| scale * s + shift + s.powi(3));
        prop_assert_eq!(
            mean_average_precision(&identity).unwrap(),
            mean_average_precision(&transformed).unwrap()
        );
        prop_assert_eq!(
            mean_reciprocal_rank(&identity).unwrap(),
            mean_reciprocal_rank(&transformed).unwrap()
        );
        prop_assert_eq!(p_at_1(&identity).unwrap(), p_at_1(&transformed).unwrap());
    }

    /// The word path is a pure function of the table and the tokens.
    #[test]
    fn word_encoding_is_deterministic(tokens in prop::collection::vec("[a-d]{1,3}", 1..6)) {
        let mut vocab = Vocabulary::new();
        for t in ["a", "b", "ab", "cd"] {
            vocab.add(t);
        }
        let matrix: Vec<f64> = (0..vocab.len() * 3).map(|i| (i as f64 * 0.7).sin() + 0.1).collect();
        let table = EmbeddingTable::new(vocab, 3, matrix, false).unwrap();
        let a = encode_sentence(&tokens, &table).unwrap();
        let b = encode_sentence(&tokens, &table).unwrap();
        prop_assert_eq!(a.matrix.rows(), b.matrix.rows());
        prop_assert_eq!(a.token_ids, b.token_ids);
    }

    /// Forward output never contains NaN, in either pooling domain.
    #[test]
    fn forward_is_always_finite(
        seed in 0u64..500,
        log_domain in any::<bool>(),
        n in 1usize..=5,
    ) {
        use qmwf_core::rng::substream;
        use rand::Rng;
        let mut rng = substream(seed, "prop-fwd");
        let cfg = QmwfConfig {
            embed_dim: 3,
            channels: 2,
            patch_size: 2,
            shared_kernels: false,
            log_domain,
            epsilon: 1e-6,
            max_positions: 6,
        };
        let model = QmwfModel::init(cfg, seed).unwrap();
        let rows = (0..n)
            .map(|_| {
                normalize(&(0..3).map(|_| rng.random_range(-1.0..1.0) + 0.01).collect::<Vec<_>>())
                    .unwrap()
            })
            .collect();
        let s = SentenceMatrix::new(rows).unwrap();
        let repr = forward(&s, &model).unwrap();
        prop_assert!(repr.values.iter().all(|v| v.is_finite()));
    }
}

/// Sanity anchor for the `cp_contraction_factorizes` property: the projection
/// oracle agrees with the factored route on a fixed instance.
#[test]
fn bruteforce_projection_matches_factored_sum() {
    use qmwf_core::rng::substream;
    use rand::Rng;
    let mut rng = substream(99, "anchor");
    let rows: Vec<_> = (0..3)
        .map(|_| {
            normalize(&(0..4).map(|_| rng.random_range(-1.0..1.0) + 0.05).collect::<Vec<_>>())
                .unwrap()
        })
        .collect();
    let s = SentenceMatrix::new(rows).unwrap();
    let mut weights = Vec::new();
    let mut factors = Vec::new();
    for _ in 0..5 {
        weights.push(rng.random_range(-1.0..1.0));
        for _ in 0..3 {
            factors.push((0..4).map(|_| rng.random_range(-1.0..1.0)).collect());
        }
    }
    let f = CpFactors::new(3, 4, weights, factors, false).unwrap();
    let oracle = projection_bruteforce(&s, &f).unwrap();
    let mut factored = 0.0;
    for r in 0..5 {
        let mut term = f.weights()[r];
        for i in 0..3 {
            term *= f
                .factor(r, i)
                .iter()
                .zip(s.row(i).amplitudes())
                .map(|(e, x)| e * x)
                .sum::<f64>();
        }
        factored += term;
    }
    assert!((oracle - factored).abs() <= 1e-12 * factored.abs().max(1.0));
}
