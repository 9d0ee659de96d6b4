//! Convolutional realization of the sentence projection.
//!
//! Each convolution channel is one component of the CP-decomposed global
//! tensor: the kernel at position `i` of channel `r` plays the factor vector
//! `e_{r,i}`, the per-position responses are multiplied by product pooling,
//! and the channel outputs are scaled by the trainable weights `t_r`. With
//! patch size 1, unshared kernels and linear pooling, the summed output is
//! exactly the brute-force tensor projection — that identity is what the
//! verification suite checks.

use crate::error::{Error, Result};
use crate::rng::substream;
use crate::tensor::CpFactors;
use crate::wavefunction::SentenceMatrix;
use rand::Rng;

/// Model shape and pooling behavior.
#[derive(Debug, Clone, PartialEq)]
pub struct QmwfConfig {
    /// Embedding dimension M.
    pub embed_dim: usize,
    /// Convolution channels R (the CP rank).
    pub channels: usize,
    /// Words per convolution window, 1 to 3.
    pub patch_size: usize,
    /// One kernel per channel reused at every position, instead of one per
    /// (channel, position).
    pub shared_kernels: bool,
    /// Pool with summed logarithms of absolute responses instead of raw
    /// products.
    pub log_domain: bool,
    /// Additive guard inside the logarithm.
    pub epsilon: f64,
    /// Longest supported sentence, in words.
    pub max_positions: usize,
}

impl Default for QmwfConfig {
    fn default() -> Self {
        Self {
            embed_dim: 300,
            channels: 150,
            patch_size: 1,
            shared_kernels: false,
            log_domain: false,
            epsilon: 1e-6,
            max_positions: 40,
        }
    }
}

impl QmwfConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.channels == 0 {
            return Err(Error::InvalidArgument(
                "embed_dim and channels must be at least 1".into(),
            ));
        }
        if !(1..=3).contains(&self.patch_size) {
            return Err(Error::InvalidArgument(format!(
                "patch_size must be 1, 2 or 3, got {}",
                self.patch_size
            )));
        }
        if !self.epsilon.is_finite() || self.epsilon <= 0.0 {
            return Err(Error::InvalidArgument("epsilon must be positive".into()));
        }
        if self.max_positions < self.patch_size {
            return Err(Error::InvalidArgument(
                "max_positions must be at least patch_size".into(),
            ));
        }
        Ok(())
    }

    /// Length of one kernel vector.
    pub fn kernel_len(&self) -> usize {
        self.embed_dim * self.patch_size
    }

    /// Number of distinct kernel positions the model stores.
    pub fn kernel_positions(&self) -> usize {
        if self.shared_kernels {
            1
        } else {
            self.max_positions - self.patch_size + 1
        }
    }
}

/// Convolution kernels and channel output weights.
#[derive(Debug, Clone, PartialEq)]
pub struct QmwfModel {
    pub config: QmwfConfig,
    /// `kernels[r][i]` is the window-sized weight vector of channel `r` at
    /// position `i`; a single position when kernels are shared.
    pub(crate) kernels: Vec<Vec<Vec<f64>>>,
    /// Channel output weights `t_r`.
    pub(crate) out_weights: Vec<f64>,
}

impl QmwfModel {
    /// Fresh model with unit output weights and kernels uniform on
    /// ±√(3/patch_size), drawn from the `init` substream of `seed`.
    ///
    /// The bound makes each per-window response ⟨kernel, window⟩ have unit
    /// variance for unit-norm rows regardless of the embedding dimension,
    /// so products over many positions neither vanish nor explode at
    /// initialization.
    pub fn init(config: QmwfConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = substream(seed, "init");
        let bound = (3.0 / config.patch_size as f64).sqrt();
        let kernels = (0..config.channels)
            .map(|_| {
                (0..config.kernel_positions())
                    .map(|_| {
                        (0..config.kernel_len())
                            .map(|_| rng.random_range(-bound..bound))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let out_weights = vec![1.0; config.channels];
        Ok(Self {
            config,
            kernels,
            out_weights,
        })
    }

    /// Rebuilds a model from explicit parameters, validating shapes.
    pub fn from_parts(
        config: QmwfConfig,
        kernels: Vec<Vec<Vec<f64>>>,
        out_weights: Vec<f64>,
    ) -> Result<Self> {
        config.validate()?;
        if kernels.len() != config.channels || out_weights.len() != config.channels {
            return Err(Error::Dimension(format!(
                "expected {} channels, got {} kernel banks and {} output weights",
                config.channels,
                kernels.len(),
                out_weights.len()
            )));
        }
        for (r, bank) in kernels.iter().enumerate() {
            if bank.len() != config.kernel_positions() {
                return Err(Error::Dimension(format!(
                    "channel {r} has {} kernel positions, expected {}",
                    bank.len(),
                    config.kernel_positions()
                )));
            }
            for (i, k) in bank.iter().enumerate() {
                if k.len() != config.kernel_len() {
                    return Err(Error::Dimension(format!(
                        "kernel ({r},{i}) has length {}, expected {}",
                        k.len(),
                        config.kernel_len()
                    )));
                }
                if k.iter().any(|x| !x.is_finite()) {
                    return Err(Error::NonFinite(format!("kernel ({r},{i})")));
                }
            }
        }
        if out_weights.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("out_weights".into()));
        }
        Ok(Self {
            config,
            kernels,
            out_weights,
        })
    }

    pub fn kernels(&self) -> &[Vec<Vec<f64>>] {
        &self.kernels
    }

    pub fn out_weights(&self) -> &[f64] {
        &self.out_weights
    }

    /// Kernel for channel `r` at window position `i`.
    pub fn kernel(&self, r: usize, i: usize) -> &[f64] {
        if self.config.shared_kernels {
            &self.kernels[r][0]
        } else {
            &self.kernels[r][i]
        }
    }

    /// Reinterprets the kernels as CP factors over `order` positions.
    ///
    /// Only meaningful with patch size 1, where kernel and factor vectors
    /// coincide; kernel magnitudes fold into the weights.
    pub fn to_cp_factors(&self, order: usize) -> Result<CpFactors> {
        if self.config.patch_size != 1 {
            return Err(Error::InvalidArgument(
                "CP factor view requires patch_size 1".into(),
            ));
        }
        if order == 0 {
            return Err(Error::InvalidArgument("order must be at least 1".into()));
        }
        if self.config.shared_kernels {
            let factors: Vec<Vec<f64>> = self.kernels.iter().map(|bank| bank[0].clone()).collect();
            CpFactors::new(
                order,
                self.config.embed_dim,
                self.out_weights.clone(),
                factors,
                true,
            )
        } else {
            if order > self.config.kernel_positions() {
                return Err(Error::Dimension(format!(
                    "order {order} exceeds the {} kernel positions of the model",
                    self.config.kernel_positions()
                )));
            }
            let mut factors = Vec::with_capacity(self.config.channels * order);
            for bank in &self.kernels {
                for kernel in bank.iter().take(order) {
                    factors.push(kernel.clone());
                }
            }
            CpFactors::new(
                order,
                self.config.embed_dim,
                self.out_weights.clone(),
                factors,
                false,
            )
        }
    }
}

/// Sentence representation: one value per channel.
///
/// In the log domain `values[r]` is `t_r · Σ_i log(|Σ_{r,i}| + ε)` and
/// `signs[r]` carries the parity of negative responses; in the linear
/// domain `values[r] = t_r · Π_r` and `signs` is absent.
#[derive(Debug, Clone, PartialEq)]
pub struct Representation {
    pub values: Vec<f64>,
    pub signs: Option<Vec<f64>>,
}

impl Representation {
    /// Channel value with the sign parity applied.
    pub fn effective(&self, r: usize) -> f64 {
        match &self.signs {
            Some(signs) => self.values[r] * signs[r],
            None => self.values[r],
        }
    }
}

/// Concatenated window vectors: window `i` is rows `i..i+patch` joined into
/// one vector. Empty when the sentence is shorter than the patch.
pub fn window_vectors(s: &SentenceMatrix, patch: usize) -> Vec<Vec<f64>> {
    if s.len() < patch {
        return Vec::new();
    }
    (0..=s.len() - patch)
        .map(|i| {
            let mut w = Vec::with_capacity(s.dim() * patch);
            for j in 0..patch {
                w.extend_from_slice(s.row(i + j).amplitudes());
            }
            w
        })
        .collect()
}

/// Per-channel, per-window convolution responses `Σ[r][i]`.
///
/// A sentence shorter than the patch yields a single neutral window whose
/// response is 1 in every channel, so pooling is unaffected.
pub fn convolve(s: &SentenceMatrix, m: &QmwfModel) -> Result<Vec<Vec<f64>>> {
    if s.dim() != m.config.embed_dim {
        return Err(Error::Dimension(format!(
            "sentence rows have dimension {} but the model expects {}",
            s.dim(),
            m.config.embed_dim
        )));
    }
    let windows = window_vectors(s, m.config.patch_size);
    if windows.is_empty() {
        return Ok(vec![vec![1.0]; m.config.channels]);
    }
    if !m.config.shared_kernels && windows.len() > m.config.kernel_positions() {
        return Err(Error::Dimension(format!(
            "sentence yields {} windows but the model has kernels for {}",
            windows.len(),
            m.config.kernel_positions()
        )));
    }
    let sigma = (0..m.config.channels)
        .map(|r| {
            windows
                .iter()
                .enumerate()
                .map(|(i, w)| dot(m.kernel(r, i), w))
                .collect()
        })
        .collect();
    Ok(sigma)
}

/// Product pooling: the product of each channel's responses.
pub fn product_pool(sigma: &[Vec<f64>]) -> Result<Vec<f64>> {
    if sigma.is_empty() || sigma.iter().any(|row| row.is_empty()) {
        return Err(Error::Degenerate("empty convolution response".into()));
    }
    Ok(sigma.iter().map(|row| row.iter().product()).collect())
}

/// Log-domain pooling: per-channel sums of `log(|Σ| + ε)` plus the parity
/// of negative responses.
#[derive(Debug, Clone, PartialEq)]
pub struct LogPool {
    pub log_values: Vec<f64>,
    /// +1 for an even number of negative responses in the channel, −1 for odd.
    pub signs: Vec<f64>,
}

pub fn log_product_pool(sigma: &[Vec<f64>], epsilon: f64) -> Result<LogPool> {
    if sigma.is_empty() || sigma.iter().any(|row| row.is_empty()) {
        return Err(Error::Degenerate("empty convolution response".into()));
    }
    if !epsilon.is_finite() || epsilon < 0.0 {
        return Err(Error::InvalidArgument("epsilon must be non-negative".into()));
    }
    let log_values = sigma
        .iter()
        .map(|row| row.iter().map(|x| (x.abs() + epsilon).ln()).sum())
        .collect();
    let signs = sigma
        .iter()
        .map(|row| {
            let negatives = row.iter().filter(|&&x| x < 0.0).count();
            if negatives % 2 == 0 {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    Ok(LogPool { log_values, signs })
}

/// Full forward pass: convolution, pooling, output weighting.
///
/// A sentence shorter than the patch has no real windows; padding is
/// neutral, so each channel pools to exactly 1 in the linear domain and to
/// exactly 0 (sign +1) in the log domain.
pub fn forward(s: &SentenceMatrix, m: &QmwfModel) -> Result<Representation> {
    Ok(forward_trace(s, m)?.repr)
}

fn neutral_representation(m: &QmwfModel) -> Representation {
    if m.config.log_domain {
        Representation {
            values: vec![0.0; m.config.channels],
            signs: Some(vec![1.0; m.config.channels]),
        }
    } else {
        Representation {
            values: m.out_weights.clone(),
            signs: None,
        }
    }
}

pub(crate) fn representation_from_sigma(
    sigma: &[Vec<f64>],
    m: &QmwfModel,
) -> Result<Representation> {
    if m.config.log_domain {
        let pool = log_product_pool(sigma, m.config.epsilon)?;
        let values = pool
            .log_values
            .iter()
            .zip(&m.out_weights)
            .map(|(l, t)| t * l)
            .collect();
        Ok(Representation {
            values,
            signs: Some(pool.signs),
        })
    } else {
        let pool = product_pool(sigma)?;
        let values = pool
            .iter()
            .zip(&m.out_weights)
            .map(|(p, t)| t * p)
            .collect();
        Ok(Representation {
            values,
            signs: None,
        })
    }
}

/// Matching score of two representations: the inner product, with sign
/// parities applied in the log domain.
pub fn match_score(q: &Representation, a: &Representation) -> Result<f64> {
    if q.values.len() != a.values.len() {
        return Err(Error::Dimension(format!(
            "representations have lengths {} and {}",
            q.values.len(),
            a.values.len()
        )));
    }
    if q.signs.is_some() != a.signs.is_some() {
        return Err(Error::Dimension(
            "cannot match a log-domain representation against a linear one".into(),
        ));
    }
    Ok((0..q.values.len()).map(|r| q.effective(r) * a.effective(r)).sum())
}

/// Intermediates of one forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct ForwardTrace {
    /// Concatenated window vectors actually convolved (empty for a sentence
    /// shorter than the patch, in which case pooling saw one neutral window).
    pub windows: Vec<Vec<f64>>,
    /// Channel × window responses over the real windows.
    pub sigma: Vec<Vec<f64>>,
    pub repr: Representation,
}

pub(crate) fn forward_trace(s: &SentenceMatrix, m: &QmwfModel) -> Result<ForwardTrace> {
    let sigma = convolve(s, m)?;
    let windows = window_vectors(s, m.config.patch_size);
    if windows.is_empty() {
        return Ok(ForwardTrace {
            windows,
            sigma: vec![Vec::new(); m.config.channels],
            repr: neutral_representation(m),
        });
    }
    let repr = representation_from_sigma(&sigma, m)?;
    Ok(ForwardTrace {
        windows,
        sigma,
        repr,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)] // explicit loop oracles
mod tests {
    use super::*;
    use crate::tensor::projection_bruteforce;
    use crate::wavefunction::{normalize, StateVector};
    use approx::assert_relative_eq;
    use rand::Rng;

    fn config(m: usize, r: usize) -> QmwfConfig {
        QmwfConfig {
            embed_dim: m,
            channels: r,
            patch_size: 1,
            shared_kernels: false,
            log_domain: false,
            epsilon: 1e-6,
            max_positions: 10,
        }
    }

    fn random_sentence(rng: &mut impl Rng, n: usize, m: usize) -> SentenceMatrix {
        let rows = (0..n)
            .map(|_| {
                normalize(&(0..m).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>())
                    .unwrap()
            })
            .collect();
        SentenceMatrix::new(rows).unwrap()
    }

    #[test]
    fn convolve_scalar_case() {
        // M=1, patch 1, kernel value 2, input row 3 — but rows must be unit
        // norm, so use row 1 and kernel 6 to stage the same product.
        let cfg = config(1, 1);
        let m = QmwfModel::from_parts(cfg, vec![vec![vec![6.0]; 10]], vec![1.0]).unwrap();
        let s = SentenceMatrix::new(vec![StateVector::new(vec![1.0]).unwrap()]).unwrap();
        let sigma = convolve(&s, &m).unwrap();
        assert_eq!(sigma, vec![vec![6.0]]);
    }

    #[test]
    fn convolve_orthogonal_kernel_gives_zeros() {
        let cfg = config(2, 1);
        let m = QmwfModel::from_parts(cfg, vec![vec![vec![0.0, 1.0]; 10]], vec![1.0]).unwrap();
        let s = SentenceMatrix::new(vec![
            StateVector::new(vec![1.0, 0.0]).unwrap(),
            StateVector::new(vec![1.0, 0.0]).unwrap(),
        ])
        .unwrap();
        let sigma = convolve(&s, &m).unwrap();
        assert_eq!(sigma, vec![vec![0.0, 0.0]]);
    }

    #[test]
    fn convolve_matches_nested_loops() {
        let mut rng = crate::rng::substream(7, "conv");
        let cfg = QmwfConfig {
            patch_size: 2,
            ..config(3, 4)
        };
        let model = QmwfModel::init(cfg, 9).unwrap();
        let s = random_sentence(&mut rng, 5, 3);
        let sigma = convolve(&s, &model).unwrap();
        for r in 0..4 {
            for i in 0..4 {
                let mut by_hand = 0.0;
                for j in 0..2 {
                    for h in 0..3 {
                        by_hand +=
                            model.kernel(r, i)[j * 3 + h] * s.row(i + j).amplitudes()[h];
                    }
                }
                assert_relative_eq!(sigma[r][i], by_hand, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn short_sentence_pads_with_neutral_window() {
        let cfg = QmwfConfig {
            patch_size: 3,
            ..config(2, 2)
        };
        let m = QmwfModel::init(cfg, 3).unwrap();
        let s = SentenceMatrix::new(vec![StateVector::new(vec![1.0, 0.0]).unwrap()]).unwrap();
        let sigma = convolve(&s, &m).unwrap();
        assert_eq!(sigma, vec![vec![1.0], vec![1.0]]);
        let repr = forward(&s, &m).unwrap();
        assert_eq!(repr.values, m.out_weights);
    }

    #[test]
    fn short_sentence_in_log_domain_pools_to_zero() {
        let cfg = QmwfConfig {
            patch_size: 3,
            log_domain: true,
            ..config(2, 2)
        };
        let m = QmwfModel::init(cfg, 3).unwrap();
        let s = SentenceMatrix::new(vec![StateVector::new(vec![1.0, 0.0]).unwrap()]).unwrap();
        let repr = forward(&s, &m).unwrap();
        assert_eq!(repr.values, vec![0.0, 0.0]);
        assert_eq!(repr.signs, Some(vec![1.0, 1.0]));
    }

    #[test]
    fn product_pool_multiplies_responses() {
        let pooled = product_pool(&[vec![2.0, 3.0, 4.0]]).unwrap();
        assert_eq!(pooled, vec![24.0]);
    }

    #[test]
    fn product_pool_zero_annihilates_channel() {
        let pooled = product_pool(&[vec![5.0, 0.0, 3.0], vec![1.0, 1.0, 2.0]]).unwrap();
        assert_eq!(pooled, vec![0.0, 2.0]);
    }

    #[test]
    fn product_pool_matches_sequential_multiply() {
        let mut rng = crate::rng::substream(8, "pool");
        let row: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut acc = 1.0;
        for &x in &row {
            acc *= x;
        }
        assert_eq!(product_pool(&[row]).unwrap()[0], acc);
    }

    #[test]
    fn log_pool_of_unit_responses_is_zero() {
        let pool = log_product_pool(&[vec![1.0, 1.0, 1.0]], 0.0).unwrap();
        assert_eq!(pool.log_values, vec![0.0]);
        assert_eq!(pool.signs, vec![1.0]);
    }

    #[test]
    fn log_pool_of_e_squared() {
        let e = std::f64::consts::E;
        let pool = log_product_pool(&[vec![e, e]], 0.0).unwrap();
        assert_relative_eq!(pool.log_values[0], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn log_pool_exponentiates_to_linear_pool() {
        let mut rng = crate::rng::substream(9, "logpool");
        let row: Vec<f64> = (0..5).map(|_| rng.random_range(0.1..2.0)).collect();
        let linear = product_pool(std::slice::from_ref(&row)).unwrap()[0];
        let log = log_product_pool(&[row], 0.0).unwrap();
        assert_relative_eq!(log.log_values[0].exp(), linear, max_relative = 1e-9);
    }

    #[test]
    fn log_pool_sign_parity_counts_negatives() {
        let pool = log_product_pool(&[vec![-1.0, 2.0], vec![-1.0, -2.0]], 0.0).unwrap();
        assert_eq!(pool.signs, vec![-1.0, 1.0]);
    }

    #[test]
    fn forward_minimal_case() {
        let cfg = config(1, 1);
        let m = QmwfModel::from_parts(cfg, vec![vec![vec![0.5]; 10]], vec![1.0]).unwrap();
        let s = SentenceMatrix::new(vec![StateVector::new(vec![1.0]).unwrap()]).unwrap();
        let repr = forward(&s, &m).unwrap();
        assert_eq!(repr.values, vec![0.5]);
    }

    #[test]
    fn forward_sum_matches_bruteforce_projection() {
        let mut rng = crate::rng::substream(10, "oracle");
        let model = QmwfModel::init(config(4, 5), 21).unwrap();
        let s = random_sentence(&mut rng, 3, 4);
        let repr = forward(&s, &model).unwrap();
        let total: f64 = repr.values.iter().sum();
        let factors = model.to_cp_factors(3).unwrap();
        let oracle = projection_bruteforce(&s, &factors).unwrap();
        assert_relative_eq!(total, oracle, max_relative = 1e-9);
    }

    #[test]
    fn shared_kernels_are_permutation_invariant() {
        let mut rng = crate::rng::substream(11, "perm");
        let cfg = QmwfConfig {
            shared_kernels: true,
            ..config(3, 4)
        };
        let model = QmwfModel::init(cfg, 5).unwrap();
        let s = random_sentence(&mut rng, 4, 3);
        let base = forward(&s, &model).unwrap();
        let mut rows: Vec<StateVector> = s.rows().to_vec();
        rows.reverse();
        let permuted = SentenceMatrix::new(rows).unwrap();
        let swapped = forward(&permuted, &model).unwrap();
        for r in 0..4 {
            assert_relative_eq!(base.values[r], swapped.values[r], max_relative = 1e-12);
        }
    }

    #[test]
    fn scaling_one_row_scales_linear_outputs() {
        // Multilinearity surrogate at the representation level: forward on a
        // sentence whose row is replaced by a scaled (still materially
        // identical direction) row scales each channel product linearly.
        // Exercised through convolve + product_pool directly since rows of a
        // SentenceMatrix stay normalized.
        let sigma = vec![vec![0.5, 2.0, -1.5]];
        let base = product_pool(&sigma).unwrap()[0];
        let scaled: Vec<Vec<f64>> = vec![vec![0.5 * 3.0, 2.0, -1.5]];
        assert_relative_eq!(product_pool(&scaled).unwrap()[0], 3.0 * base, epsilon = 1e-12);
    }

    #[test]
    fn match_score_inner_product() {
        let a = Representation {
            values: vec![1.0, 0.0],
            signs: None,
        };
        assert_eq!(match_score(&a, &a).unwrap(), 1.0);
        let b = Representation {
            values: vec![0.0, 1.0],
            signs: None,
        };
        assert_eq!(match_score(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn match_score_matches_loop_and_applies_signs() {
        let mut rng = crate::rng::substream(12, "match");
        let q = Representation {
            values: (0..5).map(|_| rng.random_range(-1.0..1.0)).collect(),
            signs: Some((0..5).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect()),
        };
        let a = Representation {
            values: (0..5).map(|_| rng.random_range(-1.0..1.0)).collect(),
            signs: Some((0..5).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect()),
        };
        let by_hand: f64 = (0..5)
            .map(|r| {
                q.values[r] * q.signs.as_ref().unwrap()[r] * a.values[r]
                    * a.signs.as_ref().unwrap()[r]
            })
            .sum();
        assert_relative_eq!(match_score(&q, &a).unwrap(), by_hand, epsilon = 1e-12);
    }

    #[test]
    fn match_score_rejects_mixed_domains() {
        let lin = Representation {
            values: vec![1.0],
            signs: None,
        };
        let log = Representation {
            values: vec![1.0],
            signs: Some(vec![1.0]),
        };
        assert!(match_score(&lin, &log).is_err());
    }

    #[test]
    fn too_long_sentence_is_rejected_with_unshared_kernels() {
        let cfg = QmwfConfig {
            max_positions: 3,
            ..config(2, 1)
        };
        let model = QmwfModel::init(cfg, 1).unwrap();
        let rows = (0..4)
            .map(|_| StateVector::new(vec![1.0, 0.0]).unwrap())
            .collect();
        let s = SentenceMatrix::new(rows).unwrap();
        assert!(matches!(
            convolve(&s, &model).unwrap_err(),
            Error::Dimension(_)
        ));
    }
}
