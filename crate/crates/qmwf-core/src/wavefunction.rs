//! Quantum-state semantics: normalized amplitude vectors, projection
//! probabilities, and the rank-1 product state of a sentence.
//!
//! Amplitudes are real. The basis is fixed to the standard directions of the
//! embedding space, so a word's state vector is just its normalized feature
//! vector and the squared amplitudes form a probability distribution over
//! latent concepts.

use crate::error::{Error, Result};
use crate::tensor::{tensor_product, DenseTensor};

/// Tolerance for the unit-norm invariant of a state vector.
pub const NORM_TOLERANCE: f64 = 1e-9;

/// Unit vector of probability amplitudes over the M basis directions.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<f64>,
}

impl StateVector {
    /// Wraps amplitudes that are already unit-norm (within [`NORM_TOLERANCE`]).
    pub fn new(amplitudes: Vec<f64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::Degenerate("empty amplitude vector".into()));
        }
        if let Some(pos) = amplitudes.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("amplitude {pos}")));
        }
        let sq: f64 = amplitudes.iter().map(|x| x * x).sum();
        if (sq - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::InvalidArgument(format!(
                "amplitudes have squared norm {sq}, expected 1"
            )));
        }
        Ok(Self { amplitudes })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }
}

/// Scales a vector to unit Euclidean norm.
///
/// The zero vector has no direction and is reported as degenerate; callers
/// that need a fallback (e.g. padding rows) substitute one before calling.
pub fn normalize(v: &[f64]) -> Result<StateVector> {
    if v.is_empty() {
        return Err(Error::Degenerate("empty vector".into()));
    }
    if let Some(pos) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("vector entry {pos}")));
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::Degenerate("zero vector cannot be normalized".into()));
    }
    StateVector::new(v.iter().map(|x| x / norm).collect())
}

/// Probability of observing basis direction `h`: the squared amplitude.
pub fn basis_probability(s: &StateVector, h: usize) -> Result<f64> {
    let a = s
        .amplitudes()
        .get(h)
        .copied()
        .ok_or(Error::IndexOutOfRange {
            index: h,
            dim: s.dim(),
        })?;
    Ok(a * a)
}

/// N×M matrix of per-word amplitudes: one normalized state vector per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceMatrix {
    rows: Vec<StateVector>,
}

impl SentenceMatrix {
    pub fn new(rows: Vec<StateVector>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Degenerate("sentence has no rows".into()));
        }
        let dim = rows[0].dim();
        if let Some(bad) = rows.iter().position(|r| r.dim() != dim) {
            return Err(Error::Dimension(format!(
                "row 0 has dimension {dim} but row {bad} has {}",
                rows[bad].dim()
            )));
        }
        Ok(Self { rows })
    }

    /// Number of words N.
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Embedding dimension M.
    pub fn dim(&self) -> usize {
        self.rows[0].dim()
    }

    pub fn rows(&self) -> &[StateVector] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &StateVector {
        &self.rows[i]
    }
}

/// Rank-1 product state of a sentence: the tensor product of its rows.
///
/// With normalized rows the result has unit Frobenius norm.
pub fn product_state(s: &SentenceMatrix) -> Result<DenseTensor> {
    let rows: Vec<&[f64]> = s.rows().iter().map(|r| r.amplitudes()).collect();
    tensor_product(&rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use approx::assert_relative_eq;
    use rand::Rng;

    #[test]
    fn normalize_three_four_five() {
        let s = normalize(&[3.0, 4.0]).unwrap();
        assert_eq!(s.amplitudes(), &[0.6, 0.8]);
    }

    #[test]
    fn normalize_is_idempotent_on_unit_vectors() {
        let s = normalize(&[0.0, 1.0, 0.0]).unwrap();
        assert_eq!(s.amplitudes(), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn normalize_output_has_unit_norm() {
        let mut rng = substream(1, "wf");
        for _ in 0..20 {
            let v: Vec<f64> = (0..6).map(|_| rng.random_range(-3.0..3.0)).collect();
            if v.iter().all(|&x| x == 0.0) {
                continue;
            }
            let s = normalize(&v).unwrap();
            let norm: f64 = s.amplitudes().iter().map(|x| x * x).sum();
            assert_relative_eq!(norm, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn normalize_rejects_zero_vector() {
        assert!(matches!(
            normalize(&[0.0, 0.0]).unwrap_err(),
            Error::Degenerate(_)
        ));
    }

    #[test]
    fn basis_probability_squares_the_amplitude() {
        let s = StateVector::new(vec![0.6, 0.8]).unwrap();
        assert_relative_eq!(basis_probability(&s, 0).unwrap(), 0.36, epsilon = 1e-12);
        assert_relative_eq!(basis_probability(&s, 1).unwrap(), 0.64, epsilon = 1e-12);
    }

    #[test]
    fn basis_state_probability_is_one() {
        let s = StateVector::new(vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(basis_probability(&s, 1).unwrap(), 1.0);
    }

    #[test]
    fn basis_probabilities_sum_to_one() {
        let mut rng = substream(2, "bp");
        let v: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let s = normalize(&v).unwrap();
        let total: f64 = (0..8).map(|h| basis_probability(&s, h).unwrap()).sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn basis_probability_rejects_out_of_range_index() {
        let s = StateVector::new(vec![1.0]).unwrap();
        assert!(matches!(
            basis_probability(&s, 1).unwrap_err(),
            Error::IndexOutOfRange { .. }
        ));
    }

    #[test]
    fn product_state_of_basis_rows() {
        // Rows (1,0,0) and (0,1,0): single 1 at coordinate (0,1).
        let s = SentenceMatrix::new(vec![
            StateVector::new(vec![1.0, 0.0, 0.0]).unwrap(),
            StateVector::new(vec![0.0, 1.0, 0.0]).unwrap(),
        ])
        .unwrap();
        let t = product_state(&s).unwrap();
        assert_eq!(t.get(&[0, 1]).unwrap(), 1.0);
        assert_eq!(t.data().iter().map(|x| x.abs()).sum::<f64>(), 1.0);
    }

    #[test]
    fn product_state_single_row_is_the_row() {
        let s = SentenceMatrix::new(vec![StateVector::new(vec![0.6, 0.8]).unwrap()]).unwrap();
        let t = product_state(&s).unwrap();
        assert_eq!(t.data(), &[0.6, 0.8]);
    }

    #[test]
    fn product_state_entries_match_double_loop() {
        let mut rng = substream(3, "ps");
        let a = normalize(&(0..3).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>()).unwrap();
        let b = normalize(&(0..3).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>()).unwrap();
        let s = SentenceMatrix::new(vec![a.clone(), b.clone()]).unwrap();
        let t = product_state(&s).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(
                    t.get(&[i, j]).unwrap(),
                    a.amplitudes()[i] * b.amplitudes()[j],
                    epsilon = 1e-15
                );
            }
        }
    }

    #[test]
    fn product_state_has_unit_frobenius_norm() {
        let mut rng = substream(4, "psn");
        let rows: Vec<StateVector> = (0..3)
            .map(|_| {
                normalize(&(0..4).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>())
                    .unwrap()
            })
            .collect();
        let s = SentenceMatrix::new(rows).unwrap();
        assert_relative_eq!(product_state(&s).unwrap().frobenius_norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn product_state_is_rank_one_under_als() {
        let mut rng = substream(5, "psr");
        let rows: Vec<StateVector> = (0..3)
            .map(|_| {
                normalize(&(0..4).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>())
                    .unwrap()
            })
            .collect();
        let s = SentenceMatrix::new(rows).unwrap();
        let t = product_state(&s).unwrap();
        let fit = crate::tensor::cp_als(&t, 1, 200, 1e-10, 0).unwrap();
        assert!(fit.relative_error <= 1e-6);
    }

    #[test]
    fn sentence_matrix_rejects_ragged_rows() {
        let err = SentenceMatrix::new(vec![
            StateVector::new(vec![1.0, 0.0]).unwrap(),
            StateVector::new(vec![1.0]).unwrap(),
        ])
        .unwrap_err();
        assert!(matches!(err, Error::Dimension(_)));
    }
}
