//! Dense small-order tensor algebra.
//!
//! Everything here is desk-scale by design: tensors are materialized as flat
//! `Vec<f64>` buffers guarded by an element cap, because the point of this
//! module is to serve as the exact (brute-force) reference against which the
//! convolutional realization is checked. The cap guards the M^N blowup that
//! makes the materialized route intractable at production sizes.

mod cp_als;
pub(crate) mod linalg;

pub use cp_als::{cp_als, CpFit};

use crate::error::{Error, Result};
use crate::wavefunction::SentenceMatrix;

/// Default ceiling on the number of elements a materialized tensor may hold.
pub const DEFAULT_ELEMENT_CAP: usize = 10_000_000;

/// Number of elements of an `order`-mode tensor with `dim` per mode,
/// or a capacity error if it exceeds `cap`.
pub fn checked_element_count(order: usize, dim: usize, cap: usize) -> Result<usize> {
    if order == 0 || dim == 0 {
        return Err(Error::InvalidArgument(
            "tensor order and mode dimension must both be at least 1".into(),
        ));
    }
    let mut len: u128 = 1;
    for _ in 0..order {
        len *= dim as u128;
        if len > cap as u128 {
            return Err(Error::Capacity { elements: len, cap });
        }
    }
    Ok(len as usize)
}

/// N-order array of probability amplitudes with equal mode dimensions.
///
/// Storage is row-major with the last index fastest: the flat offset of
/// coordinates `(h_1, ..., h_N)` is `h_1·M^(N-1) + ... + h_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    order: usize,
    dim: usize,
    data: Vec<f64>,
}

impl DenseTensor {
    /// Wraps a flat buffer, validating length and finiteness.
    pub fn new(order: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        let len = checked_element_count(order, dim, usize::MAX)?;
        if data.len() != len {
            return Err(Error::Dimension(format!(
                "tensor of order {order} and dim {dim} needs {len} elements, got {}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("tensor data at offset {pos}")));
        }
        Ok(Self { order, dim, data })
    }

    /// All-zero tensor, subject to the element cap.
    pub fn zeros(order: usize, dim: usize, cap: usize) -> Result<Self> {
        let len = checked_element_count(order, dim, cap)?;
        Ok(Self {
            order,
            dim,
            data: vec![0.0; len],
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Flat offset of a coordinate tuple.
    pub fn flat_index(&self, coords: &[usize]) -> Result<usize> {
        if coords.len() != self.order {
            return Err(Error::Dimension(format!(
                "expected {} coordinates, got {}",
                self.order,
                coords.len()
            )));
        }
        let mut idx = 0usize;
        for &c in coords {
            if c >= self.dim {
                return Err(Error::IndexOutOfRange {
                    index: c,
                    dim: self.dim,
                });
            }
            idx = idx * self.dim + c;
        }
        Ok(idx)
    }

    /// Coordinate tuple of a flat offset (inverse of [`flat_index`]).
    ///
    /// [`flat_index`]: DenseTensor::flat_index
    pub fn coords(&self, mut flat: usize) -> Vec<usize> {
        let mut coords = vec![0usize; self.order];
        for slot in coords.iter_mut().rev() {
            *slot = flat % self.dim;
            flat /= self.dim;
        }
        coords
    }

    pub fn get(&self, coords: &[usize]) -> Result<f64> {
        Ok(self.data[self.flat_index(coords)?])
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// CP-decomposed tensor: weights `t_r` plus per-position unit factor vectors.
///
/// Factor vectors are normalized to unit Euclidean norm on construction and
/// the removed magnitudes are folded into the weights, so the represented
/// tensor is unchanged. With `shared == true` a single vector per component
/// is reused at every position.
#[derive(Debug, Clone, PartialEq)]
pub struct CpFactors {
    rank: usize,
    order: usize,
    dim: usize,
    weights: Vec<f64>,
    factors: Vec<Vec<f64>>,
    shared: bool,
}

impl CpFactors {
    /// Builds factors from raw (not necessarily unit) vectors.
    ///
    /// `factors` holds `rank` vectors when `shared`, otherwise `rank × order`
    /// vectors laid out component-major: entry `r·order + i` is the vector
    /// for component `r` at position `i`.
    pub fn new(
        order: usize,
        dim: usize,
        weights: Vec<f64>,
        factors: Vec<Vec<f64>>,
        shared: bool,
    ) -> Result<Self> {
        let rank = weights.len();
        if rank == 0 || order == 0 || dim == 0 {
            return Err(Error::InvalidArgument(
                "rank, order and dim must all be at least 1".into(),
            ));
        }
        let expected = if shared { rank } else { rank * order };
        if factors.len() != expected {
            return Err(Error::Dimension(format!(
                "expected {expected} factor vectors, got {}",
                factors.len()
            )));
        }
        if let Some(bad) = factors.iter().position(|f| f.len() != dim) {
            return Err(Error::Dimension(format!(
                "factor vector {bad} has length {}, expected {dim}",
                factors[bad].len()
            )));
        }
        for (r, w) in weights.iter().enumerate() {
            if !w.is_finite() {
                return Err(Error::NonFinite(format!("weight {r}")));
            }
        }

        let mut weights = weights;
        let mut factors = factors;
        for (idx, f) in factors.iter_mut().enumerate() {
            if let Some(pos) = f.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "factor vector {idx} at offset {pos}"
                )));
            }
            let norm = f.iter().map(|x| x * x).sum::<f64>().sqrt();
            let r = if shared { idx } else { idx / order };
            if norm == 0.0 {
                // Component contributes nothing; park the vector on a basis
                // direction so the unit-norm invariant still holds.
                weights[r] = 0.0;
                f[0] = 1.0;
            } else {
                let power = if shared { order as i32 } else { 1 };
                weights[r] *= norm.powi(power);
                for x in f.iter_mut() {
                    *x /= norm;
                }
            }
        }

        Ok(Self {
            rank,
            order,
            dim,
            weights,
            factors,
            shared,
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn shared(&self) -> bool {
        self.shared
    }

    /// Unit factor vector for component `r` at position `i`.
    pub fn factor(&self, r: usize, i: usize) -> &[f64] {
        if self.shared {
            &self.factors[r]
        } else {
            &self.factors[r * self.order + i]
        }
    }
}

/// Rank-1 tensor from the outer product of `N` vectors of equal length.
///
/// The entry at `(h_1, ..., h_N)` is the product of the vector components.
pub fn tensor_product<V: AsRef<[f64]>>(vectors: &[V]) -> Result<DenseTensor> {
    tensor_product_capped(vectors, DEFAULT_ELEMENT_CAP)
}

/// [`tensor_product`] with an explicit element cap.
pub fn tensor_product_capped<V: AsRef<[f64]>>(vectors: &[V], cap: usize) -> Result<DenseTensor> {
    if vectors.is_empty() {
        return Err(Error::InvalidArgument(
            "tensor product needs at least one vector".into(),
        ));
    }
    let dim = vectors[0].as_ref().len();
    for (i, v) in vectors.iter().enumerate() {
        if v.as_ref().len() != dim {
            return Err(Error::Dimension(format!(
                "vector 0 has length {dim} but vector {i} has length {}",
                v.as_ref().len()
            )));
        }
    }
    let order = vectors.len();
    let len = checked_element_count(order, dim, cap)?;

    // Expand one mode at a time; appending a mode keeps the last index
    // fastest, which is exactly the row-major layout.
    let mut data = vec![1.0];
    for v in vectors {
        let v = v.as_ref();
        let mut next = Vec::with_capacity(data.len() * dim);
        for &acc in &data {
            for &x in v {
                next.push(acc * x);
            }
        }
        data = next;
    }
    debug_assert_eq!(data.len(), len);
    DenseTensor::new(order, dim, data)
}

/// Sum over all coordinates of elementwise products of two tensors.
pub fn inner_product(a: &DenseTensor, b: &DenseTensor) -> Result<f64> {
    if a.order() != b.order() || a.dim() != b.dim() {
        return Err(Error::Dimension(format!(
            "inner product of order {}/dim {} tensor with order {}/dim {} tensor",
            a.order(),
            a.dim(),
            b.order(),
            b.dim()
        )));
    }
    Ok(a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| x * y)
        .sum())
}

/// Materializes the dense tensor represented by CP factors:
/// the weighted sum of the component rank-1 tensors.
pub fn cp_reconstruct(f: &CpFactors) -> Result<DenseTensor> {
    cp_reconstruct_capped(f, DEFAULT_ELEMENT_CAP)
}

/// [`cp_reconstruct`] with an explicit element cap.
pub fn cp_reconstruct_capped(f: &CpFactors, cap: usize) -> Result<DenseTensor> {
    let len = checked_element_count(f.order(), f.dim(), cap)?;
    let mut data = vec![0.0; len];
    let mut buf = Vec::with_capacity(len);
    for r in 0..f.rank() {
        buf.clear();
        buf.push(f.weights()[r]);
        for i in 0..f.order() {
            let v = f.factor(r, i);
            let mut next = Vec::with_capacity(buf.len() * f.dim());
            for &acc in &buf {
                for &x in v {
                    next.push(acc * x);
                }
            }
            buf = next;
        }
        for (d, t) in data.iter_mut().zip(&buf) {
            *d += t;
        }
    }
    DenseTensor::new(f.order(), f.dim(), data)
}

/// Brute-force projection of a sentence onto a CP-decomposed global tensor.
///
/// Materializes the global tensor, builds the sentence's rank-1 product
/// tensor, and contracts the two. Exact up to floating point, and
/// exponential in sentence length — this is the oracle the network
/// realization is checked against, not a production path.
pub fn projection_bruteforce(s: &SentenceMatrix, f: &CpFactors) -> Result<f64> {
    if s.len() != f.order() || s.dim() != f.dim() {
        return Err(Error::Dimension(format!(
            "sentence is {}x{} but factors expect order {} dim {}",
            s.len(),
            s.dim(),
            f.order(),
            f.dim()
        )));
    }
    let global = cp_reconstruct(f)?;
    let rows: Vec<&[f64]> = s.rows().iter().map(|r| r.amplitudes()).collect();
    let local = tensor_product(&rows)?;
    inner_product(&global, &local)
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)] // explicit loop oracles
mod tests {
    use super::*;
    use crate::rng::substream;
    use approx::assert_relative_eq;
    use rand::Rng;

    #[test]
    fn tensor_product_of_basis_vectors_is_basis_tensor() {
        // |0> ⊗ |0> = |00>
        let t = tensor_product(&[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(t.data(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn tensor_product_single_vector_is_identity() {
        let t = tensor_product(&[vec![0.6, 0.8]]).unwrap();
        assert_eq!(t.data(), &[0.6, 0.8]);
    }

    #[test]
    fn tensor_product_matches_double_loop() {
        let mut rng = substream(11, "tp");
        let a: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let t = tensor_product(&[a.clone(), b.clone()]).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(t.get(&[i, j]).unwrap(), a[i] * b[j], epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn tensor_product_rejects_mismatched_lengths() {
        let err = tensor_product(&[vec![1.0, 0.0], vec![1.0]]).unwrap_err();
        assert!(matches!(err, Error::Dimension(_)));
    }

    #[test]
    fn tensor_product_respects_element_cap() {
        let v = vec![0.5; 100];
        let vs: Vec<Vec<f64>> = (0..4).map(|_| v.clone()).collect();
        let err = tensor_product_capped(&vs, 1_000_000).unwrap_err();
        assert!(matches!(err, Error::Capacity { .. }));
    }

    #[test]
    fn inner_product_of_unit_tensor_with_itself_is_one() {
        let t = tensor_product(&[vec![0.6, 0.8], vec![1.0, 0.0]]).unwrap();
        assert_relative_eq!(inner_product(&t, &t).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn inner_product_of_orthogonal_basis_tensors_is_zero() {
        let t00 = tensor_product(&[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let t01 = tensor_product(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(inner_product(&t00, &t01).unwrap(), 0.0);
    }

    #[test]
    fn inner_product_matches_exhaustive_summation() {
        let mut rng = substream(13, "ip");
        let a: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ta = DenseTensor::new(3, 2, a.clone()).unwrap();
        let tb = DenseTensor::new(3, 2, b.clone()).unwrap();
        let by_hand: f64 = (0..8).map(|i| a[i] * b[i]).sum();
        assert_relative_eq!(inner_product(&ta, &tb).unwrap(), by_hand, epsilon = 1e-15);
    }

    #[test]
    fn inner_product_rejects_shape_mismatch() {
        let a = DenseTensor::new(2, 2, vec![0.0; 4]).unwrap();
        let b = DenseTensor::new(3, 2, vec![0.0; 8]).unwrap();
        assert!(matches!(
            inner_product(&a, &b).unwrap_err(),
            Error::Dimension(_)
        ));
    }

    #[test]
    fn flat_index_and_coords_are_inverse() {
        let t = DenseTensor::zeros(3, 4, DEFAULT_ELEMENT_CAP).unwrap();
        for flat in 0..64 {
            let coords = t.coords(flat);
            assert_eq!(t.flat_index(&coords).unwrap(), flat);
        }
        // Last index fastest: (0,0,1) must be offset 1.
        assert_eq!(t.flat_index(&[0, 0, 1]).unwrap(), 1);
        assert_eq!(t.flat_index(&[1, 0, 0]).unwrap(), 16);
    }

    #[test]
    fn cp_reconstruct_rank_one_basis() {
        let f = CpFactors::new(
            3,
            2,
            vec![1.0],
            vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![1.0, 0.0]],
            false,
        )
        .unwrap();
        let t = cp_reconstruct(&f).unwrap();
        assert_eq!(t.get(&[0, 0, 0]).unwrap(), 1.0);
        assert_eq!(t.data().iter().map(|x| x.abs()).sum::<f64>(), 1.0);
    }

    #[test]
    fn cp_reconstruct_matches_outer_product_sum() {
        let mut rng = substream(17, "cp");
        let mut vecs = Vec::new();
        for _ in 0..4 {
            let v: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            vecs.push(v);
        }
        let w = vec![1.3, -0.7];
        let f = CpFactors::new(2, 3, w.clone(), vecs.clone(), false).unwrap();
        let t = cp_reconstruct(&f).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expected = w[0] * vecs[0][i] * vecs[1][j] + w[1] * vecs[2][i] * vecs[3][j];
                assert_relative_eq!(t.get(&[i, j]).unwrap(), expected, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn cp_reconstruct_shared_factors_is_symmetric() {
        let mut rng = substream(19, "sym");
        let factors: Vec<Vec<f64>> = (0..2)
            .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let f = CpFactors::new(3, 3, vec![1.0, 0.5], factors, true).unwrap();
        let t = cp_reconstruct(&f).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    let base = t.get(&[i, j, k]).unwrap();
                    assert_relative_eq!(base, t.get(&[j, i, k]).unwrap(), epsilon = 1e-12);
                    assert_relative_eq!(base, t.get(&[k, j, i]).unwrap(), epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn cp_factors_normalize_and_fold_weights() {
        let f = CpFactors::new(2, 2, vec![2.0], vec![vec![3.0, 4.0], vec![0.0, 2.0]], false)
            .unwrap();
        // Norms 5 and 2 fold into the weight: 2 * 5 * 2 = 20.
        assert_relative_eq!(f.weights()[0], 20.0, epsilon = 1e-12);
        assert_relative_eq!(f.factor(0, 0)[0], 0.6, epsilon = 1e-12);
        assert_relative_eq!(f.factor(0, 1)[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn cp_factors_zero_vector_zeroes_weight() {
        let f = CpFactors::new(2, 2, vec![5.0], vec![vec![0.0, 0.0], vec![1.0, 0.0]], false)
            .unwrap();
        assert_eq!(f.weights()[0], 0.0);
        let norm: f64 = f.factor(0, 0).iter().map(|x| x * x).sum();
        assert_relative_eq!(norm, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_row_annihilates_the_projection() {
        // A zero vector anywhere in the product zeroes the rank-1 tensor,
        // so any contraction against it is exactly 0.
        let local = tensor_product(&[vec![0.3, 0.7], vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        assert!(local.data().iter().all(|&x| x == 0.0));
        let f = CpFactors::new(
            3,
            2,
            vec![1.3, -0.4],
            vec![vec![1.0, 1.0]; 6],
            false,
        )
        .unwrap();
        let global = cp_reconstruct(&f).unwrap();
        assert_eq!(inner_product(&global, &local).unwrap(), 0.0);
    }

    #[test]
    fn frobenius_norm_of_product_is_product_of_norms() {
        let mut rng = substream(23, "norm");
        let a: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
        let b: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        let t = tensor_product(&[a, b]).unwrap();
        assert_relative_eq!(t.frobenius_norm(), na * nb, epsilon = 1e-12);
    }
}
