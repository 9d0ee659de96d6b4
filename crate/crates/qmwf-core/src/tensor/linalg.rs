//! Minimal dense linear algebra for the ALS solver: a pivoted Gaussian
//! elimination with multiple right-hand sides and a cyclic Jacobi
//! eigendecomposition for symmetric matrices. Everything operates on
//! row-major `&[f64]` buffers; problem sizes here are tiny (rank × rank or
//! mode-dim × mode-dim).

/// Solves `A · X = B` where `a` is n×n and `b` is n×k, both row-major.
///
/// Returns `None` when a pivot is numerically zero relative to the matrix
/// scale; callers decide how to regularize.
pub fn gauss_solve(a: &[f64], b: &[f64], n: usize, k: usize) -> Option<Vec<f64>> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n * k);
    let mut a = a.to_vec();
    let mut x = b.to_vec();
    let scale = a
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(f64::MIN_POSITIVE);

    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&p, &q| {
                a[p * n + col]
                    .abs()
                    .partial_cmp(&a[q * n + col].abs())
                    .unwrap()
            })
            .unwrap();
        if a[pivot_row * n + col].abs() <= 1e-12 * scale {
            return None;
        }
        if pivot_row != col {
            for j in 0..n {
                a.swap(col * n + j, pivot_row * n + j);
            }
            for j in 0..k {
                x.swap(col * k + j, pivot_row * k + j);
            }
        }
        let pivot = a[col * n + col];
        for row in (col + 1)..n {
            let factor = a[row * n + col] / pivot;
            if factor == 0.0 {
                continue;
            }
            for j in col..n {
                a[row * n + j] -= factor * a[col * n + j];
            }
            for j in 0..k {
                x[row * k + j] -= factor * x[col * k + j];
            }
        }
    }

    for col in (0..n).rev() {
        let pivot = a[col * n + col];
        for j in 0..k {
            x[col * k + j] /= pivot;
        }
        for row in 0..col {
            let factor = a[row * n + col];
            if factor == 0.0 {
                continue;
            }
            for j in 0..k {
                x[row * k + j] -= factor * x[col * k + j];
            }
        }
    }
    Some(x)
}

/// Eigendecomposition of a symmetric n×n matrix by cyclic Jacobi rotations.
///
/// Returns `(eigenvalues, eigenvectors)` sorted by descending eigenvalue;
/// `eigenvectors` is row-major with eigenvector `j` in column `j`.
pub fn symmetric_eigen(mat: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    debug_assert_eq!(mat.len(), n * n);
    let mut a = mat.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    if n <= 1 {
        return (a, v);
    }

    let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|p| ((p + 1)..n).map(move |q| (p, q)))
            .map(|(p, q)| a[p * n + q] * a[p * n + q])
            .sum();
        if off.sqrt() <= 1e-14 * norm {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for j in 0..n {
                    let ajp = a[j * n + p];
                    let ajq = a[j * n + q];
                    a[j * n + p] = c * ajp - s * ajq;
                    a[j * n + q] = s * ajp + c * ajq;
                }
                for j in 0..n {
                    let apj = a[p * n + j];
                    let aqj = a[q * n + j];
                    a[p * n + j] = c * apj - s * aqj;
                    a[q * n + j] = s * apj + c * aqj;
                }
                for j in 0..n {
                    let vjp = v[j * n + p];
                    let vjq = v[j * n + q];
                    v[j * n + p] = c * vjp - s * vjq;
                    v[j * n + q] = s * vjp + c * vjq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].partial_cmp(&a[i * n + i]).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[i * n + i]).collect();
    let mut eigenvectors = vec![0.0; n * n];
    for (new_col, &old_col) in order.iter().enumerate() {
        for row in 0..n {
            eigenvectors[row * n + new_col] = v[row * n + old_col];
        }
    }
    (eigenvalues, eigenvectors)
}
