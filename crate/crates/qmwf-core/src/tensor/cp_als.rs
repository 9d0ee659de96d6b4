//! Alternating least squares fit of CP factors to a dense tensor.
//!
//! Used by the verification suite and the `decompose` command; the trained
//! model never goes through this path (its factors are learned directly).

use super::linalg::{gauss_solve, symmetric_eigen};
use super::{checked_element_count, CpFactors, DenseTensor};
use crate::error::{Error, Result};
use crate::rng::{substream, substream_indexed};
use rand::Rng;

const RIDGE: f64 = 1e-9;
// Restart heuristics: once a phase has run MIN_PHASE_SWEEPS, its convergence
// rate is measured over the last RATE_WINDOW sweeps; if that trajectory
// cannot reach tol within the remaining budget (with some slack), the phase
// is abandoned for a fresh init — unless too little budget remains for a
// restart to pay off.
const RATE_WINDOW: usize = 10;
const MIN_PHASE_SWEEPS: usize = 20;
const RESTART_SLACK: f64 = 1.2;
const MIN_REMAINING_FOR_RESTART: usize = 40;

/// Outcome of an ALS fit.
#[derive(Debug, Clone)]
pub struct CpFit {
    pub factors: CpFactors,
    /// Frobenius norm of the residual over the norm of the input.
    pub relative_error: f64,
    /// Sweeps actually performed.
    pub iterations: usize,
    /// Whether any normal-equation solve needed a ridge term.
    pub regularized: bool,
}

/// Fits rank-`rank` CP factors to `t` by alternating least squares.
///
/// The first attempt starts from the leading eigenvectors of each mode's
/// Gram matrix (random columns beyond the mode dimension); whenever a run
/// bogs down in an ALS swamp it is abandoned and restarted from a fresh
/// seeded init, all within the shared `max_iters` sweep budget. The best
/// factors seen across attempts are kept. Iteration stops when the relative
/// reconstruction error drops to `tol` or the budget runs out. Singular
/// normal equations fall back to a ridge-regularized solve and set the
/// `regularized` flag instead of failing.
pub fn cp_als(
    t: &DenseTensor,
    rank: usize,
    max_iters: usize,
    tol: f64,
    seed: u64,
) -> Result<CpFit> {
    if rank == 0 {
        return Err(Error::InvalidArgument("cp_als rank must be at least 1".into()));
    }
    if max_iters == 0 {
        return Err(Error::InvalidArgument(
            "cp_als max_iters must be at least 1".into(),
        ));
    }
    let order = t.order();
    let dim = t.dim();
    let norm_t = t.frobenius_norm();

    if norm_t == 0.0 {
        let factors = zero_factors(order, dim, rank)?;
        return Ok(CpFit {
            factors,
            relative_error: 0.0,
            iterations: 0,
            regularized: false,
        });
    }

    let strides: Vec<usize> = (0..order)
        .map(|i| dim.pow((order - 1 - i) as u32))
        .collect();

    let mut regularized = false;
    let mut sweeps_used = 0usize;
    let mut best_err = f64::INFINITY;
    let mut best_mats: Option<Vec<Vec<f64>>> = None;

    let mut phase = 0u64;
    'phases: while sweeps_used < max_iters {
        let mut mats: Vec<Vec<f64>> = if phase == 0 {
            (0..order)
                .map(|n| init_mode(t, &strides, n, rank, seed))
                .collect()
        } else {
            let mut rng = substream_indexed(seed, "cp-als-restart", phase);
            (0..order).map(|_| random_matrix(&mut rng, dim, rank)).collect()
        };
        phase += 1;

        let mut history: Vec<f64> = Vec::new();
        let mut prev_mats: Option<Vec<Vec<f64>>> = None;
        let mut prev_rel_err = f64::INFINITY;
        let mut accel_power = 3.0f64;
        let mut accel_fails = 0usize;
        while sweeps_used < max_iters {
            let before_sweep = mats.clone();
            for n in 0..order {
                let w = mttkrp(t, &mats, n, rank);
                let mut v = hadamard_grams(&mats, n, dim, rank);
                // Solve V · Aᵀ = Wᵀ for the updated mode matrix.
                let mut wt = vec![0.0; rank * dim];
                for m in 0..dim {
                    for r in 0..rank {
                        wt[r * dim + m] = w[m * rank + r];
                    }
                }
                let solved = match gauss_solve(&v, &wt, rank, dim) {
                    Some(y) => y,
                    None => {
                        regularized = true;
                        for r in 0..rank {
                            v[r * rank + r] += RIDGE;
                        }
                        gauss_solve(&v, &wt, rank, dim).ok_or_else(|| {
                            Error::NonFinite("cp_als normal equations".into())
                        })?
                    }
                };
                for m in 0..dim {
                    for r in 0..rank {
                        mats[n][m * rank + r] = solved[r * dim + m];
                    }
                }
            }

            rebalance(&mut mats, order, dim, rank);
            sweeps_used += 1;
            let mut rel_err = residual_norm(t, &mats, rank) / norm_t;

            // Line-search acceleration against ALS swamps: extrapolate along
            // the last sweep's direction and keep the jump when it lowers
            // the error. The step grows as sweeps accumulate; repeated
            // failures damp it.
            if let Some(prev) = &prev_mats {
                if history.len() >= 2 && rel_err < prev_rel_err {
                    let step = ((history.len() + 1) as f64).powf(1.0 / accel_power);
                    let jumped: Vec<Vec<f64>> = mats
                        .iter()
                        .zip(prev)
                        .map(|(cur, old)| {
                            cur.iter()
                                .zip(old)
                                .map(|(c, o)| o + step * (c - o))
                                .collect()
                        })
                        .collect();
                    let jumped_err = residual_norm(t, &jumped, rank) / norm_t;
                    if jumped_err < rel_err {
                        mats = jumped;
                        rel_err = jumped_err;
                        accel_fails = 0;
                    } else {
                        accel_fails += 1;
                        if accel_fails >= 4 {
                            accel_power += 1.0;
                            accel_fails = 0;
                        }
                    }
                }
            }
            prev_mats = Some(before_sweep);
            prev_rel_err = rel_err;

            if rel_err < best_err {
                best_err = rel_err;
                best_mats = Some(mats.clone());
            }
            if rel_err <= tol {
                break 'phases;
            }
            history.push(rel_err);
            if history.len() >= MIN_PHASE_SWEEPS && max_iters - sweeps_used > MIN_REMAINING_FOR_RESTART
            {
                let past = history[history.len() - RATE_WINDOW];
                if rel_err >= past {
                    break; // no progress over the window
                }
                let rate = (rel_err / past).powf(1.0 / RATE_WINDOW as f64);
                let needed = (rel_err / tol.max(f64::MIN_POSITIVE)).ln() / -rate.ln();
                if needed > RESTART_SLACK * (max_iters - sweeps_used) as f64 {
                    break; // too slow to make tol on this trajectory
                }
            }
        }
    }

    let mats = best_mats.expect("max_iters >= 1 guarantees at least one sweep");
    let factors = finalize(&mats, order, dim, rank)?;
    Ok(CpFit {
        factors,
        relative_error: best_err,
        iterations: sweeps_used,
        regularized,
    })
}

fn random_matrix(rng: &mut impl Rng, dim: usize, rank: usize) -> Vec<f64> {
    let mut mat = vec![0.0; dim * rank];
    for r in 0..rank {
        loop {
            let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-3 {
                for m in 0..dim {
                    mat[m * rank + r] = v[m] / norm;
                }
                break;
            }
        }
    }
    mat
}

fn zero_factors(order: usize, dim: usize, rank: usize) -> Result<CpFactors> {
    let mut basis = vec![0.0; dim];
    basis[0] = 1.0;
    let factors = vec![basis; rank * order];
    CpFactors::new(order, dim, vec![0.0; rank], factors, false)
}

/// Leading eigenvectors of the mode's Gram matrix, random columns beyond
/// the mode dimension.
fn init_mode(t: &DenseTensor, strides: &[usize], n: usize, rank: usize, seed: u64) -> Vec<f64> {
    let order = t.order();
    let dim = t.dim();
    let data = t.data();

    let mut gram = vec![0.0; dim * dim];
    let rest_modes: Vec<usize> = (0..order).filter(|&i| i != n).collect();
    let rest_count = data.len() / dim;
    let mut col = vec![0.0; dim];
    for rest in 0..rest_count {
        let mut base = 0usize;
        let mut rem = rest;
        for &mode in rest_modes.iter().rev() {
            base += (rem % dim) * strides[mode];
            rem /= dim;
        }
        for (p, slot) in col.iter_mut().enumerate() {
            *slot = data[base + p * strides[n]];
        }
        for p in 0..dim {
            for q in p..dim {
                gram[p * dim + q] += col[p] * col[q];
            }
        }
    }
    for p in 0..dim {
        for q in 0..p {
            gram[p * dim + q] = gram[q * dim + p];
        }
    }

    let (_vals, vecs) = symmetric_eigen(&gram, dim);
    let mut rng = substream(seed, "cp-als-init");
    let mut mat = vec![0.0; dim * rank];
    for r in 0..rank {
        if r < dim {
            for m in 0..dim {
                mat[m * rank + r] = vecs[m * dim + r];
            }
        } else {
            let mut v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                for x in v.iter_mut() {
                    *x /= norm;
                }
            } else {
                v[0] = 1.0;
            }
            for m in 0..dim {
                mat[m * rank + r] = v[m];
            }
        }
    }
    mat
}

/// Matricized tensor times Khatri-Rao product for mode `n`:
/// `W[m][r] = Σ_{coords with coord_n = m} X[coords] · Π_{k≠n} A_k[coord_k][r]`.
fn mttkrp(t: &DenseTensor, mats: &[Vec<f64>], n: usize, rank: usize) -> Vec<f64> {
    let order = t.order();
    let dim = t.dim();
    let data = t.data();
    let mut w = vec![0.0; dim * rank];
    let mut coords = vec![0usize; order];
    for &x in data {
        if x != 0.0 {
            for r in 0..rank {
                let mut p = x;
                for (k, mat) in mats.iter().enumerate() {
                    if k != n {
                        p *= mat[coords[k] * rank + r];
                    }
                }
                w[coords[n] * rank + r] += p;
            }
        }
        // Odometer increment, last coordinate fastest.
        for k in (0..order).rev() {
            coords[k] += 1;
            if coords[k] < dim {
                break;
            }
            coords[k] = 0;
        }
    }
    w
}

fn hadamard_grams(mats: &[Vec<f64>], skip: usize, dim: usize, rank: usize) -> Vec<f64> {
    let mut v = vec![1.0; rank * rank];
    for (k, mat) in mats.iter().enumerate() {
        if k == skip {
            continue;
        }
        for r1 in 0..rank {
            for r2 in 0..rank {
                let g: f64 = (0..dim).map(|m| mat[m * rank + r1] * mat[m * rank + r2]).sum();
                v[r1 * rank + r2] *= g;
            }
        }
    }
    v
}

/// Spreads each component's total magnitude evenly over the modes so no
/// single factor matrix drifts toward overflow or underflow.
fn rebalance(mats: &mut [Vec<f64>], order: usize, dim: usize, rank: usize) {
    for r in 0..rank {
        let norms: Vec<f64> = mats
            .iter()
            .map(|mat| (0..dim).map(|m| mat[m * rank + r].powi(2)).sum::<f64>().sqrt())
            .collect();
        if norms.contains(&0.0) {
            continue;
        }
        let total: f64 = norms.iter().product();
        let target = total.powf(1.0 / order as f64);
        for (mat, &norm) in mats.iter_mut().zip(&norms) {
            let scale = target / norm;
            for m in 0..dim {
                mat[m * rank + r] *= scale;
            }
        }
    }
}

fn residual_norm(t: &DenseTensor, mats: &[Vec<f64>], rank: usize) -> f64 {
    let dim = t.dim();
    let mut recon = vec![0.0; t.data().len()];
    let mut buf: Vec<f64> = Vec::with_capacity(recon.len());
    for r in 0..rank {
        buf.clear();
        buf.push(1.0);
        for mat in mats {
            let mut next = Vec::with_capacity(buf.len() * dim);
            for &acc in &buf {
                for m in 0..dim {
                    next.push(acc * mat[m * rank + r]);
                }
            }
            buf = next;
        }
        for (dst, src) in recon.iter_mut().zip(&buf) {
            *dst += src;
        }
    }
    t.data()
        .iter()
        .zip(&recon)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

fn finalize(mats: &[Vec<f64>], order: usize, dim: usize, rank: usize) -> Result<CpFactors> {
    checked_element_count(order, dim, usize::MAX)?;
    let mut weights = vec![1.0; rank];
    let mut factors = Vec::with_capacity(rank * order);
    for r in 0..rank {
        for mat in mats {
            let col: Vec<f64> = (0..dim).map(|m| mat[m * rank + r]).collect();
            factors.push(col);
        }
    }
    for (r, weight) in weights.iter_mut().enumerate() {
        let dead = (0..order).any(|n| {
            factors[r * order + n]
                .iter()
                .all(|&x| x == 0.0)
        });
        if dead {
            *weight = 0.0;
        }
    }
    // CpFactors::new folds the column norms into the weights.
    CpFactors::new(order, dim, weights, factors, false)
}
