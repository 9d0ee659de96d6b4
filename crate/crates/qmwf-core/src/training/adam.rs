//! Adam with bias correction over the model parameters and lazily
//! allocated moments for embedding rows.

use super::{Gradients, HyperParams};
use crate::embedding::EmbeddingTable;
use crate::network::QmwfModel;
use std::collections::BTreeMap;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// First and second moment estimates, shaped like the parameters they track.
#[derive(Debug, Clone)]
pub struct AdamState {
    step: u64,
    m_kernels: Vec<Vec<Vec<f64>>>,
    v_kernels: Vec<Vec<Vec<f64>>>,
    m_out: Vec<f64>,
    v_out: Vec<f64>,
    // Embedding moments appear when a row is first touched; untouched rows
    // neither decay nor update.
    m_embed: BTreeMap<usize, Vec<f64>>,
    v_embed: BTreeMap<usize, Vec<f64>>,
}

impl AdamState {
    pub fn new(model: &QmwfModel) -> Self {
        let zeros: Vec<Vec<Vec<f64>>> = model
            .kernels()
            .iter()
            .map(|bank| bank.iter().map(|k| vec![0.0; k.len()]).collect())
            .collect();
        Self {
            step: 0,
            m_kernels: zeros.clone(),
            v_kernels: zeros,
            m_out: vec![0.0; model.out_weights().len()],
            v_out: vec![0.0; model.out_weights().len()],
            m_embed: BTreeMap::new(),
            v_embed: BTreeMap::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

#[inline]
fn update_one(theta: &mut f64, g: f64, m: &mut f64, v: &mut f64, lr: f64, bc1: f64, bc2: f64) {
    *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
    *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
    let m_hat = *m / bc1;
    let v_hat = *v / bc2;
    *theta -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
}

/// One bias-corrected Adam step, applied in place.
///
/// Embedding rows named in `grads.embedding` are updated when a table is
/// supplied; pass `None` to update model parameters only.
pub fn adam_step(
    state: &mut AdamState,
    model: &mut QmwfModel,
    table: Option<&mut EmbeddingTable>,
    grads: &Gradients,
    hp: &HyperParams,
) {
    state.step += 1;
    let bc1 = 1.0 - ADAM_BETA1.powi(state.step as i32);
    let bc2 = 1.0 - ADAM_BETA2.powi(state.step as i32);
    let lr = hp.learning_rate;

    for (r, bank) in model.kernels.iter_mut().enumerate() {
        for (i, kernel) in bank.iter_mut().enumerate() {
            let g = &grads.kernels[r][i];
            let m = &mut state.m_kernels[r][i];
            let v = &mut state.v_kernels[r][i];
            for j in 0..kernel.len() {
                update_one(&mut kernel[j], g[j], &mut m[j], &mut v[j], lr, bc1, bc2);
            }
        }
    }
    for (j, t) in model.out_weights.iter_mut().enumerate() {
        update_one(
            t,
            grads.out_weights[j],
            &mut state.m_out[j],
            &mut state.v_out[j],
            lr,
            bc1,
            bc2,
        );
    }

    if let Some(table) = table {
        for (&row, g) in &grads.embedding {
            let m = state
                .m_embed
                .entry(row)
                .or_insert_with(|| vec![0.0; g.len()]);
            let v = state
                .v_embed
                .entry(row)
                .or_insert_with(|| vec![0.0; g.len()]);
            let theta = table.row_mut(row);
            for j in 0..g.len() {
                update_one(&mut theta[j], g[j], &mut m[j], &mut v[j], lr, bc1, bc2);
            }
        }
    }
}
