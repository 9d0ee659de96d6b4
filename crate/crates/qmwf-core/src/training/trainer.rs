//! Epoch loop: shuffled pair batches, Adam updates, per-epoch dev MAP, and
//! best-dev model selection.

use super::{adam_step, backward, AdamState, HyperParams};
use crate::data::Dataset;
use crate::embedding::Encoder;
use crate::error::{Error, Result};
use crate::eval::{mean_average_precision, mean_reciprocal_rank, RankedCandidates};
use crate::network::{forward, match_score, QmwfModel};
use crate::rng::substream_indexed;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

/// One line of the training history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_map: f64,
    pub dev_mrr: f64,
}

/// Result of a training run: the best-dev model plus the full history.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: QmwfModel,
    pub encoder: Encoder,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_dev_map: f64,
    /// Questions without at least one positive and one negative, skipped.
    pub skipped_questions: usize,
}

/// Scores every question group with the current model.
///
/// Returns the ranked groups plus the number of groups skipped for lacking
/// a positive candidate.
pub fn score_dataset(
    dataset: &Dataset,
    model: &QmwfModel,
    encoder: &Encoder,
) -> Result<(Vec<RankedCandidates>, usize)> {
    let mut groups = Vec::with_capacity(dataset.groups.len());
    let mut skipped = 0usize;
    for g in &dataset.groups {
        if !g.pairs.iter().any(|p| p.label) {
            skipped += 1;
            continue;
        }
        let q_repr = forward(&encoder.encode(g.question_text())?.matrix, model)?;
        let mut scored = Vec::with_capacity(g.pairs.len());
        for pair in &g.pairs {
            let a_repr = forward(&encoder.encode(&pair.answer_text)?.matrix, model)?;
            scored.push((match_score(&q_repr, &a_repr)?, pair.label));
        }
        groups.push(RankedCandidates::from_scores(&g.question_id, scored)?);
    }
    Ok((groups, skipped))
}

/// Trains on shuffled (question, positive, negative) triples and keeps the
/// model with the best dev MAP.
///
/// Every positive is paired with every negative of its question. Questions
/// missing either side are skipped and counted. Batch gradients are averaged
/// in fixed index order, so a given seed reproduces the history bit for bit.
pub fn train(
    train_set: &Dataset,
    dev_set: &Dataset,
    model: QmwfModel,
    encoder: Encoder,
    hp: &HyperParams,
) -> Result<TrainOutcome> {
    hp.validate()?;
    if train_set.groups.is_empty() || dev_set.groups.is_empty() {
        return Err(Error::Degenerate("empty train or dev split".into()));
    }

    let mut skipped_questions = 0usize;
    let mut pairs: Vec<(usize, usize, usize)> = Vec::new();
    for (gi, g) in train_set.groups.iter().enumerate() {
        let positives: Vec<usize> = (0..g.pairs.len()).filter(|&i| g.pairs[i].label).collect();
        let negatives: Vec<usize> = (0..g.pairs.len()).filter(|&i| !g.pairs[i].label).collect();
        if positives.is_empty() || negatives.is_empty() {
            skipped_questions += 1;
            continue;
        }
        for &p in &positives {
            for &n in &negatives {
                pairs.push((gi, p, n));
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::Degenerate(
            "no trainable (positive, negative) pairs in the train split".into(),
        ));
    }

    let mut model = model;
    let mut encoder = encoder;
    let train_embeddings = encoder.trainable_table_mut().is_some();
    let mut state = AdamState::new(&model);

    let mut history = Vec::with_capacity(hp.epochs);
    let mut best: Option<(QmwfModel, Encoder, usize, f64)> = None;

    for epoch in 1..=hp.epochs {
        let mut order = pairs.clone();
        let mut rng = substream_indexed(hp.seed, "shuffle", epoch as u64);
        order.shuffle(&mut rng);

        let mut epoch_loss = 0.0;
        for batch in order.chunks(hp.batch_size) {
            let mut grads = super::Gradients::zeros_like(&model);
            for &(gi, p, n) in batch {
                let g = &train_set.groups[gi];
                let q = encoder.encode(g.question_text())?;
                let pos = encoder.encode(&g.pairs[p].answer_text)?;
                let neg = encoder.encode(&g.pairs[n].answer_text)?;
                let (loss, pair_grads) =
                    backward(&model, &q, &pos, &neg, hp, train_embeddings)?;
                epoch_loss += loss;
                grads.accumulate(&pair_grads);
            }
            grads.scale(1.0 / batch.len() as f64);
            adam_step(
                &mut state,
                &mut model,
                encoder.trainable_table_mut(),
                &grads,
                hp,
            );
        }

        let (dev_groups, _) = score_dataset(dev_set, &model, &encoder)?;
        if dev_groups.is_empty() {
            return Err(Error::Degenerate("dev split has no scorable questions".into()));
        }
        let dev_map = mean_average_precision(&dev_groups)?;
        let dev_mrr = mean_reciprocal_rank(&dev_groups)?;
        history.push(EpochRecord {
            epoch,
            train_loss: epoch_loss / pairs.len() as f64,
            dev_map,
            dev_mrr,
        });

        let improved = match &best {
            Some((_, _, _, best_map)) => dev_map > *best_map,
            None => true,
        };
        if improved {
            best = Some((model.clone(), encoder.clone(), epoch, dev_map));
        }
    }

    let (best_model, best_encoder, best_epoch, best_dev_map) =
        best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        model: best_model,
        encoder: best_encoder,
        history,
        best_epoch,
        best_dev_map,
        skipped_questions,
    })
}
