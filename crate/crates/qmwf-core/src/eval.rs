//! Ranking metrics over scored candidate groups: MAP, MRR and P@1.
//!
//! Ties are broken by original candidate order (stable sort), so metric
//! values are bit-reproducible given identical inputs.

use crate::error::{Error, Result};
use serde::Serialize;
use std::fmt;

/// Candidates of one question sorted by descending score.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedCandidates {
    pub question_id: String,
    ranked: Vec<(f64, bool)>,
}

impl RankedCandidates {
    /// Sorts `(score, label)` pairs by descending score, keeping input order
    /// on ties. Requires at least one candidate and one positive label.
    pub fn from_scores(question_id: &str, scored: Vec<(f64, bool)>) -> Result<Self> {
        if scored.is_empty() {
            return Err(Error::Degenerate(format!(
                "question {question_id} has no candidates"
            )));
        }
        if !scored.iter().any(|(_, label)| *label) {
            return Err(Error::Degenerate(format!(
                "question {question_id} has no positive candidate"
            )));
        }
        if let Some((score, _)) = scored.iter().find(|(s, _)| !s.is_finite()) {
            return Err(Error::NonFinite(format!(
                "score {score} for question {question_id}"
            )));
        }
        let mut ranked = scored;
        ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        Ok(Self {
            question_id: question_id.to_string(),
            ranked,
        })
    }

    pub fn ranked(&self) -> &[(f64, bool)] {
        &self.ranked
    }

    /// 1-based rank of the highest-ranked positive.
    fn first_positive_rank(&self) -> usize {
        self.ranked
            .iter()
            .position(|(_, label)| *label)
            .expect("constructor guarantees a positive")
            + 1
    }
}

/// Mean over the positives of precision at their rank.
pub fn average_precision(r: &RankedCandidates) -> f64 {
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, (_, label)) in r.ranked.iter().enumerate() {
        if *label {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / hits as f64
}

/// Arithmetic mean of per-group average precision.
pub fn mean_average_precision(groups: &[RankedCandidates]) -> Result<f64> {
    if groups.is_empty() {
        return Err(Error::Degenerate("no groups to evaluate".into()));
    }
    Ok(groups.iter().map(average_precision).sum::<f64>() / groups.len() as f64)
}

/// Arithmetic mean of the reciprocal rank of each group's first positive.
pub fn mean_reciprocal_rank(groups: &[RankedCandidates]) -> Result<f64> {
    if groups.is_empty() {
        return Err(Error::Degenerate("no groups to evaluate".into()));
    }
    Ok(groups
        .iter()
        .map(|g| 1.0 / g.first_positive_rank() as f64)
        .sum::<f64>()
        / groups.len() as f64)
}

/// Fraction of groups whose top-ranked candidate is positive.
pub fn p_at_1(groups: &[RankedCandidates]) -> Result<f64> {
    if groups.is_empty() {
        return Err(Error::Degenerate("no groups to evaluate".into()));
    }
    let hits = groups.iter().filter(|g| g.ranked[0].1).count();
    Ok(hits as f64 / groups.len() as f64)
}

/// One metric value in the machine-readable report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRecord {
    pub metric: &'static str,
    pub split: String,
    pub value: f64,
    pub seed: u64,
}

/// All three metrics for one split, printable as a table or as JSON lines.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub split: String,
    pub seed: u64,
    pub map: f64,
    pub mrr: f64,
    pub p_at_1: f64,
    pub groups: usize,
}

impl MetricReport {
    pub fn compute(split: &str, seed: u64, groups: &[RankedCandidates]) -> Result<Self> {
        Ok(Self {
            split: split.to_string(),
            seed,
            map: mean_average_precision(groups)?,
            mrr: mean_reciprocal_rank(groups)?,
            p_at_1: p_at_1(groups)?,
            groups: groups.len(),
        })
    }

    pub fn records(&self) -> Vec<MetricRecord> {
        vec![
            MetricRecord {
                metric: "map",
                split: self.split.clone(),
                value: self.map,
                seed: self.seed,
            },
            MetricRecord {
                metric: "mrr",
                split: self.split.clone(),
                value: self.mrr,
                seed: self.seed,
            },
            MetricRecord {
                metric: "p_at_1",
                split: self.split.clone(),
                value: self.p_at_1,
                seed: self.seed,
            },
        ]
    }
}

impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "split: {} ({} questions, seed {})", self.split, self.groups, self.seed)?;
        writeln!(f, "  {:<6} {:.4}", "MAP", self.map)?;
        writeln!(f, "  {:<6} {:.4}", "MRR", self.mrr)?;
        write!(f, "  {:<6} {:.4}", "P@1", self.p_at_1)
    }
}
