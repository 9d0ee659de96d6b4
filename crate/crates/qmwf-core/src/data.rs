//! QA dataset ingestion: a single normalized TSV schema, grouping by
//! question, degenerate-question filtering, and seeded negative sampling.
//!
//! The TSV schema is one record per line, tab-separated:
//! `question_id <TAB> question_text <TAB> answer_text <TAB> label` with a
//! binary label. Converters from other layouts are one-line transforms
//! documented in the README.

use crate::embedding::tokenize;
use crate::error::{Error, Result};
use crate::rng::substream;
use rand::Rng;
use serde::Serialize;
use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

/// One candidate answer for one question.
#[derive(Debug, Clone, PartialEq)]
pub struct QaPair {
    pub question_id: String,
    pub question_text: String,
    pub answer_text: String,
    /// True for a correct answer.
    pub label: bool,
}

/// All candidates sharing a question id, in input order.
#[derive(Debug, Clone, PartialEq)]
pub struct QuestionGroup {
    pub question_id: String,
    pub pairs: Vec<QaPair>,
}

impl QuestionGroup {
    pub fn question_text(&self) -> &str {
        &self.pairs[0].question_text
    }

    pub fn positives(&self) -> impl Iterator<Item = &QaPair> {
        self.pairs.iter().filter(|p| p.label)
    }

    pub fn negatives(&self) -> impl Iterator<Item = &QaPair> {
        self.pairs.iter().filter(|p| !p.label)
    }
}

/// An ordered collection of question groups for one split.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub split: String,
    pub groups: Vec<QuestionGroup>,
}

impl Dataset {
    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn num_pairs(&self) -> usize {
        self.groups.iter().map(|g| g.pairs.len()).sum()
    }
}

/// Ingestion counters, emitted on the diagnostic stream by the CLI.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LoadReport {
    pub accepted: usize,
    pub malformed: usize,
    /// Pairs whose question or answer tokenized to nothing.
    pub dropped_empty: usize,
    /// Identical (question, answer) duplicates removed within a group.
    pub deduplicated: usize,
    /// First few malformed lines, for diagnostics.
    pub samples: Vec<String>,
}

const MALFORMED_SAMPLE_LIMIT: usize = 5;
const MALFORMED_FATAL_FRACTION: f64 = 0.10;

/// Parses a TSV split into question groups.
///
/// Malformed lines are skipped and counted; more than 10% malformed is a
/// fatal load error carrying sample lines. Pairs with empty-after-tokenize
/// texts are dropped with a count, and exact duplicate (question, answer)
/// pairs within a group are removed.
pub fn load_tsv(path: &Path, split: &str) -> Result<(Dataset, LoadReport)> {
    let file = File::open(path)
        .map_err(|e| Error::Load(format!("cannot open {}: {e}", path.display())))?;
    let reader = BufReader::new(file);

    let mut report = LoadReport::default();
    let mut groups: Vec<QuestionGroup> = Vec::new();
    let mut group_index: std::collections::HashMap<String, usize> = std::collections::HashMap::new();
    let mut seen: HashSet<(usize, String, String)> = HashSet::new();
    let mut total_lines = 0usize;

    for line in reader.lines() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        total_lines += 1;
        let fields: Vec<&str> = line.split('\t').collect();
        let parsed = if fields.len() == 4 {
            match fields[3].trim() {
                "0" => Some(false),
                "1" => Some(true),
                _ => None,
            }
            .map(|label| (fields[0].trim(), fields[1], fields[2], label))
        } else {
            None
        };
        let Some((qid, qtext, atext, label)) = parsed else {
            report.malformed += 1;
            if report.samples.len() < MALFORMED_SAMPLE_LIMIT {
                report.samples.push(line.clone());
            }
            continue;
        };
        if qid.is_empty() || tokenize(qtext).is_empty() || tokenize(atext).is_empty() {
            report.dropped_empty += 1;
            continue;
        }
        let idx = *group_index.entry(qid.to_string()).or_insert_with(|| {
            groups.push(QuestionGroup {
                question_id: qid.to_string(),
                pairs: Vec::new(),
            });
            groups.len() - 1
        });
        if !seen.insert((idx, qtext.to_string(), atext.to_string())) {
            report.deduplicated += 1;
            continue;
        }
        groups[idx].pairs.push(QaPair {
            question_id: qid.to_string(),
            question_text: qtext.to_string(),
            answer_text: atext.to_string(),
            label,
        });
        report.accepted += 1;
    }

    if total_lines > 0 && report.malformed as f64 > MALFORMED_FATAL_FRACTION * total_lines as f64 {
        return Err(Error::Load(format!(
            "{}: {} of {} lines malformed; first offenders: {:?}",
            path.display(),
            report.malformed,
            total_lines,
            report.samples
        )));
    }

    Ok((
        Dataset {
            split: split.to_string(),
            groups,
        },
        report,
    ))
}

/// Drops groups with no correct candidate answer. Returns the removal count.
pub fn filter_no_positive(d: Dataset) -> (Dataset, usize) {
    let before = d.groups.len();
    let groups: Vec<QuestionGroup> = d
        .groups
        .into_iter()
        .filter(|g| g.pairs.iter().any(|p| p.label))
        .collect();
    let removed = before - groups.len();
    (
        Dataset {
            split: d.split,
            groups,
        },
        removed,
    )
}

/// Replaces each group's negatives with exactly `k` answers sampled from
/// other questions, seeded and deterministic.
///
/// Sampled negatives never repeat within a group and never collide with the
/// group's positive answer texts. A pool smaller than `k` usable candidates
/// for any group is fatal.
pub fn negative_sample(d: Dataset, k: usize, seed: u64) -> Result<Dataset> {
    if k == 0 {
        return Err(Error::InvalidArgument("negative sample count must be positive".into()));
    }
    // Answer pool in dataset order, deduplicated by text.
    let mut pool: Vec<(usize, String)> = Vec::new();
    let mut seen = HashSet::new();
    for (gi, g) in d.groups.iter().enumerate() {
        for p in &g.pairs {
            if seen.insert(p.answer_text.clone()) {
                pool.push((gi, p.answer_text.clone()));
            }
        }
    }
    if pool.len() <= k {
        return Err(Error::InvalidArgument(format!(
            "answer pool of {} is too small to sample {k} negatives",
            pool.len()
        )));
    }

    let mut rng = substream(seed, "negative-sampling");
    let mut groups = Vec::with_capacity(d.groups.len());
    for (gi, g) in d.groups.iter().enumerate() {
        let positive_texts: HashSet<&str> =
            g.positives().map(|p| p.answer_text.as_str()).collect();
        let mut pairs: Vec<QaPair> = g.positives().cloned().collect();
        let mut chosen: HashSet<usize> = HashSet::new();
        let usable = pool
            .iter()
            .enumerate()
            .filter(|(_, (owner, text))| *owner != gi && !positive_texts.contains(text.as_str()))
            .count();
        if usable < k {
            return Err(Error::InvalidArgument(format!(
                "question {} has only {usable} usable pool answers, need {k}",
                g.question_id
            )));
        }
        while chosen.len() < k {
            let idx = rng.random_range(0..pool.len());
            let (owner, text) = &pool[idx];
            if *owner == gi || positive_texts.contains(text.as_str()) || !chosen.insert(idx) {
                continue;
            }
            pairs.push(QaPair {
                question_id: g.question_id.clone(),
                question_text: g.question_text().to_string(),
                answer_text: text.clone(),
                label: false,
            });
        }
        groups.push(QuestionGroup {
            question_id: g.question_id.clone(),
            pairs,
        });
    }
    Ok(Dataset {
        split: d.split,
        groups,
    })
}
