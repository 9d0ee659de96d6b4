//! Sentence inputs from raw text.
//!
//! The word-level path looks tokens up in a pretrained embedding table and
//! normalizes each row; the character-level path (see [`chars`]) convolves
//! one-hot char windows and max-pools per word.

pub mod chars;

use crate::error::{Error, Result};
use crate::wavefunction::{normalize, SentenceMatrix, StateVector};
use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

pub use chars::{char_sentence_matrix, CharConv, CharInput};

/// Reserved index of the unknown-word row.
pub const UNK_INDEX: usize = 0;
/// Reserved index of the padding row.
pub const PAD_INDEX: usize = 1;

const UNK_TOKEN: &str = "<unk>";
const PAD_TOKEN: &str = "<pad>";

/// Dense token ↔ index map with reserved UNK and PAD entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    index_of: HashMap<String, usize>,
    tokens: Vec<String>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new()
    }
}

impl Vocabulary {
    pub fn new() -> Self {
        let tokens = vec![UNK_TOKEN.to_string(), PAD_TOKEN.to_string()];
        let index_of = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self { index_of, tokens }
    }

    /// Rebuilds a vocabulary from a full token list (specials included at
    /// their reserved slots), e.g. when loading a checkpoint.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < 2 || tokens[UNK_INDEX] != UNK_TOKEN || tokens[PAD_INDEX] != PAD_TOKEN {
            return Err(Error::Load(
                "token list must start with the reserved UNK and PAD entries".into(),
            ));
        }
        let mut index_of = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index_of.insert(t.clone(), i).is_some() {
                return Err(Error::Load(format!("duplicate token {t:?} in vocabulary")));
            }
        }
        Ok(Self { index_of, tokens })
    }

    /// Adds a token if absent; returns its index either way.
    pub fn add(&mut self, token: &str) -> usize {
        if let Some(&idx) = self.index_of.get(token) {
            return idx;
        }
        let idx = self.tokens.len();
        self.tokens.push(token.to_string());
        self.index_of.insert(token.to_string(), idx);
        idx
    }

    pub fn index(&self, token: &str) -> Option<usize> {
        self.index_of.get(token).copied()
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.tokens.get(index).map(|s| s.as_str())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false // UNK and PAD are always present
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Vocabulary plus one embedding row per token.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub vocab: Vocabulary,
    dim: usize,
    matrix: Vec<f64>,
    /// Whether training may update the rows.
    pub trainable: bool,
}

impl EmbeddingTable {
    pub fn new(vocab: Vocabulary, dim: usize, matrix: Vec<f64>, trainable: bool) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("embedding dim must be positive".into()));
        }
        if matrix.len() != vocab.len() * dim {
            return Err(Error::Dimension(format!(
                "matrix has {} values for {} tokens of dim {dim}",
                matrix.len(),
                vocab.len()
            )));
        }
        Ok(Self {
            vocab,
            dim,
            matrix,
            trainable,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, index: usize) -> &[f64] {
        &self.matrix[index * self.dim..(index + 1) * self.dim]
    }

    pub fn row_mut(&mut self, index: usize) -> &mut [f64] {
        &mut self.matrix[index * self.dim..(index + 1) * self.dim]
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    /// Index for a token, falling back to UNK.
    pub fn lookup(&self, token: &str) -> usize {
        self.vocab.index(token).unwrap_or(UNK_INDEX)
    }
}

/// What happened while parsing an embedding file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmbeddingLoadReport {
    pub loaded: usize,
    /// Lines skipped for wrong arity or unparseable numbers.
    pub skipped: usize,
    /// Repeated tokens (first occurrence wins).
    pub duplicates: usize,
}

/// Parses a text-format embedding file: one token followed by `expected_dim`
/// whitespace-separated decimals per line.
///
/// Malformed lines are skipped and counted. The UNK row is the column-wise
/// mean of the loaded vectors and the PAD row is zero. A file with no usable
/// rows is a fatal load error.
pub fn load_embeddings(
    path: &Path,
    expected_dim: usize,
) -> Result<(EmbeddingTable, EmbeddingLoadReport)> {
    if expected_dim == 0 {
        return Err(Error::InvalidArgument("expected_dim must be positive".into()));
    }
    let file = File::open(path)
        .map_err(|e| Error::Load(format!("cannot open {}: {e}", path.display())))?;
    let reader = BufReader::new(file);

    let mut vocab = Vocabulary::new();
    let mut rows: Vec<f64> = Vec::new();
    let mut report = EmbeddingLoadReport::default();

    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let Some(token) = parts.next() else {
            report.skipped += 1;
            continue;
        };
        let values: Vec<f64> = parts.filter_map(|p| p.parse::<f64>().ok()).collect();
        if values.len() != expected_dim || values.iter().any(|v| !v.is_finite()) {
            report.skipped += 1;
            continue;
        }
        if vocab.index(token).is_some() {
            report.duplicates += 1;
            continue;
        }
        vocab.add(token);
        rows.extend_from_slice(&values);
        report.loaded += 1;
    }

    if report.loaded == 0 {
        return Err(Error::Load(format!(
            "{}: no usable embedding rows (skipped {})",
            path.display(),
            report.skipped
        )));
    }

    // UNK = mean of loaded vectors, PAD = zeros, then the loaded rows.
    let mut matrix = vec![0.0; (report.loaded + 2) * expected_dim];
    for (i, chunk) in rows.chunks(expected_dim).enumerate() {
        let offset = (i + 2) * expected_dim;
        matrix[offset..offset + expected_dim].copy_from_slice(chunk);
        for (d, &v) in chunk.iter().enumerate() {
            matrix[UNK_INDEX * expected_dim + d] += v;
        }
    }
    for d in 0..expected_dim {
        matrix[UNK_INDEX * expected_dim + d] /= report.loaded as f64;
    }

    let table = EmbeddingTable::new(vocab, expected_dim, matrix, true)?;
    Ok((table, report))
}

/// Lowercases, splits on Unicode whitespace, and strips leading/trailing
/// non-alphanumeric characters. Tokens that strip to nothing are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .filter_map(|raw| {
            let trimmed: &str = raw.trim_matches(|c: char| !c.is_alphanumeric());
            if trimmed.is_empty() {
                None
            } else {
                Some(trimmed.to_lowercase())
            }
        })
        .collect()
}

/// A sentence matrix together with the lookup provenance the trainer needs
/// to push gradients back into embedding rows.
#[derive(Debug, Clone)]
pub struct EncodedSentence {
    pub matrix: SentenceMatrix,
    /// Embedding row backing each matrix row.
    pub token_ids: Vec<usize>,
    /// Euclidean norm of the raw embedding before normalization.
    pub raw_norms: Vec<f64>,
    /// Rows that fell back to the uniform vector (zero raw embedding); these
    /// carry no gradient.
    pub fallback: Vec<bool>,
}

/// Builds the word-level sentence matrix plus lookup provenance.
///
/// Out-of-vocabulary tokens map to UNK; an all-zero embedding row is
/// replaced by the uniform vector `1/√M` before normalization.
pub fn encode_sentence(tokens: &[String], table: &EmbeddingTable) -> Result<EncodedSentence> {
    if tokens.is_empty() {
        return Err(Error::Degenerate("empty token list".into()));
    }
    let m = table.dim();
    let uniform = 1.0 / (m as f64).sqrt();
    let mut rows = Vec::with_capacity(tokens.len());
    let mut token_ids = Vec::with_capacity(tokens.len());
    let mut raw_norms = Vec::with_capacity(tokens.len());
    let mut fallback = Vec::with_capacity(tokens.len());
    for token in tokens {
        let id = table.lookup(token);
        let raw = table.row(id);
        let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            rows.push(StateVector::new(vec![uniform; m])?);
            fallback.push(true);
        } else {
            rows.push(normalize(raw)?);
            fallback.push(false);
        }
        token_ids.push(id);
        raw_norms.push(norm);
    }
    Ok(EncodedSentence {
        matrix: SentenceMatrix::new(rows)?,
        token_ids,
        raw_norms,
        fallback,
    })
}

/// Word-level sentence matrix: one normalized embedding row per token.
pub fn sentence_matrix_word(tokens: &[String], table: &EmbeddingTable) -> Result<SentenceMatrix> {
    Ok(encode_sentence(tokens, table)?.matrix)
}

/// Text-to-matrix front end shared by training, evaluation and export.
#[derive(Debug, Clone)]
pub enum Encoder {
    Word {
        table: EmbeddingTable,
        max_positions: usize,
    },
    Char {
        input: CharInput,
        conv: CharConv,
        max_positions: usize,
    },
}

impl Encoder {
    pub fn encode(&self, text: &str) -> Result<EncodedSentence> {
        match self {
            Encoder::Word {
                table,
                max_positions,
            } => {
                let mut tokens = tokenize(text);
                tokens.truncate(*max_positions);
                encode_sentence(&tokens, table)
            }
            Encoder::Char {
                input,
                conv,
                max_positions,
            } => {
                let matrix = char_sentence_matrix(text, input, conv)?;
                let mut rows = matrix.rows().to_vec();
                rows.truncate(*max_positions);
                let matrix = SentenceMatrix::new(rows)?;
                let n = matrix.len();
                Ok(EncodedSentence {
                    matrix,
                    token_ids: vec![0; n],
                    raw_norms: vec![0.0; n],
                    fallback: vec![true; n], // char rows carry no word-embedding gradient
                })
            }
        }
    }

    /// The embedding table when this encoder fine-tunes one.
    pub fn trainable_table_mut(&mut self) -> Option<&mut EmbeddingTable> {
        match self {
            Encoder::Word { table, .. } if table.trainable => Some(table),
            _ => None,
        }
    }

    pub fn table(&self) -> Option<&EmbeddingTable> {
        match self {
            Encoder::Word { table, .. } => Some(table),
            Encoder::Char { .. } => None,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Encoder::Word { table, .. } => table.dim(),
            Encoder::Char { conv, .. } => conv.output_dim(),
        }
    }
}
