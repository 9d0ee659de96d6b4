//! Character-level sentence input: slide a k-char window over the text,
//! convolve each window against M kernels, max-pool the responses into one
//! row per word, and normalize rows like the word path does.

use crate::error::{Error, Result};
use crate::rng::substream;
use crate::wavefunction::{SentenceMatrix, StateVector};
use rand::Rng;
use std::collections::HashMap;
use std::fs;
use std::path::Path;

/// Index of the reserved pad/unknown character.
pub const PAD_CHAR_INDEX: usize = 0;

/// Character alphabet and per-character embeddings.
///
/// `char_dim` is the embedding width d; windows concatenate `window`
/// consecutive char embeddings into vectors of length `d·window`. Characters
/// outside the alphabet share the reserved pad row.
#[derive(Debug, Clone, PartialEq)]
pub struct CharInput {
    char_dim: usize,
    window: usize,
    charset: HashMap<char, usize>,
    table: Vec<f64>,
}

impl CharInput {
    /// One-hot embeddings over the characters of `alphabet` (first
    /// occurrence wins), with index 0 reserved for pad/unknown.
    pub fn one_hot(alphabet: &str, window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::InvalidArgument("char window must be at least 1".into()));
        }
        let mut charset = HashMap::new();
        let mut next = PAD_CHAR_INDEX + 1;
        for c in alphabet.chars() {
            if c == '\n' || c == '\r' {
                continue;
            }
            charset.entry(c).or_insert_with(|| {
                let idx = next;
                next += 1;
                idx
            });
        }
        if charset.is_empty() {
            return Err(Error::Load("charset is empty".into()));
        }
        let char_dim = next;
        let mut table = vec![0.0; char_dim * char_dim];
        for i in 0..char_dim {
            table[i * char_dim + i] = 1.0;
        }
        Ok(Self {
            char_dim,
            window,
            charset,
            table,
        })
    }

    /// Reads the alphabet from a UTF-8 file; every distinct character in the
    /// file (newlines excluded) joins the charset in order of appearance.
    pub fn from_charset_file(path: &Path, window: usize) -> Result<Self> {
        let content = fs::read_to_string(path)
            .map_err(|e| Error::Load(format!("cannot read {}: {e}", path.display())))?;
        Self::one_hot(&content, window)
    }

    pub fn char_dim(&self) -> usize {
        self.char_dim
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn char_index(&self, c: char) -> usize {
        self.charset.get(&c).copied().unwrap_or(PAD_CHAR_INDEX)
    }

    /// The alphabet in index order (pad excluded); feeding this back into
    /// [`CharInput::one_hot`] reproduces the same mapping.
    pub fn alphabet(&self) -> String {
        let mut chars: Vec<(usize, char)> = self.charset.iter().map(|(&c, &i)| (i, c)).collect();
        chars.sort_by_key(|(i, _)| *i);
        chars.into_iter().map(|(_, c)| c).collect()
    }

    fn embed(&self, index: usize) -> &[f64] {
        &self.table[index * self.char_dim..(index + 1) * self.char_dim]
    }
}

/// Convolution kernels applied to char windows: `output_dim` kernels of
/// length `char_dim · window`.
#[derive(Debug, Clone, PartialEq)]
pub struct CharConv {
    kernels: Vec<Vec<f64>>,
    output_dim: usize,
}

impl CharConv {
    /// Seeded uniform init on ±1/√(kernel length).
    pub fn init(input: &CharInput, output_dim: usize, seed: u64) -> Result<Self> {
        if output_dim == 0 {
            return Err(Error::InvalidArgument("output_dim must be at least 1".into()));
        }
        let len = input.char_dim() * input.window();
        let bound = 1.0 / (len as f64).sqrt();
        let mut rng = substream(seed, "char-conv");
        let kernels = (0..output_dim)
            .map(|_| (0..len).map(|_| rng.random_range(-bound..bound)).collect())
            .collect();
        Ok(Self {
            kernels,
            output_dim,
        })
    }

    /// Identity kernels: output j copies window coordinate j. Requires
    /// window size 1, where kernel length equals the char dimension.
    pub fn identity(input: &CharInput) -> Result<Self> {
        if input.window() != 1 {
            return Err(Error::InvalidArgument(
                "identity char kernels require window size 1".into(),
            ));
        }
        let d = input.char_dim();
        let mut kernels = vec![vec![0.0; d]; d];
        for (j, k) in kernels.iter_mut().enumerate() {
            k[j] = 1.0;
        }
        Ok(Self {
            kernels,
            output_dim: d,
        })
    }

    /// Rebuilds kernels loaded from a checkpoint.
    pub fn from_kernels(kernels: Vec<Vec<f64>>, input: &CharInput) -> Result<Self> {
        let len = input.char_dim() * input.window();
        if kernels.is_empty() || kernels.iter().any(|k| k.len() != len) {
            return Err(Error::Dimension(format!(
                "char kernels must be non-empty vectors of length {len}"
            )));
        }
        let output_dim = kernels.len();
        Ok(Self {
            kernels,
            output_dim,
        })
    }

    pub fn kernels(&self) -> &[Vec<f64>] {
        &self.kernels
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }
}

/// Concatenated k-char window embeddings `z_m` for the whole text,
/// lowercased. Text shorter than the window is padded with the reserved pad
/// character, so at least one window always exists; otherwise there are
/// exactly `chars − window + 1` windows.
pub fn char_windows(text: &str, input: &CharInput) -> Result<Vec<Vec<f64>>> {
    let lower = text.to_lowercase();
    let mut ids: Vec<usize> = lower.chars().map(|c| input.char_index(c)).collect();
    if ids.is_empty() {
        return Err(Error::Degenerate("empty text".into()));
    }
    while ids.len() < input.window() {
        ids.push(PAD_CHAR_INDEX);
    }
    let k = input.window();
    let windows = (0..=ids.len() - k)
        .map(|m| {
            let mut z = Vec::with_capacity(input.char_dim() * k);
            for &id in &ids[m..m + k] {
                z.extend_from_slice(input.embed(id));
            }
            z
        })
        .collect();
    Ok(windows)
}

/// Character-level sentence matrix with one row per word.
///
/// Windows are assigned to the word containing their start character;
/// responses within a word max-pool elementwise into that word's row. Rows
/// are normalized, falling back to the uniform vector when all-zero.
pub fn char_sentence_matrix(
    text: &str,
    input: &CharInput,
    conv: &CharConv,
) -> Result<SentenceMatrix> {
    let responses = convolve_windows(text, input, conv)?;
    let lower = text.to_lowercase();
    let spans = word_spans(&lower);
    if spans.is_empty() {
        return Err(Error::Degenerate("text contains no words".into()));
    }
    let segments: Vec<Vec<usize>> = spans
        .iter()
        .map(|&(start, end)| {
            let in_span: Vec<usize> = (start..end).filter(|&m| m < responses.len()).collect();
            if in_span.is_empty() {
                // A trailing word shorter than the window owns no window
                // start; clamp to the last window so every word keeps a row.
                vec![responses.len() - 1]
            } else {
                in_span
            }
        })
        .collect();
    rows_from_segments(&responses, &segments)
}

/// Character-level sentence matrix for boundary-free streams: responses are
/// max-pooled over consecutive non-overlapping segments of `stride` windows.
pub fn char_sentence_matrix_fixed_stride(
    text: &str,
    input: &CharInput,
    conv: &CharConv,
    stride: usize,
) -> Result<SentenceMatrix> {
    if stride == 0 {
        return Err(Error::InvalidArgument("stride must be at least 1".into()));
    }
    let responses = convolve_windows(text, input, conv)?;
    let segments: Vec<Vec<usize>> = (0..responses.len())
        .step_by(stride)
        .map(|start| (start..(start + stride).min(responses.len())).collect())
        .collect();
    rows_from_segments(&responses, &segments)
}

fn convolve_windows(text: &str, input: &CharInput, conv: &CharConv) -> Result<Vec<Vec<f64>>> {
    let windows = char_windows(text, input)?;
    Ok(windows
        .iter()
        .map(|z| {
            conv.kernels
                .iter()
                .map(|k| k.iter().zip(z).map(|(a, b)| a * b).sum())
                .collect()
        })
        .collect())
}

fn word_spans(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start = None;
    for (i, c) in text.chars().enumerate() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                spans.push((s, i));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        spans.push((s, text.chars().count()));
    }
    spans
}

fn rows_from_segments(responses: &[Vec<f64>], segments: &[Vec<usize>]) -> Result<SentenceMatrix> {
    let dim = responses[0].len();
    let uniform = 1.0 / (dim as f64).sqrt();
    let mut rows = Vec::with_capacity(segments.len());
    for segment in segments {
        let mut pooled = vec![f64::NEG_INFINITY; dim];
        for &m in segment {
            for (slot, &x) in pooled.iter_mut().zip(&responses[m]) {
                *slot = slot.max(x);
            }
        }
        let norm = pooled.iter().map(|x| x * x).sum::<f64>().sqrt();
        let row = if norm == 0.0 {
            StateVector::new(vec![uniform; dim])?
        } else {
            crate::wavefunction::normalize(&pooled)?
        };
        rows.push(row);
    }
    SentenceMatrix::new(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ascii_input(window: usize) -> CharInput {
        CharInput::one_hot("abcdefghijklmnopqrstuvwxyz ", window).unwrap()
    }

    #[test]
    fn window_count_is_chars_minus_window_plus_one() {
        let input = ascii_input(3);
        let text = "hello world";
        let windows = char_windows(text, &input).unwrap();
        assert_eq!(windows.len(), text.chars().count() - 3 + 1);
    }

    #[test]
    fn short_text_is_padded_to_one_window() {
        let input = ascii_input(5);
        let windows = char_windows("ab", &input).unwrap();
        assert_eq!(windows.len(), 1);
        // The padded tail is the reserved pad character's one-hot rows.
        let d = input.char_dim();
        let z = &windows[0];
        assert_eq!(z[2 * d + PAD_CHAR_INDEX], 1.0);
    }

    #[test]
    fn identity_kernels_window_one_give_per_char_rows() {
        let input = ascii_input(1);
        let conv = CharConv::identity(&input).unwrap();
        let s = char_sentence_matrix("a b c", &input, &conv).unwrap();
        assert_eq!(s.len(), 3);
        // Each row is the (normalized) one-hot of its character.
        for (row, c) in s.rows().iter().zip(['a', 'b', 'c']) {
            let idx = input.char_index(c);
            assert_relative_eq!(row.amplitudes()[idx], 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn one_row_per_word() {
        let input = ascii_input(2);
        let conv = CharConv::init(&input, 7, 3).unwrap();
        let s = char_sentence_matrix("the quick brown fox", &input, &conv).unwrap();
        assert_eq!(s.len(), 4);
        assert_eq!(s.dim(), 7);
    }

    #[test]
    fn max_pool_matches_loop_oracle() {
        let input = ascii_input(2);
        let conv = CharConv::init(&input, 5, 11).unwrap();
        let text = "abc de";
        let responses = convolve_windows(text, &input, &conv).unwrap();
        let s = char_sentence_matrix(text, &input, &conv).unwrap();
        // First word "abc" spans chars 0..3 and owns window starts 0, 1, 2.
        let mut expected = vec![f64::NEG_INFINITY; 5];
        for response in responses.iter().take(3) {
            for (e, &x) in expected.iter_mut().zip(response) {
                *e = e.max(x);
            }
        }
        let norm: f64 = expected.iter().map(|x| x * x).sum::<f64>().sqrt();
        for (got, want) in s.row(0).amplitudes().iter().zip(&expected) {
            assert_relative_eq!(*got, want / norm, epsilon = 1e-12);
        }
    }

    #[test]
    fn fixed_stride_segments_cover_all_windows() {
        let input = ascii_input(2);
        let conv = CharConv::init(&input, 4, 7).unwrap();
        let text = "abcdefgh"; // 7 windows at k=2
        let s = char_sentence_matrix_fixed_stride(text, &input, &conv, 3).unwrap();
        assert_eq!(s.len(), 3); // segments of 3 + 3 + 1
    }

    #[test]
    fn rows_are_normalized() {
        let input = ascii_input(3);
        let conv = CharConv::init(&input, 6, 5).unwrap();
        let s = char_sentence_matrix("several words in here", &input, &conv).unwrap();
        for row in s.rows() {
            let norm: f64 = row.amplitudes().iter().map(|x| x * x).sum();
            assert_relative_eq!(norm, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn whitespace_only_text_is_degenerate() {
        let input = ascii_input(2);
        let conv = CharConv::init(&input, 4, 1).unwrap();
        assert!(char_sentence_matrix("   ", &input, &conv).is_err());
    }
}
