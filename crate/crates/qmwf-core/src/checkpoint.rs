//! Model checkpoints: a versioned, self-describing key-value container with
//! little-endian 64-bit float payloads and a SHA-256 integrity trailer.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   8 bytes  "QMWFCKPT"
//! version u32      currently 1
//! count   u32      number of entries
//! entry*  u32 name length, name (UTF-8), u8 kind, u64 payload length, payload
//! sha256  32 bytes digest of everything above
//! ```
//!
//! Entry kinds: 0 = f64 array, 1 = u64 scalar, 2 = UTF-8 string. The entry
//! names used by this crate are documented in the README.

use crate::embedding::{CharConv, CharInput, EmbeddingTable, Encoder, Vocabulary};
use crate::error::{Error, Result};
use crate::network::{QmwfConfig, QmwfModel};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

const MAGIC: &[u8; 8] = b"QMWFCKPT";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Floats(Vec<f64>),
    Scalar(u64),
    Text(String),
}

fn put_entry(buf: &mut Vec<u8>, name: &str, value: &Value) {
    buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
    buf.extend_from_slice(name.as_bytes());
    match value {
        Value::Floats(xs) => {
            buf.push(0);
            buf.extend_from_slice(&((xs.len() * 8) as u64).to_le_bytes());
            for x in xs {
                buf.extend_from_slice(&x.to_le_bytes());
            }
        }
        Value::Scalar(x) => {
            buf.push(1);
            buf.extend_from_slice(&8u64.to_le_bytes());
            buf.extend_from_slice(&x.to_le_bytes());
        }
        Value::Text(s) => {
            buf.push(2);
            buf.extend_from_slice(&(s.len() as u64).to_le_bytes());
            buf.extend_from_slice(s.as_bytes());
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::Checkpoint("truncated checkpoint".into()));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn parse_entries(bytes: &[u8]) -> Result<BTreeMap<String, Value>> {
    if bytes.len() < MAGIC.len() + 8 + 32 {
        return Err(Error::Checkpoint("file too short to be a checkpoint".into()));
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    let computed = Sha256::digest(body);
    if computed.as_slice() != digest {
        return Err(Error::Checkpoint("integrity checksum mismatch".into()));
    }

    let mut r = Reader {
        bytes: body,
        pos: 0,
    };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(Error::Checkpoint("bad magic; not a checkpoint file".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint version {version}, expected {VERSION}"
        )));
    }
    let count = r.u32()?;
    let mut entries = BTreeMap::new();
    for _ in 0..count {
        let name_len = r.u32()? as usize;
        let name = String::from_utf8(r.take(name_len)?.to_vec())
            .map_err(|_| Error::Checkpoint("entry name is not UTF-8".into()))?;
        let kind = r.take(1)?[0];
        let payload_len = r.u64()? as usize;
        let payload = r.take(payload_len)?;
        let value = match kind {
            0 => {
                if !payload_len.is_multiple_of(8) {
                    return Err(Error::Checkpoint(format!(
                        "entry {name}: float payload not a multiple of 8"
                    )));
                }
                Value::Floats(
                    payload
                        .chunks_exact(8)
                        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                        .collect(),
                )
            }
            1 => {
                if payload_len != 8 {
                    return Err(Error::Checkpoint(format!("entry {name}: bad scalar size")));
                }
                Value::Scalar(u64::from_le_bytes(payload.try_into().unwrap()))
            }
            2 => Value::Text(
                String::from_utf8(payload.to_vec())
                    .map_err(|_| Error::Checkpoint(format!("entry {name}: invalid UTF-8")))?,
            ),
            other => {
                return Err(Error::Checkpoint(format!(
                    "entry {name}: unknown kind {other}"
                )))
            }
        };
        entries.insert(name, value);
    }
    Ok(entries)
}

fn scalar(entries: &BTreeMap<String, Value>, name: &str) -> Result<u64> {
    match entries.get(name) {
        Some(Value::Scalar(x)) => Ok(*x),
        _ => Err(Error::Checkpoint(format!("missing scalar entry {name}"))),
    }
}

fn floats<'a>(entries: &'a BTreeMap<String, Value>, name: &str) -> Result<&'a [f64]> {
    match entries.get(name) {
        Some(Value::Floats(xs)) => Ok(xs),
        _ => Err(Error::Checkpoint(format!("missing float entry {name}"))),
    }
}

fn text<'a>(entries: &'a BTreeMap<String, Value>, name: &str) -> Result<&'a str> {
    match entries.get(name) {
        Some(Value::Text(s)) => Ok(s),
        _ => Err(Error::Checkpoint(format!("missing text entry {name}"))),
    }
}

/// Writes the model, and the text encoder when it is part of the trained
/// state, to `path`.
pub fn save_checkpoint(path: &Path, model: &QmwfModel, encoder: Option<&Encoder>) -> Result<()> {
    let cfg = &model.config;
    let mut entries: Vec<(String, Value)> = vec![
        ("config/embed_dim".into(), Value::Scalar(cfg.embed_dim as u64)),
        ("config/channels".into(), Value::Scalar(cfg.channels as u64)),
        ("config/patch_size".into(), Value::Scalar(cfg.patch_size as u64)),
        (
            "config/shared_kernels".into(),
            Value::Scalar(cfg.shared_kernels as u64),
        ),
        ("config/log_domain".into(), Value::Scalar(cfg.log_domain as u64)),
        ("config/epsilon".into(), Value::Floats(vec![cfg.epsilon])),
        (
            "config/max_positions".into(),
            Value::Scalar(cfg.max_positions as u64),
        ),
        (
            "model/kernels".into(),
            Value::Floats(
                model
                    .kernels()
                    .iter()
                    .flat_map(|bank| bank.iter())
                    .flat_map(|k| k.iter().copied())
                    .collect(),
            ),
        ),
        (
            "model/out_weights".into(),
            Value::Floats(model.out_weights().to_vec()),
        ),
    ];
    match encoder {
        Some(Encoder::Word { table, .. }) => {
            entries.push(("embedding/dim".into(), Value::Scalar(table.dim() as u64)));
            entries.push((
                "embedding/trainable".into(),
                Value::Scalar(table.trainable as u64),
            ));
            entries.push((
                "embedding/tokens".into(),
                Value::Text(table.vocab.tokens().join("\n")),
            ));
            entries.push((
                "embedding/matrix".into(),
                Value::Floats(table.matrix().to_vec()),
            ));
        }
        Some(Encoder::Char { input, conv, .. }) => {
            entries.push(("char/window".into(), Value::Scalar(input.window() as u64)));
            entries.push(("char/alphabet".into(), Value::Text(input.alphabet())));
            entries.push((
                "char/kernels".into(),
                Value::Floats(conv.kernels().iter().flatten().copied().collect()),
            ));
            entries.push((
                "char/output_dim".into(),
                Value::Scalar(conv.output_dim() as u64),
            ));
        }
        None => {}
    }

    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(entries.len() as u32).to_le_bytes());
    for (name, value) in &entries {
        put_entry(&mut buf, name, value);
    }
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    fs::write(path, buf)?;
    Ok(())
}

/// Reads a checkpoint back into a model and, when present, its encoder.
/// Fails on checksum mismatch, unknown version, or shape errors.
pub fn load_checkpoint(path: &Path) -> Result<(QmwfModel, Option<Encoder>)> {
    let bytes = fs::read(path)
        .map_err(|e| Error::Checkpoint(format!("cannot read {}: {e}", path.display())))?;
    let entries = parse_entries(&bytes)?;

    let config = QmwfConfig {
        embed_dim: scalar(&entries, "config/embed_dim")? as usize,
        channels: scalar(&entries, "config/channels")? as usize,
        patch_size: scalar(&entries, "config/patch_size")? as usize,
        shared_kernels: scalar(&entries, "config/shared_kernels")? != 0,
        log_domain: scalar(&entries, "config/log_domain")? != 0,
        epsilon: floats(&entries, "config/epsilon")?
            .first()
            .copied()
            .ok_or_else(|| Error::Checkpoint("empty config/epsilon".into()))?,
        max_positions: scalar(&entries, "config/max_positions")? as usize,
    };
    config.validate().map_err(|e| Error::Checkpoint(e.to_string()))?;

    let kernel_flat = floats(&entries, "model/kernels")?;
    let positions = config.kernel_positions();
    let klen = config.kernel_len();
    let expected = config.channels * positions * klen;
    if kernel_flat.len() != expected {
        return Err(Error::Checkpoint(format!(
            "model/kernels has {} values, expected {expected}",
            kernel_flat.len()
        )));
    }
    let kernels: Vec<Vec<Vec<f64>>> = (0..config.channels)
        .map(|r| {
            (0..positions)
                .map(|i| {
                    let start = (r * positions + i) * klen;
                    kernel_flat[start..start + klen].to_vec()
                })
                .collect()
        })
        .collect();
    let out_weights = floats(&entries, "model/out_weights")?.to_vec();
    let max_positions = config.max_positions;
    let model = QmwfModel::from_parts(config, kernels, out_weights)
        .map_err(|e| Error::Checkpoint(e.to_string()))?;

    let encoder = if entries.contains_key("embedding/matrix") {
        let dim = scalar(&entries, "embedding/dim")? as usize;
        let trainable = scalar(&entries, "embedding/trainable")? != 0;
        let tokens: Vec<String> = text(&entries, "embedding/tokens")?
            .split('\n')
            .map(|s| s.to_string())
            .collect();
        let vocab = Vocabulary::from_tokens(tokens)
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        let matrix = floats(&entries, "embedding/matrix")?.to_vec();
        let table = EmbeddingTable::new(vocab, dim, matrix, trainable)
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        Some(Encoder::Word {
            table,
            max_positions,
        })
    } else if entries.contains_key("char/kernels") {
        let window = scalar(&entries, "char/window")? as usize;
        let alphabet = text(&entries, "char/alphabet")?;
        let input = CharInput::one_hot(alphabet, window)
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        let output_dim = scalar(&entries, "char/output_dim")? as usize;
        let flat = floats(&entries, "char/kernels")?;
        let klen = input.char_dim() * window;
        if output_dim == 0 || flat.len() != output_dim * klen {
            return Err(Error::Checkpoint(format!(
                "char/kernels has {} values, expected {}",
                flat.len(),
                output_dim * klen
            )));
        }
        let kernels: Vec<Vec<f64>> = flat.chunks(klen).map(|c| c.to_vec()).collect();
        let conv = CharConv::from_kernels(kernels, &input)
            .map_err(|e| Error::Checkpoint(e.to_string()))?;
        Some(Encoder::Char {
            input,
            conv,
            max_positions,
        })
    } else {
        None
    };

    Ok((model, encoder))
}
