//! Checkpoint files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic      8 bytes   "TSRNNCK1"
//! version    u32       FORMAT_VERSION
//! meta_len   u32       byte length of the metadata block
//! metadata   meta_len  UTF-8 text, see below
//! count      u32       number of tensor records
//! record*    count     name_len u32, name (UTF-8), rows u32, cols u32,
//!                      rows*cols f32 values in row-major order
//! checksum   u32       CRC-32 (IEEE) of every preceding byte
//! ```
//!
//! The metadata block is `key=value` lines grouped under `[config]` and
//! `[task]` headers, followed by a `[vocab]` section with one word per line
//! for ids 2, 3, ... in order.

use std::fs;
use std::path::Path;

use crate::corpus::{Task, Vocabulary};
use crate::error::{Error, Result};
use crate::network::{ModelConfig, ModelParams};
use crate::numerics::Scalar;

pub const MAGIC: &[u8; 8] = b"TSRNNCK1";
pub const FORMAT_VERSION: u32 = 1;

/// Everything needed to rebuild a trained detector.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub task: Task,
    pub vocab: Vocabulary,
    /// Parameters are always stored at 32-bit precision.
    pub params: ModelParams<f32>,
}

impl Checkpoint {
    pub fn new<T: Scalar>(task: Task, vocab: Vocabulary, params: &ModelParams<T>) -> Self {
        Checkpoint {
            task,
            vocab,
            params: params.cast(),
        }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.params.config
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        let meta = metadata_text(self);
        out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
        out.extend_from_slice(meta.as_bytes());
        let names = ModelParams::<f32>::tensor_names(self.config());
        let tensors = self.params.tensors();
        out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
        for ((name, _), t) in names.iter().zip(tensors) {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.rows() as u32).to_le_bytes());
            out.extend_from_slice(&(t.cols() as u32).to_le_bytes());
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    /// Validates the whole byte string before building anything.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
            return Err(Error::Format("bad magic, not a checkpoint file".into()));
        }
        if bytes.len() < MAGIC.len() + 4 + 4 + 4 + 4 {
            return Err(Error::Format(format!("file too short ({} bytes)", bytes.len())));
        }
        let (body, trailer) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(trailer.try_into().unwrap());
        let computed = crc32fast::hash(body);
        if stored != computed {
            return Err(Error::Checksum { stored, computed });
        }
        let mut r = Reader {
            bytes: body,
            pos: MAGIC.len(),
        };
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Version {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let meta_len = r.u32()? as usize;
        let meta = std::str::from_utf8(r.take(meta_len)?).map_err(|_| Error::Format("metadata is not UTF-8".into()))?;
        let (config, task, vocab) = parse_metadata(meta)?;

        let expected = ModelParams::<f32>::tensor_names(&config);
        let mut params = ModelParams::<f32>::zeros(&config);
        let count = r.u32()? as usize;
        if count != expected.len() {
            let name = expected
                .get(count)
                .map_or_else(|| format!("#{}", expected.len()), |(n, _)| n.clone());
            return Err(Error::TensorShape {
                name,
                reason: format!("file has {count} tensors, the config needs {}", expected.len()),
            });
        }
        for ((name, _), t) in expected.iter().zip(params.tensors_mut()) {
            let len = r.u32()? as usize;
            let found =
                std::str::from_utf8(r.take(len)?).map_err(|_| Error::Format("tensor name is not UTF-8".into()))?;
            if found != name {
                return Err(Error::TensorShape {
                    name: name.clone(),
                    reason: format!("found tensor {found:?} in its place"),
                });
            }
            let (rows, cols) = (r.u32()? as usize, r.u32()? as usize);
            if (rows, cols) != t.shape() {
                return Err(Error::TensorShape {
                    name: name.clone(),
                    reason: format!("stored shape {rows}x{cols}, config implies {}x{}", t.rows(), t.cols()),
                });
            }
            let payload = r.take(rows * cols * 4)?;
            for (dst, chunk) in t.data_mut().iter_mut().zip(payload.chunks_exact(4)) {
                *dst = f32::from_le_bytes(chunk.try_into().unwrap());
            }
        }
        if r.pos != body.len() {
            return Err(Error::Format(format!(
                "{} unexpected trailing bytes",
                body.len() - r.pos
            )));
        }
        Ok(Checkpoint { task, vocab, params })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format(format!("record at byte {} runs past the end", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

fn task_text(task: Task) -> String {
    match task {
        Task::Binary { bpw } => format!("binary:{bpw}"),
        Task::Rate => "rate".into(),
    }
}

/// Parses `binary:N` or `rate`.
pub fn parse_task(text: &str) -> Option<Task> {
    match text {
        "rate" => Some(Task::Rate),
        _ => text
            .strip_prefix("binary:")
            .and_then(|b| b.parse().ok())
            .filter(|&bpw| (1..=crate::corpus::MAX_BPW).contains(&bpw))
            .map(|bpw| Task::Binary { bpw }),
    }
}

fn metadata_text(ck: &Checkpoint) -> String {
    let c = ck.config();
    let mut s = String::from("[config]\n");
    s.push_str(&format!("vocab_size={}\n", c.vocab_size));
    s.push_str(&format!("embedding_dim={}\n", c.embedding_dim));
    s.push_str(&format!("num_layers={}\n", c.num_layers));
    s.push_str(&format!("hidden_units={}\n", c.hidden_units));
    s.push_str(&format!("bidirectional={}\n", c.bidirectional));
    s.push_str(&format!("fused_dim={}\n", c.fused_dim));
    s.push_str(&format!("num_classes={}\n", c.num_classes));
    s.push_str(&format!("dropout_rate={}\n", c.dropout_rate));
    s.push_str(&format!("threshold={}\n", c.threshold));
    s.push_str(&format!("[task]\ntask={}\n", task_text(ck.task)));
    s.push_str("[vocab]\n");
    for w in ck.vocab.words() {
        s.push_str(w);
        s.push('\n');
    }
    s
}

fn parse_metadata(text: &str) -> Result<(ModelConfig, Task, Vocabulary)> {
    let bad = |msg: String| Error::Format(format!("metadata: {msg}"));
    let mut section = "";
    let mut keys = std::collections::HashMap::new();
    let mut words = Vec::new();
    for line in text.lines() {
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            section = match name {
                "config" => "config",
                "task" => "task",
                "vocab" => "vocab",
                other => return Err(bad(format!("unknown section [{other}]"))),
            };
            continue;
        }
        match section {
            "vocab" => words.push(line.to_string()),
            "" => return Err(bad(format!("line {line:?} outside any section"))),
            _ => {
                let (k, v) = line
                    .split_once('=')
                    .ok_or_else(|| bad(format!("expected key=value, got {line:?}")))?;
                keys.insert(format!("{section}.{k}"), v.to_string());
            }
        }
    }
    let get = |k: &str| keys.get(k).ok_or_else(|| bad(format!("missing {k}")));
    fn num<X: std::str::FromStr>(k: &str, v: &str) -> Result<X> {
        v.parse()
            .map_err(|_| Error::Format(format!("metadata: {k}={v:?} is not valid")))
    }
    let config = ModelConfig {
        vocab_size: num("vocab_size", get("config.vocab_size")?)?,
        embedding_dim: num("embedding_dim", get("config.embedding_dim")?)?,
        num_layers: num("num_layers", get("config.num_layers")?)?,
        hidden_units: num("hidden_units", get("config.hidden_units")?)?,
        bidirectional: num("bidirectional", get("config.bidirectional")?)?,
        fused_dim: num("fused_dim", get("config.fused_dim")?)?,
        num_classes: num("num_classes", get("config.num_classes")?)?,
        dropout_rate: num("dropout_rate", get("config.dropout_rate")?)?,
        threshold: num("threshold", get("config.threshold")?)?,
    };
    config.validate().map_err(|e| bad(e.to_string()))?;
    let task_str = get("task.task")?;
    let task = parse_task(task_str).ok_or_else(|| bad(format!("unknown task {task_str:?}")))?;
    if task.num_classes() != config.num_classes {
        return Err(bad(format!(
            "task {task_str} does not fit {} classes",
            config.num_classes
        )));
    }
    let vocab = Vocabulary::from_words(words);
    if vocab.len() != config.vocab_size {
        return Err(bad(format!(
            "vocabulary has {} entries, config says {}",
            vocab.len(),
            config.vocab_size
        )));
    }
    Ok((config, task, vocab))
}

pub fn save(checkpoint: &Checkpoint, path: &Path) -> Result<()> {
    fs::write(path, checkpoint.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes)
}
