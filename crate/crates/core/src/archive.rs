//! Model archives.
//!
//! A text header (magic line, format version, configuration, vocabularies,
//! tensor names and lengths) is followed by every tensor as little-endian
//! `f64` values in header order. Floats in the header use Rust's shortest
//! round-trip formatting, so save and load are bit-exact.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::corpus::{Lexicon, TagSet, Vocabulary, RESERVED};
use crate::embeddings::WindowConfig;
use crate::error::{Error, Result};
use crate::model::{Model, ModelConfig};
use crate::network::{Architecture, NetworkConfig};

pub const MAGIC: &str = "MCLNER-ARCHIVE";
pub const FORMAT_MAJOR: u32 = 1;
pub const FORMAT_MINOR: u32 = 0;

/// How the archived model was selected.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TrainingMeta {
    pub seed: u64,
    /// 1-based epoch of the selected model; 0 if untrained.
    pub epoch: usize,
    pub dev_f1: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelArchive {
    pub model: Model,
    pub meta: TrainingMeta,
}

fn config_line(c: &ModelConfig) -> String {
    let w = &c.window;
    let n = &c.network;
    let arch = match n.architecture {
        Architecture::Plain => "plain",
        Architecture::Tensor => "tensor",
    };
    let extra = n.extra_hidden.map_or("none".to_string(), |e| e.to_string());
    format!(
        "config window={} word_dim={} root_dim={} tag_dim={} use_root={} use_tag_embedding={} \
         use_features={} architecture={arch} hidden={} tensor_size={} factors={} extra_hidden={extra}",
        w.window,
        w.word_dim,
        w.root_dim,
        w.tag_dim,
        w.use_root,
        w.use_tag_embedding,
        w.use_features,
        n.hidden_size,
        n.tensor_size,
        n.factors,
    )
}

fn push_symbols(header: &mut String, name: &str, symbols: &[String]) -> Result<()> {
    header.push_str(&format!("{name} {}\n", symbols.len()));
    for s in symbols {
        if s.is_empty() || s.contains('\n') || s.contains('\r') {
            return Err(Error::Archive(format!("{name} symbol {s:?} cannot be archived")));
        }
        header.push_str(s);
        header.push('\n');
    }
    Ok(())
}

impl ModelArchive {
    pub fn new(model: Model, meta: TrainingMeta) -> Self {
        ModelArchive { model, meta }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        self.model.check()?;
        let m = &self.model;
        let mut header = format!("{MAGIC}\nversion {FORMAT_MAJOR}.{FORMAT_MINOR}\n");
        header.push_str(&config_line(&m.config));
        header.push('\n');
        header.push_str(&format!("lowercase_words {}\n", m.vocab.lowercase_words));
        header.push_str(&format!(
            "meta seed={} epoch={} dev_f1={}\n",
            self.meta.seed, self.meta.epoch, self.meta.dev_f1
        ));
        push_symbols(&mut header, "words", &m.vocab.words.symbols()[RESERVED..])?;
        push_symbols(&mut header, "roots", &m.vocab.roots.symbols()[RESERVED..])?;
        push_symbols(&mut header, "tags", &m.vocab.tags.names()[1..])?;

        let tensors = m.tensors();
        let total: usize = tensors.iter().map(|(_, t)| t.len()).sum();
        for (name, t) in &tensors {
            header.push_str(&format!("tensor {name} {}\n", t.len()));
        }
        header.push_str(&format!("payload {total}\n"));

        let mut bytes = header.into_bytes();
        bytes.reserve(total * 8);
        for (_, t) in &tensors {
            for v in t.iter() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut reader = HeaderReader { bytes, pos: 0, line: 0 };
        if reader.next_line()? != MAGIC {
            return Err(Error::Archive("not a model archive (bad magic line)".into()));
        }
        let version = reader.next_line()?;
        let found = version
            .strip_prefix("version ")
            .ok_or_else(|| Error::parse(reader.line, "expected a version line"))?;
        let major = found.split('.').next().and_then(|m| m.parse::<u32>().ok());
        if major != Some(FORMAT_MAJOR) {
            return Err(Error::ArchiveVersion {
                expected: FORMAT_MAJOR,
                found: found.to_string(),
            });
        }

        let config_fields = reader.fields("config")?;
        let config = parse_config(&config_fields, reader.line)?;
        let lowercase = reader.next_line()?;
        let lowercase_words = match lowercase.strip_prefix("lowercase_words ") {
            Some(v) => parse_value::<bool>(v, "lowercase_words", reader.line)?,
            None => return Err(Error::parse(reader.line, "expected lowercase_words")),
        };
        let meta_fields = reader.fields("meta")?;
        let meta = TrainingMeta {
            seed: field(&meta_fields, "seed", reader.line)?,
            epoch: field(&meta_fields, "epoch", reader.line)?,
            dev_f1: field(&meta_fields, "dev_f1", reader.line)?,
        };

        let words = reader.symbols("words")?;
        let roots = reader.symbols("roots")?;
        let tags = reader.symbols("tags")?;
        let vocab = Vocabulary {
            words: Lexicon::from_symbols(words),
            roots: Lexicon::from_symbols(roots),
            tags: TagSet::new(tags)?,
            lowercase_words,
        };

        let mut model = Model::new(config, vocab, 0)?;
        let mut declared = Vec::new();
        let total = loop {
            let line = reader.next_line()?;
            let parts: Vec<&str> = line.split(' ').collect();
            match parts.as_slice() {
                ["tensor", name, len] => {
                    declared.push((name.to_string(), parse_value::<usize>(len, "tensor length", reader.line)?))
                }
                ["payload", n] => break parse_value::<usize>(n, "payload length", reader.line)?,
                _ => return Err(Error::parse(reader.line, format!("unexpected header line {line:?}"))),
            }
        };

        let payload = &bytes[reader.pos..];
        if payload.len() != total * 8 {
            return Err(Error::Archive(format!(
                "payload holds {} bytes, header declares {} values",
                payload.len(),
                total
            )));
        }
        let mut targets = model.tensors_mut();
        if targets.len() != declared.len() {
            return Err(Error::Archive(format!(
                "archive lists {} tensors, configuration needs {}",
                declared.len(),
                targets.len()
            )));
        }
        let mut values = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")));
        for ((name, target), (dname, dlen)) in targets.iter_mut().zip(&declared) {
            if *name != dname.as_str() || target.len() != *dlen {
                return Err(Error::Archive(format!(
                    "tensor {dname} of length {dlen} where {name} of length {} was expected",
                    target.len()
                )));
            }
            for slot in target.iter_mut() {
                *slot = values.next().ok_or_else(|| Error::Archive("payload too short".into()))?;
            }
        }
        drop(targets);
        model.check()?;
        Ok(ModelArchive { model, meta })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    line: usize,
}

impl<'a> HeaderReader<'a> {
    fn next_line(&mut self) -> Result<&'a str> {
        self.line += 1;
        let rest = &self.bytes[self.pos..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::Archive("truncated header".into()))?;
        self.pos += end + 1;
        std::str::from_utf8(&rest[..end]).map_err(|_| Error::parse(self.line, "header is not UTF-8"))
    }

    fn fields(&mut self, keyword: &str) -> Result<Vec<(&'a str, &'a str)>> {
        let line = self.next_line()?;
        let mut parts = line.split(' ');
        if parts.next() != Some(keyword) {
            return Err(Error::parse(self.line, format!("expected {keyword} line")));
        }
        parts
            .map(|p| {
                p.split_once('=')
                    .ok_or_else(|| Error::parse(self.line, format!("malformed field {p:?}")))
            })
            .collect()
    }

    fn symbols(&mut self, keyword: &str) -> Result<Vec<String>> {
        let line = self.next_line()?;
        let count = match line.split_once(' ') {
            Some((k, n)) if k == keyword => parse_value::<usize>(n, keyword, self.line)?,
            _ => return Err(Error::parse(self.line, format!("expected {keyword} count"))),
        };
        (0..count).map(|_| self.next_line().map(str::to_string)).collect()
    }
}

fn parse_value<T: FromStr>(raw: &str, what: &str, line: usize) -> Result<T> {
    raw.parse()
        .map_err(|_| Error::parse(line, format!("bad {what} value {raw:?}")))
}

fn field<T: FromStr>(fields: &[(&str, &str)], key: &str, line: usize) -> Result<T> {
    let raw = fields
        .iter()
        .find(|(k, _)| *k == key)
        .map(|(_, v)| *v)
        .ok_or_else(|| Error::parse(line, format!("missing field {key}")))?;
    parse_value(raw, key, line)
}

fn parse_config(fields: &[(&str, &str)], line: usize) -> Result<ModelConfig> {
    let architecture = match fields.iter().find(|(k, _)| *k == "architecture").map(|(_, v)| *v) {
        Some("plain") => Architecture::Plain,
        Some("tensor") => Architecture::Tensor,
        other => return Err(Error::parse(line, format!("bad architecture {other:?}"))),
    };
    let extra_hidden = match fields.iter().find(|(k, _)| *k == "extra_hidden").map(|(_, v)| *v) {
        Some("none") => None,
        Some(_) => Some(field(fields, "extra_hidden", line)?),
        None => return Err(Error::parse(line, "missing field extra_hidden")),
    };
    Ok(ModelConfig {
        window: WindowConfig {
            window: field(fields, "window", line)?,
            word_dim: field(fields, "word_dim", line)?,
            root_dim: field(fields, "root_dim", line)?,
            tag_dim: field(fields, "tag_dim", line)?,
            use_root: field(fields, "use_root", line)?,
            use_tag_embedding: field(fields, "use_tag_embedding", line)?,
            use_features: field(fields, "use_features", line)?,
        },
        network: NetworkConfig {
            architecture,
            hidden_size: field(fields, "hidden", line)?,
            tensor_size: field(fields, "tensor_size", line)?,
            factors: field(fields, "factors", line)?,
            extra_hidden,
        },
    })
}
