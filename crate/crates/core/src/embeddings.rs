//! Lookup tables and window input construction.
//!
//! Each table is a `d × |dictionary|` matrix whose columns are entity
//! vectors. The network input for token `i` concatenates the `w` word
//! columns of the window around `i`, optionally the root column of token `i`,
//! optionally the previous-tag column, and optionally the raw feature bits of
//! every window slot.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;

use crate::corpus::{Lexicon, Sentence, Vocabulary, PAD_END, PAD_START};
use crate::error::{Error, Result};
use crate::features::{extract_features, FEATURE_COUNT};

/// Half-width of the uniform initialization range for embedding columns.
pub const INIT_SCALE: f64 = 0.01;

/// Dense `dim × cols` matrix stored column by column.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    cols: usize,
    data: Vec<f64>,
}

impl EmbeddingTable {
    pub fn zeros(dim: usize, cols: usize) -> Self {
        EmbeddingTable {
            dim,
            cols,
            data: vec![0.0; dim * cols],
        }
    }

    /// Columns drawn uniformly from `[-INIT_SCALE, INIT_SCALE]`.
    pub fn random<R: Rng>(dim: usize, cols: usize, rng: &mut R) -> Self {
        let data = (0..dim * cols)
            .map(|_| rng.gen_range(-INIT_SCALE..=INIT_SCALE))
            .collect();
        EmbeddingTable { dim, cols, data }
    }

    pub fn from_columns(dim: usize, columns: &[Vec<f64>]) -> Result<Self> {
        let mut data = Vec::with_capacity(dim * columns.len());
        for (i, c) in columns.iter().enumerate() {
            if c.len() != dim {
                return Err(Error::Shape(format!(
                    "column {i} has length {}, expected {dim}",
                    c.len()
                )));
            }
            data.extend_from_slice(c);
        }
        Ok(EmbeddingTable {
            dim,
            cols: columns.len(),
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// The `index`-th column.
    pub fn lookup(&self, index: usize) -> Result<&[f64]> {
        if index >= self.cols {
            return Err(Error::OutOfRange {
                what: "embedding table",
                index,
                size: self.cols,
            });
        }
        Ok(&self.data[index * self.dim..(index + 1) * self.dim])
    }

    pub fn column_mut(&mut self, index: usize) -> Result<&mut [f64]> {
        if index >= self.cols {
            return Err(Error::OutOfRange {
                what: "embedding table",
                index,
                size: self.cols,
            });
        }
        Ok(&mut self.data[index * self.dim..(index + 1) * self.dim])
    }

    pub(crate) fn column(&self, index: usize) -> &[f64] {
        &self.data[index * self.dim..(index + 1) * self.dim]
    }
}

/// Gradient rows for the columns touched in one step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseColumns {
    dim: usize,
    columns: BTreeMap<usize, Vec<f64>>,
}

impl SparseColumns {
    pub fn new(dim: usize) -> Self {
        SparseColumns {
            dim,
            columns: BTreeMap::new(),
        }
    }

    pub fn accumulate(&mut self, index: usize, grad: &[f64]) {
        debug_assert_eq!(grad.len(), self.dim);
        let slot = self
            .columns
            .entry(index)
            .or_insert_with(|| vec![0.0; grad.len()]);
        for (s, g) in slot.iter_mut().zip(grad) {
            *s += g;
        }
    }

    pub fn get(&self, index: usize) -> Option<&[f64]> {
        self.columns.get(&index).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &[f64])> {
        self.columns.iter().map(|(&i, g)| (i, g.as_slice()))
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn clear(&mut self) {
        self.columns.clear();
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WindowConfig {
    pub window: usize,
    pub word_dim: usize,
    pub root_dim: usize,
    pub tag_dim: usize,
    pub use_root: bool,
    pub use_tag_embedding: bool,
    pub use_features: bool,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig {
            window: 3,
            word_dim: 50,
            root_dim: 50,
            tag_dim: 50,
            use_root: false,
            use_tag_embedding: false,
            use_features: false,
        }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.window.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "window size must be odd and positive, got {}",
                self.window
            )));
        }
        if self.word_dim == 0 || self.root_dim == 0 || self.tag_dim == 0 {
            return Err(Error::Config("embedding sizes must be positive".into()));
        }
        Ok(())
    }

    pub fn input_len(&self) -> usize {
        self.window * self.word_dim
            + if self.use_root { self.root_dim } else { 0 }
            + if self.use_tag_embedding { self.tag_dim } else { 0 }
            + if self.use_features { FEATURE_COUNT * self.window } else { 0 }
    }

    /// Offset of the previous-tag slice within the input vector.
    pub fn tag_offset(&self) -> usize {
        self.window * self.word_dim + if self.use_root { self.root_dim } else { 0 }
    }
}

/// Word, root and tag lookup tables. The tag table has `|𝒯| + 1` columns;
/// the last one is the start tag.
#[derive(Clone, Debug, PartialEq)]
pub struct Embeddings {
    pub words: EmbeddingTable,
    pub roots: Option<EmbeddingTable>,
    pub tags: Option<EmbeddingTable>,
}

impl Embeddings {
    pub fn random<R: Rng>(config: &WindowConfig, vocab: &Vocabulary, rng: &mut R) -> Self {
        let words = EmbeddingTable::random(config.word_dim, vocab.words.len(), rng);
        let roots = config
            .use_root
            .then(|| EmbeddingTable::random(config.root_dim, vocab.roots.len(), rng));
        let tags = config
            .use_tag_embedding
            .then(|| EmbeddingTable::random(config.tag_dim, vocab.tags.len() + 1, rng));
        Embeddings { words, roots, tags }
    }

    /// Checks table presence and shapes against the config and vocabulary.
    pub fn check(&self, config: &WindowConfig, vocab: &Vocabulary) -> Result<()> {
        let expect = |name: &str, table: Option<&EmbeddingTable>, on: bool, dim: usize, cols: usize| {
            match (table, on) {
                (None, false) => Ok(()),
                (Some(t), true) if t.dim() == dim && t.cols() == cols => Ok(()),
                (Some(t), true) => Err(Error::Shape(format!(
                    "{name} table is {}×{}, expected {dim}×{cols}",
                    t.dim(),
                    t.cols()
                ))),
                (None, true) => Err(Error::Shape(format!("{name} table is missing"))),
                (Some(_), false) => Err(Error::Shape(format!("{name} table is not enabled"))),
            }
        };
        expect("word", Some(&self.words), true, config.word_dim, vocab.words.len())?;
        expect("root", self.roots.as_ref(), config.use_root, config.root_dim, vocab.roots.len())?;
        expect(
            "tag",
            self.tags.as_ref(),
            config.use_tag_embedding,
            config.tag_dim,
            vocab.tags.len() + 1,
        )
    }
}

/// Gradients for the lookup tables, keyed by column.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EmbeddingGrads {
    pub words: SparseColumns,
    pub roots: SparseColumns,
    pub tags: SparseColumns,
}

impl EmbeddingGrads {
    pub fn new(config: &WindowConfig) -> Self {
        EmbeddingGrads {
            words: SparseColumns::new(config.word_dim),
            roots: SparseColumns::new(config.root_dim),
            tags: SparseColumns::new(config.tag_dim),
        }
    }

    pub fn clear(&mut self) {
        self.words.clear();
        self.roots.clear();
        self.tags.clear();
    }
}

/// Dictionary ids and feature bits of one window, everything the input
/// vector needs apart from the previous tag.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WindowSlots {
    pub words: Vec<usize>,
    pub root: Option<usize>,
    pub features: Vec<u8>,
}

/// Precomputes the window slots of every position in a sentence.
pub fn encode_sentence(
    sentence: &Sentence,
    vocab: &Vocabulary,
    config: &WindowConfig,
) -> Result<Vec<WindowSlots>> {
    config.validate()?;
    let n = sentence.len();
    let half = config.window / 2;
    let word_ids: Vec<usize> = sentence.tokens.iter().map(|t| vocab.word_id(&t.surface)).collect();
    let features = if config.use_features {
        (0..n)
            .map(|i| extract_features(sentence, i))
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };
    let mut slots = Vec::with_capacity(n);
    for i in 0..n {
        let mut words = Vec::with_capacity(config.window);
        let mut bits = Vec::new();
        for offset in 0..config.window {
            let j = i as isize + offset as isize - half as isize;
            let (id, feat) = if j < 0 {
                (PAD_START, None)
            } else if j as usize >= n {
                (PAD_END, None)
            } else {
                (word_ids[j as usize], features.get(j as usize))
            };
            words.push(id);
            if config.use_features {
                match feat {
                    Some(f) => bits.extend_from_slice(f.bits()),
                    None => bits.extend_from_slice(&[0; FEATURE_COUNT]),
                }
            }
        }
        let root = config
            .use_root
            .then(|| vocab.root_id(&sentence.tokens[i].root));
        slots.push(WindowSlots {
            words,
            root,
            features: bits,
        });
    }
    Ok(slots)
}

/// Writes the input vector for one window into `out`.
///
/// `prev_tag` is only read when tag embeddings are enabled; use the start
/// tag id at position 0.
pub fn fill_input(
    slots: &WindowSlots,
    prev_tag: usize,
    tables: &Embeddings,
    config: &WindowConfig,
    out: &mut Vec<f64>,
) -> Result<()> {
    out.clear();
    for &id in &slots.words {
        out.extend_from_slice(tables.words.lookup(id)?);
    }
    if config.use_root {
        let roots = tables
            .roots
            .as_ref()
            .ok_or_else(|| Error::Shape("root table is missing".into()))?;
        let id = slots
            .root
            .ok_or_else(|| Error::Shape("window has no root slot".into()))?;
        out.extend_from_slice(roots.lookup(id)?);
    }
    if config.use_tag_embedding {
        let tags = tables
            .tags
            .as_ref()
            .ok_or_else(|| Error::Shape("tag table is missing".into()))?;
        out.extend_from_slice(tags.lookup(prev_tag)?);
    }
    if config.use_features {
        out.extend(slots.features.iter().map(|&b| f64::from(b)));
    }
    if out.len() != config.input_len() {
        return Err(Error::Shape(format!(
            "input has length {}, expected {}",
            out.len(),
            config.input_len()
        )));
    }
    Ok(())
}

/// Overwrites the previous-tag slice of an input built by [`fill_input`].
pub fn swap_prev_tag(
    input: &mut [f64],
    prev_tag: usize,
    tables: &Embeddings,
    config: &WindowConfig,
) -> Result<()> {
    let tags = tables
        .tags
        .as_ref()
        .ok_or_else(|| Error::Shape("tag table is missing".into()))?;
    let offset = config.tag_offset();
    input[offset..offset + config.tag_dim].copy_from_slice(tags.lookup(prev_tag)?);
    Ok(())
}

/// Input vector for `position` of `sentence`.
pub fn build_input(
    sentence: &Sentence,
    position: usize,
    prev_tag: usize,
    vocab: &Vocabulary,
    tables: &Embeddings,
    config: &WindowConfig,
) -> Result<Vec<f64>> {
    if position >= sentence.len() {
        return Err(Error::OutOfRange {
            what: "sentence",
            index: position,
            size: sentence.len(),
        });
    }
    tables.check(config, vocab)?;
    let slots = encode_sentence(sentence, vocab, config)?;
    let mut out = Vec::with_capacity(config.input_len());
    fill_input(&slots[position], prev_tag, tables, config, &mut out)?;
    Ok(out)
}

/// Adds the gradient w.r.t. an input vector to the columns it was built from.
/// Feature bits are constants and take no update.
pub fn route_input_gradient(
    slots: &WindowSlots,
    prev_tag: usize,
    grad: &[f64],
    config: &WindowConfig,
    grads: &mut EmbeddingGrads,
) {
    let d = config.word_dim;
    for (k, &id) in slots.words.iter().enumerate() {
        grads.words.accumulate(id, &grad[k * d..(k + 1) * d]);
    }
    let mut offset = config.window * d;
    if let Some(root) = slots.root.filter(|_| config.use_root) {
        grads.roots.accumulate(root, &grad[offset..offset + config.root_dim]);
        offset += config.root_dim;
    }
    if config.use_tag_embedding {
        grads.tags.accumulate(prev_tag, &grad[offset..offset + config.tag_dim]);
    }
}

// ---------------------------------------------------------------------------
// word2vec text format
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Coverage {
    pub found: usize,
    pub missing: usize,
}

/// Copies vectors from a word2vec text file into the matching columns of
/// `table`. Reserved symbols are never overwritten. With `lowercase`, file
/// tokens are lowercased before matching and the first occurrence wins.
pub fn load_pretrained(
    path: impl AsRef<Path>,
    table: &mut EmbeddingTable,
    lexicon: &Lexicon,
    lowercase: bool,
) -> Result<Coverage> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    load_pretrained_str(&text, table, lexicon, lowercase)
}

pub fn load_pretrained_str(
    text: &str,
    table: &mut EmbeddingTable,
    lexicon: &Lexicon,
    lowercase: bool,
) -> Result<Coverage> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "missing `<count> <dim>` header"))?;
    let mut fields = header.split_whitespace();
    let parse_usize = |f: Option<&str>| -> Result<usize> {
        f.and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(1, format!("malformed header {header:?}")))
    };
    let count = parse_usize(fields.next())?;
    let dim = parse_usize(fields.next())?;
    if fields.next().is_some() {
        return Err(Error::parse(1, format!("malformed header {header:?}")));
    }
    if dim != table.dim() {
        return Err(Error::DimensionMismatch {
            expected: table.dim(),
            found: dim,
        });
    }

    let mut filled = vec![false; table.cols()];
    let mut rows = 0;
    let mut vector = Vec::with_capacity(dim);
    for (i, line) in lines {
        let line_no = i + 1;
        let mut fields = line.split_whitespace();
        let token = fields.next().unwrap();
        vector.clear();
        for f in fields {
            let v: f64 = f
                .parse()
                .map_err(|_| Error::parse(line_no, format!("malformed number {f:?}")))?;
            if !v.is_finite() {
                return Err(Error::parse(line_no, format!("non-finite value {f:?}")));
            }
            vector.push(v);
        }
        if vector.len() != dim {
            return Err(Error::parse(
                line_no,
                format!("expected {dim} values, found {}", vector.len()),
            ));
        }
        rows += 1;
        let key = if lowercase {
            token.to_lowercase()
        } else {
            token.to_string()
        };
        if let Some(id) = lexicon.get(&key) {
            if !Lexicon::is_reserved(id) && id < table.cols() && !filled[id] {
                table.column_mut(id)?.copy_from_slice(&vector);
                filled[id] = true;
            }
        }
    }
    if rows != count {
        return Err(Error::parse(
            1,
            format!("header announces {count} vectors, file has {rows}"),
        ));
    }
    let found = filled.iter().filter(|&&f| f).count();
    let missing = lexicon.len().saturating_sub(crate::corpus::RESERVED) - found;
    Ok(Coverage { found, missing })
}

/// Writes the non-reserved columns of `table` in word2vec text format.
/// Values are printed in shortest round-trip form, so reloading is exact.
pub fn save_word2vec(path: impl AsRef<Path>, table: &EmbeddingTable, lexicon: &Lexicon) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, word2vec_string(table, lexicon)).map_err(|e| Error::io(path, e))
}

pub fn word2vec_string(table: &EmbeddingTable, lexicon: &Lexicon) -> String {
    let ids: Vec<usize> = (crate::corpus::RESERVED..lexicon.len().min(table.cols())).collect();
    let mut out = format!("{} {}\n", ids.len(), table.dim());
    for id in ids {
        out.push_str(lexicon.symbol(id).unwrap());
        for v in table.column(id) {
            write!(out, " {v}").unwrap();
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_vocabulary, Token, RESERVED, UNK};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn vocab_and_sentence() -> (Vocabulary, Sentence) {
        let s = Sentence::new(vec![
            Token::new("Astana").with_root("Astana").with_tag("B-LOC"),
            Token::new("qalasy").with_tag("O"),
        ]);
        (build_vocabulary(std::slice::from_ref(&s), true, 1), s)
    }

    #[test]
    fn lookup_returns_column() {
        let t = EmbeddingTable::from_columns(
            3,
            &[vec![0.0; 3], vec![1.0; 3], vec![0.1, 0.2, 0.3], vec![2.0; 3]],
        )
        .unwrap();
        assert_eq!(t.lookup(2).unwrap(), &[0.1, 0.2, 0.3]);
        assert!(t.lookup(4).is_err());
    }

    #[test]
    fn unknown_words_share_the_unk_column() {
        let (vocab, _) = vocab_and_sentence();
        let config = WindowConfig {
            window: 1,
            word_dim: 4,
            ..WindowConfig::default()
        };
        let tables = Embeddings::random(&config, &vocab, &mut ChaCha8Rng::seed_from_u64(1));
        let a = Sentence::new(vec![Token::new("foo")]);
        let b = Sentence::new(vec![Token::new("bar")]);
        let ia = build_input(&a, 0, 0, &vocab, &tables, &config).unwrap();
        let ib = build_input(&b, 0, 0, &vocab, &tables, &config).unwrap();
        assert_eq!(ia, ib);
        assert_eq!(ia, tables.words.lookup(UNK).unwrap());
    }

    #[test]
    fn input_length_with_everything_on() {
        let config = WindowConfig {
            use_root: true,
            use_tag_embedding: true,
            use_features: true,
            ..WindowConfig::default()
        };
        assert_eq!(config.input_len(), 280);
        let (vocab, s) = vocab_and_sentence();
        let tables = Embeddings::random(&config, &vocab, &mut ChaCha8Rng::seed_from_u64(2));
        for i in 0..s.len() {
            let x = build_input(&s, i, vocab.tags.start_id(), &vocab, &tables, &config).unwrap();
            assert_eq!(x.len(), 280);
        }
    }

    #[test]
    fn single_token_window_uses_both_pads() {
        let (vocab, _) = vocab_and_sentence();
        let config = WindowConfig::default();
        let slots = encode_sentence(&Sentence::new(vec![Token::new("Astana")]), &vocab, &config).unwrap();
        assert_eq!(slots[0].words, vec![PAD_START, vocab.word_id("astana"), PAD_END]);
    }

    #[test]
    fn features_of_padding_slots_are_zero() {
        let (vocab, s) = vocab_and_sentence();
        let config = WindowConfig {
            use_features: true,
            ..WindowConfig::default()
        };
        let slots = encode_sentence(&s, &vocab, &config).unwrap();
        assert_eq!(&slots[0].features[..FEATURE_COUNT], &[0; FEATURE_COUNT]);
        assert_eq!(slots[0].features[FEATURE_COUNT + 6], 1);
        assert_eq!(&slots[1].features[2 * FEATURE_COUNT..], &[0; FEATURE_COUNT]);
    }

    #[test]
    fn identity_configuration_equals_lookup() {
        let (vocab, s) = vocab_and_sentence();
        let config = WindowConfig {
            window: 1,
            ..WindowConfig::default()
        };
        let tables = Embeddings::random(&config, &vocab, &mut ChaCha8Rng::seed_from_u64(3));
        let x = build_input(&s, 1, 0, &vocab, &tables, &config).unwrap();
        assert_eq!(x, tables.words.lookup(vocab.word_id("qalasy")).unwrap());
    }

    #[test]
    fn inconsistent_tables_are_rejected() {
        let (vocab, s) = vocab_and_sentence();
        let config = WindowConfig::default();
        let tables = Embeddings::random(&config, &vocab, &mut ChaCha8Rng::seed_from_u64(4));
        let with_root = WindowConfig {
            use_root: true,
            ..config
        };
        assert!(build_input(&s, 0, 0, &vocab, &tables, &with_root).is_err());
        let even = WindowConfig { window: 2, ..config };
        assert!(even.validate().is_err());
    }

    #[test]
    fn gradient_routing_accumulates_repeated_words() {
        let config = WindowConfig {
            window: 3,
            word_dim: 2,
            ..WindowConfig::default()
        };
        let slots = WindowSlots {
            words: vec![5, 5, 7],
            root: None,
            features: vec![],
        };
        let mut grads = EmbeddingGrads::new(&config);
        route_input_gradient(&slots, 0, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &config, &mut grads);
        assert_eq!(grads.words.get(5).unwrap(), &[4.0, 6.0]);
        assert_eq!(grads.words.get(7).unwrap(), &[5.0, 6.0]);
        assert!(grads.tags.is_empty());
    }

    #[test]
    fn pretrained_dimension_mismatch() {
        let lexicon = Lexicon::from_symbols(["a"]);
        let mut table = EmbeddingTable::zeros(50, lexicon.len());
        let err = load_pretrained_str("1 25\na 0.1\n", &mut table, &lexicon, false).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 50, found: 25 }));
    }

    #[test]
    fn pretrained_malformed_number_has_line() {
        let lexicon = Lexicon::from_symbols(["a", "b"]);
        let mut table = EmbeddingTable::zeros(2, lexicon.len());
        let err = load_pretrained_str("2 2\na 0.1 0.2\nb 0.3 x\n", &mut table, &lexicon, false).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn pretrained_full_coverage() {
        let lexicon = Lexicon::from_symbols(["a", "b", "c"]);
        let mut table = EmbeddingTable::zeros(2, lexicon.len());
        let cov = load_pretrained_str("3 2\nA 1 2\nb 3 4\nc 5 6\n", &mut table, &lexicon, true).unwrap();
        assert_eq!(cov, Coverage { found: lexicon.len() - RESERVED, missing: 0 });
        assert_eq!(table.lookup(lexicon.id("a")).unwrap(), &[1.0, 2.0]);
    }
}
