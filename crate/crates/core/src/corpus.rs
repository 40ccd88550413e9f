//! Annotated corpora: tokens, sentences, the column file format, IOB
//! handling, vocabularies and train/dev/test splitting.
//!
//! The file format is one token per line with whitespace-separated columns
//! and a blank line between sentences. The column order is given by a
//! [`Schema`]; the default is `surface,root,morph,tag`.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Number of morphological feature bits carried by a token.
pub const MORPH_BITS: usize = 6;

/// The six morphological feature bits of a token, in column order:
/// root, part of speech, inflectional suffix, derivational suffix,
/// proper noun, name suffix.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct MorphBits(pub [bool; MORPH_BITS]);

impl MorphBits {
    pub const ROOT: usize = 0;
    pub const POS: usize = 1;
    pub const INFLECTIONAL: usize = 2;
    pub const DERIVATIONAL: usize = 3;
    pub const PROPER_NOUN: usize = 4;
    pub const NAME_SUFFIX: usize = 5;

    pub fn get(&self, bit: usize) -> bool {
        self.0[bit]
    }

    pub fn set(&mut self, bit: usize, value: bool) {
        self.0[bit] = value;
    }
}

impl FromStr for MorphBits {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.len() != MORPH_BITS {
            return Err(format!(
                "morph bits {s:?} must have exactly {MORPH_BITS} digits"
            ));
        }
        let mut bits = [false; MORPH_BITS];
        for (slot, ch) in bits.iter_mut().zip(s.chars()) {
            *slot = match ch {
                '0' => false,
                '1' => true,
                _ => return Err(format!("morph bits {s:?} must be binary")),
            };
        }
        Ok(MorphBits(bits))
    }
}

impl fmt::Display for MorphBits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &bit in &self.0 {
            f.write_str(if bit { "1" } else { "0" })?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    pub root: String,
    pub morph: MorphBits,
    pub gold_tag: Option<String>,
}

impl Token {
    /// A token with the documented defaults: the root is the lowercased
    /// surface and all morphological bits are off.
    pub fn new(surface: impl Into<String>) -> Self {
        let surface = surface.into();
        Token {
            root: surface.to_lowercase(),
            surface,
            morph: MorphBits::default(),
            gold_tag: None,
        }
    }

    pub fn with_root(mut self, root: impl Into<String>) -> Self {
        self.root = root.into();
        self
    }

    pub fn with_morph(mut self, morph: MorphBits) -> Self {
        self.morph = morph;
        self
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.gold_tag = Some(tag.into());
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sentence {
    pub tokens: Vec<Token>,
}

impl Sentence {
    pub fn new(tokens: Vec<Token>) -> Self {
        Sentence { tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Gold tags, or `None` if any token is untagged.
    pub fn gold_tags(&self) -> Option<Vec<&str>> {
        self.tokens.iter().map(|t| t.gold_tag.as_deref()).collect()
    }
}

// ---------------------------------------------------------------------------
// Column schema
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Column {
    Surface,
    Root,
    Morph,
    Tag,
}

/// Column interpretation for corpus files, e.g. `surface,root,morph,tag`.
///
/// Lines may omit optional columns (root, morph). A line with fewer columns
/// than the schema fills the optional columns in schema order and leaves the
/// trailing optional ones at their defaults, so `Astana B-LOC` reads as
/// surface + tag under the default schema.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Schema {
    columns: Vec<Column>,
}

impl Default for Schema {
    fn default() -> Self {
        Schema {
            columns: vec![Column::Surface, Column::Root, Column::Morph, Column::Tag],
        }
    }
}

impl Schema {
    pub fn new(columns: Vec<Column>) -> Result<Self> {
        if columns.first() != Some(&Column::Surface) {
            return Err(Error::Schema("the first column must be `surface`".into()));
        }
        for (i, c) in columns.iter().enumerate() {
            if columns[..i].contains(c) {
                return Err(Error::Schema(format!("column {c:?} listed twice")));
            }
        }
        Ok(Schema { columns })
    }

    /// Schema without the tag column, for untagged input.
    pub fn untagged() -> Self {
        Schema {
            columns: vec![Column::Surface, Column::Root, Column::Morph],
        }
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn has_tag(&self) -> bool {
        self.columns.contains(&Column::Tag)
    }

    fn required(&self) -> usize {
        1 + usize::from(self.has_tag())
    }

    fn parse_line(&self, line_no: usize, line: &str) -> Result<Token> {
        let fields: Vec<&str> = line.split_whitespace().collect();
        let required = self.required();
        if fields.len() < required || fields.len() > self.columns.len() {
            return Err(Error::parse(
                line_no,
                format!(
                    "expected between {} and {} columns, found {}",
                    required,
                    self.columns.len(),
                    fields.len()
                ),
            ));
        }
        let mut optional_budget = fields.len() - required;
        let mut fields = fields.into_iter();
        let mut token = Token::new(String::new());
        let mut root = None;
        for column in &self.columns {
            match column {
                Column::Surface => token.surface = fields.next().unwrap().to_string(),
                Column::Tag => token.gold_tag = Some(fields.next().unwrap().to_string()),
                Column::Root | Column::Morph => {
                    if optional_budget == 0 {
                        continue;
                    }
                    optional_budget -= 1;
                    let value = fields.next().unwrap();
                    if *column == Column::Root {
                        root = Some(value.to_string());
                    } else {
                        token.morph = value.parse().map_err(|m| Error::parse(line_no, m))?;
                    }
                }
            }
        }
        token.root = root.unwrap_or_else(|| token.surface.to_lowercase());
        Ok(token)
    }
}

impl FromStr for Schema {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let columns = s
            .split(',')
            .map(|name| match name.trim() {
                "surface" => Ok(Column::Surface),
                "root" => Ok(Column::Root),
                "morph" => Ok(Column::Morph),
                "tag" => Ok(Column::Tag),
                other => Err(Error::Schema(format!("unknown column {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Schema::new(columns)
    }
}

impl fmt::Display for Schema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self
            .columns
            .iter()
            .map(|c| match c {
                Column::Surface => "surface",
                Column::Root => "root",
                Column::Morph => "morph",
                Column::Tag => "tag",
            })
            .collect();
        f.write_str(&names.join(","))
    }
}

// ---------------------------------------------------------------------------
// Reading and writing
// ---------------------------------------------------------------------------

pub fn parse_corpus(text: &str, schema: &Schema) -> Result<Vec<Sentence>> {
    let mut sentences = Vec::new();
    let mut current = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            if !current.is_empty() {
                sentences.push(Sentence::new(std::mem::take(&mut current)));
            }
            continue;
        }
        current.push(schema.parse_line(i + 1, line)?);
    }
    if !current.is_empty() {
        sentences.push(Sentence::new(current));
    }
    Ok(sentences)
}

pub fn read_corpus(path: impl AsRef<Path>, schema: &Schema) -> Result<Vec<Sentence>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(&text, schema)
}

/// Writes every schema column for every token; sentences are terminated by
/// a blank line.
pub fn write_corpus<W: Write>(out: &mut W, sentences: &[Sentence], schema: &Schema) -> Result<()> {
    let mut buf = String::new();
    for sentence in sentences {
        for token in &sentence.tokens {
            let mut fields: Vec<String> = Vec::with_capacity(schema.columns.len());
            for column in &schema.columns {
                fields.push(match column {
                    Column::Surface => token.surface.clone(),
                    Column::Root => token.root.clone(),
                    Column::Morph => token.morph.to_string(),
                    Column::Tag => token.gold_tag.clone().ok_or_else(|| {
                        Error::Schema(format!("token {:?} has no tag to write", token.surface))
                    })?,
                });
            }
            buf.push_str(&fields.join(" "));
            buf.push('\n');
        }
        buf.push('\n');
    }
    out.write_all(buf.as_bytes())
        .map_err(|e| Error::io("<output>", e))
}

pub fn save_corpus(path: impl AsRef<Path>, sentences: &[Sentence], schema: &Schema) -> Result<()> {
    let path = path.as_ref();
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_corpus(&mut file, sentences, schema)
}

// ---------------------------------------------------------------------------
// IOB tags
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TagKind<'a> {
    Outside,
    Begin(&'a str),
    Inside(&'a str),
}

pub fn parse_tag(tag: &str) -> Result<TagKind<'_>> {
    if tag == "O" {
        return Ok(TagKind::Outside);
    }
    match tag.split_once('-') {
        Some(("B", ty)) if !ty.is_empty() => Ok(TagKind::Begin(ty)),
        Some(("I", ty)) if !ty.is_empty() => Ok(TagKind::Inside(ty)),
        _ => Err(Error::InvalidTag(tag.to_string())),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IobViolation {
    pub position: usize,
    pub message: String,
}

impl fmt::Display for IobViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "position {}: {}", self.position, self.message)
    }
}

/// Checks a tag sequence against IOB2: every `I-X` must continue a chunk of
/// type `X`. Returns the first violation.
pub fn validate_iob<S: AsRef<str>>(tags: &[S]) -> std::result::Result<(), IobViolation> {
    let mut open: Option<&str> = None;
    for (position, tag) in tags.iter().enumerate() {
        let tag = tag.as_ref();
        match parse_tag(tag) {
            Err(_) => {
                return Err(IobViolation {
                    position,
                    message: format!("malformed tag {tag:?}"),
                })
            }
            Ok(TagKind::Outside) => open = None,
            Ok(TagKind::Begin(ty)) => open = Some(ty),
            Ok(TagKind::Inside(ty)) => match open {
                Some(prev) if prev == ty => {}
                Some(prev) => {
                    return Err(IobViolation {
                        position,
                        message: format!("{tag} follows a {prev} chunk"),
                    })
                }
                None => {
                    return Err(IobViolation {
                        position,
                        message: format!("{tag} does not continue a chunk"),
                    })
                }
            },
        }
    }
    Ok(())
}

/// Canonicalizes IOB1 tags to IOB2: an `I-X` that opens a chunk becomes `B-X`.
pub fn iob1_to_iob2<S: AsRef<str>>(tags: &[S]) -> Result<Vec<String>> {
    let mut out = Vec::with_capacity(tags.len());
    let mut open: Option<String> = None;
    for tag in tags {
        let tag = tag.as_ref();
        match parse_tag(tag)? {
            TagKind::Outside => {
                open = None;
                out.push(tag.to_string());
            }
            TagKind::Begin(ty) => {
                open = Some(ty.to_string());
                out.push(tag.to_string());
            }
            TagKind::Inside(ty) => {
                if open.as_deref() == Some(ty) {
                    out.push(tag.to_string());
                } else {
                    out.push(format!("B-{ty}"));
                }
                open = Some(ty.to_string());
            }
        }
    }
    Ok(out)
}

/// Rewrites the gold tags of every sentence from IOB1 to IOB2 in place.
pub fn canonicalize_iob1(sentences: &mut [Sentence]) -> Result<()> {
    for sentence in sentences {
        let Some(tags) = sentence.gold_tags() else {
            continue;
        };
        let converted = iob1_to_iob2(&tags)?;
        for (token, tag) in sentence.tokens.iter_mut().zip(converted) {
            token.gold_tag = Some(tag);
        }
    }
    Ok(())
}

/// Fails on the first sentence with missing or IOB2-invalid gold tags.
pub fn validate_corpus(sentences: &[Sentence]) -> Result<()> {
    for (i, sentence) in sentences.iter().enumerate() {
        let tags = sentence.gold_tags().ok_or_else(|| Error::Alignment {
            sentence: i + 1,
            message: "missing gold tags".into(),
        })?;
        validate_iob(&tags).map_err(|v| Error::Alignment {
            sentence: i + 1,
            message: format!("invalid IOB2 sequence at {v}"),
        })?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Vocabulary
// ---------------------------------------------------------------------------

/// Id of the out-of-vocabulary symbol in every [`Lexicon`].
pub const UNK: usize = 0;
/// Id of the padding symbol for window slots before the sentence start.
pub const PAD_START: usize = 1;
/// Id of the padding symbol for window slots past the sentence end.
pub const PAD_END: usize = 2;
/// Number of reserved ids at the front of every [`Lexicon`].
pub const RESERVED: usize = 3;

const RESERVED_SYMBOLS: [&str; RESERVED] = ["<unk>", "<s>", "</s>"];

/// A dense string↔id dictionary whose first [`RESERVED`] ids are the
/// unknown and padding symbols.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lexicon {
    symbols: Vec<String>,
    index: HashMap<String, usize>,
}

impl Default for Lexicon {
    fn default() -> Self {
        Lexicon::from_symbols(Vec::<String>::new())
    }
}

impl Lexicon {
    /// Builds a lexicon from non-reserved symbols in the given order.
    /// Duplicates and reserved spellings are skipped.
    pub fn from_symbols<I, S>(symbols: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut lexicon = Lexicon {
            symbols: Vec::new(),
            index: HashMap::new(),
        };
        for s in RESERVED_SYMBOLS {
            lexicon.insert(s.to_string());
        }
        for s in symbols {
            lexicon.insert(s.into());
        }
        lexicon
    }

    fn insert(&mut self, symbol: String) {
        if !self.index.contains_key(&symbol) {
            self.index.insert(symbol.clone(), self.symbols.len());
            self.symbols.push(symbol);
        }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Id of `symbol`, or [`UNK`].
    pub fn id(&self, symbol: &str) -> usize {
        self.index.get(symbol).copied().unwrap_or(UNK)
    }

    pub fn get(&self, symbol: &str) -> Option<usize> {
        self.index.get(symbol).copied()
    }

    pub fn symbol(&self, id: usize) -> Option<&str> {
        self.symbols.get(id).map(String::as_str)
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn is_reserved(id: usize) -> bool {
        id < RESERVED
    }
}

/// The tag set 𝒯. `O` is always id 0; the id equal to [`TagSet::len`] is
/// the start symbol used as the previous tag of the first token.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TagSet {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl TagSet {
    pub fn new<I, S>(tags: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut set = TagSet {
            names: vec!["O".to_string()],
            index: HashMap::from([("O".to_string(), 0)]),
        };
        for tag in tags {
            let tag = tag.into();
            parse_tag(&tag)?;
            if !set.index.contains_key(&tag) {
                set.index.insert(tag.clone(), set.names.len());
                set.names.push(tag);
            }
        }
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn start_id(&self) -> usize {
        self.names.len()
    }

    pub fn id(&self, tag: &str) -> Result<usize> {
        self.index
            .get(tag)
            .copied()
            .ok_or_else(|| Error::InvalidTag(tag.to_string()))
    }

    pub fn name(&self, id: usize) -> Option<&str> {
        self.names.get(id).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    pub words: Lexicon,
    pub roots: Lexicon,
    pub tags: TagSet,
    pub lowercase_words: bool,
}

impl Vocabulary {
    pub fn word_id(&self, surface: &str) -> usize {
        if self.lowercase_words {
            self.words.id(&surface.to_lowercase())
        } else {
            self.words.id(surface)
        }
    }

    pub fn root_id(&self, root: &str) -> usize {
        self.roots.id(root)
    }

    /// Gold tag ids of a sentence; fails on untagged tokens or tags outside 𝒯.
    pub fn gold_ids(&self, sentence: &Sentence) -> Result<Vec<usize>> {
        sentence
            .tokens
            .iter()
            .map(|t| match &t.gold_tag {
                Some(tag) => self.tags.id(tag),
                None => Err(Error::InvalidTag(format!("<missing on {:?}>", t.surface))),
            })
            .collect()
    }
}

fn counted_in_order<'a>(items: impl Iterator<Item = String> + 'a, min_count: usize) -> Vec<String> {
    let mut order = Vec::new();
    let mut counts: HashMap<String, usize> = HashMap::new();
    for item in items {
        let count = counts.entry(item.clone()).or_insert(0);
        if *count == 0 {
            order.push(item);
        }
        *count += 1;
    }
    order
        .into_iter()
        .filter(|s| counts[s] >= min_count)
        .collect()
}

/// Builds word, root and tag dictionaries from training data. Words are
/// lowercased when `lowercase_words` is set; roots keep their original form.
/// Entries seen fewer than `min_count` times fall back to the unknown symbol.
pub fn build_vocabulary(train: &[Sentence], lowercase_words: bool, min_count: usize) -> Vocabulary {
    let tokens = || train.iter().flat_map(|s| s.tokens.iter());
    let words = counted_in_order(
        tokens().map(|t| {
            if lowercase_words {
                t.surface.to_lowercase()
            } else {
                t.surface.clone()
            }
        }),
        min_count,
    );
    let roots = counted_in_order(tokens().map(|t| t.root.clone()), min_count);
    let mut tags: Vec<String> = tokens().filter_map(|t| t.gold_tag.clone()).collect();
    tags.sort();
    tags.dedup();
    // Malformed tags are rejected later, when gold ids are requested.
    let tags = TagSet::new(tags.into_iter().filter(|t| parse_tag(t).is_ok()))
        .expect("filtered tags are well-formed");
    Vocabulary {
        words: Lexicon::from_symbols(words),
        roots: Lexicon::from_symbols(roots),
        tags,
        lowercase_words,
    }
}

// ---------------------------------------------------------------------------
// Splitting
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<Sentence>,
    pub dev: Vec<Sentence>,
    pub test: Vec<Sentence>,
}

/// Part sizes for `n` items under `ratios`, using largest-remainder rounding
/// so the sizes sum to exactly `n`. Ties go to the earlier part.
pub fn split_sizes(n: usize, ratios: [f64; 3]) -> [usize; 3] {
    let quotas: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut sizes = [0usize; 3];
    for (size, q) in sizes.iter_mut().zip(&quotas) {
        *size = q.floor() as usize;
    }
    let mut leftover = n - sizes.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if leftover == 0 {
            break;
        }
        sizes[i] += 1;
        leftover -= 1;
    }
    sizes
}

/// Seeded random partition into train/dev/test. Sentences keep their
/// original relative order within each part.
pub fn split_corpus(sentences: &[Sentence], ratios: [f64; 3], seed: u64) -> Result<Split> {
    if sentences.len() < 3 {
        return Err(Error::Config(format!(
            "need at least 3 sentences to split, got {}",
            sentences.len()
        )));
    }
    if ratios.iter().any(|r| *r < 0.0) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "split ratios {ratios:?} must be non-negative and sum to 1"
        )));
    }
    let sizes = split_sizes(sentences.len(), ratios);
    let mut order: Vec<usize> = (0..sentences.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));

    let mut parts: Vec<Vec<Sentence>> = Vec::with_capacity(3);
    let mut offset = 0;
    for size in sizes {
        let mut chosen = order[offset..offset + size].to_vec();
        chosen.sort_unstable();
        parts.push(chosen.into_iter().map(|i| sentences[i].clone()).collect());
        offset += size;
    }
    let test = parts.pop().unwrap();
    let dev = parts.pop().unwrap();
    let train = parts.pop().unwrap();
    Ok(Split { train, dev, test })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tagged(words: &[(&str, &str)]) -> Sentence {
        Sentence::new(
            words
                .iter()
                .map(|(w, t)| Token::new(*w).with_tag(*t))
                .collect(),
        )
    }

    #[test]
    fn reads_full_line() {
        let s = parse_corpus("Astana astana 100010 B-LOC\n\n", &Schema::default()).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].len(), 1);
        let t = &s[0].tokens[0];
        assert_eq!(t.surface, "Astana");
        assert_eq!(t.root, "astana");
        assert_eq!(t.morph.to_string(), "100010");
        assert_eq!(t.gold_tag.as_deref(), Some("B-LOC"));
    }

    #[test]
    fn two_column_line_uses_defaults() {
        let s = parse_corpus("Astana B-LOC\n", &Schema::default()).unwrap();
        let t = &s[0].tokens[0];
        assert_eq!(t.root, "astana");
        assert_eq!(t.morph, MorphBits::default());
        assert_eq!(t.gold_tag.as_deref(), Some("B-LOC"));
    }

    #[test]
    fn blank_lines_separate_sentences() {
        let text = "a O\nb O\n\n\nc B-PER\n";
        let s = parse_corpus(text, &Schema::default()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].len(), 2);
    }

    #[test]
    fn empty_input_is_empty_corpus() {
        assert!(parse_corpus("", &Schema::default()).unwrap().is_empty());
        assert!(parse_corpus("\n\n", &Schema::default()).unwrap().is_empty());
    }

    #[test]
    fn malformed_lines_report_line_numbers() {
        let err = parse_corpus("a O\nb c 100000 O extra\n", &Schema::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse_corpus("a O\n\nb b 10a000 O\n", &Schema::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = parse_corpus("lonely\n", &Schema::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn untagged_schema_reads_single_column() {
        let s = parse_corpus("Astana\nqalasy\n", &Schema::untagged()).unwrap();
        assert_eq!(s[0].len(), 2);
        assert!(s[0].gold_tags().is_none());
    }

    #[test]
    fn schema_parsing() {
        let schema: Schema = "surface,tag".parse().unwrap();
        assert_eq!(schema.to_string(), "surface,tag");
        assert!("root,surface".parse::<Schema>().is_err());
        assert!("surface,tag,tag".parse::<Schema>().is_err());
        assert!("surface,lemma".parse::<Schema>().is_err());
    }

    #[test]
    fn write_then_read_is_identity() {
        let corpus = vec![
            Sentence::new(vec![
                Token::new("Astana")
                    .with_root("Astana")
                    .with_morph("100010".parse().unwrap())
                    .with_tag("B-LOC"),
                Token::new("qalasy").with_tag("O"),
            ]),
            tagged(&[("x", "B-PER")]),
        ];
        let mut buf = Vec::new();
        write_corpus(&mut buf, &corpus, &Schema::default()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(parse_corpus(&text, &Schema::default()).unwrap(), corpus);
    }

    #[test]
    fn iob_validation() {
        assert!(validate_iob(&["B-LOC", "I-LOC", "O"]).is_ok());
        assert_eq!(validate_iob(&["O", "I-PER"]).unwrap_err().position, 1);
        assert_eq!(validate_iob(&["B-PER", "I-LOC"]).unwrap_err().position, 1);
        assert_eq!(validate_iob(&["I-PER"]).unwrap_err().position, 0);
        assert!(validate_iob::<&str>(&[]).is_ok());
        assert_eq!(validate_iob(&["O", "X"]).unwrap_err().position, 1);
    }

    #[test]
    fn iob1_conversion() {
        let converted = iob1_to_iob2(&["I-PER", "I-PER", "O", "I-LOC", "B-LOC", "I-ORG"]).unwrap();
        assert_eq!(converted, ["B-PER", "I-PER", "O", "B-LOC", "B-LOC", "B-ORG"]);
        assert!(validate_iob(&converted).is_ok());
    }

    #[test]
    fn vocabulary_min_count_and_tags() {
        let corpus = vec![tagged(&[("a", "B-LOC"), ("a", "I-LOC"), ("b", "O")])];
        let vocab = build_vocabulary(&corpus, true, 2);
        assert_ne!(vocab.word_id("a"), UNK);
        assert_eq!(vocab.word_id("b"), UNK);
        assert_eq!(vocab.word_id("never-seen"), UNK);
        assert_eq!(vocab.tags.len(), 3);
        assert_eq!(vocab.tags.id("O").unwrap(), 0);
        assert_eq!(vocab.tags.start_id(), 3);
        assert_eq!(vocab.words.len(), RESERVED + 1);
    }

    #[test]
    fn knc_shaped_tag_set() {
        let corpus = vec![tagged(&[
            ("a", "B-LOC"),
            ("b", "I-LOC"),
            ("c", "B-ORG"),
            ("d", "I-ORG"),
            ("e", "B-PER"),
            ("f", "I-PER"),
            ("g", "O"),
        ])];
        assert_eq!(build_vocabulary(&corpus, true, 1).tags.len(), 7);
    }

    #[test]
    fn words_lowercased_roots_kept() {
        let corpus = vec![Sentence::new(vec![
            Token::new("Astana").with_root("Astana").with_tag("B-LOC")
        ])];
        let vocab = build_vocabulary(&corpus, true, 1);
        assert_ne!(vocab.word_id("ASTANA"), UNK);
        assert_ne!(vocab.root_id("Astana"), UNK);
        assert_eq!(vocab.root_id("astana"), UNK);
    }

    #[test]
    fn empty_corpus_vocabulary_has_reserved_symbols() {
        let vocab = build_vocabulary(&[], true, 1);
        assert_eq!(vocab.words.len(), RESERVED);
        assert_eq!(vocab.roots.len(), RESERVED);
        assert_eq!(vocab.tags.len(), 1);
    }

    #[test]
    fn split_sizes_follow_largest_remainder() {
        assert_eq!(split_sizes(10, [0.8, 0.1, 0.1]), [8, 1, 1]);
        assert_eq!(split_sizes(18071, [0.8, 0.1, 0.1]), [14457, 1807, 1807]);
        assert_eq!(split_sizes(3, [0.8, 0.1, 0.1]).iter().sum::<usize>(), 3);
    }

    #[test]
    fn split_is_deterministic() {
        let corpus: Vec<Sentence> = (0..10)
            .map(|i| tagged(&[(&format!("w{i}"), "O")]))
            .collect();
        let a = split_corpus(&corpus, [0.8, 0.1, 0.1], 0).unwrap();
        let b = split_corpus(&corpus, [0.8, 0.1, 0.1], 0).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.train.len(), a.dev.len(), a.test.len()), (8, 1, 1));
        assert!(split_corpus(&corpus[..2], [0.8, 0.1, 0.1], 0).is_err());
        assert!(split_corpus(&corpus, [0.8, 0.1, 0.2], 0).is_err());
    }
}
