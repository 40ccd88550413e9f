//! Synthetic agglutinative corpora.
//!
//! Every token is a root followed by a chain of suffixes, so the number of
//! surface forms grows geometrically with the chain length while the root
//! inventory stays fixed. Entities are drawn from per-type gazetteers of
//! capitalized root sequences and inflected like any other token.

use std::collections::{BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{split_corpus, MorphBits, Sentence, Split, Token};
use crate::error::{Error, Result};

const CONSONANTS: &[&str] = &["b", "d", "g", "k", "l", "m", "n", "p", "r", "s", "t", "z"];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "y"];
const ENTITY_TYPES: [&str; 3] = ["LOC", "ORG", "PER"];

/// Candidate pools at or below this size are enumerated instead of sampled.
const ENUMERATION_LIMIT: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynthConfig {
    pub n_roots: usize,
    pub n_suffixes: usize,
    pub max_suffix_chain: usize,
    /// Gazetteer sizes for LOC, ORG and PER.
    pub gazetteer: [usize; 3],
    /// Longest entity name, in tokens.
    pub max_name_len: usize,
    pub n_sentences: usize,
    pub min_sentence_len: usize,
    pub max_sentence_len: usize,
    /// Probability that a token slot starts an entity.
    pub entity_density: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_roots: 100,
            n_suffixes: 10,
            max_suffix_chain: 2,
            gazetteer: [30, 20, 40],
            max_name_len: 2,
            n_sentences: 500,
            min_sentence_len: 4,
            max_sentence_len: 12,
            entity_density: 0.2,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_roots", self.n_roots),
            ("max_name_len", self.max_name_len),
            ("n_sentences", self.n_sentences),
            ("min_sentence_len", self.min_sentence_len),
            ("gazetteer LOC", self.gazetteer[0]),
            ("gazetteer ORG", self.gazetteer[1]),
            ("gazetteer PER", self.gazetteer[2]),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be at least 1")));
        }
        if self.max_sentence_len < self.min_sentence_len {
            return Err(Error::Config("max_sentence_len < min_sentence_len".into()));
        }
        if !(self.entity_density > 0.0 && self.entity_density < 1.0) {
            return Err(Error::Config(format!(
                "entity density {} must lie in (0, 1)",
                self.entity_density
            )));
        }
        Ok(())
    }
}

/// Type/token statistics of a generated corpus. Surface types are counted
/// after lowercasing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SparsityReport {
    pub tokens: usize,
    pub surface_types: usize,
    pub root_types: usize,
}

impl SparsityReport {
    pub fn type_token_ratio(&self) -> f64 {
        if self.tokens == 0 {
            0.0
        } else {
            self.surface_types as f64 / self.tokens as f64
        }
    }

    pub fn of(sentences: &[Sentence]) -> Self {
        let mut surfaces = HashSet::new();
        let mut roots = HashSet::new();
        let mut tokens = 0;
        for t in sentences.iter().flat_map(|s| &s.tokens) {
            tokens += 1;
            surfaces.insert(t.surface.to_lowercase());
            roots.insert(t.root.as_str());
        }
        SparsityReport {
            tokens,
            surface_types: surfaces.len(),
            root_types: roots.len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthCorpus {
    pub split: Split,
    pub report: SparsityReport,
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

fn syllables() -> Vec<String> {
    CONSONANTS
        .iter()
        .flat_map(|c| VOWELS.iter().map(move |v| format!("{c}{v}")))
        .collect()
}

/// `n` distinct strings from `candidates`, enumerated or sampled.
fn distinct<R: Rng>(
    n: usize,
    space: usize,
    what: &str,
    rng: &mut R,
    mut sample: impl FnMut(&mut R) -> String,
    enumerate: impl FnOnce() -> Vec<String>,
) -> Result<Vec<String>> {
    if n > space {
        return Err(Error::Config(format!(
            "cannot draw {n} distinct {what} from a space of {space}"
        )));
    }
    if space <= ENUMERATION_LIMIT {
        let mut all = enumerate();
        all.shuffle(rng);
        all.truncate(n);
        return Ok(all);
    }
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let s = sample(rng);
        if seen.insert(s.clone()) {
            out.push(s);
        }
    }
    Ok(out)
}

fn make_roots<R: Rng>(n: usize, rng: &mut R) -> Result<Vec<String>> {
    let syl = syllables();
    let k = syl.len();
    let space = k * k + k * k * k;
    distinct(
        n,
        space,
        "roots",
        rng,
        |rng| {
            let len = rng.gen_range(2..=3);
            (0..len).map(|_| syl[rng.gen_range(0..k)].as_str()).collect()
        },
        || {
            let mut all = Vec::with_capacity(space);
            for a in &syl {
                for b in &syl {
                    all.push(format!("{a}{b}"));
                    for c in &syl {
                        all.push(format!("{a}{b}{c}"));
                    }
                }
            }
            all
        },
    )
}

fn make_suffixes<R: Rng>(n: usize, rng: &mut R) -> Result<Vec<String>> {
    let syl = syllables();
    let mut all: Vec<String> = syl.clone();
    for s in &syl {
        for c in CONSONANTS {
            all.push(format!("{s}{c}"));
        }
    }
    let space = all.len();
    distinct(n, space, "suffixes", rng, |_| unreachable!(), move || all)
}

fn sequence_space(block: usize, max_len: usize) -> usize {
    (1..=max_len)
        .map(|k| block.checked_pow(k as u32).unwrap_or(usize::MAX))
        .fold(0usize, |a, b| a.saturating_add(b))
}

/// Entity names per type; each name is a sequence of capitalized roots.
fn make_gazetteers<R: Rng>(
    roots: &[String],
    config: &SynthConfig,
    rng: &mut R,
) -> Result<Vec<Vec<Vec<String>>>> {
    let mut shuffled: Vec<&String> = roots.iter().collect();
    shuffled.shuffle(rng);
    let blocks: Vec<Vec<&String>> = if shuffled.len() >= ENTITY_TYPES.len() {
        let per = shuffled.len() / ENTITY_TYPES.len();
        (0..ENTITY_TYPES.len())
            .map(|t| {
                let end = if t + 1 == ENTITY_TYPES.len() { shuffled.len() } else { (t + 1) * per };
                shuffled[t * per..end].to_vec()
            })
            .collect()
    } else {
        vec![shuffled.clone(); ENTITY_TYPES.len()]
    };

    let total_space = sequence_space(roots.len(), config.max_name_len);
    let total: usize = config.gazetteer.iter().sum();
    if total > total_space {
        return Err(Error::Config(format!(
            "gazetteers need {total} distinct names but only {total_space} can be derived"
        )));
    }

    let mut used: HashSet<Vec<String>> = HashSet::new();
    let mut gazetteers = Vec::with_capacity(ENTITY_TYPES.len());
    for (t, block) in blocks.iter().enumerate() {
        let want = config.gazetteer[t];
        let space = sequence_space(block.len(), config.max_name_len);
        if want > space {
            return Err(Error::Config(format!(
                "{} gazetteer of {want} names exceeds the {space} derivable names",
                ENTITY_TYPES[t]
            )));
        }
        let mut names = Vec::with_capacity(want);
        if space <= ENUMERATION_LIMIT {
            let mut all: Vec<Vec<String>> = vec![vec![]];
            let mut candidates = Vec::new();
            for _ in 0..config.max_name_len {
                all = all
                    .into_iter()
                    .flat_map(|prefix| {
                        block.iter().map(move |r| {
                            let mut n = prefix.clone();
                            n.push(capitalize(r));
                            n
                        })
                    })
                    .collect();
                candidates.extend(all.iter().cloned());
            }
            candidates.shuffle(rng);
            for c in candidates {
                if names.len() == want {
                    break;
                }
                if used.insert(c.clone()) {
                    names.push(c);
                }
            }
        } else {
            let mut attempts = 0usize;
            while names.len() < want {
                attempts += 1;
                if attempts > 1000 * want + 10_000 {
                    break;
                }
                let len = rng.gen_range(1..=config.max_name_len);
                let name: Vec<String> = (0..len)
                    .map(|_| capitalize(block[rng.gen_range(0..block.len())]))
                    .collect();
                if used.insert(name.clone()) {
                    names.push(name);
                }
            }
        }
        if names.len() < want {
            return Err(Error::Config(format!(
                "could not derive {want} distinct {} names",
                ENTITY_TYPES[t]
            )));
        }
        gazetteers.push(names);
    }
    Ok(gazetteers)
}

struct Inflector<'a> {
    suffixes: &'a [String],
    max_chain: usize,
}

impl Inflector<'_> {
    fn token<R: Rng>(&self, root: &str, proper: bool, tag: String, rng: &mut R) -> Token {
        let chain = if self.suffixes.is_empty() {
            0
        } else {
            rng.gen_range(0..=self.max_chain)
        };
        let mut surface = root.to_string();
        for _ in 0..chain {
            surface.push_str(&self.suffixes[rng.gen_range(0..self.suffixes.len())]);
        }
        let mut morph = MorphBits::default();
        morph.set(MorphBits::ROOT, true);
        morph.set(MorphBits::INFLECTIONAL, chain > 0);
        morph.set(MorphBits::PROPER_NOUN, proper);
        Token::new(surface).with_root(root).with_morph(morph).with_tag(tag)
    }
}

/// All sentences of a synthetic corpus, in generation order.
pub fn generate_sentences(config: &SynthConfig) -> Result<Vec<Sentence>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let roots = make_roots(config.n_roots, &mut rng)?;
    let suffixes = make_suffixes(config.n_suffixes, &mut rng)?;
    let gazetteers = make_gazetteers(&roots, config, &mut rng)?;
    let inflect = Inflector {
        suffixes: &suffixes,
        max_chain: config.max_suffix_chain,
    };

    let mut sentences = Vec::with_capacity(config.n_sentences);
    for _ in 0..config.n_sentences {
        let target = rng.gen_range(config.min_sentence_len..=config.max_sentence_len);
        let mut tokens = Vec::with_capacity(target + config.max_name_len);
        while tokens.len() < target {
            if rng.gen_bool(config.entity_density) {
                let t = rng.gen_range(0..ENTITY_TYPES.len());
                let name = &gazetteers[t][rng.gen_range(0..gazetteers[t].len())];
                for (k, part) in name.iter().enumerate() {
                    let prefix = if k == 0 { "B" } else { "I" };
                    let tag = format!("{prefix}-{}", ENTITY_TYPES[t]);
                    tokens.push(inflect.token(part, true, tag, &mut rng));
                }
            } else {
                let root = &roots[rng.gen_range(0..roots.len())];
                tokens.push(inflect.token(root, false, "O".into(), &mut rng));
            }
        }
        sentences.push(Sentence::new(tokens));
    }
    Ok(sentences)
}

/// A seeded corpus split 80/10/10 with its sparsity statistics.
pub fn generate(config: &SynthConfig) -> Result<SynthCorpus> {
    let sentences = generate_sentences(config)?;
    let report = SparsityReport::of(&sentences);
    let split = split_corpus(&sentences, [0.8, 0.1, 0.1], config.seed)?;
    Ok(SynthCorpus { split, report })
}

/// Distinct lowercased surface forms per root, for diagnostics.
pub fn forms_per_root(sentences: &[Sentence]) -> std::collections::BTreeMap<String, BTreeSet<String>> {
    let mut map: std::collections::BTreeMap<String, BTreeSet<String>> = Default::default();
    for t in sentences.iter().flat_map(|s| &s.tokens) {
        map.entry(t.root.clone())
            .or_default()
            .insert(t.surface.to_lowercase());
    }
    map
}
