//! Chunk-level evaluation with conlleval semantics, and cosine nearest
//! neighbours over an embedding table.
//!
//! A chunk is a maximal `B-X I-X …` run. As in conlleval, an `I-X` that does
//! not continue an open chunk of type `X` starts a new one, so IOB1 and IOB2
//! inputs are read alike. A predicted chunk is correct only when its type
//! and both boundaries match a gold chunk.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use crate::corpus::{parse_tag, Lexicon, Sentence, TagKind};
use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};

/// Entity types that always get a row in a report.
pub const STANDARD_TYPES: [&str; 3] = ["LOC", "ORG", "PER"];

/// Half-open token span `[start, end)` of one entity.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ChunkSpan {
    pub kind: String,
    pub start: usize,
    pub end: usize,
}

pub fn extract_chunks<S: AsRef<str>>(tags: &[S]) -> Result<Vec<ChunkSpan>> {
    let mut chunks = Vec::new();
    let mut open: Option<(String, usize)> = None;
    for (i, tag) in tags.iter().enumerate() {
        match parse_tag(tag.as_ref())? {
            TagKind::Outside => {
                if let Some((kind, start)) = open.take() {
                    chunks.push(ChunkSpan { kind, start, end: i });
                }
            }
            TagKind::Begin(ty) => {
                if let Some((kind, start)) = open.take() {
                    chunks.push(ChunkSpan { kind, start, end: i });
                }
                open = Some((ty.to_string(), i));
            }
            TagKind::Inside(ty) => match &open {
                Some((kind, _)) if kind == ty => {}
                _ => {
                    if let Some((kind, start)) = open.take() {
                        chunks.push(ChunkSpan { kind, start, end: i });
                    }
                    open = Some((ty.to_string(), i));
                }
            },
        }
    }
    if let Some((kind, start)) = open {
        chunks.push(ChunkSpan {
            kind,
            start,
            end: tags.len(),
        });
    }
    Ok(chunks)
}

/// IOB2 tags for `len` tokens covering the given spans.
pub fn spans_to_iob2(spans: &[ChunkSpan], len: usize) -> Vec<String> {
    let mut tags = vec!["O".to_string(); len];
    for span in spans {
        tags[span.start] = format!("B-{}", span.kind);
        for tag in &mut tags[span.start + 1..span.end] {
            *tag = format!("I-{}", span.kind);
        }
    }
    tags
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ChunkCounts {
    pub gold: usize,
    pub predicted: usize,
    pub correct: usize,
}

impl ChunkCounts {
    pub fn precision(&self) -> f64 {
        if self.predicted == 0 {
            0.0
        } else {
            100.0 * self.correct as f64 / self.predicted as f64
        }
    }

    pub fn recall(&self) -> f64 {
        if self.gold == 0 {
            0.0
        } else {
            100.0 * self.correct as f64 / self.gold as f64
        }
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r > 0.0 {
            2.0 * p * r / (p + r)
        } else {
            0.0
        }
    }

    fn add(&mut self, other: &ChunkCounts) {
        self.gold += other.gold;
        self.predicted += other.predicted;
        self.correct += other.correct;
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvalReport {
    pub per_type: BTreeMap<String, ChunkCounts>,
    pub overall: ChunkCounts,
    pub tokens: usize,
    pub correct_tokens: usize,
}

impl EvalReport {
    pub fn accuracy(&self) -> f64 {
        if self.tokens == 0 {
            0.0
        } else {
            100.0 * self.correct_tokens as f64 / self.tokens as f64
        }
    }

    pub fn f1(&self) -> f64 {
        self.overall.f1()
    }

    pub fn counts(&self, kind: &str) -> ChunkCounts {
        self.per_type.get(kind).copied().unwrap_or_default()
    }

    /// One sentence's worth of counts.
    pub fn add_sentence<G: AsRef<str>, P: AsRef<str>>(&mut self, gold: &[G], predicted: &[P]) -> Result<()> {
        if gold.len() != predicted.len() {
            return Err(Error::Shape(format!(
                "gold has {} tags, prediction has {}",
                gold.len(),
                predicted.len()
            )));
        }
        let gold_chunks = extract_chunks(gold)?;
        let pred_chunks = extract_chunks(predicted)?;
        let gold_set: HashSet<&ChunkSpan> = gold_chunks.iter().collect();
        let mut local: BTreeMap<String, ChunkCounts> = BTreeMap::new();
        for c in &gold_chunks {
            local.entry(c.kind.clone()).or_default().gold += 1;
        }
        for c in &pred_chunks {
            let entry = local.entry(c.kind.clone()).or_default();
            entry.predicted += 1;
            if gold_set.contains(c) {
                entry.correct += 1;
            }
        }
        for (kind, counts) in local {
            self.overall.add(&counts);
            self.per_type.entry(kind).or_default().add(&counts);
        }
        self.tokens += gold.len();
        self.correct_tokens += gold
            .iter()
            .zip(predicted)
            .filter(|(g, p)| g.as_ref() == p.as_ref())
            .count();
        Ok(())
    }

    /// Types to report: the standard three plus any other type seen.
    pub fn report_types(&self) -> Vec<String> {
        let mut types: Vec<String> = STANDARD_TYPES.iter().map(|s| s.to_string()).collect();
        for k in self.per_type.keys() {
            if !types.contains(k) {
                types.push(k.clone());
            }
        }
        types
    }

    /// Delimiter-separated variant of the report.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("type\tgold\tpredicted\tcorrect\tprecision\trecall\tf1\n");
        let mut row = |name: &str, c: &ChunkCounts| {
            out.push_str(&format!(
                "{name}\t{}\t{}\t{}\t{:.2}\t{:.2}\t{:.2}\n",
                c.gold,
                c.predicted,
                c.correct,
                c.precision(),
                c.recall(),
                c.f1()
            ));
        };
        for kind in self.report_types() {
            row(&kind, &self.counts(&kind));
        }
        row("Overall", &self.overall);
        out
    }
}

/// conlleval-style layout: summary lines, one row per type, overall row.
impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "processed {} tokens with {} phrases; found: {} phrases; correct: {}.",
            self.tokens, self.overall.gold, self.overall.predicted, self.overall.correct
        )?;
        writeln!(
            f,
            "accuracy: {:6.2}%; precision: {:6.2}%; recall: {:6.2}%; FB1: {:6.2}",
            self.accuracy(),
            self.overall.precision(),
            self.overall.recall(),
            self.overall.f1()
        )?;
        let row = |f: &mut fmt::Formatter<'_>, name: &str, c: &ChunkCounts| {
            writeln!(
                f,
                "{name:>17}: precision: {:6.2}%; recall: {:6.2}%; FB1: {:6.2}  {}",
                c.precision(),
                c.recall(),
                c.f1(),
                c.predicted
            )
        };
        for kind in self.report_types() {
            row(f, &kind, &self.counts(&kind))?;
        }
        row(f, "Overall", &self.overall)
    }
}

/// Micro-averaged chunk scores over a corpus.
pub fn evaluate<S: AsRef<str>>(gold: &[Sentence], predicted: &[Vec<S>]) -> Result<EvalReport> {
    if gold.len() != predicted.len() {
        return Err(Error::Alignment {
            sentence: gold.len().min(predicted.len()) + 1,
            message: format!(
                "gold has {} sentences, prediction has {}",
                gold.len(),
                predicted.len()
            ),
        });
    }
    let mut report = EvalReport::default();
    for (i, (g, p)) in gold.iter().zip(predicted).enumerate() {
        let tags = g.gold_tags().ok_or_else(|| Error::Alignment {
            sentence: i + 1,
            message: "gold sentence is untagged".into(),
        })?;
        if tags.len() != p.len() {
            return Err(Error::Alignment {
                sentence: i + 1,
                message: format!("gold has {} tokens, prediction has {}", tags.len(), p.len()),
            });
        }
        report.add_sentence(&tags, p)?;
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Neighbor {
    pub token: String,
    pub cosine: f64,
}

/// The `k` columns closest to `query` by cosine similarity. The query
/// itself, reserved symbols and zero-norm columns are skipped.
pub fn nearest_neighbors(
    table: &EmbeddingTable,
    lexicon: &Lexicon,
    query: &str,
    k: usize,
) -> Result<Vec<Neighbor>> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let id = lexicon
        .get(query)
        .filter(|&id| !Lexicon::is_reserved(id))
        .ok_or_else(|| Error::OutOfVocabulary(query.to_string()))?;
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let q = table.lookup(id)?;
    let qn = norm(q);
    if qn == 0.0 {
        return Err(Error::Config(format!("query {query:?} has a zero vector")));
    }
    let mut zero = 0;
    let mut scored: Vec<(usize, f64)> = Vec::new();
    for c in crate::corpus::RESERVED..lexicon.len().min(table.cols()) {
        if c == id {
            continue;
        }
        let v = table.lookup(c)?;
        let n = norm(v);
        if n == 0.0 {
            zero += 1;
            continue;
        }
        let dot: f64 = q.iter().zip(v).map(|(a, b)| a * b).sum();
        scored.push((c, dot / (qn * n)));
    }
    if zero > 0 {
        log::warn!("skipped {zero} zero-norm columns");
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(scored
        .into_iter()
        .take(k)
        .map(|(c, cosine)| Neighbor {
            token: lexicon.symbol(c).unwrap().to_string(),
            cosine,
        })
        .collect())
}
