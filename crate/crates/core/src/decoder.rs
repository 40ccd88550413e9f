//! Sentence-level scoring over a tag lattice: path scores, Viterbi decoding,
//! the log-partition function and forward-backward marginals.
//!
//! Two lattice kinds are supported. An *independent* lattice holds one score
//! per (position, tag) and is combined with a [`TransitionMatrix`]:
//!
//! ```text
//! s(X, Y) = Σ_i A[y_{i-1}, y_i] + f(y_i | i)
//! ```
//!
//! A *conditional* lattice holds one score per (position, previous tag, tag),
//! produced by a network that sees the previous tag, and needs no transition
//! matrix:
//!
//! ```text
//! s(X, Y) = Σ_i f(y_i | i, y_{i-1})
//! ```
//!
//! In both cases "previous tag" at position 0 is a dedicated start state,
//! stored as row 0; tag `j` as a previous tag is row `j + 1`.

use crate::corpus::{parse_tag, TagKind, TagSet};
use crate::error::{Error, Result};

/// Score given to edges removed by [`constrain_iob`].
pub const FORBIDDEN: f64 = -1e30;

/// `(|𝒯| + 1) × |𝒯|` transition scores; row 0 is the initial distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionMatrix {
    tags: usize,
    data: Vec<f64>,
}

impl TransitionMatrix {
    pub fn zeros(tags: usize) -> Self {
        TransitionMatrix {
            tags,
            data: vec![0.0; (tags + 1) * tags],
        }
    }

    pub fn from_raw(tags: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != (tags + 1) * tags {
            return Err(Error::Shape(format!(
                "transition matrix for {tags} tags needs {} entries, got {}",
                (tags + 1) * tags,
                data.len()
            )));
        }
        Ok(TransitionMatrix { tags, data })
    }

    pub fn tags(&self) -> usize {
        self.tags
    }

    pub fn initial(&self, tag: usize) -> f64 {
        self.data[tag]
    }

    pub fn get(&self, prev: usize, tag: usize) -> f64 {
        self.data[(prev + 1) * self.tags + tag]
    }

    /// Score for entering `tag` from `prev`, where `None` is the start state.
    pub fn edge(&self, prev: Option<usize>, tag: usize) -> f64 {
        match prev {
            None => self.initial(tag),
            Some(p) => self.get(p, tag),
        }
    }

    pub fn set(&mut self, prev: Option<usize>, tag: usize, value: f64) {
        let row = prev.map_or(0, |p| p + 1);
        self.data[row * self.tags + tag] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LatticeKind {
    Independent,
    Conditional,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TagLattice {
    kind: LatticeKind,
    tags: usize,
    positions: usize,
    data: Vec<f64>,
}

impl TagLattice {
    pub fn independent(tags: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        let positions = rows.len();
        let mut data = Vec::with_capacity(positions * tags);
        for row in rows {
            if row.len() != tags {
                return Err(Error::Shape(format!(
                    "emission row has {} entries, expected {tags}",
                    row.len()
                )));
            }
            data.extend(row);
        }
        Ok(TagLattice {
            kind: LatticeKind::Independent,
            tags,
            positions,
            data,
        })
    }

    /// A conditional lattice with all scores zero.
    pub fn conditional_zeros(tags: usize, positions: usize) -> Self {
        TagLattice {
            kind: LatticeKind::Conditional,
            tags,
            positions,
            data: vec![0.0; positions * (tags + 1) * tags],
        }
    }

    pub fn kind(&self) -> LatticeKind {
        self.kind
    }

    pub fn tags(&self) -> usize {
        self.tags
    }

    pub fn len(&self) -> usize {
        self.positions
    }

    pub fn is_empty(&self) -> bool {
        self.positions == 0
    }

    /// Emission row at `position` (independent lattices).
    pub fn emissions(&self, position: usize) -> &[f64] {
        debug_assert_eq!(self.kind, LatticeKind::Independent);
        &self.data[position * self.tags..(position + 1) * self.tags]
    }

    pub fn emissions_mut(&mut self, position: usize) -> &mut [f64] {
        debug_assert_eq!(self.kind, LatticeKind::Independent);
        &mut self.data[position * self.tags..(position + 1) * self.tags]
    }

    /// Scores at `position` given the previous tag (conditional lattices);
    /// `None` is the start state.
    pub fn conditional(&self, position: usize, prev: Option<usize>) -> &[f64] {
        let start = self.conditional_offset(position, prev);
        &self.data[start..start + self.tags]
    }

    pub fn conditional_mut(&mut self, position: usize, prev: Option<usize>) -> &mut [f64] {
        let start = self.conditional_offset(position, prev);
        &mut self.data[start..start + self.tags]
    }

    fn conditional_offset(&self, position: usize, prev: Option<usize>) -> usize {
        debug_assert_eq!(self.kind, LatticeKind::Conditional);
        let row = prev.map_or(0, |p| p + 1);
        (position * (self.tags + 1) + row) * self.tags
    }

    fn check(&self, transitions: Option<&TransitionMatrix>) -> Result<()> {
        match (self.kind, transitions) {
            (LatticeKind::Independent, Some(t)) if t.tags() == self.tags => Ok(()),
            (LatticeKind::Independent, Some(_)) => {
                Err(Error::Shape("transition matrix and lattice disagree on |𝒯|".into()))
            }
            (LatticeKind::Independent, None) => {
                Err(Error::Shape("independent lattices need a transition matrix".into()))
            }
            (LatticeKind::Conditional, None) => Ok(()),
            (LatticeKind::Conditional, Some(_)) => Err(Error::Shape(
                "conditional lattices do not take a transition matrix".into(),
            )),
        }
    }

    /// Adds the score of entering `tag` at `position` from `prev` to `acc`.
    /// Every scorer in this module goes through here so that path scores
    /// are summed in one fixed order.
    #[inline]
    fn extend(
        &self,
        transitions: Option<&TransitionMatrix>,
        acc: f64,
        position: usize,
        prev: Option<usize>,
        tag: usize,
    ) -> f64 {
        match self.kind {
            LatticeKind::Independent => {
                let t = transitions.expect("checked");
                (acc + t.edge(prev, tag)) + self.data[position * self.tags + tag]
            }
            LatticeKind::Conditional => acc + self.conditional(position, prev)[tag],
        }
    }

    /// Local log-potential of the edge `prev → tag` at `position`.
    fn potential(&self, transitions: Option<&TransitionMatrix>, position: usize, prev: Option<usize>, tag: usize) -> f64 {
        self.extend(transitions, 0.0, position, prev, tag)
    }

    /// Folds transitions into a conditional lattice; conditional lattices
    /// are returned unchanged.
    pub fn to_conditional(&self, transitions: Option<&TransitionMatrix>) -> Result<TagLattice> {
        self.check(transitions)?;
        if self.kind == LatticeKind::Conditional {
            return Ok(self.clone());
        }
        let mut out = TagLattice::conditional_zeros(self.tags, self.positions);
        for i in 0..self.positions {
            let prevs: Vec<Option<usize>> = if i == 0 {
                vec![None]
            } else {
                (0..self.tags).map(Some).collect()
            };
            for prev in prevs {
                for t in 0..self.tags {
                    out.conditional_mut(i, prev)[t] = self.potential(transitions, i, prev, t);
                }
            }
        }
        Ok(out)
    }
}

fn previous(i: usize, tags: &[usize]) -> Option<usize> {
    if i == 0 {
        None
    } else {
        Some(tags[i - 1])
    }
}

pub fn sentence_score(
    lattice: &TagLattice,
    tags: &[usize],
    transitions: Option<&TransitionMatrix>,
) -> Result<f64> {
    lattice.check(transitions)?;
    if tags.len() != lattice.len() {
        return Err(Error::Shape(format!(
            "tag sequence has length {}, lattice has {}",
            tags.len(),
            lattice.len()
        )));
    }
    if let Some(&bad) = tags.iter().find(|&&t| t >= lattice.tags()) {
        return Err(Error::OutOfRange {
            what: "tag set",
            index: bad,
            size: lattice.tags(),
        });
    }
    let mut score = 0.0;
    for i in 0..tags.len() {
        score = lattice.extend(transitions, score, i, previous(i, tags), tags[i]);
    }
    Ok(score)
}

/// Highest-scoring tag path and its score.
///
/// Among equally scored paths the one with the lowest tag at the latest
/// position where they differ wins.
pub fn viterbi(lattice: &TagLattice, transitions: Option<&TransitionMatrix>) -> Result<(Vec<usize>, f64)> {
    lattice.check(transitions)?;
    if lattice.is_empty() {
        return Err(Error::Shape("cannot decode an empty lattice".into()));
    }
    let (n, k) = (lattice.len(), lattice.tags());
    let mut delta: Vec<f64> = (0..k).map(|t| lattice.extend(transitions, 0.0, 0, None, t)).collect();
    let mut back = vec![0usize; n * k];
    let mut next = vec![0.0; k];
    for i in 1..n {
        for t in 0..k {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0;
            for (p, &d) in delta.iter().enumerate() {
                let s = lattice.extend(transitions, d, i, Some(p), t);
                if s > best {
                    best = s;
                    arg = p;
                }
            }
            next[t] = best;
            back[i * k + t] = arg;
        }
        std::mem::swap(&mut delta, &mut next);
    }
    let mut last = 0;
    for t in 1..k {
        if delta[t] > delta[last] {
            last = t;
        }
    }
    let best = delta[last];
    let mut path = vec![0; n];
    path[n - 1] = last;
    for i in (1..n).rev() {
        path[i - 1] = back[i * k + path[i]];
    }
    Ok((path, best))
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Forward log-scores `α[i][t]`, flattened `n × k`.
fn forward_scores(lattice: &TagLattice, transitions: Option<&TransitionMatrix>) -> Vec<f64> {
    let (n, k) = (lattice.len(), lattice.tags());
    let mut alpha = vec![0.0; n * k];
    for t in 0..k {
        alpha[t] = lattice.potential(transitions, 0, None, t);
    }
    for i in 1..n {
        for t in 0..k {
            let prev = &alpha[(i - 1) * k..i * k];
            alpha[i * k + t] = log_sum_exp(
                prev.iter()
                    .enumerate()
                    .map(|(p, &a)| a + lattice.potential(transitions, i, Some(p), t)),
            );
        }
    }
    alpha
}

/// Backward log-scores `β[i][t]`, flattened `n × k`.
fn backward_scores(lattice: &TagLattice, transitions: Option<&TransitionMatrix>) -> Vec<f64> {
    let (n, k) = (lattice.len(), lattice.tags());
    let mut beta = vec![0.0; n * k];
    for i in (0..n - 1).rev() {
        for p in 0..k {
            let next = &beta[(i + 1) * k..(i + 2) * k];
            beta[i * k + p] = log_sum_exp(
                next.iter()
                    .enumerate()
                    .map(|(t, &b)| b + lattice.potential(transitions, i + 1, Some(p), t)),
            );
        }
    }
    beta
}

/// `log Σ_Y exp s(X, Y)` by the forward algorithm in log space.
pub fn log_partition(lattice: &TagLattice, transitions: Option<&TransitionMatrix>) -> Result<f64> {
    lattice.check(transitions)?;
    if lattice.is_empty() {
        return Err(Error::Shape("empty lattice".into()));
    }
    let (n, k) = (lattice.len(), lattice.tags());
    let alpha = forward_scores(lattice, transitions);
    Ok(log_sum_exp(alpha[(n - 1) * k..].iter().copied()))
}

/// Posterior edge probabilities from forward-backward.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeMarginals {
    tags: usize,
    positions: usize,
    pub log_partition: f64,
    /// `positions × (tags + 1) × tags`; row 0 is the start state and is only
    /// populated at position 0.
    data: Vec<f64>,
}

impl EdgeMarginals {
    pub fn edge(&self, position: usize, prev: Option<usize>, tag: usize) -> f64 {
        let row = prev.map_or(0, |p| p + 1);
        self.data[(position * (self.tags + 1) + row) * self.tags + tag]
    }

    /// `P(y_i = tag)`.
    pub fn unary(&self, position: usize, tag: usize) -> f64 {
        if position == 0 {
            self.edge(0, None, tag)
        } else {
            (0..self.tags).map(|p| self.edge(position, Some(p), tag)).sum()
        }
    }

    pub fn len(&self) -> usize {
        self.positions
    }

    pub fn is_empty(&self) -> bool {
        self.positions == 0
    }
}

pub fn edge_marginals(lattice: &TagLattice, transitions: Option<&TransitionMatrix>) -> Result<EdgeMarginals> {
    lattice.check(transitions)?;
    if lattice.is_empty() {
        return Err(Error::Shape("empty lattice".into()));
    }
    let (n, k) = (lattice.len(), lattice.tags());
    let alpha = forward_scores(lattice, transitions);
    let beta = backward_scores(lattice, transitions);
    let log_z = log_sum_exp(alpha[(n - 1) * k..].iter().copied());
    let mut data = vec![0.0; n * (k + 1) * k];
    for t in 0..k {
        data[t] = (alpha[t] + beta[t] - log_z).exp();
    }
    for i in 1..n {
        for p in 0..k {
            for t in 0..k {
                let s = alpha[(i - 1) * k + p] + lattice.potential(transitions, i, Some(p), t) + beta[i * k + t];
                data[(i * (k + 1) + p + 1) * k + t] = (s - log_z).exp();
            }
        }
    }
    Ok(EdgeMarginals {
        tags: k,
        positions: n,
        log_partition: log_z,
        data,
    })
}

/// Negative log-likelihood of `gold` and its gradients.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeGradient {
    pub loss: f64,
    /// Same shape as the lattice.
    pub lattice: TagLattice,
    /// Present for independent lattices.
    pub transitions: Option<TransitionMatrix>,
}

/// `log Z − s(X, gold)` with gradients w.r.t. every lattice entry and
/// transition score (marginal probability minus gold indicator).
pub fn lattice_nll(
    lattice: &TagLattice,
    transitions: Option<&TransitionMatrix>,
    gold: &[usize],
) -> Result<LatticeGradient> {
    let gold_score = sentence_score(lattice, gold, transitions)?;
    let m = edge_marginals(lattice, transitions)?;
    let (n, k) = (lattice.len(), lattice.tags());
    let loss = (m.log_partition - gold_score).max(0.0);
    match lattice.kind() {
        LatticeKind::Independent => {
            let mut d_emit = TagLattice::independent(k, vec![vec![0.0; k]; n])?;
            let mut d_trans = TransitionMatrix::zeros(k);
            for i in 0..n {
                let row = d_emit.emissions_mut(i);
                for (t, slot) in row.iter_mut().enumerate() {
                    *slot = m.unary(i, t);
                }
                row[gold[i]] -= 1.0;
            }
            for t in 0..k {
                d_trans.data[t] = m.edge(0, None, t);
            }
            for i in 1..n {
                for p in 0..k {
                    for t in 0..k {
                        d_trans.data[(p + 1) * k + t] += m.edge(i, Some(p), t);
                    }
                }
            }
            d_trans.data[gold[0]] -= 1.0;
            for i in 1..n {
                d_trans.data[(gold[i - 1] + 1) * k + gold[i]] -= 1.0;
            }
            Ok(LatticeGradient {
                loss,
                lattice: d_emit,
                transitions: Some(d_trans),
            })
        }
        LatticeKind::Conditional => {
            let mut d = TagLattice::conditional_zeros(k, n);
            for t in 0..k {
                d.conditional_mut(0, None)[t] = m.edge(0, None, t);
            }
            for i in 1..n {
                for p in 0..k {
                    for t in 0..k {
                        d.conditional_mut(i, Some(p))[t] = m.edge(i, Some(p), t);
                    }
                }
            }
            for i in 0..n {
                d.conditional_mut(i, previous(i, gold))[gold[i]] -= 1.0;
            }
            Ok(LatticeGradient {
                loss,
                lattice: d,
                transitions: None,
            })
        }
    }
}

/// Whether the IOB2 scheme allows `tag` after `prev` (`None` = sentence start).
pub fn iob_allows(tags: &TagSet, prev: Option<usize>, tag: usize) -> bool {
    let Some(Ok(TagKind::Inside(ty))) = tags.name(tag).map(parse_tag) else {
        return true;
    };
    match prev.and_then(|p| tags.name(p)).map(parse_tag) {
        Some(Ok(TagKind::Begin(pt) | TagKind::Inside(pt))) => pt == ty,
        _ => false,
    }
}

/// Conditional copy of `lattice` in which edges violating IOB2 score
/// [`FORBIDDEN`].
pub fn constrain_iob(
    lattice: &TagLattice,
    transitions: Option<&TransitionMatrix>,
    tags: &TagSet,
) -> Result<TagLattice> {
    let mut out = lattice.to_conditional(transitions)?;
    for i in 0..out.len() {
        let prevs: Vec<Option<usize>> = if i == 0 {
            vec![None]
        } else {
            (0..out.tags()).map(Some).collect()
        };
        for prev in prevs {
            for t in 0..out.tags() {
                if !iob_allows(tags, prev, t) {
                    out.conditional_mut(i, prev)[t] = FORBIDDEN;
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_independent(n: usize, k: usize, rng: &mut ChaCha8Rng) -> (TagLattice, TransitionMatrix) {
        let rows = (0..n)
            .map(|_| (0..k).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let trans = TransitionMatrix::from_raw(k, (0..(k + 1) * k).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        (TagLattice::independent(k, rows).unwrap(), trans)
    }

    fn all_paths(n: usize, k: usize) -> Vec<Vec<usize>> {
        let mut paths = vec![vec![]];
        for _ in 0..n {
            paths = paths
                .into_iter()
                .flat_map(|p| {
                    (0..k).map(move |t| {
                        let mut q = p.clone();
                        q.push(t);
                        q
                    })
                })
                .collect();
        }
        paths
    }

    #[test]
    fn single_position_score() {
        let lattice = TagLattice::independent(3, vec![vec![1.0, 2.0, 3.0]]).unwrap();
        let trans = TransitionMatrix::zeros(3);
        assert_eq!(sentence_score(&lattice, &[2], Some(&trans)).unwrap(), 3.0);
    }

    #[test]
    fn zero_emissions_sum_transitions() {
        let mut trans = TransitionMatrix::zeros(2);
        trans.set(None, 1, 0.5);
        trans.set(Some(1), 0, 0.25);
        trans.set(Some(0), 0, 2.0);
        let lattice = TagLattice::independent(2, vec![vec![0.0; 2]; 3]).unwrap();
        assert_eq!(sentence_score(&lattice, &[1, 0, 0], Some(&trans)).unwrap(), 2.75);
    }

    #[test]
    fn score_errors() {
        let lattice = TagLattice::independent(2, vec![vec![0.0; 2]; 3]).unwrap();
        let trans = TransitionMatrix::zeros(2);
        assert!(sentence_score(&lattice, &[0, 1], Some(&trans)).is_err());
        assert!(sentence_score(&lattice, &[0, 1, 0], None).is_err());
        assert!(sentence_score(&lattice, &[0, 2, 0], Some(&trans)).is_err());
    }

    #[test]
    fn score_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (lattice, trans) = random_independent(4, 3, &mut rng);
        for path in all_paths(4, 3) {
            let mut expected = 0.0;
            for i in 0..4 {
                let edge = if i == 0 {
                    trans.initial(path[0])
                } else {
                    trans.get(path[i - 1], path[i])
                };
                expected = (expected + edge) + lattice.emissions(i)[path[i]];
            }
            assert_eq!(sentence_score(&lattice, &path, Some(&trans)).unwrap(), expected);
        }
    }

    #[test]
    fn single_position_viterbi() {
        let lattice = TagLattice::independent(3, vec![vec![0.5, 0.1, 0.2]]).unwrap();
        let mut trans = TransitionMatrix::zeros(3);
        trans.set(None, 2, 0.4);
        assert_eq!(viterbi(&lattice, Some(&trans)).unwrap(), (vec![2], 0.6000000000000001));
    }

    #[test]
    fn strong_self_transition_wins() {
        let lattice = TagLattice::independent(3, vec![vec![1.0; 3]; 5]).unwrap();
        let mut trans = TransitionMatrix::zeros(3);
        trans.set(Some(0), 0, 10.0);
        let (path, _) = viterbi(&lattice, Some(&trans)).unwrap();
        assert_eq!(path, vec![0; 5]);
    }

    #[test]
    fn ties_break_to_lowest_tag() {
        let lattice = TagLattice::independent(3, vec![vec![0.0; 3]; 3]).unwrap();
        let (path, score) = viterbi(&lattice, Some(&TransitionMatrix::zeros(3))).unwrap();
        assert_eq!((path, score), (vec![0, 0, 0], 0.0));
    }

    #[test]
    fn log_partition_of_two_equal_paths() {
        let lattice = TagLattice::independent(2, vec![vec![0.0, 0.0]]).unwrap();
        let z = log_partition(&lattice, Some(&TransitionMatrix::zeros(2))).unwrap();
        assert!((z - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn log_partition_dominated_by_one_path() {
        let mut rows = vec![vec![-1e9; 3]; 4];
        for (i, row) in rows.iter_mut().enumerate() {
            row[i % 3] = 1.5;
        }
        let lattice = TagLattice::independent(3, rows).unwrap();
        let trans = TransitionMatrix::zeros(3);
        let z = log_partition(&lattice, Some(&trans)).unwrap();
        assert!((z - 6.0).abs() < 1e-9);
    }

    #[test]
    fn log_partition_is_stable_for_large_scores() {
        let lattice = TagLattice::independent(2, vec![vec![1e3, -1e3]; 6]).unwrap();
        let z = log_partition(&lattice, Some(&TransitionMatrix::zeros(2))).unwrap();
        assert!(z.is_finite());
        assert!((z - 6e3).abs() < 1e-9);
    }

    #[test]
    fn marginals_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (lattice, trans) = random_independent(5, 4, &mut rng);
        let m = edge_marginals(&lattice, Some(&trans)).unwrap();
        for i in 0..5 {
            let total: f64 = (0..4).map(|t| m.unary(i, t)).sum();
            assert!((total - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn emission_gradient_matches_enumerated_marginals() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (lattice, trans) = random_independent(4, 3, &mut rng);
        let gold = [0, 2, 1, 1];
        let g = lattice_nll(&lattice, Some(&trans), &gold).unwrap();
        let paths = all_paths(4, 3);
        let scores: Vec<f64> = paths
            .iter()
            .map(|p| sentence_score(&lattice, p, Some(&trans)).unwrap())
            .collect();
        let z: f64 = scores.iter().map(|s| s.exp()).sum();
        for i in 0..4 {
            for t in 0..3 {
                let marginal: f64 = paths
                    .iter()
                    .zip(&scores)
                    .filter(|(p, _)| p[i] == t)
                    .map(|(_, s)| s.exp() / z)
                    .sum();
                let expected = marginal - f64::from(u8::from(gold[i] == t));
                let got = g.lattice.emissions(i)[t];
                assert!((got - expected).abs() < 1e-10);
                assert!((-1.0..=1.0).contains(&got));
            }
        }
        assert!(g.loss >= 0.0);
    }

    #[test]
    fn iob_constraints() {
        let tags = TagSet::new(["B-LOC", "I-LOC", "B-PER", "I-PER"]).unwrap();
        let id = |t: &str| tags.id(t).unwrap();
        assert!(!iob_allows(&tags, None, id("I-LOC")));
        assert!(iob_allows(&tags, Some(id("B-LOC")), id("I-LOC")));
        assert!(iob_allows(&tags, Some(id("I-LOC")), id("I-LOC")));
        assert!(!iob_allows(&tags, Some(id("B-PER")), id("I-LOC")));
        assert!(!iob_allows(&tags, Some(id("O")), id("I-PER")));
        assert!(iob_allows(&tags, Some(id("O")), id("B-PER")));

        // Emissions strongly favour an invalid O → I-LOC path.
        let k = tags.len();
        let mut rows = vec![vec![0.0; k]; 2];
        rows[0][id("O")] = 5.0;
        rows[1][id("I-LOC")] = 5.0;
        let lattice = TagLattice::independent(k, rows).unwrap();
        let trans = TransitionMatrix::zeros(k);
        let (free, _) = viterbi(&lattice, Some(&trans)).unwrap();
        assert_eq!(free, vec![id("O"), id("I-LOC")]);
        let constrained = constrain_iob(&lattice, Some(&trans), &tags).unwrap();
        let (path, _) = viterbi(&constrained, None).unwrap();
        let names: Vec<&str> = path.iter().map(|&t| tags.name(t).unwrap()).collect();
        assert!(crate::corpus::validate_iob(&names).is_ok());
    }
}
