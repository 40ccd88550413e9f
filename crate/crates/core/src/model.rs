//! A complete tagger: vocabulary, lookup tables, scoring network and (for
//! the transition-matrix variant) the tag transition scores.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{Sentence, Vocabulary};
use crate::decoder::{constrain_iob, lattice_nll, viterbi, TagLattice, TransitionMatrix};
use crate::embeddings::{
    encode_sentence, fill_input, route_input_gradient, swap_prev_tag, EmbeddingGrads, Embeddings,
    WindowConfig, WindowSlots,
};
use crate::error::{Error, Result};
use crate::network::{Network, NetworkConfig, Trace};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ModelConfig {
    pub window: WindowConfig,
    pub network: NetworkConfig,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.window.validate()?;
        self.network.validate()
    }

    /// With tag embeddings the network scores each tag given the previous
    /// one; otherwise a transition matrix supplies tag dependencies.
    pub fn uses_transitions(&self) -> bool {
        !self.window.use_tag_embedding
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub vocab: Vocabulary,
    pub tables: Embeddings,
    pub network: Network,
    pub transitions: Option<TransitionMatrix>,
}

/// Gradient accumulator shaped like a [`Model`].
#[derive(Clone, Debug, PartialEq)]
pub struct ModelGrads {
    pub embeddings: EmbeddingGrads,
    pub network: Network,
    pub transitions: Option<TransitionMatrix>,
}

impl ModelGrads {
    pub fn clear(&mut self) {
        self.embeddings.clear();
        for (_, g) in self.network.params_mut() {
            g.fill(0.0);
        }
        if let Some(t) = &mut self.transitions {
            t.as_mut_slice().fill(0.0);
        }
    }
}

impl Model {
    /// Randomly initialized model; all randomness comes from `seed`.
    pub fn new(config: ModelConfig, vocab: Vocabulary, seed: u64) -> Result<Self> {
        config.validate()?;
        if vocab.tags.is_empty() {
            return Err(Error::Config("tag set is empty".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tables = Embeddings::random(&config.window, &vocab, &mut rng);
        let network = Network::random(&config.network, config.window.input_len(), vocab.tags.len(), &mut rng)?;
        let transitions = config
            .uses_transitions()
            .then(|| TransitionMatrix::zeros(vocab.tags.len()));
        Ok(Model {
            config,
            vocab,
            tables,
            network,
            transitions,
        })
    }

    /// Verifies that tables, network and transitions agree with the config
    /// and vocabulary.
    pub fn check(&self) -> Result<()> {
        self.config.validate()?;
        self.tables.check(&self.config.window, &self.vocab)?;
        self.network.check()?;
        if self.network.input_len() != self.config.window.input_len() {
            return Err(Error::Shape(format!(
                "network takes {} inputs, window produces {}",
                self.network.input_len(),
                self.config.window.input_len()
            )));
        }
        let tags = self.vocab.tags.len();
        if self.network.output_len() != tags {
            return Err(Error::Shape(format!(
                "network scores {} tags, tag set has {tags}",
                self.network.output_len()
            )));
        }
        match (&self.transitions, self.config.uses_transitions()) {
            (Some(t), true) if t.tags() == tags => Ok(()),
            (None, false) => Ok(()),
            _ => Err(Error::Shape("transition matrix does not match the model variant".into())),
        }
    }

    /// Every parameter tensor under a stable name: lookup tables, network
    /// parameters, then transitions.
    pub fn tensors(&self) -> Vec<(&'static str, &[f64])> {
        let mut out: Vec<(&'static str, &[f64])> = vec![("words", self.tables.words.as_slice())];
        if let Some(t) = &self.tables.roots {
            out.push(("roots", t.as_slice()));
        }
        if let Some(t) = &self.tables.tags {
            out.push(("tags", t.as_slice()));
        }
        out.extend(self.network.params());
        if let Some(t) = &self.transitions {
            out.push(("transitions", t.as_slice()));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        let mut out: Vec<(&'static str, &mut [f64])> = vec![("words", self.tables.words.as_mut_slice())];
        if let Some(t) = &mut self.tables.roots {
            out.push(("roots", t.as_mut_slice()));
        }
        if let Some(t) = &mut self.tables.tags {
            out.push(("tags", t.as_mut_slice()));
        }
        out.extend(self.network.params_mut());
        if let Some(t) = &mut self.transitions {
            out.push(("transitions", t.as_mut_slice()));
        }
        out
    }

    pub fn grads(&self) -> ModelGrads {
        ModelGrads {
            embeddings: EmbeddingGrads::new(&self.config.window),
            network: self.network.zeros_like(),
            transitions: self.transitions.as_ref().map(|t| TransitionMatrix::zeros(t.tags())),
        }
    }

    pub fn encode(&self, sentence: &Sentence) -> Result<Vec<WindowSlots>> {
        encode_sentence(sentence, &self.vocab, &self.config.window)
    }

    /// Network scores for every position (and, with tag embeddings, every
    /// previous tag) of a sentence.
    pub fn lattice(&self, sentence: &Sentence) -> Result<TagLattice> {
        if sentence.is_empty() {
            return Err(Error::Shape("empty sentence".into()));
        }
        let slots = self.encode(sentence)?;
        let window = &self.config.window;
        let tags = self.vocab.tags.len();
        let mut input = Vec::with_capacity(window.input_len());
        if self.config.uses_transitions() {
            let mut rows = Vec::with_capacity(slots.len());
            for s in &slots {
                fill_input(s, 0, &self.tables, window, &mut input)?;
                rows.push(self.network.forward(&input)?);
            }
            TagLattice::independent(tags, rows)
        } else {
            let start = self.vocab.tags.start_id();
            let mut lattice = TagLattice::conditional_zeros(tags, slots.len());
            for (i, s) in slots.iter().enumerate() {
                fill_input(s, start, &self.tables, window, &mut input)?;
                if i == 0 {
                    let scores = self.network.forward(&input)?;
                    lattice.conditional_mut(0, None).copy_from_slice(&scores);
                    continue;
                }
                for prev in 0..tags {
                    swap_prev_tag(&mut input, prev, &self.tables, window)?;
                    let scores = self.network.forward(&input)?;
                    lattice.conditional_mut(i, Some(prev)).copy_from_slice(&scores);
                }
            }
            Ok(lattice)
        }
    }

    /// Best tag ids by Viterbi. With `constrain`, IOB2-invalid transitions
    /// are excluded.
    pub fn decode(&self, sentence: &Sentence, constrain: bool) -> Result<Vec<usize>> {
        let lattice = self.lattice(sentence)?;
        let (path, _) = if constrain {
            let c = constrain_iob(&lattice, self.transitions.as_ref(), &self.vocab.tags)?;
            viterbi(&c, None)?
        } else {
            viterbi(&lattice, self.transitions.as_ref())?
        };
        Ok(path)
    }

    pub fn tag(&self, sentence: &Sentence) -> Result<Vec<String>> {
        Ok(self
            .decode(sentence, false)?
            .into_iter()
            .map(|t| self.vocab.tags.name(t).unwrap().to_string())
            .collect())
    }

    /// Training loss of one sentence: sentence-level NLL for the transition
    /// variant, teacher-forced per-position NLL for the tag-embedding variant.
    pub fn sentence_loss(&self, sentence: &Sentence) -> Result<f64> {
        self.loss_impl(sentence, None)
    }

    /// Loss of one sentence against its gold tags, with gradients added to
    /// `grads`.
    pub fn sentence_nll_and_gradient(&self, sentence: &Sentence, grads: &mut ModelGrads) -> Result<f64> {
        self.loss_impl(sentence, Some(grads))
    }

    fn loss_impl(&self, sentence: &Sentence, mut grads: Option<&mut ModelGrads>) -> Result<f64> {
        if sentence.is_empty() {
            return Err(Error::Shape("empty sentence".into()));
        }
        let gold = self.vocab.gold_ids(sentence)?;
        let slots = self.encode(sentence)?;
        let window = &self.config.window;
        let tags = self.vocab.tags.len();
        let mut input = Vec::with_capacity(window.input_len());

        if self.config.uses_transitions() {
            let mut traces = vec![Trace::default(); slots.len()];
            let mut rows = Vec::with_capacity(slots.len());
            for (s, trace) in slots.iter().zip(traces.iter_mut()) {
                fill_input(s, 0, &self.tables, window, &mut input)?;
                self.network.forward_traced(&input, trace)?;
                rows.push(trace.scores().to_vec());
            }
            let lattice = TagLattice::independent(tags, rows)?;
            let g = lattice_nll(&lattice, self.transitions.as_ref(), &gold)?;
            if let Some(grads) = grads {
                for (i, (s, trace)) in slots.iter().zip(&traces).enumerate() {
                    let d_input = self.network.backward(trace, g.lattice.emissions(i), &mut grads.network)?;
                    route_input_gradient(s, 0, &d_input, window, &mut grads.embeddings);
                }
                if let (Some(acc), Some(d)) = (&mut grads.transitions, &g.transitions) {
                    for (a, v) in acc.as_mut_slice().iter_mut().zip(d.as_slice()) {
                        *a += v;
                    }
                }
            }
            Ok(g.loss)
        } else {
            let start = self.vocab.tags.start_id();
            let mut trace = Trace::default();
            let mut loss = 0.0;
            for (i, s) in slots.iter().enumerate() {
                let prev = if i == 0 { start } else { gold[i - 1] };
                fill_input(s, prev, &self.tables, window, &mut input)?;
                self.network.forward_traced(&input, &mut trace)?;
                let scores = trace.scores();
                let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let sum: f64 = scores.iter().map(|v| (v - max).exp()).sum();
                let log_z = max + sum.ln();
                loss += log_z - scores[gold[i]];
                if let Some(grads) = grads.as_deref_mut() {
                    let mut upstream: Vec<f64> = scores.iter().map(|v| (v - log_z).exp()).collect();
                    upstream[gold[i]] -= 1.0;
                    let d_input = self.network.backward(&trace, &upstream, &mut grads.network)?;
                    route_input_gradient(s, prev, &d_input, window, &mut grads.embeddings);
                }
            }
            Ok(loss.max(0.0))
        }
    }
}
