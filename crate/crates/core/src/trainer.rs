//! Per-sentence AdaGrad training with L2 regularization and best-on-dev
//! model selection.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::corpus::{validate_corpus, Sentence};
use crate::embeddings::{EmbeddingTable, SparseColumns};
use crate::error::{Error, Result};
use crate::evaluator::{evaluate, EvalReport};
use crate::model::{Model, ModelGrads};

pub const ADAGRAD_EPSILON: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub l2: f64,
    pub epochs: usize,
    pub seed: u64,
    pub shuffle: bool,
    /// Stop after this many epochs without a dev improvement.
    pub patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            l2: 1e-4,
            epochs: 30,
            seed: 0,
            shuffle: true,
            patience: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !(self.l2 >= 0.0) || self.epochs == 0 {
            return Err(Error::Config(format!(
                "need learning_rate > 0, l2 >= 0 and epochs >= 1, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Squared-gradient accumulators, one per parameter tensor of a model.
#[derive(Clone, Debug, PartialEq)]
pub struct AdaGradState {
    words: Vec<f64>,
    roots: Vec<f64>,
    tags: Vec<f64>,
    network: Vec<Vec<f64>>,
    transitions: Vec<f64>,
}

impl AdaGradState {
    pub fn new(model: &Model) -> Self {
        let size = |t: &Option<EmbeddingTable>| t.as_ref().map_or(0, |t| t.as_slice().len());
        AdaGradState {
            words: vec![0.0; model.tables.words.as_slice().len()],
            roots: vec![0.0; size(&model.tables.roots)],
            tags: vec![0.0; size(&model.tables.tags)],
            network: model.network.params().iter().map(|(_, p)| vec![0.0; p.len()]).collect(),
            transitions: vec![0.0; model.transitions.as_ref().map_or(0, |t| t.as_slice().len())],
        }
    }

    /// All accumulator values, in a fixed order.
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.words
            .iter()
            .chain(&self.roots)
            .chain(&self.tags)
            .chain(self.network.iter().flatten())
            .chain(&self.transitions)
            .copied()
    }
}

/// One AdaGrad update of `params`: `g = grad + l2·param`, `acc += g²`,
/// `param -= lr · g / (√acc + ε)`.
pub fn adagrad_update(params: &mut [f64], grads: &[f64], acc: &mut [f64], learning_rate: f64, l2: f64) {
    for ((p, &g), a) in params.iter_mut().zip(grads).zip(acc.iter_mut()) {
        let g = g + l2 * *p;
        *a += g * g;
        if g != 0.0 {
            *p -= learning_rate * g / (a.sqrt() + ADAGRAD_EPSILON);
        }
    }
}

fn ensure_finite<'a>(name: &str, values: impl IntoIterator<Item = &'a f64>) -> Result<()> {
    if values.into_iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteGradient(name.to_string()))
    }
}

fn update_columns(
    table: &mut EmbeddingTable,
    grads: &SparseColumns,
    acc: &mut [f64],
    config: &TrainConfig,
) {
    let dim = table.dim();
    for (col, g) in grads.iter() {
        let params = table.column_mut(col).expect("gradient column in range");
        adagrad_update(params, g, &mut acc[col * dim..(col + 1) * dim], config.learning_rate, config.l2);
    }
}

/// Applies one AdaGrad step. Lookup tables update only the columns present
/// in `grads`. Non-finite gradients abort the step before any parameter
/// changes.
pub fn adagrad_step(
    model: &mut Model,
    grads: &ModelGrads,
    state: &mut AdaGradState,
    config: &TrainConfig,
) -> Result<()> {
    for (name, cols) in [
        ("words", &grads.embeddings.words),
        ("roots", &grads.embeddings.roots),
        ("tags", &grads.embeddings.tags),
    ] {
        ensure_finite(name, cols.iter().flat_map(|(_, g)| g))?;
    }
    for (name, g) in grads.network.params() {
        ensure_finite(name, g)?;
    }
    if let Some(t) = &grads.transitions {
        ensure_finite("transitions", t.as_slice())?;
    }

    update_columns(&mut model.tables.words, &grads.embeddings.words, &mut state.words, config);
    if let Some(roots) = &mut model.tables.roots {
        update_columns(roots, &grads.embeddings.roots, &mut state.roots, config);
    }
    if let Some(tags) = &mut model.tables.tags {
        update_columns(tags, &grads.embeddings.tags, &mut state.tags, config);
    }
    for (((_, p), (_, g)), acc) in model
        .network
        .params_mut()
        .into_iter()
        .zip(grads.network.params())
        .zip(state.network.iter_mut())
    {
        adagrad_update(p, g, acc, config.learning_rate, config.l2);
    }
    if let (Some(p), Some(g)) = (&mut model.transitions, &grads.transitions) {
        adagrad_update(p.as_mut_slice(), g.as_slice(), &mut state.transitions, config.learning_rate, config.l2);
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training loss per sentence.
    pub train_loss: f64,
    pub dev_precision: f64,
    pub dev_recall: f64,
    pub dev_f1: f64,
    pub dev_accuracy: f64,
}

impl EpochRecord {
    pub const HEADER: &'static str = "epoch\tloss\tdev_p\tdev_r\tdev_f1\tdev_acc";

    pub fn to_row(&self) -> String {
        format!(
            "{}\t{:.6}\t{:.2}\t{:.2}\t{:.2}\t{:.2}",
            self.epoch, self.train_loss, self.dev_precision, self.dev_recall, self.dev_f1, self.dev_accuracy
        )
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the best dev F1.
    pub model: Model,
    /// The parameters after the last epoch that ran.
    pub last: Model,
    pub best_epoch: usize,
    pub best_dev_f1: f64,
    pub log: Vec<EpochRecord>,
}

/// Tags every sentence with a frozen model, in parallel.
pub fn tag_corpus(model: &Model, sentences: &[Sentence]) -> Result<Vec<Vec<String>>> {
    sentences.par_iter().map(|s| model.tag(s)).collect()
}

pub fn evaluate_model(model: &Model, sentences: &[Sentence]) -> Result<EvalReport> {
    let predicted = tag_corpus(model, sentences)?;
    evaluate(sentences, &predicted)
}

/// Trains `model` on `train`, scoring `dev` after every epoch, and returns
/// the snapshot with the highest dev F1 (earliest on ties). `on_epoch` sees
/// each log row as soon as it is available.
pub fn train(
    train: &[Sentence],
    dev: &[Sentence],
    mut model: Model,
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    config.validate()?;
    model.check()?;
    if train.is_empty() || dev.is_empty() {
        return Err(Error::Config("train and dev splits must be non-empty".into()));
    }
    validate_corpus(train)?;
    validate_corpus(dev)?;
    for s in train.iter().chain(dev) {
        model.vocab.gold_ids(s)?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut state = AdaGradState::new(&model);
    let mut grads = model.grads();
    let mut best: Option<(Model, usize, f64)> = None;
    let mut log = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        let mut total = 0.0;
        for &i in &order {
            grads.clear();
            total += model.sentence_nll_and_gradient(&train[i], &mut grads)?;
            adagrad_step(&mut model, &grads, &mut state, config)?;
        }
        let report = evaluate_model(&model, dev)?;
        let record = EpochRecord {
            epoch,
            train_loss: total / train.len() as f64,
            dev_precision: report.overall.precision(),
            dev_recall: report.overall.recall(),
            dev_f1: report.f1(),
            dev_accuracy: report.accuracy(),
        };
        on_epoch(&record);
        log.push(record);
        if best.as_ref().is_none_or(|(_, _, f1)| record.dev_f1 > *f1) {
            best = Some((model.clone(), epoch, record.dev_f1));
        }
        if let (Some(patience), Some((_, best_epoch, _))) = (config.patience, &best) {
            if epoch - best_epoch >= patience {
                break;
            }
        }
    }
    let (best_model, best_epoch, best_dev_f1) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        model: best_model,
        last: model,
        best_epoch,
        best_dev_f1,
        log,
    })
}
