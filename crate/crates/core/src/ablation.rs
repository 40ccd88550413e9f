//! Ablation grids: several model variants trained on the same synthetic
//! splits, scored per entity type and averaged over seeds.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::corpus::build_vocabulary;
use crate::embeddings::WindowConfig;
use crate::error::{Error, Result};
use crate::evaluator::{EvalReport, STANDARD_TYPES};
use crate::model::{Model, ModelConfig};
use crate::network::{Architecture, NetworkConfig};
use crate::synth::{generate, SynthConfig};
use crate::trainer::{evaluate_model, train, TrainConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    Nn,
    NnRoot,
    NnRootTag,
    NnRootTensor,
    NnRootTagTensorFeat,
}

impl Variant {
    /// The four rows of the standard grid.
    pub const STANDARD: [Variant; 4] = [Variant::Nn, Variant::NnRoot, Variant::NnRootTag, Variant::NnRootTensor];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Nn => "NN",
            Variant::NnRoot => "NN+root",
            Variant::NnRootTag => "NN+root+tag",
            Variant::NnRootTensor => "NN+root+tensor",
            Variant::NnRootTagTensorFeat => "NN+root+tag+tensor+feat",
        }
    }

    /// Applies this variant's switches to `base`, keeping its sizes.
    pub fn configure(self, base: &ModelConfig) -> ModelConfig {
        let (arch, root, tag, feat) = match self {
            Variant::Nn => (Architecture::Plain, false, false, false),
            Variant::NnRoot => (Architecture::Plain, true, false, false),
            Variant::NnRootTag => (Architecture::Plain, true, true, false),
            Variant::NnRootTensor => (Architecture::Tensor, true, false, false),
            Variant::NnRootTagTensorFeat => (Architecture::Tensor, true, true, true),
        };
        ModelConfig {
            window: WindowConfig {
                use_root: root,
                use_tag_embedding: tag,
                use_features: feat,
                ..base.window
            },
            network: NetworkConfig {
                architecture: arch,
                ..base.network
            },
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let all = [
            Variant::Nn,
            Variant::NnRoot,
            Variant::NnRootTag,
            Variant::NnRootTensor,
            Variant::NnRootTagTensorFeat,
        ];
        all.into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown variant {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationSpec {
    pub synth: SynthConfig,
    pub variants: Vec<Variant>,
    /// Each seed drives both corpus generation and model initialization.
    pub seeds: Vec<u64>,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub lowercase_words: bool,
}

impl Default for AblationSpec {
    fn default() -> Self {
        AblationSpec {
            synth: SynthConfig::default(),
            variants: Variant::STANDARD.to_vec(),
            seeds: vec![0],
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            lowercase_words: true,
        }
    }
}

/// F1 for LOC, ORG, PER and overall.
pub type Scores = [f64; 4];

fn scores(report: &EvalReport) -> Scores {
    let mut s = [0.0; 4];
    for (slot, kind) in s.iter_mut().zip(STANDARD_TYPES) {
        *slot = report.counts(kind).f1();
    }
    s[3] = report.f1();
    s
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub variant: Variant,
    /// Seed means.
    pub dev: Scores,
    pub test: Scores,
    /// Overall test F1 of each seed, in seed order.
    pub test_overall_per_seed: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationTable {
    pub seeds: Vec<u64>,
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn row(&self, variant: Variant) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.variant == variant)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("variant");
        for split in ["dev", "test"] {
            for col in ["LOC", "ORG", "PER", "Overall"] {
                out.push_str(&format!("\t{split}_{col}"));
            }
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(r.variant.name());
            for v in r.dev.iter().chain(&r.test) {
                out.push_str(&format!("\t{v:.2}"));
            }
            out.push('\n');
        }
        out
    }
}

impl fmt::Display for AblationTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self
            .rows
            .iter()
            .map(|r| r.variant.name().len())
            .max()
            .unwrap_or(0)
            .max(7);
        writeln!(f, "{:width$}  {:^31}  {:^31}", "", "dev", "test")?;
        write!(f, "{:width$}", "variant")?;
        for _ in 0..2 {
            write!(f, "  {:>7}{:>8}{:>8}{:>8}", "LOC", "ORG", "PER", "Overall")?;
        }
        writeln!(f)?;
        for r in &self.rows {
            write!(f, "{:width$}", r.variant.name())?;
            for block in [&r.dev, &r.test] {
                write!(f, "  {:>7.2}{:>8.2}{:>8.2}{:>8.2}", block[0], block[1], block[2], block[3])?;
            }
            writeln!(f)?;
        }
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        write!(f, "mean over seeds {}", seeds.join(","))
    }
}

fn run_one(spec: &AblationSpec, variant: Variant, seed: u64) -> Result<(Scores, Scores)> {
    let corpus = generate(&SynthConfig { seed, ..spec.synth })?;
    let split = corpus.split;
    let vocab = build_vocabulary(&split.train, spec.lowercase_words, 1);
    let model = Model::new(variant.configure(&spec.model), vocab, seed)?;
    let config = TrainConfig { seed, ..spec.train };
    let outcome = train(&split.train, &split.dev, model, &config, |_| {})?;
    let dev = evaluate_model(&outcome.model, &split.dev)?;
    let test = evaluate_model(&outcome.model, &split.test)?;
    log::info!(
        "{} seed {seed}: best epoch {}, dev F1 {:.2}, test F1 {:.2}",
        variant,
        outcome.best_epoch,
        dev.f1(),
        test.f1()
    );
    Ok((scores(&dev), scores(&test)))
}

/// Trains every variant under every seed. Runs are independent and execute
/// in parallel; results do not depend on scheduling.
pub fn run_ablation(spec: &AblationSpec) -> Result<AblationTable> {
    if spec.variants.is_empty() || spec.seeds.is_empty() {
        return Err(Error::Config("an ablation needs at least one variant and one seed".into()));
    }
    spec.synth.validate()?;
    spec.train.validate()?;
    let jobs: Vec<(Variant, u64)> = spec
        .variants
        .iter()
        .flat_map(|&v| spec.seeds.iter().map(move |&s| (v, s)))
        .collect();
    let results: Vec<(Scores, Scores)> = jobs
        .par_iter()
        .map(|&(v, s)| run_one(spec, v, s))
        .collect::<Result<_>>()?;

    let n = spec.seeds.len() as f64;
    let rows = spec
        .variants
        .iter()
        .zip(results.chunks(spec.seeds.len()))
        .map(|(&variant, runs)| {
            let mut dev = [0.0; 4];
            let mut test = [0.0; 4];
            for (d, t) in runs {
                for k in 0..4 {
                    dev[k] += d[k];
                    test[k] += t[k];
                }
            }
            dev.iter_mut().chain(test.iter_mut()).for_each(|v| *v /= n);
            AblationRow {
                variant,
                dev,
                test,
                test_overall_per_seed: runs.iter().map(|(_, t)| t[3]).collect(),
            }
        })
        .collect();
    Ok(AblationTable {
        seeds: spec.seeds.clone(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_spec() -> AblationSpec {
        AblationSpec {
            synth: SynthConfig {
                n_sentences: 40,
                ..SynthConfig::default()
            },
            seeds: vec![1, 2],
            model: ModelConfig {
                window: WindowConfig {
                    word_dim: 5,
                    root_dim: 5,
                    tag_dim: 3,
                    ..WindowConfig::default()
                },
                network: NetworkConfig {
                    hidden_size: 8,
                    tensor_size: 6,
                    factors: 2,
                    ..NetworkConfig::default()
                },
            },
            train: TrainConfig {
                epochs: 2,
                ..TrainConfig::default()
            },
            ..AblationSpec::default()
        }
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::STANDARD.into_iter().chain([Variant::NnRootTagTensorFeat]) {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert!("NN+tensor".parse::<Variant>().is_err());
    }

    #[test]
    fn grid_has_requested_rows_and_is_repeatable() {
        let spec = tiny_spec();
        let table = run_ablation(&spec).unwrap();
        assert_eq!(
            table.rows.iter().map(|r| r.variant).collect::<Vec<_>>(),
            Variant::STANDARD.to_vec()
        );
        for r in &table.rows {
            assert_eq!(r.test_overall_per_seed.len(), 2);
        }
        let tsv = table.to_tsv();
        assert_eq!(tsv.lines().count(), 5);
        assert!(tsv.starts_with("variant\tdev_LOC\tdev_ORG\tdev_PER\tdev_Overall\ttest_LOC"));
        assert_eq!(run_ablation(&spec).unwrap(), table);
    }

    #[test]
    fn configure_sets_switches_only() {
        let base = ModelConfig::default();
        let c = Variant::NnRootTensor.configure(&base);
        assert!(c.window.use_root && !c.window.use_tag_embedding);
        assert_eq!(c.network.architecture, Architecture::Tensor);
        assert_eq!(c.network.hidden_size, base.network.hidden_size);
        assert!(c.uses_transitions());
        assert!(!Variant::NnRootTag.configure(&base).uses_transitions());
    }
}
