use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mclner::corpus::{
    iob1_to_iob2, parse_corpus, split_sizes, validate_iob, write_corpus, Lexicon, MorphBits, Schema, Sentence, Token,
};
use mclner::decoder::{edge_marginals, log_partition, sentence_score, viterbi, TagLattice, TransitionMatrix};
use mclner::embeddings::{load_pretrained_str, word2vec_string, EmbeddingTable};
use mclner::evaluator::{extract_chunks, spans_to_iob2};
use mclner::features::{extract_features, SENTENCE_START};
use mclner::network::FactorizedTensorLayer;

const TYPES: [&str; 3] = ["LOC", "ORG", "PER"];

fn tag_strategy() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("O".to_string()),
        (0..3usize).prop_map(|t| format!("B-{}", TYPES[t])),
        (0..3usize).prop_map(|t| format!("I-{}", TYPES[t])),
    ]
}

/// Arbitrary tag sequences made IOB2-valid by turning stray I- into B-.
fn iob2_strategy() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(tag_strategy(), 1..12).prop_map(|tags| {
        let mut out: Vec<String> = Vec::with_capacity(tags.len());
        for t in tags {
            let fixed = match t.strip_prefix("I-") {
                Some(ty) if !out.last().is_some_and(|p| p.len() > 2 && &p[2..] == ty) => format!("B-{ty}"),
                _ => t,
            };
            out.push(fixed);
        }
        out
    })
}

fn word() -> impl Strategy<Value = String> {
    "[A-Za-zәіңғүұқөһ]{1,8}"
}

fn sentence_strategy() -> impl Strategy<Value = Sentence> {
    iob2_strategy().prop_flat_map(|tags| {
        let n = tags.len();
        (
            prop::collection::vec((word(), word(), any::<[bool; 6]>()), n),
            Just(tags),
        )
            .prop_map(|(words, tags)| {
                Sentence::new(
                    words
                        .into_iter()
                        .zip(tags)
                        .map(|((s, r, m), t)| Token::new(s).with_root(r).with_morph(MorphBits(m)).with_tag(t))
                        .collect(),
                )
            })
    })
}

fn lattice_strategy() -> impl Strategy<Value = (TagLattice, Option<TransitionMatrix>)> {
    (1..6usize, 1..5usize, any::<bool>(), any::<u64>()).prop_map(|(n, k, conditional, seed)| {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if conditional {
            let mut lattice = TagLattice::conditional_zeros(k, n);
            for i in 0..n {
                for prev in std::iter::once(None).chain((0..k).map(Some)) {
                    for v in lattice.conditional_mut(i, prev) {
                        *v = rng.gen_range(-4.0..4.0);
                    }
                }
            }
            (lattice, None)
        } else {
            let rows = (0..n).map(|_| (0..k).map(|_| rng.gen_range(-4.0..4.0)).collect()).collect();
            let data = (0..(k + 1) * k).map(|_| rng.gen_range(-2.0..2.0)).collect();
            (
                TagLattice::independent(k, rows).unwrap(),
                Some(TransitionMatrix::from_raw(k, data).unwrap()),
            )
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn corpus_write_parse_round_trip(sentences in prop::collection::vec(sentence_strategy(), 0..5)) {
        let schema = Schema::default();
        let mut buf = Vec::new();
        write_corpus(&mut buf, &sentences, &schema).unwrap();
        let parsed = parse_corpus(std::str::from_utf8(&buf).unwrap(), &schema).unwrap();
        prop_assert_eq!(parsed, sentences);
    }

    #[test]
    fn iob1_conversion_yields_valid_iob2(tags in prop::collection::vec(tag_strategy(), 0..15)) {
        let converted = iob1_to_iob2(&tags).unwrap();
        prop_assert!(validate_iob(&converted).is_ok());
        prop_assert_eq!(converted.len(), tags.len());
    }

    #[test]
    fn chunks_round_trip_through_iob2(tags in iob2_strategy()) {
        let spans = extract_chunks(&tags).unwrap();
        prop_assert_eq!(spans_to_iob2(&spans, tags.len()), tags);
    }

    #[test]
    fn viterbi_is_bounded_by_log_partition((lattice, transitions) in lattice_strategy()) {
        let (path, best) = viterbi(&lattice, transitions.as_ref()).unwrap();
        let logz = log_partition(&lattice, transitions.as_ref()).unwrap();
        prop_assert!(best <= logz + 1e-12);
        prop_assert_eq!(sentence_score(&lattice, &path, transitions.as_ref()).unwrap(), best);
    }

    #[test]
    fn emission_shift_moves_scores_not_paths((lattice, transitions) in lattice_strategy(), c in -3.0..3.0f64) {
        prop_assume!(transitions.is_some());
        let (path, best) = viterbi(&lattice, transitions.as_ref()).unwrap();
        let logz = log_partition(&lattice, transitions.as_ref()).unwrap();
        let mut shifted = lattice.clone();
        for i in 0..shifted.len() {
            for v in shifted.emissions_mut(i) {
                *v += c;
            }
        }
        let n = lattice.len() as f64;
        let (spath, sbest) = viterbi(&shifted, transitions.as_ref()).unwrap();
        prop_assert_eq!(spath, path);
        prop_assert!((sbest - best - n * c).abs() < 1e-9);
        let slogz = log_partition(&shifted, transitions.as_ref()).unwrap();
        prop_assert!((slogz - logz - n * c).abs() < 1e-9);
    }

    #[test]
    fn unary_marginals_are_distributions((lattice, transitions) in lattice_strategy()) {
        let m = edge_marginals(&lattice, transitions.as_ref()).unwrap();
        for i in 0..lattice.len() {
            let total: f64 = (0..lattice.tags()).map(|t| m.unary(i, t)).sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
            for t in 0..lattice.tags() {
                prop_assert!(m.unary(i, t) >= 0.0);
            }
        }
    }

    #[test]
    fn factorized_layer_matches_dense_slices(h1 in 1..8usize, h2 in 1..5usize, r in 1..4usize, seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layer = FactorizedTensorLayer::random(h1, h2, r, &mut rng);
        let e: Vec<f64> = (0..h1).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let fast = layer.forward(&e).unwrap();
        let mut dense = Vec::new();
        for i in 0..h2 {
            let mut z = layer.linear.bias[i];
            for a in 0..h1 {
                z += layer.linear.weights[i * h1 + a] * e[a];
                for b in 0..h1 {
                    let t: f64 = (0..r).map(|k| layer.slice_p(i)[a * r + k] * layer.slice_q(i)[k * h1 + b]).sum();
                    z += e[a] * t * e[b];
                }
            }
            dense.push(z.tanh());
        }
        let scale = dense.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        for (a, b) in fast.iter().zip(&dense) {
            prop_assert!((a - b).abs() / scale < 1e-12);
        }
    }

    #[test]
    fn split_sizes_are_exhaustive(n in 3..5000usize, a in 1..10u32, b in 1..10u32, c in 1..10u32) {
        let total = f64::from(a + b + c);
        let ratios = [f64::from(a) / total, f64::from(b) / total, f64::from(c) / total];
        let sizes = split_sizes(n, ratios);
        prop_assert_eq!(sizes.iter().sum::<usize>(), n);
        for (s, r) in sizes.iter().zip(ratios) {
            prop_assert!((*s as f64 - r * n as f64).abs() < 1.0 + 1e-9);
        }
    }

    #[test]
    fn features_are_bits(sentence in sentence_strategy()) {
        for i in 0..sentence.len() {
            let f = extract_features(&sentence, i).unwrap();
            prop_assert!(f.bits().iter().all(|&b| b <= 1));
            prop_assert_eq!(f.bits()[SENTENCE_START] == 1, i == 0);
        }
    }

    #[test]
    fn word2vec_text_round_trips(values in prop::collection::vec(-1e6..1e6f64, 12)) {
        let lexicon = Lexicon::from_symbols(["a", "b", "c"]);
        let mut columns: Vec<Vec<f64>> = vec![vec![0.0; 2]; 3];
        columns.extend(values.chunks(4).map(|c| c[..2].to_vec()));
        let table = EmbeddingTable::from_columns(2, &columns).unwrap();
        let text = word2vec_string(&table, &lexicon);
        let mut loaded = EmbeddingTable::zeros(2, lexicon.len());
        let coverage = load_pretrained_str(&text, &mut loaded, &lexicon, false).unwrap();
        prop_assert_eq!(coverage.found, 3);
        for id in 3..6 {
            let a: Vec<u64> = table.lookup(id).unwrap().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u64> = loaded.lookup(id).unwrap().iter().map(|v| v.to_bits()).collect();
            prop_assert_eq!(a, b);
        }
    }
}
