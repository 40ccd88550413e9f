//! Binary entity features: the six morphological bits from the corpus plus
//! four word-type bits computed from the surface form.

use crate::corpus::{Sentence, MORPH_BITS};
use crate::error::{Error, Result};

pub const FEATURE_COUNT: usize = 10;

pub const CASE: usize = MORPH_BITS;
pub const SENTENCE_START: usize = MORPH_BITS + 1;
pub const LATIN: usize = MORPH_BITS + 2;
pub const ACRONYM: usize = MORPH_BITS + 3;

/// Bits ordered `[root, pos, infl, deriv, proper, name-suffix, case,
/// sentence-start, latin, acronym]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FeatureVector(pub [u8; FEATURE_COUNT]);

impl FeatureVector {
    pub fn bits(&self) -> &[u8; FEATURE_COUNT] {
        &self.0
    }

    pub fn extend_into(&self, out: &mut Vec<f64>) {
        out.extend(self.0.iter().map(|&b| f64::from(b)));
    }
}

pub fn extract_features(sentence: &Sentence, position: usize) -> Result<FeatureVector> {
    let token = sentence.tokens.get(position).ok_or(Error::OutOfRange {
        what: "sentence",
        index: position,
        size: sentence.len(),
    })?;
    let mut bits = [0u8; FEATURE_COUNT];
    for (slot, &b) in bits.iter_mut().zip(token.morph.0.iter()) {
        *slot = u8::from(b);
    }
    let surface = &token.surface;
    let has_alpha = surface.chars().any(char::is_alphabetic);

    bits[CASE] = u8::from(surface.chars().next().is_some_and(char::is_uppercase));
    bits[SENTENCE_START] = u8::from(position == 0);
    bits[LATIN] = u8::from(
        has_alpha
            && surface
                .chars()
                .filter(|c| c.is_alphabetic())
                .all(|c| c.is_ascii_alphabetic()),
    );
    bits[ACRONYM] = u8::from(
        has_alpha
            && surface.chars().count() >= 2
            && surface.chars().filter(|c| c.is_alphabetic()).all(char::is_uppercase),
    );
    Ok(FeatureVector(bits))
}
