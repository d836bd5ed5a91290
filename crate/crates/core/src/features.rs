//! Token features for the sequence models.
//!
//! Nineteen features per token, in this fixed order (the order also drives
//! feature-count sweeps, which take a prefix of it):
//!
//! | # | name            | value                                           |
//! |---|-----------------|-------------------------------------------------|
//! | 1 | `lower`         | lowercased token                                |
//! | 2 | `prefix1`       | first character                                 |
//! | 3 | `prefix2`       | first two characters                            |
//! | 4 | `prefix3`       | first three characters                          |
//! | 5 | `suffix1`       | last character                                  |
//! | 6 | `suffix2`       | last two characters                             |
//! | 7 | `suffix3`       | last three characters                           |
//! | 8 | `is_title`      | 1 if title-cased (`Poland`)                     |
//! | 9 | `is_upper`      | 1 if every cased character is uppercase         |
//! |10 | `is_lower`      | 1 if every cased character is lowercase         |
//! |11 | `is_digit`      | 1 if every character is numeric                 |
//! |12 | `length`        | number of characters, as a category             |
//! |13 | `shape`         | `X`/`x`/`d` class string with runs collapsed    |
//! |14 | `bos`           | 1 on the first token                            |
//! |15 | `eos`           | 1 on the last token                             |
//! |16 | `prev_lower`    | lowercased previous token, or `__BOS__`         |
//! |17 | `prev_is_title` | `is_title` of the previous token                |
//! |18 | `next_lower`    | lowercased next token, or `__EOS__`             |
//! |19 | `next_is_title` | `is_title` of the next token                    |
//!
//! Prefixes and suffixes of tokens shorter than the requested width are the
//! whole token. Boolean features are numbers (0 or 1).

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::data::{FeatureMap, FeatureValue, SequenceSample};
use crate::digest::sha256_hex;

pub const FEATURE_COUNT: usize = 19;

pub const BOS_MARKER: &str = "__BOS__";
pub const EOS_MARKER: &str = "__EOS__";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenFeature {
    Lower,
    Prefix1,
    Prefix2,
    Prefix3,
    Suffix1,
    Suffix2,
    Suffix3,
    IsTitle,
    IsUpper,
    IsLower,
    IsDigit,
    Length,
    Shape,
    Bos,
    Eos,
    PrevLower,
    PrevIsTitle,
    NextLower,
    NextIsTitle,
}

pub const ALL_FEATURES: [TokenFeature; FEATURE_COUNT] = [
    TokenFeature::Lower,
    TokenFeature::Prefix1,
    TokenFeature::Prefix2,
    TokenFeature::Prefix3,
    TokenFeature::Suffix1,
    TokenFeature::Suffix2,
    TokenFeature::Suffix3,
    TokenFeature::IsTitle,
    TokenFeature::IsUpper,
    TokenFeature::IsLower,
    TokenFeature::IsDigit,
    TokenFeature::Length,
    TokenFeature::Shape,
    TokenFeature::Bos,
    TokenFeature::Eos,
    TokenFeature::PrevLower,
    TokenFeature::PrevIsTitle,
    TokenFeature::NextLower,
    TokenFeature::NextIsTitle,
];

impl TokenFeature {
    pub fn name(self) -> &'static str {
        match self {
            TokenFeature::Lower => "lower",
            TokenFeature::Prefix1 => "prefix1",
            TokenFeature::Prefix2 => "prefix2",
            TokenFeature::Prefix3 => "prefix3",
            TokenFeature::Suffix1 => "suffix1",
            TokenFeature::Suffix2 => "suffix2",
            TokenFeature::Suffix3 => "suffix3",
            TokenFeature::IsTitle => "is_title",
            TokenFeature::IsUpper => "is_upper",
            TokenFeature::IsLower => "is_lower",
            TokenFeature::IsDigit => "is_digit",
            TokenFeature::Length => "length",
            TokenFeature::Shape => "shape",
            TokenFeature::Bos => "bos",
            TokenFeature::Eos => "eos",
            TokenFeature::PrevLower => "prev_lower",
            TokenFeature::PrevIsTitle => "prev_is_title",
            TokenFeature::NextLower => "next_lower",
            TokenFeature::NextIsTitle => "next_is_title",
        }
    }

    fn uses_neighbors(self) -> bool {
        matches!(
            self,
            TokenFeature::PrevLower | TokenFeature::PrevIsTitle | TokenFeature::NextLower | TokenFeature::NextIsTitle
        )
    }

    fn eval(self, tokens: &[String], j: usize) -> FeatureValue {
        let tok = tokens[j].as_str();
        match self {
            TokenFeature::Lower => FeatureValue::Str(tok.to_lowercase()),
            TokenFeature::Prefix1 => FeatureValue::Str(prefix(tok, 1)),
            TokenFeature::Prefix2 => FeatureValue::Str(prefix(tok, 2)),
            TokenFeature::Prefix3 => FeatureValue::Str(prefix(tok, 3)),
            TokenFeature::Suffix1 => FeatureValue::Str(suffix(tok, 1)),
            TokenFeature::Suffix2 => FeatureValue::Str(suffix(tok, 2)),
            TokenFeature::Suffix3 => FeatureValue::Str(suffix(tok, 3)),
            TokenFeature::IsTitle => FeatureValue::flag(is_title(tok)),
            TokenFeature::IsUpper => FeatureValue::flag(is_upper(tok)),
            TokenFeature::IsLower => FeatureValue::flag(is_lower(tok)),
            TokenFeature::IsDigit => FeatureValue::flag(is_digit(tok)),
            TokenFeature::Length => FeatureValue::Str(tok.chars().count().to_string()),
            TokenFeature::Shape => FeatureValue::Str(shape(tok)),
            TokenFeature::Bos => FeatureValue::flag(j == 0),
            TokenFeature::Eos => FeatureValue::flag(j + 1 == tokens.len()),
            TokenFeature::PrevLower => FeatureValue::Str(match j {
                0 => BOS_MARKER.to_string(),
                _ => tokens[j - 1].to_lowercase(),
            }),
            TokenFeature::PrevIsTitle => FeatureValue::flag(j > 0 && is_title(&tokens[j - 1])),
            TokenFeature::NextLower => FeatureValue::Str(match tokens.get(j + 1) {
                Some(t) => t.to_lowercase(),
                None => EOS_MARKER.to_string(),
            }),
            TokenFeature::NextIsTitle => FeatureValue::flag(tokens.get(j + 1).is_some_and(|t| is_title(t))),
        }
    }
}

fn prefix(tok: &str, n: usize) -> String {
    tok.chars().take(n).collect()
}

fn suffix(tok: &str, n: usize) -> String {
    let count = tok.chars().count();
    tok.chars().skip(count.saturating_sub(n)).collect()
}

/// First cased character uppercase and every later cased character lowercase.
pub fn is_title(tok: &str) -> bool {
    let mut cased = tok.chars().filter(|c| c.is_uppercase() || c.is_lowercase());
    match cased.next() {
        Some(first) if first.is_uppercase() => cased.all(|c| c.is_lowercase()),
        _ => false,
    }
}

pub fn is_upper(tok: &str) -> bool {
    let mut any = false;
    for c in tok.chars() {
        if c.is_lowercase() {
            return false;
        }
        any |= c.is_uppercase();
    }
    any
}

pub fn is_lower(tok: &str) -> bool {
    let mut any = false;
    for c in tok.chars() {
        if c.is_uppercase() {
            return false;
        }
        any |= c.is_lowercase();
    }
    any
}

pub fn is_digit(tok: &str) -> bool {
    !tok.is_empty() && tok.chars().all(char::is_numeric)
}

pub fn shape(tok: &str) -> String {
    let mut out = String::new();
    let mut last = None;
    for c in tok.chars() {
        let s = if c.is_uppercase() {
            'X'
        } else if c.is_lowercase() {
            'x'
        } else if c.is_numeric() {
            'd'
        } else {
            c
        };
        if last != Some(s) {
            out.push(s);
            last = Some(s);
        }
    }
    out
}

/// An ordered selection of token features.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureExtractor {
    features: Vec<TokenFeature>,
}

impl Default for FeatureExtractor {
    fn default() -> Self {
        Self::standard()
    }
}

impl FeatureExtractor {
    /// All nineteen features.
    pub fn standard() -> Self {
        Self { features: ALL_FEATURES.to_vec() }
    }

    /// The first `n` features of the standard order (clamped to 19).
    pub fn first(n: usize) -> Self {
        Self { features: ALL_FEATURES[..n.min(FEATURE_COUNT)].to_vec() }
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn features(&self) -> &[TokenFeature] {
        &self.features
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.features.iter().map(|f| f.name()).collect()
    }

    pub fn includes_neighbors(&self) -> bool {
        self.features.iter().any(|f| f.uses_neighbors())
    }

    /// Feature maps for every token of `tokens`.
    pub fn extract_tokens(&self, tokens: &[String]) -> Vec<FeatureMap> {
        (0..tokens.len())
            .map(|j| self.features.iter().map(|f| (f.name().to_string(), f.eval(tokens, j))).collect())
            .collect()
    }

    /// Feature values of token `j` in extractor order.
    pub fn extract_one(&self, tokens: &[String], j: usize) -> Vec<(&'static str, FeatureValue)> {
        self.features.iter().map(|f| (f.name(), f.eval(tokens, j))).collect()
    }

    /// Digest of the ordered feature names, stored with trained models.
    pub fn schema_digest(&self) -> String {
        sha256_hex(self.names().join(",").as_bytes())
    }
}

/// Standard features of every token of a sample.
pub fn extract_features(sample: &SequenceSample) -> Vec<FeatureMap> {
    FeatureExtractor::standard().extract_tokens(&sample.tokens)
}
