//! UniMorph-style data handling: parsing, symbol inventories and metrics.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Default gap fill symbol used by alignments and enhancer templates.
pub const DEFAULT_GAP: char = '#';
const PRIVATE_USE_START: u32 = 0xE000;
const PRIVATE_USE_END: u32 = 0xF8FF;

/// One lemma/form/feature triple. `target` is absent in covered test files.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct InflectionSample {
    pub lemma: String,
    pub target: Option<String>,
    pub features: Vec<String>,
}

impl InflectionSample {
    pub fn new(lemma: &str, target: Option<&str>, features: &[&str]) -> Result<Self> {
        let sample = InflectionSample {
            lemma: lemma.to_string(),
            target: target.map(str::to_string),
            features: features.iter().map(|f| f.to_string()).collect(),
        };
        sample.validate().map_err(Error::InvalidArgument)?;
        Ok(sample)
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.lemma.is_empty() {
            return Err("empty lemma".into());
        }
        if self.target.as_deref() == Some("") {
            return Err("empty target form".into());
        }
        if self.features.is_empty() {
            return Err("empty feature list".into());
        }
        for tag in &self.features {
            if tag.is_empty() {
                return Err("empty feature tag".into());
            }
            if tag.contains(['\t', ';']) {
                return Err(format!("feature tag {tag:?} contains a separator"));
            }
        }
        for word in std::iter::once(&self.lemma).chain(self.target.as_ref()) {
            if word.contains(['\t', '\n']) {
                return Err(format!("word {word:?} contains a separator"));
            }
        }
        Ok(())
    }

    /// Feature bundle in its `;`-joined file form.
    pub fn feature_string(&self) -> String {
        self.features.join(";")
    }
}

/// Parses raw bytes, rejecting invalid UTF-8 before any line is read.
pub fn parse_unimorph_bytes(document: &[u8], covered: bool) -> Result<Vec<InflectionSample>> {
    let text = String::from_utf8(document.to_vec())?;
    parse_unimorph(&text, covered)
}

/// Parses tab-separated UniMorph text. Covered files have two columns
/// (lemma, features); full files have three (lemma, form, features).
pub fn parse_unimorph(document: &str, covered: bool) -> Result<Vec<InflectionSample>> {
    let expected = if covered { 2 } else { 3 };
    let mut samples = Vec::new();
    for (idx, raw) in document.split('\n').enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.is_empty() {
            continue;
        }
        let line_no = idx + 1;
        let columns: Vec<&str> = line.split('\t').collect();
        if columns.len() != expected {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected {expected} columns, found {}", columns.len()),
            });
        }
        let (lemma, target, features) = if covered {
            (columns[0], None, columns[1])
        } else {
            (columns[0], Some(columns[1]), columns[2])
        };
        let sample = InflectionSample {
            lemma: lemma.to_string(),
            target: target.map(str::to_string),
            features: features.split(';').map(str::to_string).collect(),
        };
        sample.validate().map_err(|message| Error::Parse {
            line: line_no,
            message,
        })?;
        samples.push(sample);
    }
    Ok(samples)
}

/// Writes samples back in UniMorph shape: three columns when a target is
/// present, two otherwise. Every line ends with LF.
pub fn write_unimorph(samples: &[InflectionSample]) -> String {
    let mut out = String::new();
    for s in samples {
        match &s.target {
            Some(t) => writeln!(out, "{}\t{}\t{}", s.lemma, t, s.feature_string()),
            None => writeln!(out, "{}\t{}", s.lemma, s.feature_string()),
        }
        .expect("writing to a String cannot fail");
    }
    out
}

/// The symbol inventory of a data set together with the reserved symbols
/// that must never collide with it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    symbols: BTreeSet<char>,
    pub gap: char,
    pub sentinel: char,
    pub bos: char,
}

impl Alphabet {
    pub fn from_symbols<I: IntoIterator<Item = char>>(symbols: I) -> Self {
        let symbols: BTreeSet<char> = symbols.into_iter().collect();
        let mut taken: BTreeSet<char> = symbols.clone();
        let gap = reserve(DEFAULT_GAP, &mut taken);
        let sentinel = reserve(char_at(PRIVATE_USE_START), &mut taken);
        let bos = reserve(char_at(PRIVATE_USE_START + 1), &mut taken);
        Alphabet {
            symbols,
            gap,
            sentinel,
            bos,
        }
    }

    pub fn symbols(&self) -> impl Iterator<Item = char> + '_ {
        self.symbols.iter().copied()
    }

    pub fn contains(&self, c: char) -> bool {
        self.symbols.contains(&c)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

fn char_at(cp: u32) -> char {
    char::from_u32(cp).expect("private-use codepoints are valid scalars")
}

/// Takes `preferred` if free, otherwise the first free private-use codepoint.
fn reserve(preferred: char, taken: &mut BTreeSet<char>) -> char {
    let chosen = if !taken.contains(&preferred) {
        preferred
    } else {
        (PRIVATE_USE_START..=PRIVATE_USE_END)
            .map(char_at)
            .find(|c| !taken.contains(c))
            .expect("private-use area exhausted")
    };
    taken.insert(chosen);
    chosen
}

/// Union of all lemma and target codepoints.
pub fn extract_alphabet(samples: &[InflectionSample]) -> Alphabet {
    Alphabet::from_symbols(
        samples
            .iter()
            .flat_map(|s| s.lemma.chars().chain(s.target.iter().flat_map(|t| t.chars()))),
    )
}

/// Dense, lexicographically ordered index over feature tags.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FeatureVocab {
    tags: Vec<String>,
    index: HashMap<String, usize>,
}

impl FeatureVocab {
    pub fn from_tags<I, S>(tags: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let sorted: BTreeSet<String> = tags.into_iter().map(Into::into).collect();
        let tags: Vec<String> = sorted.into_iter().collect();
        let index = tags
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        FeatureVocab { tags, index }
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn index(&self, tag: &str) -> Option<usize> {
        self.index.get(tag).copied()
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    /// Multi-hot encoding. Unknown tags are dropped with a warning.
    pub fn encode(&self, features: &[String]) -> Vec<f64> {
        let mut v = vec![0.0; self.tags.len()];
        for tag in features {
            match self.index(tag) {
                Some(i) => v[i] = 1.0,
                None => log::warn!("dropping unseen feature tag {tag:?}"),
            }
        }
        v
    }
}

pub fn extract_feature_vocab(samples: &[InflectionSample]) -> FeatureVocab {
    FeatureVocab::from_tags(samples.iter().flat_map(|s| s.features.iter().cloned()))
}

fn check_lengths(what: &'static str, predictions: &[String], golds: &[String]) -> Result<()> {
    if predictions.len() != golds.len() {
        return Err(Error::LengthMismatch {
            what,
            left: predictions.len(),
            right: golds.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::InvalidArgument(format!("{what}: empty input")));
    }
    Ok(())
}

/// Fraction of exact string matches.
pub fn accuracy(predictions: &[String], golds: &[String]) -> Result<f64> {
    check_lengths("accuracy", predictions, golds)?;
    let hits = predictions.iter().zip(golds).filter(|(p, g)| p == g).count();
    Ok(hits as f64 / golds.len() as f64)
}

/// Unit-cost edit distance over codepoints.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn avg_levenshtein(predictions: &[String], golds: &[String]) -> Result<f64> {
    check_lengths("avg_levenshtein", predictions, golds)?;
    let total: usize = predictions
        .iter()
        .zip(golds)
        .map(|(p, g)| levenshtein(p, g))
        .sum();
    Ok(total as f64 / golds.len() as f64)
}

/// Deterministic shuffle, then the last `ceil(fraction * n)` samples become
/// the dev set (never all of them).
pub fn split_dev(
    samples: &[InflectionSample],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<InflectionSample>, Vec<InflectionSample>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "dev fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let n = samples.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 samples to split off a dev set, got {n}"
        )));
    }
    let mut shuffled = samples.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let dev_len = ((fraction * n as f64).ceil() as usize).clamp(1, n - 1);
    let dev = shuffled.split_off(n - dev_len);
    Ok((shuffled, dev))
}
