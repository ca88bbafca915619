//! Artificial training data from pairs of samples sharing a feature bundle.
//!
//! Two samples of one group are aligned lemma-to-lemma and form-to-form;
//! the characters they agree on are kept and everything else becomes a gap.
//! Gaps are refilled with letters drawn by frequency (the same letters for
//! linked lemma/form gaps), and any leftovers come from a gap n-gram model.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use rand::Rng;

use crate::alignment::align_chars;
use crate::corpus::{InflectionSample, DEFAULT_GAP};

pub const DEFAULT_N_MAX: usize = 5;

/// An n-gram window with exactly one unknown position.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GapContext {
    pub left: Vec<char>,
    pub right: Vec<char>,
}

impl GapContext {
    pub fn n(&self) -> usize {
        self.left.len() + self.right.len() + 1
    }

    /// Parses the `?ade` notation.
    pub fn parse(pattern: &str) -> Option<GapContext> {
        let (l, r) = pattern.split_once('?')?;
        if r.contains('?') {
            return None;
        }
        Some(GapContext {
            left: l.chars().collect(),
            right: r.chars().collect(),
        })
    }
}

impl fmt::Display for GapContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let l: String = self.left.iter().collect();
        let r: String = self.right.iter().collect();
        write!(f, "{l}?{r}")
    }
}

/// Letter frequencies per one-gap context, plus global letter frequencies.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GapNGramModel {
    counts: HashMap<GapContext, BTreeMap<char, u64>>,
    letter_freqs: BTreeMap<char, u64>,
    n_max: usize,
}

impl GapNGramModel {
    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn context(&self, ctx: &GapContext) -> Option<&BTreeMap<char, u64>> {
        self.counts.get(ctx)
    }

    pub fn letter_freqs(&self) -> &BTreeMap<char, u64> {
        &self.letter_freqs
    }

    pub fn probability(&self, ctx: &GapContext, letter: char) -> Option<f64> {
        let dist = self.counts.get(ctx)?;
        let total: u64 = dist.values().sum();
        Some(*dist.get(&letter).unwrap_or(&0) as f64 / total as f64)
    }

    pub fn contexts(&self) -> impl Iterator<Item = &GapContext> {
        self.counts.keys()
    }
}

/// Counts every window of length 2..=n_max of every lemma and form, once per
/// position inside the window.
pub fn build_lm(samples: &[InflectionSample], n_max: usize) -> GapNGramModel {
    let mut model = GapNGramModel {
        n_max,
        ..Default::default()
    };
    let words = samples
        .iter()
        .flat_map(|s| std::iter::once(&s.lemma).chain(s.target.as_ref()));
    for word in words {
        let chars: Vec<char> = word.chars().collect();
        for &c in &chars {
            *model.letter_freqs.entry(c).or_default() += 1;
        }
        for n in 2..=n_max.min(chars.len()) {
            for window in chars.windows(n) {
                for pos in 0..n {
                    let ctx = GapContext {
                        left: window[..pos].to_vec(),
                        right: window[pos + 1..].to_vec(),
                    };
                    *model
                        .counts
                        .entry(ctx)
                        .or_default()
                        .entry(window[pos])
                        .or_default() += 1;
                }
            }
        }
    }
    model
}

/// Draws one letter from weighted candidates. Candidates arrive in
/// ascending letter order with positive weights.
pub trait LetterSampler {
    fn choose(&mut self, candidates: &[(char, u64)]) -> char;
}

/// Frequency-proportional sampling from any `rand` generator.
pub struct RngSampler<R>(pub R);

impl<R: Rng> LetterSampler for RngSampler<R> {
    fn choose(&mut self, candidates: &[(char, u64)]) -> char {
        let total: u64 = candidates.iter().map(|&(_, w)| w).sum();
        let mut draw = self.0.random_range(0..total);
        for &(c, w) in candidates {
            if draw < w {
                return c;
            }
            draw -= w;
        }
        unreachable!("draw below total weight")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TemplatePair {
    pub lemma_template: Vec<char>,
    pub form_template: Vec<char>,
    pub gap: char,
    pub features: Vec<String>,
    pub shared_gap_links: Vec<(usize, usize)>,
}

impl TemplatePair {
    pub fn lemma_string(&self) -> String {
        self.lemma_template.iter().collect()
    }

    pub fn form_string(&self) -> String {
        self.form_template.iter().collect()
    }

    fn shape(&self) -> (&[char], &[char]) {
        (&self.lemma_template, &self.form_template)
    }
}

fn common_template(a: &str, b: &str, gap: char) -> Vec<char> {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let aligned = align_chars(&a, &b, gap, |x, y| usize::from(x != y));
    aligned
        .columns()
        .map(|(x, y)| if x == y && x != gap { x } else { gap })
        .collect()
}

/// Template of two samples with identical features and present targets.
/// Alignment is plain Levenshtein; patches play no role here.
pub fn pair_template(p1: &InflectionSample, p2: &InflectionSample, gap: char) -> TemplatePair {
    let t1 = p1.target.as_deref().unwrap_or_default();
    let t2 = p2.target.as_deref().unwrap_or_default();
    let lemma_template = common_template(&p1.lemma, &p2.lemma, gap);
    let form_template = common_template(t1, t2, gap);
    let gaps = |t: &[char]| -> Vec<usize> {
        t.iter()
            .enumerate()
            .filter(|(_, &c)| c == gap)
            .map(|(i, _)| i)
            .collect()
    };
    let shared_gap_links = gaps(&lemma_template)
        .into_iter()
        .zip(gaps(&form_template))
        .collect();
    TemplatePair {
        lemma_template,
        form_template,
        gap,
        features: p1.features.clone(),
        shared_gap_links,
    }
}

/// Fills `word[pos]` from the longest context present in the model,
/// scanning n from `n_max` down to 2 and, per n, windows left to right.
/// Windows touching another unfilled gap are skipped.
fn fill_from_lm(
    word: &[Option<char>],
    pos: usize,
    lm: &GapNGramModel,
    sampler: &mut dyn LetterSampler,
) -> char {
    let len = word.len();
    for n in (2..=lm.n_max.min(len)).rev() {
        let first_start = pos.saturating_sub(n - 1);
        let last_start = pos.min(len - n);
        for start in first_start..=last_start {
            let window = &word[start..start + n];
            let offset = pos - start;
            let known = window
                .iter()
                .enumerate()
                .all(|(i, c)| i == offset || c.is_some());
            if !known {
                continue;
            }
            let ctx = GapContext {
                left: window[..offset].iter().map(|c| c.unwrap()).collect(),
                right: window[offset + 1..].iter().map(|c| c.unwrap()).collect(),
            };
            if let Some(dist) = lm.counts.get(&ctx) {
                let cands: Vec<(char, u64)> = dist.iter().map(|(&c, &w)| (c, w)).collect();
                return sampler.choose(&cands);
            }
        }
    }
    let unigram: Vec<(char, u64)> = lm.letter_freqs.iter().map(|(&c, &w)| (c, w)).collect();
    sampler.choose(&unigram)
}

fn fill_remaining(word: &mut [Option<char>], lm: &GapNGramModel, sampler: &mut dyn LetterSampler) {
    for pos in 0..word.len() {
        if word[pos].is_none() {
            word[pos] = Some(fill_from_lm(word, pos, lm, sampler));
        }
    }
}

/// Produces `count` artificial samples from one template.
pub fn generate(
    template: &TemplatePair,
    lm: &GapNGramModel,
    sampler: &mut dyn LetterSampler,
    count: usize,
) -> Vec<InflectionSample> {
    let unigram: Vec<(char, u64)> = lm.letter_freqs.iter().map(|(&c, &w)| (c, w)).collect();
    let to_slots = |t: &[char]| -> Vec<Option<char>> {
        t.iter()
            .map(|&c| if c == template.gap { None } else { Some(c) })
            .collect()
    };
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut lemma = to_slots(&template.lemma_template);
        let mut form = to_slots(&template.form_template);
        if !template.shared_gap_links.is_empty() && unigram.is_empty() {
            break;
        }
        for &(li, fi) in &template.shared_gap_links {
            let c = sampler.choose(&unigram);
            lemma[li] = Some(c);
            form[fi] = Some(c);
        }
        fill_remaining(&mut lemma, lm, sampler);
        fill_remaining(&mut form, lm, sampler);
        let lemma: String = lemma.into_iter().flatten().collect();
        let form: String = form.into_iter().flatten().collect();
        if lemma.is_empty() || form.is_empty() {
            continue;
        }
        out.push(InflectionSample {
            lemma,
            target: Some(form),
            features: template.features.clone(),
        });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnhanceConfig {
    pub factor: usize,
    pub min_support: usize,
    pub n_max: usize,
    pub gap: char,
}

impl Default for EnhanceConfig {
    fn default() -> Self {
        EnhanceConfig {
            factor: 1,
            min_support: 1,
            n_max: DEFAULT_N_MAX,
            gap: DEFAULT_GAP,
        }
    }
}

/// Every unordered pair inside each feature group yields `factor` samples
/// when its template is shared by at least `min_support` pairs of the group.
/// Exact copies of real samples are dropped.
pub fn enhance(
    samples: &[InflectionSample],
    config: &EnhanceConfig,
    sampler: &mut dyn LetterSampler,
) -> crate::Result<Vec<InflectionSample>> {
    if !(1..=5).contains(&config.factor) {
        return Err(crate::Error::InvalidArgument(format!(
            "enhancement factor must be in 1..=5, got {}",
            config.factor
        )));
    }
    if config.min_support == 0 {
        return Err(crate::Error::InvalidArgument("min_support must be at least 1".into()));
    }
    let gap = choose_gap(samples, config.gap);
    let lm = build_lm(samples, config.n_max);
    let real: BTreeSet<(&str, Option<&str>, &[String])> = samples
        .iter()
        .map(|s| (s.lemma.as_str(), s.target.as_deref(), s.features.as_slice()))
        .collect();

    let mut groups: BTreeMap<&[String], Vec<&InflectionSample>> = BTreeMap::new();
    for s in samples.iter().filter(|s| s.target.is_some()) {
        groups.entry(&s.features).or_default().push(s);
    }

    let mut out = Vec::new();
    for members in groups.values() {
        let mut templates = Vec::new();
        for (i, a) in members.iter().enumerate() {
            for b in &members[i + 1..] {
                templates.push(pair_template(a, b, gap));
            }
        }
        let mut support: HashMap<(&[char], &[char]), usize> = HashMap::new();
        for t in &templates {
            *support.entry(t.shape()).or_default() += 1;
        }
        for t in &templates {
            if support[&t.shape()] < config.min_support {
                continue;
            }
            for s in generate(t, &lm, sampler, config.factor) {
                let key = (s.lemma.as_str(), s.target.as_deref(), s.features.as_slice());
                if !real.contains(&key) {
                    out.push(s);
                }
            }
        }
    }
    Ok(out)
}

fn choose_gap(samples: &[InflectionSample], preferred: char) -> char {
    let used = |c: char| {
        samples
            .iter()
            .any(|s| s.lemma.contains(c) || s.target.as_deref().is_some_and(|t| t.contains(c)))
    };
    if !used(preferred) {
        return preferred;
    }
    (0xE000u32..=0xF8FF)
        .filter_map(char::from_u32)
        .find(|&c| !used(c))
        .expect("private-use area exhausted")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sample(l: &str, t: &str, f: &[&str]) -> InflectionSample {
        InflectionSample::new(l, Some(t), f).unwrap()
    }

    #[test]
    fn lm_counts_every_window_position() {
        let lm = build_lm(&[sample("aa", "aa", &["N"])], 2);
        let ctx = |p| GapContext::parse(p).unwrap();
        assert_eq!(lm.context(&ctx("?a")).unwrap()[&'a'], 2);
        assert_eq!(lm.context(&ctx("a?")).unwrap()[&'a'], 2);
        assert_eq!(lm.letter_freqs()[&'a'], 4);
        assert!(lm.context(&ctx("?aa")).is_none());
    }

    #[test]
    fn lm_probabilities_normalize() {
        let data = vec![sample("skapad", "skapade", &["A"]), sample("fixad", "fixade", &["A"])];
        let lm = build_lm(&data, 5);
        for ctx in lm.contexts() {
            let total: f64 = lm.context(ctx).unwrap().keys().map(|&c| lm.probability(ctx, c).unwrap()).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
        assert_eq!(GapContext::parse("?ade").unwrap().to_string(), "?ade");
        assert_eq!(GapContext::parse("?ade").unwrap().n(), 4);
    }

    #[test]
    fn template_shapes() {
        let a = sample("skapad", "skappade", &["ADJ", "DEF"]);
        let b = sample("fixad", "fixade", &["ADJ", "DEF"]);
        let t = pair_template(&a, &b, '#');
        assert_eq!(t.lemma_string(), "####ad");
        assert_eq!(t.form_string(), "#####ade");
        assert_eq!(t.shared_gap_links, vec![(0, 0), (1, 1), (2, 2), (3, 3)]);

        let same = pair_template(&a, &a, '#');
        assert_eq!(same.lemma_string(), "skapad");
        assert!(same.shared_gap_links.is_empty());

        let x = sample("abc", "abd", &["N"]);
        let y = sample("xyz", "xyw", &["N"]);
        let t = pair_template(&x, &y, '#');
        assert_eq!(t.lemma_string(), "###");
        assert_eq!(t.form_string(), "###");
    }

    #[test]
    fn plain_form_gives_shorter_template() {
        let a = sample("skapad", "skapade", &["ADJ", "DEF"]);
        let b = sample("fixad", "fixade", &["ADJ", "DEF"]);
        let t = pair_template(&a, &b, '#');
        assert_eq!(t.lemma_string(), "####ad");
        assert_eq!(t.form_string(), "####ade");
    }

    #[test]
    fn generate_without_gaps_is_fixed() {
        let a = sample("ab", "abc", &["N"]);
        let t = pair_template(&a, &a, '#');
        let lm = build_lm(std::slice::from_ref(&a), 3);
        let mut rng = RngSampler(ChaCha8Rng::seed_from_u64(1));
        assert_eq!(generate(&t, &lm, &mut rng, 3), vec![a.clone(), a.clone(), a]);
    }

    #[test]
    fn enhance_counts_and_determinism() {
        let data = vec![
            sample("kat", "katten", &["N", "DEF"]),
            sample("hund", "hunden", &["N", "DEF"]),
            sample("bil", "bilen", &["N", "DEF"]),
            sample("ko", "kor", &["N", "PL"]),
        ];
        let run = |factor, seed| {
            let cfg = EnhanceConfig { factor, ..Default::default() };
            enhance(&data, &cfg, &mut RngSampler(ChaCha8Rng::seed_from_u64(seed))).unwrap()
        };
        let one = run(1, 7);
        let five = run(5, 7);
        assert!(one.len() <= 3);
        assert!(five.len() <= 15);
        assert_eq!(run(1, 7), one);
        for s in one.iter().chain(&five) {
            assert!(!s.lemma.contains('#') && !s.lemma.is_empty());
            assert!(!s.target.as_ref().unwrap().contains('#'));
            assert_eq!(s.features, vec!["N".to_string(), "DEF".to_string()]);
        }
        let bad = EnhanceConfig { factor: 6, ..Default::default() };
        assert!(enhance(&data, &bad, &mut RngSampler(ChaCha8Rng::seed_from_u64(0))).is_err());
    }
}
