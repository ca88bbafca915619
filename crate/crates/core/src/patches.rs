//! Patch equivalence classes derived from glyph XOR differences.
//!
//! Two symbols sharing a base letter are rendered, XOR-ed, and the pair is
//! kept if the difference is small relative to the glyphs' ink. Pairs whose
//! XOR patterns are bit-identical form one class, which becomes a numbered
//! transducer action. Only the lookup table survives; pixels are dropped.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::sync::OnceLock;

use unicode_normalization::char::{canonical_combining_class, decompose_canonical};
use unicode_normalization::UnicodeNormalization;

use crate::corpus::Alphabet;
use crate::error::{Error, Result};
use crate::glyphs::{ink_count, render_alphabet, FontRasterizer, GlyphBitmap, GlyphSource, RenderConfig};

pub const DEFAULT_THRESHOLD: f64 = 0.3;

/// Blocks rendered when prepopulating the table.
pub const DEFAULT_RANGES: &[(&str, u32, u32)] = &[
    ("basic-latin", 0x0000, 0x007F),
    ("latin-1-supplement", 0x0080, 0x00FF),
    ("latin-extended-a", 0x0100, 0x017F),
    ("latin-extended-b", 0x0180, 0x024F),
    ("latin-extended-additional", 0x1E00, 0x1EFF),
    ("greek", 0x0370, 0x03FF),
    ("cyrillic", 0x0400, 0x04FF),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CodeRange {
    pub start: u32,
    pub end: u32,
}

impl CodeRange {
    pub fn chars(self) -> impl Iterator<Item = char> {
        (self.start..=self.end).filter_map(char::from_u32)
    }
}

pub fn default_ranges() -> Vec<CodeRange> {
    DEFAULT_RANGES
        .iter()
        .map(|&(_, start, end)| CodeRange { start, end })
        .collect()
}

/// Parses a comma-separated list of block names (as in [`DEFAULT_RANGES`]),
/// `default`, or hex spans such as `0000-007F`.
pub fn parse_ranges(spec: &str) -> Result<Vec<CodeRange>> {
    let mut out = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if part == "default" {
            out.extend(default_ranges());
            continue;
        }
        if let Some(&(_, start, end)) = DEFAULT_RANGES.iter().find(|(name, _, _)| *name == part) {
            out.push(CodeRange { start, end });
            continue;
        }
        let bad = || Error::InvalidArgument(format!("bad range {part:?}"));
        let (a, b) = part.split_once('-').ok_or_else(bad)?;
        let hex = |s: &str| u32::from_str_radix(s.trim().trim_start_matches("U+"), 16).map_err(|_| bad());
        let (start, end) = (hex(a)?, hex(b)?);
        if start > end {
            return Err(bad());
        }
        out.push(CodeRange { start, end });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchDiff {
    pub a: char,
    pub b: char,
    pub width: usize,
    pub height: usize,
    pub xor_bits: Vec<bool>,
    pub weight: usize,
    pub ink_a: usize,
    pub ink_b: usize,
}

pub fn diff(a: &GlyphBitmap, b: &GlyphBitmap) -> Result<PatchDiff> {
    if !a.same_dims(b) {
        return Err(Error::Shape(format!(
            "cannot diff {}x{} against {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    let xor_bits: Vec<bool> = a.bits.iter().zip(&b.bits).map(|(x, y)| x ^ y).collect();
    let weight = xor_bits.iter().filter(|&&p| p).count();
    Ok(PatchDiff {
        a: a.codepoint,
        b: b.codepoint,
        width: a.width,
        height: a.height,
        xor_bits,
        weight,
        ink_a: ink_count(a),
        ink_b: ink_count(b),
    })
}

/// Maps a symbol to its diacritic-free skeleton.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BaseMap {
    overrides: BTreeMap<char, char>,
}

const CONFUSABLES: &[(char, char)] = &[
    ('ø', 'o'),
    ('Ø', 'O'),
    ('ı', 'i'),
    ('đ', 'd'),
    ('Đ', 'D'),
    ('ł', 'l'),
    ('Ł', 'L'),
];

impl BaseMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_override(mut self, from: char, to: char) -> Self {
        self.overrides.insert(from, to);
        self
    }

    /// Reads `symbol<TAB>base` lines; blank lines and `#` comments skipped.
    pub fn with_override_file(mut self, text: &str) -> Result<Self> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.is_empty() || line.starts_with("# ") || line == "#" {
                continue;
            }
            let mut cols = line.split('\t');
            let mut one = |what| {
                let s = cols.next().unwrap_or("");
                let mut chars = s.chars();
                match (chars.next(), chars.next()) {
                    (Some(c), None) => Ok(c),
                    _ => Err(Error::Parse {
                        line: i + 1,
                        message: format!("{what} must be a single codepoint"),
                    }),
                }
            };
            let from = one("symbol")?;
            let to = one("base")?;
            self.overrides.insert(from, to);
        }
        Ok(self)
    }

    fn step(&self, c: char) -> char {
        if let Some(&o) = self.overrides.get(&c) {
            return o;
        }
        let mut starter = None;
        decompose_canonical(c, |d| {
            if starter.is_none() && canonical_combining_class(d) == 0 {
                starter = Some(d);
            }
        });
        let s = starter.unwrap_or(c);
        CONFUSABLES
            .iter()
            .find(|(from, _)| *from == s)
            .map(|&(_, to)| to)
            .unwrap_or(s)
    }

    /// Iterated to a fixed point so that `base(base(c)) == base(c)`. A cycle
    /// of user overrides collapses to its smallest member.
    pub fn base(&self, c: char) -> char {
        let mut path = vec![c];
        loop {
            let cur = *path.last().unwrap();
            let next = self.step(cur);
            if next == cur {
                return cur;
            }
            if let Some(pos) = path.iter().position(|&p| p == next) {
                return *path[pos..].iter().min().unwrap();
            }
            path.push(next);
        }
    }
}

/// True iff the pair shares a base letter and differs by a small, non-empty
/// set of pixels.
pub fn is_candidate(d: &PatchDiff, base: &BaseMap, threshold: f64) -> bool {
    d.a != d.b
        && base.base(d.a) == base.base(d.b)
        && d.weight > 0
        && d.weight as f64 <= threshold * d.ink_a.max(d.ink_b).max(1) as f64
}

/// One equivalence class: every pair whose XOR pattern is the same.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchClass {
    pub xor_bits: Vec<bool>,
    pub pairs: Vec<(char, char)>,
}

/// Groups candidates by bit-identical XOR. Pairs are normalized to
/// ascending order and scanned sorted, so class ids are reproducible.
pub fn build_classes(candidates: &[PatchDiff]) -> Vec<PatchClass> {
    let mut sorted: Vec<&PatchDiff> = candidates.iter().collect();
    sorted.sort_by_key(|d| (d.a.min(d.b), d.a.max(d.b)));
    let mut classes: Vec<PatchClass> = Vec::new();
    let mut by_pattern: HashMap<&[bool], usize> = HashMap::new();
    for d in sorted {
        let pair = (d.a.min(d.b), d.a.max(d.b));
        match by_pattern.get(d.xor_bits.as_slice()) {
            Some(&k) => {
                if !classes[k].pairs.contains(&pair) {
                    classes[k].pairs.push(pair);
                }
            }
            None => {
                by_pattern.insert(&d.xor_bits, classes.len());
                classes.push(PatchClass {
                    xor_bits: d.xor_bits.clone(),
                    pairs: vec![pair],
                });
            }
        }
    }
    classes
}

/// Symmetric partial map `(symbol, patch id) -> symbol`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PatchTable {
    entries: BTreeMap<(char, u32), char>,
    by_pair: HashMap<(char, char), u32>,
    class_count: u32,
}

impl PatchTable {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn class_count(&self) -> u32 {
        self.class_count
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries as `(symbol, patch id, result)`, ordered by symbol then id.
    pub fn entries(&self) -> impl Iterator<Item = (char, u32, char)> + '_ {
        self.entries.iter().map(|(&(s, k), &r)| (s, k, r))
    }

    pub fn apply(&self, symbol: char, patch_id: u32) -> Option<char> {
        self.entries.get(&(symbol, patch_id)).copied()
    }

    pub fn find_patch(&self, a: char, b: char) -> Option<u32> {
        self.by_pair.get(&(a, b)).copied()
    }

    fn insert(&mut self, s: char, k: u32, r: char) -> Result<()> {
        if s == r {
            return Err(Error::PatchConflict(format!("patch {k} maps {s:?} to itself")));
        }
        for (from, to) in [(s, r), (r, s)] {
            if let Some(&prev) = self.entries.get(&(from, k)) {
                if prev != to {
                    return Err(Error::PatchConflict(format!(
                        "patch {k}: ({from:?},{prev:?}) collides with ({from:?},{to:?})"
                    )));
                }
            }
            if let Some(&prev_k) = self.by_pair.get(&(from, to)) {
                if prev_k != k {
                    return Err(Error::PatchConflict(format!(
                        "pair ({from:?},{to:?}) lies in patches {prev_k} and {k}"
                    )));
                }
            }
        }
        for (from, to) in [(s, r), (r, s)] {
            self.entries.insert((from, k), to);
            self.by_pair.insert((from, to), k);
        }
        self.class_count = self.class_count.max(k + 1);
        Ok(())
    }

    /// Keeps every row of a class if at least one of its pairs lies fully
    /// inside `alphabet`; surviving ids are renumbered densely in order.
    pub fn filter_for_alphabet(&self, alphabet: &Alphabet) -> PatchTable {
        self.filter_by(|c| alphabet.contains(c))
    }

    pub fn filter_by(&self, contains: impl Fn(char) -> bool) -> PatchTable {
        let observed: BTreeSet<u32> = self
            .entries
            .iter()
            .filter(|(&(s, _), &r)| contains(s) && contains(r))
            .map(|(&(_, k), _)| k)
            .collect();
        let renumber: HashMap<u32, u32> = observed
            .iter()
            .enumerate()
            .map(|(new, &old)| (old, new as u32))
            .collect();
        let mut out = PatchTable::empty();
        for (&(s, k), &r) in &self.entries {
            if let Some(&nk) = renumber.get(&k) {
                out.insert(s, nk, r).expect("subset of a consistent table");
            }
        }
        out.class_count = observed.len() as u32;
        out
    }

    /// `symbol<TAB>patch_id<TAB>result`, grouped by patch id.
    pub fn to_tsv(&self) -> String {
        let mut rows: Vec<(u32, char, char)> = self.entries().map(|(s, k, r)| (k, s, r)).collect();
        rows.sort();
        let mut out = String::new();
        for (k, s, r) in rows {
            writeln!(out, "{s}\t{k}\t{r}").unwrap();
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<PatchTable> {
        let mut table = PatchTable::empty();
        let mut ids = BTreeSet::new();
        for (i, line) in text.split('\n').enumerate() {
            let line = line.strip_suffix('\r').unwrap_or(line);
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse { line: i + 1, message };
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(err(format!("expected 3 columns, found {}", cols.len())));
            }
            let single = |s: &str| {
                let mut it = s.chars();
                match (it.next(), it.next()) {
                    (Some(c), None) => Ok(c),
                    _ => Err(err(format!("{s:?} is not a single codepoint"))),
                }
            };
            let s = single(cols[0])?;
            let r = single(cols[2])?;
            let k: u32 = cols[1]
                .parse()
                .map_err(|_| err(format!("bad patch id {:?}", cols[1])))?;
            table.insert(s, k, r).map_err(|e| err(e.to_string()))?;
            ids.insert(k);
        }
        if let Some(&max) = ids.iter().next_back() {
            if ids.len() as u32 != max + 1 {
                return Err(Error::PatchConflict(format!(
                    "patch ids are not dense: {} ids, max {max}",
                    ids.len()
                )));
            }
        }
        Ok(table)
    }
}

pub fn build_table(classes: &[PatchClass]) -> Result<PatchTable> {
    let mut table = PatchTable::empty();
    for (k, class) in classes.iter().enumerate() {
        for &(a, b) in &class.pairs {
            table.insert(a, k as u32, b)?;
        }
    }
    table.class_count = classes.len() as u32;
    Ok(table)
}

/// Renders every usable codepoint in `ranges`, diffs all pairs within each
/// base-letter group, and builds the resulting table.
///
/// Codepoints that are not their own NFC form are skipped (they render like
/// their canonical twin), as are later codepoints whose bitmap duplicates an
/// earlier one of the same group.
pub fn prepopulate(
    ranges: &[CodeRange],
    source: &dyn GlyphSource,
    base: &BaseMap,
    threshold: f64,
) -> Result<PatchTable> {
    let chars: BTreeSet<char> = ranges
        .iter()
        .flat_map(|r| r.chars())
        .filter(|&c| !c.is_control() && std::iter::once(c).nfc().eq(std::iter::once(c)))
        .collect();
    let rendered = render_alphabet(chars, source)?;
    let mut groups: BTreeMap<char, Vec<&GlyphBitmap>> = BTreeMap::new();
    for (c, bitmap) in &rendered.bitmaps {
        let group = groups.entry(base.base(*c)).or_default();
        if let Some(twin) = group.iter().find(|g| g.bits == bitmap.bits) {
            log::debug!("skipping {c:?}: renders like {:?}", twin.codepoint);
            continue;
        }
        group.push(bitmap);
    }
    let mut candidates = Vec::new();
    for members in groups.values() {
        for (i, a) in members.iter().enumerate() {
            for b in &members[i + 1..] {
                let d = diff(a, b)?;
                if is_candidate(&d, base, threshold) {
                    candidates.push(d);
                }
            }
        }
    }
    build_table(&build_classes(&candidates))
}

/// The default-font, default-range table, built once per process.
pub fn default_table() -> &'static PatchTable {
    static TABLE: OnceLock<PatchTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let raster = FontRasterizer::new(RenderConfig::default()).expect("embedded font loads");
        prepopulate(&default_ranges(), &raster, &BaseMap::new(), DEFAULT_THRESHOLD)
            .expect("default table builds")
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bitmap(c: char, bits: &[u8]) -> GlyphBitmap {
        GlyphBitmap {
            codepoint: c,
            width: 2,
            height: 2,
            bits: bits.iter().map(|&b| b == 1).collect(),
        }
    }

    #[test]
    fn diff_basics() {
        let black = bitmap('a', &[1, 1, 1, 1]);
        let white = bitmap('b', &[0, 0, 0, 0]);
        assert_eq!(diff(&black, &black).unwrap().weight, 0);
        assert_eq!(diff(&black, &white).unwrap().weight, 4);
        let x = bitmap('x', &[1, 0, 0, 1]);
        assert_eq!(diff(&x, &black).unwrap().xor_bits, diff(&black, &x).unwrap().xor_bits);
        let tall = GlyphBitmap::blank('t', 2, 3);
        assert!(diff(&tall, &black).is_err());
    }

    #[test]
    fn base_map() {
        let base = BaseMap::new();
        assert_eq!(base.base('á'), 'a');
        assert_eq!(base.base('ǿ'), 'o');
        assert_eq!(base.base('ø'), 'o');
        assert_eq!(base.base('ı'), 'i');
        assert_eq!(base.base('Ł'), 'L');
        assert_eq!(base.base('ṩ'), 's');
        assert_eq!(base.base('m'), 'm');
        for c in ['á', 'ǿ', 'ḗ', 'ß', 'ı', 'ё'] {
            assert_eq!(base.base(base.base(c)), base.base(c));
        }
        let custom = BaseMap::new().with_override_file("ß\ts\n").unwrap();
        assert_eq!(custom.base('ß'), 's');
        assert!(BaseMap::new().with_override_file("ab\tc\n").is_err());
    }

    #[test]
    fn candidate_rules() {
        let base = BaseMap::new();
        let mk = |a, b, weight, ink| PatchDiff {
            a,
            b,
            width: 1,
            height: 1,
            xor_bits: vec![],
            weight,
            ink_a: ink,
            ink_b: ink,
        };
        assert!(is_candidate(&mk('o', 'ô', 8, 60), &base, 0.3));
        assert!(!is_candidate(&mk('x', 'm', 8, 60), &base, 0.3));
        assert!(!is_candidate(&mk('a', 'a', 0, 60), &base, 0.3));
        assert!(!is_candidate(&mk('o', 'ô', 30, 60), &base, 0.3));
        assert!(!is_candidate(&mk('o', 'ó', 0, 60), &base, 0.3));
    }

    #[test]
    fn classes_and_table() {
        assert!(build_classes(&[]).is_empty());
        let pat = |c: char, bits: &[u8]| bitmap(c, bits);
        let a = pat('a', &[1, 0, 0, 0]);
        let aa = pat('á', &[1, 1, 0, 0]);
        let e = pat('e', &[0, 0, 1, 0]);
        let ee = pat('é', &[0, 1, 1, 0]);
        let ae = pat('ä', &[1, 0, 0, 1]);
        let cands = vec![
            diff(&e, &ee).unwrap(),
            diff(&a, &aa).unwrap(),
            diff(&a, &ae).unwrap(),
        ];
        let classes = build_classes(&cands);
        assert_eq!(classes.len(), 2);
        assert_eq!(classes[0].pairs, vec![('a', 'á'), ('e', 'é')]);
        let table = build_table(&classes).unwrap();
        assert_eq!(table.class_count(), 2);
        assert_eq!(table.apply('e', 0), Some('é'));
        assert_eq!(table.apply('é', 0), Some('e'));
        assert_eq!(table.apply('b', 0), None);
        assert_eq!(table.find_patch('a', 'ä'), Some(1));
        assert_eq!(table.find_patch('ä', 'a'), Some(1));
        assert_eq!(table.find_patch('a', 'b'), None);
        assert_eq!(PatchTable::from_tsv(&table.to_tsv()).unwrap(), table);
    }

    #[test]
    fn conflicting_class_errors() {
        let classes = vec![PatchClass {
            xor_bits: vec![],
            pairs: vec![('a', 'b'), ('a', 'c')],
        }];
        let err = build_table(&classes).unwrap_err();
        assert!(err.to_string().contains("'a'"), "{err}");
    }

    #[test]
    fn filter_keeps_whole_classes() {
        let classes = vec![
            PatchClass { xor_bits: vec![], pairs: vec![('a', 'á'), ('e', 'é')] },
            PatchClass { xor_bits: vec![], pairs: vec![('a', 'ä'), ('o', 'ö')] },
        ];
        let table = build_table(&classes).unwrap();
        let only_umlaut = table.filter_for_alphabet(&Alphabet::from_symbols(['a', 'ä']));
        assert_eq!(only_umlaut.class_count(), 1);
        assert_eq!(only_umlaut.apply('o', 0), Some('ö'));
        assert_eq!(only_umlaut.apply('a', 0), Some('ä'));
        let plain = table.filter_for_alphabet(&Alphabet::from_symbols(['a', 'o', 'e']));
        assert!(plain.is_empty());
        let again = only_umlaut.filter_for_alphabet(&Alphabet::from_symbols(['a', 'ä']));
        assert_eq!(again, only_umlaut);
    }

    #[test]
    fn tsv_rejects_asymmetric_or_sparse() {
        assert!(PatchTable::from_tsv("a\t0\tá\n").is_ok());
        assert!(PatchTable::from_tsv("a\t1\tá\n").is_err());
        assert!(PatchTable::from_tsv("a\t0\ta\n").is_err());
        assert!(PatchTable::from_tsv("a\t0\tá\na\t0\tà\n").is_err());
        assert!(PatchTable::from_tsv("ab\t0\tá\n").is_err());
    }

    #[test]
    fn range_parsing() {
        assert_eq!(parse_ranges("0000-007F").unwrap(), vec![CodeRange { start: 0, end: 0x7F }]);
        assert_eq!(parse_ranges("basic-latin,latin-1-supplement").unwrap().len(), 2);
        assert_eq!(parse_ranges("default").unwrap(), default_ranges());
        assert!(parse_ranges("zz").is_err());
        assert!(parse_ranges("0080-0000").is_err());
    }
}
