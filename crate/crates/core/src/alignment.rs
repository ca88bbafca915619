//! Levenshtein alignment in which patch-related symbols count as equal.

use crate::error::{Error, Result};
use crate::patches::PatchTable;

/// Gap-filled alignment of a lemma (`w′`) and a target (`t′`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignedPair {
    pub lemma_aligned: Vec<char>,
    pub target_aligned: Vec<char>,
    pub gap: char,
    pub cost: usize,
}

impl AlignedPair {
    pub fn len(&self) -> usize {
        self.lemma_aligned.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lemma_aligned.is_empty()
    }

    /// Aligned columns `(c_w, c_t)`.
    pub fn columns(&self) -> impl Iterator<Item = (char, char)> + '_ {
        self.lemma_aligned
            .iter()
            .copied()
            .zip(self.target_aligned.iter().copied())
    }

    pub fn lemma_string(&self) -> String {
        self.lemma_aligned.iter().collect()
    }

    pub fn target_string(&self) -> String {
        self.target_aligned.iter().collect()
    }
}

/// 0 for identical or patch-related symbols, 1 otherwise.
pub fn sub_cost(a: char, b: char, table: &PatchTable) -> usize {
    usize::from(!(a == b || table.find_patch(a, b).is_some()))
}

/// Minimum-cost alignment under {match/patch 0, substitute 1, insert 1,
/// delete 1}. Ties on the backtrace prefer the diagonal, then a deletion
/// from the lemma, then an insertion into the target.
pub fn align(lemma: &str, target: &str, table: &PatchTable, gap: char) -> Result<AlignedPair> {
    if lemma.contains(gap) || target.contains(gap) {
        return Err(Error::GapInInput(gap));
    }
    let w: Vec<char> = lemma.chars().collect();
    let t: Vec<char> = target.chars().collect();
    Ok(align_chars(&w, &t, gap, |a, b| sub_cost(a, b, table)))
}

/// Alignment core over codepoint slices with an arbitrary 0/1 substitution
/// cost. The gap symbol is not checked against the inputs.
pub fn align_chars(
    w: &[char],
    t: &[char],
    gap: char,
    sub: impl Fn(char, char) -> usize,
) -> AlignedPair {
    let (n, m) = (w.len(), t.len());
    let cols = m + 1;
    let mut d = vec![0usize; (n + 1) * cols];
    for j in 0..=m {
        d[j] = j;
    }
    for i in 1..=n {
        d[i * cols] = i;
        for j in 1..=m {
            let diag = d[(i - 1) * cols + j - 1] + sub(w[i - 1], t[j - 1]);
            let del = d[(i - 1) * cols + j] + 1;
            let ins = d[i * cols + j - 1] + 1;
            d[i * cols + j] = diag.min(del).min(ins);
        }
    }

    let mut lemma_aligned = Vec::with_capacity(n + m);
    let mut target_aligned = Vec::with_capacity(n + m);
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = d[i * cols + j];
        if i > 0 && j > 0 && here == d[(i - 1) * cols + j - 1] + sub(w[i - 1], t[j - 1]) {
            lemma_aligned.push(w[i - 1]);
            target_aligned.push(t[j - 1]);
            i -= 1;
            j -= 1;
        } else if i > 0 && here == d[(i - 1) * cols + j] + 1 {
            lemma_aligned.push(w[i - 1]);
            target_aligned.push(gap);
            i -= 1;
        } else {
            lemma_aligned.push(gap);
            target_aligned.push(t[j - 1]);
            j -= 1;
        }
    }
    lemma_aligned.reverse();
    target_aligned.reverse();
    AlignedPair {
        lemma_aligned,
        target_aligned,
        gap,
        cost: d[n * cols + m],
    }
}
