use std::collections::HashMap;

use crate::corpus::Alphabet;

/// Encoder input vocabulary: index 0 is the unknown symbol, index 1 the
/// end-of-input sentinel, then the alphabet in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CharVocab {
    symbols: Vec<char>,
    index: HashMap<char, usize>,
}

impl CharVocab {
    pub const UNK: usize = 0;
    pub const SENTINEL: usize = 1;

    pub fn new<I: IntoIterator<Item = char>>(symbols: I) -> Self {
        let mut v = CharVocab {
            symbols: Vec::new(),
            index: HashMap::new(),
        };
        for c in symbols {
            if let std::collections::hash_map::Entry::Vacant(e) = v.index.entry(c) {
                e.insert(v.symbols.len() + 2);
                v.symbols.push(c);
            }
        }
        v
    }

    pub fn from_alphabet(alphabet: &Alphabet) -> Self {
        Self::new(alphabet.symbols())
    }

    /// Number of embedding rows, including UNK and the sentinel.
    pub fn len(&self) -> usize {
        self.symbols.len() + 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn symbols(&self) -> &[char] {
        &self.symbols
    }

    pub fn get(&self, c: char) -> Option<usize> {
        self.index.get(&c).copied()
    }

    /// Lemma indices followed by the sentinel; unseen symbols become UNK.
    /// The second value counts the UNK substitutions.
    pub fn encode(&self, lemma: &[char]) -> (Vec<usize>, usize) {
        let mut unknown = 0;
        let mut out: Vec<usize> = lemma
            .iter()
            .map(|&c| {
                self.get(c).unwrap_or_else(|| {
                    unknown += 1;
                    Self::UNK
                })
            })
            .collect();
        out.push(Self::SENTINEL);
        (out, unknown)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reserved_slots_and_unknowns() {
        let v = CharVocab::new(['b', 'a', 'b']);
        assert_eq!(v.len(), 4);
        assert_eq!(v.get('b'), Some(2));
        let (idx, unk) = v.encode(&['a', 'z', 'b']);
        assert_eq!(idx, vec![3, CharVocab::UNK, 2, CharVocab::SENTINEL]);
        assert_eq!(unk, 1);
    }
}
