//! Transducer actions, the static oracle, and the transducer itself.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::alignment::AlignedPair;
use crate::error::{Error, Result};
use crate::patches::PatchTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Copy,
    Move,
    Eow,
    Patch(u32),
    Emit(char),
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::Copy => f.write_str("COPY"),
            Action::Move => f.write_str("MOVE"),
            Action::Eow => f.write_str("EOW"),
            Action::Patch(k) => write!(f, "PATCH:{k}"),
            Action::Emit(c) => write!(f, "EMIT:{c}"),
        }
    }
}

impl FromStr for Action {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("unknown action token {s:?}"));
        match s {
            "COPY" => Ok(Action::Copy),
            "MOVE" => Ok(Action::Move),
            "EOW" => Ok(Action::Eow),
            _ => {
                if let Some(k) = s.strip_prefix("PATCH:") {
                    k.parse().map(Action::Patch).map_err(|_| bad())
                } else if let Some(sym) = s.strip_prefix("EMIT:") {
                    let mut it = sym.chars();
                    match (it.next(), it.next()) {
                        (Some(c), None) => Ok(Action::Emit(c)),
                        _ => Err(bad()),
                    }
                } else {
                    Err(bad())
                }
            }
        }
    }
}

pub fn format_actions(actions: &[Action]) -> String {
    actions
        .iter()
        .map(Action::to_string)
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn parse_actions(line: &str) -> Result<Vec<Action>> {
    line.split(' ').filter(|t| !t.is_empty()).map(str::parse).collect()
}

/// Output vocabulary of the model: COPY, MOVE, EOW, then PATCH by id, then
/// EMIT by codepoint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionVocab {
    actions: Vec<Action>,
    index: HashMap<Action, usize>,
}

impl ActionVocab {
    pub fn new<I: IntoIterator<Item = char>>(patch_classes: u32, emit_symbols: I) -> Self {
        let mut emits: Vec<char> = emit_symbols.into_iter().collect();
        emits.sort_unstable();
        emits.dedup();
        let actions: Vec<Action> = [Action::Copy, Action::Move, Action::Eow]
            .into_iter()
            .chain((0..patch_classes).map(Action::Patch))
            .chain(emits.into_iter().map(Action::Emit))
            .collect();
        Self::from_actions(actions).expect("generated vocabulary has no duplicates")
    }

    /// Rebuilds a vocabulary from an explicit ordering (checkpoints).
    pub fn from_actions(actions: Vec<Action>) -> Result<Self> {
        let mut index = HashMap::with_capacity(actions.len());
        for (i, a) in actions.iter().enumerate() {
            if index.insert(*a, i).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate action {a}")));
            }
        }
        Ok(ActionVocab { actions, index })
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn index(&self, action: &Action) -> Option<usize> {
        self.index.get(action).copied()
    }

    pub fn get(&self, i: usize) -> Action {
        self.actions[i]
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }
}

/// Static oracle over an aligned pair.
///
/// Columns are translated as: gap in lemma → EMIT; gap in target → MOVE;
/// equal → COPY MOVE; patchable → PATCH MOVE; otherwise EMIT MOVE; then EOW.
///
/// Trailing insertions land after the last MOVE, i.e. at the sentinel, where
/// the transducer drops an EMIT repeating the previous output symbol. When
/// that would lose a symbol of the target, the trailing EMIT block is placed
/// before the final MOVE instead so the gold sequence still reproduces the
/// target.
pub fn derive_oracle(aligned: &AlignedPair, table: &PatchTable) -> Vec<Action> {
    let gap = aligned.gap;
    let mut actions = Vec::with_capacity(2 * aligned.len() + 1);
    for (cw, ct) in aligned.columns() {
        if cw == gap {
            actions.push(Action::Emit(ct));
        } else if ct == gap {
            actions.push(Action::Move);
        } else if cw == ct {
            actions.extend([Action::Copy, Action::Move]);
        } else if let Some(k) = table.find_patch(cw, ct) {
            actions.extend([Action::Patch(k), Action::Move]);
        } else {
            actions.extend([Action::Emit(ct), Action::Move]);
        }
    }

    if let Some(last_move) = actions.iter().rposition(|a| *a == Action::Move) {
        let trailing = actions.len() - last_move - 1;
        let target: Vec<char> = aligned.target_aligned.iter().copied().filter(|&c| c != gap).collect();
        let first = target.len() - trailing;
        let repeats = (first.max(1)..target.len()).any(|i| target[i] == target[i - 1]);
        if trailing > 0 && repeats {
            let mv = actions.remove(last_move);
            actions.push(mv);
        }
    }
    actions.push(Action::Eow);
    actions
}

/// `min(200, 4·|lemma| + 40)`.
pub fn default_step_cap(lemma_len: usize) -> usize {
    (4 * lemma_len + 40).min(200)
}

/// Left-to-right transducer over a lemma with an end-of-input sentinel at
/// position `|lemma|`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransducerState {
    input: Vec<char>,
    pointer: usize,
    output: Vec<char>,
    done: bool,
    steps: usize,
    cap: usize,
}

impl TransducerState {
    pub fn new(lemma: &str) -> Self {
        let input: Vec<char> = lemma.chars().collect();
        let cap = default_step_cap(input.len());
        Self::with_cap(input, cap)
    }

    pub fn with_cap(input: Vec<char>, cap: usize) -> Self {
        TransducerState {
            input,
            pointer: 0,
            output: Vec::new(),
            done: cap == 0,
            steps: 0,
            cap,
        }
    }

    pub fn pointer(&self) -> usize {
        self.pointer
    }

    pub fn at_sentinel(&self) -> bool {
        self.pointer >= self.input.len()
    }

    /// Symbol under the pointer, `None` at the sentinel.
    pub fn current(&self) -> Option<char> {
        self.input.get(self.pointer).copied()
    }

    pub fn output(&self) -> &[char] {
        &self.output
    }

    pub fn output_string(&self) -> String {
        self.output.iter().collect()
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn step(&mut self, action: Action, table: &PatchTable) -> Result<()> {
        if self.done {
            return Err(Error::TransducerDone);
        }
        match action {
            Action::Emit(s) => {
                let repeat = self.at_sentinel() && self.output.last() == Some(&s);
                if !repeat {
                    self.output.push(s);
                }
            }
            Action::Copy => {
                if let Some(c) = self.current() {
                    self.output.push(c);
                }
            }
            Action::Patch(k) => {
                if let Some(r) = self.current().and_then(|c| table.apply(c, k)) {
                    self.output.push(r);
                }
            }
            Action::Move => {
                if !self.at_sentinel() {
                    self.pointer += 1;
                }
            }
            Action::Eow => self.done = true,
        }
        self.steps += 1;
        if self.steps >= self.cap {
            self.done = true;
        }
        Ok(())
    }
}

/// Applies `actions` to `lemma` until EOW, the step cap, or the end of the
/// stream.
pub fn run(lemma: &str, actions: &[Action], table: &PatchTable) -> Result<String> {
    let mut state = TransducerState::new(lemma);
    for &a in actions {
        if state.is_done() {
            break;
        }
        state.step(a, table)?;
    }
    Ok(state.output_string())
}

/// Which actions are admissible in `state`. Only PATCH classes undefined at
/// the pointer symbol are excluded, plus EOW on an empty first step when
/// `forbid_empty_eow` is set.
pub fn valid_action_mask(
    state: &TransducerState,
    vocab: &ActionVocab,
    table: &PatchTable,
    forbid_empty_eow: bool,
) -> Vec<bool> {
    vocab
        .actions()
        .iter()
        .map(|a| match a {
            Action::Patch(k) => state.current().and_then(|c| table.apply(c, *k)).is_some(),
            Action::Eow => !(forbid_empty_eow && state.steps() == 0 && state.output().is_empty()),
            _ => true,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alignment::align;
    use crate::patches::{build_table, PatchClass};
    use proptest::prelude::*;

    fn table() -> PatchTable {
        build_table(&[
            PatchClass { xor_bits: vec![], pairs: vec![('a', 'á'), ('e', 'é')] },
            PatchClass { xor_bits: vec![], pairs: vec![('a', 'ā'), ('e', 'ē')] },
        ])
        .unwrap()
    }

    fn oracle(w: &str, t: &str, table: &PatchTable) -> Vec<Action> {
        derive_oracle(&align(w, t, table, '#').unwrap(), table)
    }

    use Action::*;

    #[test]
    fn tokens_round_trip() {
        let acts = vec![Copy, Move, Patch(7), Emit('m'), Eow];
        let line = format_actions(&acts);
        assert_eq!(line, "COPY MOVE PATCH:7 EMIT:m EOW");
        assert_eq!(parse_actions(&line).unwrap(), acts);
        assert!(parse_actions("JUMP").is_err());
        assert!(parse_actions("EMIT:ab").is_err());
    }

    #[test]
    fn vocab_order() {
        let v = ActionVocab::new(2, ['b', 'a', 'b']);
        assert_eq!(v.actions(), &[Copy, Move, Eow, Patch(0), Patch(1), Emit('a'), Emit('b')]);
        assert_eq!(v.index(&Emit('b')), Some(6));
        assert!(ActionVocab::from_actions(vec![Copy, Copy]).is_err());
    }

    #[test]
    fn oracle_identical() {
        assert_eq!(oracle("ab", "ab", &PatchTable::empty()), vec![Copy, Move, Copy, Move, Eow]);
    }

    #[test]
    fn oracle_latvian() {
        let t = table();
        let macron = t.find_patch('a', 'ā').unwrap();
        let acts = oracle("bungas", "bungām", &t);
        let mut expected = Vec::new();
        for _ in 0..4 {
            expected.extend([Copy, Move]);
        }
        expected.extend([Patch(macron), Move, Emit('m'), Move, Eow]);
        assert_eq!(acts, expected);
        assert_eq!(run("bungas", &acts, &t).unwrap(), "bungām");
    }

    #[test]
    fn oracle_swedish() {
        let acts = oracle("skapad", "skapade", &PatchTable::empty());
        let mut expected = Vec::new();
        for _ in 0..6 {
            expected.extend([Copy, Move]);
        }
        expected.extend([Emit('e'), Eow]);
        assert_eq!(acts, expected);
    }

    #[test]
    fn oracle_repeated_trailing_insertion() {
        let empty = PatchTable::empty();
        let acts = oracle("ab", "abcc", &empty);
        assert_eq!(acts, vec![Copy, Move, Copy, Emit('c'), Emit('c'), Move, Eow]);
        assert_eq!(run("ab", &acts, &empty).unwrap(), "abcc");
        let haida = oracle("ñíiyä", "ñíiyä'waa", &empty);
        assert_eq!(run("ñíiyä", &haida, &empty).unwrap(), "ñíiyä'waa");
    }

    #[test]
    fn step_semantics() {
        let empty = PatchTable::empty();
        let mut s = TransducerState::new("ab");
        s.step(Copy, &empty).unwrap();
        assert_eq!(s.output_string(), "a");
        assert_eq!(run("ab", &[Move, Copy, Eow], &empty).unwrap(), "b");
        assert_eq!(run("x", &[Eow], &empty).unwrap(), "");

        let mut s = TransducerState::new("a");
        s.step(Move, &empty).unwrap();
        assert!(s.at_sentinel());
        s.step(Move, &empty).unwrap();
        assert_eq!(s.pointer(), 1);
        s.step(Copy, &empty).unwrap();
        s.step(Patch(0), &table()).unwrap();
        assert_eq!(s.output_string(), "");
        s.step(Eow, &empty).unwrap();
        assert!(matches!(s.step(Copy, &empty), Err(Error::TransducerDone)));
    }

    #[test]
    fn sentinel_emit_dedup() {
        let empty = PatchTable::empty();
        let lemma = "ñíiyä";
        let mut acts: Vec<Action> = Vec::new();
        for _ in lemma.chars() {
            acts.extend([Copy, Move]);
        }
        acts.extend([Emit('\''), Emit('w'), Emit('a'), Emit('a'), Eow]);
        assert_eq!(run(lemma, &acts, &empty).unwrap(), "ñíiyä'wa");
        // Before the sentinel, repeated EMITs are kept.
        assert_eq!(run("x", &[Emit('a'), Emit('a'), Eow], &empty).unwrap(), "aa");
    }

    #[test]
    fn step_cap_forces_done() {
        let empty = PatchTable::empty();
        let mut s = TransducerState::with_cap(vec!['a'], 3);
        for _ in 0..3 {
            s.step(Emit('z'), &empty).unwrap();
        }
        assert!(s.is_done());
        assert_eq!(default_step_cap(5), 60);
        assert_eq!(default_step_cap(100), 200);
        let stream = vec![Emit('q'); 1000];
        assert_eq!(run("ab", &stream, &empty).unwrap().chars().count(), default_step_cap(2));
    }

    #[test]
    fn masks() {
        let t = table();
        let vocab = ActionVocab::new(t.class_count(), ['x']);
        let at_b = TransducerState::new("ba");
        let mask = valid_action_mask(&at_b, &vocab, &t, false);
        assert_eq!(mask, vec![true, true, true, false, false, true]);
        let mut at_a = TransducerState::new("ba");
        at_a.step(Move, &t).unwrap();
        let mask = valid_action_mask(&at_a, &vocab, &t, false);
        assert!(mask.iter().all(|&m| m));
        let fresh = TransducerState::new("ba");
        assert!(!valid_action_mask(&fresh, &vocab, &t, true)[2]);
    }

    proptest! {
        #[test]
        fn oracle_round_trip(w in "[abeáé]{1,10}", t in "[abeáéāc]{1,10}", use_table in any::<bool>()) {
            let table = if use_table { table() } else { PatchTable::empty() };
            let aligned = align(&w, &t, &table, '#').unwrap();
            let acts = derive_oracle(&aligned, &table);
            prop_assert!(acts.len() <= 2 * aligned.len() + 1);
            prop_assert_eq!(acts.last(), Some(&Eow));
            prop_assert_eq!(run(&w, &acts, &table).unwrap(), t);
        }

        #[test]
        fn run_terminates_within_cap(lemma in "[ab]{1,6}", stream in proptest::collection::vec(0u8..4, 0..400)) {
            let empty = PatchTable::empty();
            let mut s = TransducerState::new(&lemma);
            for code in stream {
                if s.is_done() { break; }
                let a = match code { 0 => Copy, 1 => Move, 2 => Emit('z'), _ => Patch(0) };
                s.step(a, &empty).unwrap();
            }
            prop_assert!(s.steps() <= default_step_cap(lemma.chars().count()));
        }
    }
}
