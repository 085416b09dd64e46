//! Label strings over the alphabet `{1..b, *}`, indexed right-to-left from
//! position 0, together with the final-substring order and the independence,
//! clearing and padding predicates.
//!
//! The textual form writes positions left-to-right from the highest one, so
//! `"*12"` has `*` at position 2, `1` at position 1 and `2` at position 0.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Symbol value used for `*`.
pub const STAR: u8 = 10;
/// Symbol value used for the padding placeholder (serialized as `_`).
pub const BOX: u8 = 11;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LabelError {
    #[error("label must be nonempty")]
    Empty,
    #[error("base must be in 2..=9, got {0}")]
    BadBase(u8),
    #[error("position 0 must hold 1 or 2, got {0}")]
    BadPositionZero(String),
    #[error("invalid symbol {symbol} for base {base}")]
    InvalidSymbol { symbol: String, base: u8 },
    #[error("labels have mismatched bases {0} and {1}")]
    MismatchedBase(u8, u8),
    #[error("pad index {index} out of range for padded length {padded_len}")]
    PadIndexOutOfRange { index: u16, padded_len: u16 },
    #[error("duplicate pad index {0}")]
    DuplicatePadIndex(u16),
    #[error("expansion would place symbol {0} > 2 at position 0")]
    ExpansionViolatesPositionZero(u8),
    #[error("label set must be nonempty")]
    EmptySet,
    #[error("clearing check requires star-free labels, got {0}")]
    StarInClearingSet(String),
}

fn sym_to_char(s: u8) -> char {
    match s {
        STAR => '*',
        BOX => '_',
        d @ 1..=9 => (b'0' + d) as char,
        _ => '?',
    }
}

fn char_to_sym(c: char) -> Option<u8> {
    match c {
        '*' => Some(STAR),
        '_' => Some(BOX),
        '1'..='9' => Some(c as u8 - b'0'),
        _ => None,
    }
}

/// Key giving the textual (ASCII) ordering of symbols: `*` < digits < `_`.
fn sym_order_key(s: u8) -> u8 {
    match s {
        STAR => 0,
        BOX => 100,
        d => d,
    }
}

/// A string over `{1..b, *}` whose position-0 symbol is 1 or 2.
///
/// `syms[i]` is the symbol at position `i`; position 0 is the rightmost symbol
/// of the textual form.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Label {
    base: u8,
    syms: Vec<u8>,
}

impl Label {
    pub fn new(base: u8, syms: Vec<u8>) -> Result<Self, LabelError> {
        if !(2..=9).contains(&base) {
            return Err(LabelError::BadBase(base));
        }
        if syms.is_empty() {
            return Err(LabelError::Empty);
        }
        if !(syms[0] == 1 || syms[0] == 2) {
            return Err(LabelError::BadPositionZero(sym_to_char(syms[0]).to_string()));
        }
        for &s in &syms {
            let ok = s == STAR || (1..=base).contains(&s);
            if !ok {
                return Err(LabelError::InvalidSymbol {
                    symbol: sym_to_char(s).to_string(),
                    base,
                });
            }
        }
        Ok(Label { base, syms })
    }

    /// Parses the textual form, e.g. `"*12"` with position 0 rightmost.
    pub fn parse(text: &str, base: u8) -> Result<Self, LabelError> {
        let mut syms = Vec::with_capacity(text.len());
        for c in text.chars().rev() {
            let s = char_to_sym(c).ok_or(LabelError::InvalidSymbol {
                symbol: c.to_string(),
                base,
            })?;
            syms.push(s);
        }
        Label::new(base, syms)
    }

    pub fn base(&self) -> u8 {
        self.base
    }

    pub fn len(&self) -> usize {
        self.syms.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Symbol at position `pos` (0 = rightmost), if in range.
    pub fn sym(&self, pos: usize) -> Option<u8> {
        self.syms.get(pos).copied()
    }

    pub fn syms(&self) -> &[u8] {
        &self.syms
    }

    pub fn is_star_free(&self) -> bool {
        self.syms.iter().all(|&s| s != STAR)
    }

    /// Position of the unique `*`, if the label contains exactly one.
    pub fn star_position(&self) -> Option<usize> {
        let mut found = None;
        for (i, &s) in self.syms.iter().enumerate() {
            if s == STAR {
                if found.is_some() {
                    return None;
                }
                found = Some(i);
            }
        }
        found
    }

    /// New label with `sym` prepended at the highest position.
    pub fn prepend(&self, sym: u8) -> Result<Label, LabelError> {
        let mut syms = self.syms.clone();
        syms.push(sym);
        Label::new(self.base, syms)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &s in self.syms.iter().rev() {
            write!(f, "{}", sym_to_char(s))?;
        }
        Ok(())
    }
}

impl fmt::Debug for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl Serialize for Label {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&self.to_string())
    }
}

// Labels deserialize via `Label::parse` with the base taken from context, so a
// bare Deserialize is deliberately not provided; containers carry `b`.

/// Textual (left-to-right) lexicographic order, matching the serialized form.
impl Ord for Label {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        let a: Vec<u8> = self.syms.iter().rev().map(|&s| sym_order_key(s)).collect();
        let b: Vec<u8> = other.syms.iter().rev().map(|&s| sym_order_key(s)).collect();
        a.cmp(&b)
    }
}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// True iff `x` is a final substring of `y`: `len(x) <= len(y)` and the
/// symbols agree on every position of `x`.
pub fn is_final_substring(x: &Label, y: &Label) -> Result<bool, LabelError> {
    if x.base != y.base {
        return Err(LabelError::MismatchedBase(x.base, y.base));
    }
    if x.len() > y.len() {
        return Ok(false);
    }
    Ok(x.syms.iter().zip(y.syms.iter()).all(|(a, b)| a == b))
}

/// Trie over symbol sequences read from position 0 upward. A label `y` is a
/// final substring of `x` exactly when the walk of `x` passes the terminal
/// node of `y`.
struct SuffixTrie {
    // children indexed by symbol 1..=STAR
    children: Vec<[u32; STAR as usize + 1]>,
    terminal: Vec<Option<u32>>, // label index ending here
    parent: Vec<u32>,
    // representative terminal strictly below this node, if any
    below: Vec<Option<u32>>,
}

const NO_NODE: u32 = u32::MAX;

impl SuffixTrie {
    fn new() -> Self {
        SuffixTrie {
            children: vec![[NO_NODE; STAR as usize + 1]],
            terminal: vec![None],
            parent: vec![NO_NODE],
            below: vec![None],
        }
    }

    fn insert(&mut self, label: &Label, idx: u32) {
        let mut cur = 0usize;
        for &s in label.syms() {
            let slot = s as usize;
            let next = self.children[cur][slot];
            if next == NO_NODE {
                let id = self.children.len() as u32;
                self.children.push([NO_NODE; STAR as usize + 1]);
                self.terminal.push(None);
                self.parent.push(cur as u32);
                self.below.push(None);
                self.children[cur][slot] = id;
                cur = id as usize;
            } else {
                cur = next as usize;
            }
        }
        if self.terminal[cur].is_none() {
            self.terminal[cur] = Some(idx);
        }
    }

    /// Fills `below` once all labels are inserted.
    fn seal(&mut self) {
        // children are created after parents, so a reverse pass suffices
        for id in (1..self.children.len()).rev() {
            let t = self.terminal[id].or(self.below[id]);
            if t.is_some() {
                let p = self.parent[id] as usize;
                if self.below[p].is_none() {
                    self.below[p] = t;
                }
            }
        }
    }

    /// Walks `label`; returns the index of a distinct terminal passed strictly
    /// before the end (a proper final substring of `label`), if any, plus the
    /// end node.
    fn walk(&self, label: &Label) -> (Option<u32>, Option<usize>) {
        let mut cur = 0usize;
        let last = label.len() - 1;
        for (i, &s) in label.syms().iter().enumerate() {
            let next = self.children[cur][s as usize];
            if next == NO_NODE {
                return (None, None);
            }
            cur = next as usize;
            if i < last {
                if let Some(t) = self.terminal[cur] {
                    return (Some(t), Some(cur));
                }
            }
        }
        (None, Some(cur))
    }
}

/// Checks pairwise final-substring freedom. Returns `None` when independent,
/// otherwise one violating ordered pair `(shorter, longer)`.
pub fn independence_witness(labels: &[Label]) -> Result<Option<(Label, Label)>, LabelError> {
    let Some(first) = labels.first() else {
        return Ok(None);
    };
    let base = first.base;
    for l in labels {
        if l.base != base {
            return Err(LabelError::MismatchedBase(base, l.base));
        }
    }
    let mut sorted: Vec<&Label> = labels.iter().collect();
    sorted.sort();
    sorted.dedup();
    let mut trie = SuffixTrie::new();
    for (i, l) in sorted.iter().enumerate() {
        trie.insert(l, i as u32);
    }
    trie.seal();
    for l in &sorted {
        let (passed, end) = trie.walk(l);
        if let Some(t) = passed {
            return Ok(Some(((*sorted[t as usize]).clone(), (*l).clone())));
        }
        if let Some(end) = end {
            if let Some(b) = trie.below[end] {
                return Ok(Some(((*l).clone(), (*sorted[b as usize]).clone())));
            }
        }
    }
    Ok(None)
}

pub fn is_independent(labels: &[Label]) -> Result<bool, LabelError> {
    Ok(independence_witness(labels)?.is_none())
}

/// Checks the clearing property by exhausting every star-free string whose
/// length equals the maximum label length. Returns `None` when clearing,
/// otherwise the lexicographically first uncovered string.
pub fn clearing_witness(labels: &[Label], base: u8) -> Result<Option<Label>, LabelError> {
    if labels.is_empty() {
        return Err(LabelError::EmptySet);
    }
    if !(2..=9).contains(&base) {
        return Err(LabelError::BadBase(base));
    }
    for l in labels {
        if l.base != base {
            return Err(LabelError::MismatchedBase(base, l.base));
        }
        if !l.is_star_free() {
            return Err(LabelError::StarInClearingSet(l.to_string()));
        }
    }
    let len = labels.iter().map(|l| l.len()).max().unwrap();
    let mut trie = SuffixTrie::new();
    for (i, l) in labels.iter().enumerate() {
        trie.insert(l, i as u32);
    }
    trie.seal();

    // odometer over positions len-1 .. 0 in textual lexicographic order
    let mut syms = vec![1u8; len]; // syms[i] = symbol at position i
    loop {
        let covered = {
            let mut cur = 0usize;
            let mut hit = false;
            for &s in syms.iter() {
                let next = trie.children[cur][s as usize];
                if next == NO_NODE {
                    break;
                }
                cur = next as usize;
                if trie.terminal[cur].is_some() {
                    hit = true;
                    break;
                }
            }
            hit
        };
        if !covered {
            return Ok(Some(Label::new(base, syms)?));
        }
        // advance: position 0 ranges over {1,2}, the rest over {1..base};
        // position len-1 is the most significant textually, so increment from
        // the low positions only after exhausting high ones -- i.e. treat
        // position 0 as the innermost loop.
        let mut pos = 0usize;
        loop {
            let cap = if pos == 0 { 2 } else { base };
            if syms[pos] < cap {
                syms[pos] += 1;
                break;
            }
            syms[pos] = 1;
            pos += 1;
            if pos == len {
                return Ok(None);
            }
        }
    }
}

pub fn is_clearing(labels: &[Label], base: u8) -> Result<bool, LabelError> {
    Ok(clearing_witness(labels, base)?.is_none())
}

/// A label interleaved with `_` placeholders at the positions of its free set.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PaddedLabel {
    base: u8,
    syms: Vec<u8>,
}

impl PaddedLabel {
    pub fn base(&self) -> u8 {
        self.base
    }

    pub fn len(&self) -> usize {
        self.syms.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn syms(&self) -> &[u8] {
        &self.syms
    }

    pub fn sym(&self, pos: usize) -> Option<u8> {
        self.syms.get(pos).copied()
    }

    /// Positions holding the placeholder, ascending.
    pub fn free_positions(&self) -> Vec<u16> {
        self.syms
            .iter()
            .enumerate()
            .filter(|(_, &s)| s == BOX)
            .map(|(i, _)| i as u16)
            .collect()
    }

    /// Removes all placeholder positions, recovering the underlying label.
    pub fn strip(&self) -> Result<Label, LabelError> {
        let syms: Vec<u8> = self.syms.iter().copied().filter(|&s| s != BOX).collect();
        Label::new(self.base, syms)
    }

    /// Replaces the placeholders with `digits` (one per free position,
    /// ascending position order).
    pub fn fill(&self, digits: &[u8]) -> Result<Label, LabelError> {
        let mut syms = self.syms.clone();
        let mut di = 0usize;
        for s in syms.iter_mut() {
            if *s == BOX {
                let d = digits[di];
                di += 1;
                if !(1..=self.base).contains(&d) {
                    return Err(LabelError::InvalidSymbol {
                        symbol: sym_to_char(d).to_string(),
                        base: self.base,
                    });
                }
                *s = d;
            }
        }
        debug_assert_eq!(di, digits.len());
        if !(syms[0] == 1 || syms[0] == 2) {
            return Err(LabelError::ExpansionViolatesPositionZero(syms[0]));
        }
        Label::new(self.base, syms)
    }

    /// All `b^|free|` fillings, in ascending digit order (low position least
    /// significant). Errors if any filling would violate the position-0 rule.
    pub fn expand(&self) -> Result<Vec<Label>, LabelError> {
        let free = self.free_positions();
        if free.contains(&0) && self.base > 2 {
            return Err(LabelError::ExpansionViolatesPositionZero(3));
        }
        let k = free.len();
        let total = (self.base as usize).checked_pow(k as u32).expect("expansion too large");
        let mut out = Vec::with_capacity(total);
        let mut digits = vec![1u8; k];
        loop {
            out.push(self.fill(&digits)?);
            let mut i = 0usize;
            loop {
                if i == k {
                    return Ok(out);
                }
                if digits[i] < self.base {
                    digits[i] += 1;
                    break;
                }
                digits[i] = 1;
                i += 1;
            }
        }
    }

    pub fn parse(text: &str, base: u8) -> Result<Self, LabelError> {
        let mut syms = Vec::with_capacity(text.len());
        for c in text.chars().rev() {
            let s = char_to_sym(c).ok_or(LabelError::InvalidSymbol {
                symbol: c.to_string(),
                base,
            })?;
            syms.push(s);
        }
        if syms.is_empty() {
            return Err(LabelError::Empty);
        }
        Ok(PaddedLabel { base, syms })
    }
}

impl fmt::Display for PaddedLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &s in self.syms.iter().rev() {
            write!(f, "{}", sym_to_char(s))?;
        }
        Ok(())
    }
}

impl fmt::Debug for PaddedLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl Serialize for PaddedLabel {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for PaddedLabel {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        // base 9 accepts any digit; callers re-validate against their own base
        PaddedLabel::parse(&s, 9).map_err(serde::de::Error::custom)
    }
}

/// Spreads the symbols of `x` over the positions not in `positions` and fills
/// `positions` with placeholders.
pub fn pad(x: &Label, positions: &[u16]) -> Result<PaddedLabel, LabelError> {
    let padded_len = x.len() + positions.len();
    let mut sorted = positions.to_vec();
    sorted.sort_unstable();
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            return Err(LabelError::DuplicatePadIndex(w[0]));
        }
    }
    if let Some(&last) = sorted.last() {
        if last as usize >= padded_len {
            return Err(LabelError::PadIndexOutOfRange {
                index: last,
                padded_len: padded_len as u16,
            });
        }
    }
    let mut syms = vec![BOX; padded_len];
    let mut xi = 0usize;
    for (pos, s) in syms.iter_mut().enumerate() {
        if !sorted.contains(&(pos as u16)) {
            *s = x.syms[xi];
            xi += 1;
        }
    }
    debug_assert_eq!(xi, x.len());
    Ok(PaddedLabel { base: x.base, syms })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l(s: &str, b: u8) -> Label {
        Label::parse(s, b).unwrap()
    }

    fn set(strs: &[&str], b: u8) -> Vec<Label> {
        strs.iter().map(|s| l(s, b)).collect()
    }

    #[test]
    fn final_substring_examples() {
        assert!(is_final_substring(&l("12", 3), &l("212", 3)).unwrap());
        assert!(is_final_substring(&l("1", 3), &l("1", 3)).unwrap());
        assert!(!is_final_substring(&l("22", 3), &l("212", 3)).unwrap());
        // "1" vs "12": position 0 of "12" is 2
        assert!(!is_final_substring(&l("1", 3), &l("12", 3)).unwrap());
        assert_eq!(
            is_final_substring(&l("1", 3), &l("12", 4)).unwrap_err(),
            LabelError::MismatchedBase(3, 4)
        );
    }

    #[test]
    fn independence_examples() {
        // {"1","12"} is independent: positions 0 differ
        assert!(is_independent(&set(&["1", "12"], 3)).unwrap());
        let w = independence_witness(&set(&["12", "212"], 3)).unwrap().unwrap();
        assert_eq!((w.0.to_string(), w.1.to_string()), ("12".into(), "212".into()));
        assert!(is_independent(&set(&["1", "12", "122", "222", "322"], 3)).unwrap());
    }

    #[test]
    fn clearing_examples() {
        let w = clearing_witness(&set(&["1", "12", "122", "222", "322"], 3), 3)
            .unwrap()
            .unwrap();
        assert_eq!(w.to_string(), "132");
        assert_eq!(
            clearing_witness(&[], 3).unwrap_err(),
            LabelError::EmptySet
        );
    }

    #[test]
    fn pad_and_expand_paper_example() {
        let p = pad(&l("211", 2), &[2, 3]).unwrap();
        assert_eq!(p.to_string(), "2__11");
        let expanded = p.expand().unwrap();
        let strs: Vec<String> = expanded.iter().map(|x| x.to_string()).collect();
        let mut sorted = strs.clone();
        sorted.sort();
        assert_eq!(sorted, vec!["21111", "21211", "22111", "22211"]);
    }

    #[test]
    fn pad_identity_and_low_position() {
        assert_eq!(pad(&l("1", 3), &[]).unwrap().to_string(), "1");
        assert_eq!(
            pad(&l("1", 3), &[]).unwrap().expand().unwrap(),
            vec![l("1", 3)]
        );
        let p = pad(&l("12", 3), &[0]).unwrap();
        assert_eq!(p.to_string(), "12_");
        // filling position 0 with 3 violates the position-0 rule
        assert!(p.expand().is_err());
    }

    #[test]
    fn expand_single_free_position() {
        let p = pad(&l("12", 3), &[2]).unwrap();
        assert_eq!(p.to_string(), "_12");
        let strs: Vec<String> = p.expand().unwrap().iter().map(|x| x.to_string()).collect();
        assert_eq!(strs, vec!["112", "212", "312"]);
    }

    #[test]
    fn pad_index_out_of_range() {
        assert_eq!(
            pad(&l("12", 3), &[4]).unwrap_err(),
            LabelError::PadIndexOutOfRange { index: 4, padded_len: 3 }
        );
    }

    #[test]
    fn clearing_implies_longer_strings_covered() {
        // for a clearing set, every string one longer is still covered
        let y = set(&["1", "12", "122", "222", "322", "132", "232", "332"], 3);
        assert!(is_clearing(&y, 3).unwrap());
        let len = 1 + y.iter().map(|x| x.len()).max().unwrap();
        let mut syms = vec![1u8; len];
        loop {
            let cand = Label::new(3, syms.clone()).unwrap();
            assert!(
                y.iter().any(|p| is_final_substring(p, &cand).unwrap()),
                "uncovered: {cand}"
            );
            let mut pos = 0usize;
            loop {
                let cap = if pos == 0 { 2 } else { 3 };
                if syms[pos] < cap {
                    syms[pos] += 1;
                    break;
                }
                syms[pos] = 1;
                pos += 1;
                if pos == len {
                    return;
                }
            }
        }
    }

    #[test]
    fn textual_order() {
        let mut v = set(&["212", "122", "1132", "222"], 3);
        v.sort();
        let strs: Vec<String> = v.iter().map(|x| x.to_string()).collect();
        assert_eq!(strs, vec!["1132", "122", "212", "222"]);
    }
}
