//! Alphabets, words, and sample sets, with SPICE text-format ingestion.
//!
//! Symbols are dense integer ids `0..alphabet.size()`. A [`SampleSet`] is a
//! multiset of words that remembers file order (for faithful round-trips)
//! alongside multiplicity counts (for frequency queries).

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{invalid, Error, Result};

/// Symbol id; always strictly below the owning alphabet's size.
pub type Symbol = usize;

/// A finite alphabet of `size` integer-coded symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alphabet {
    size: usize,
}

impl Alphabet {
    pub fn new(size: usize) -> Result<Alphabet> {
        if size == 0 {
            return invalid("alphabet size must be at least 1");
        }
        Ok(Alphabet { size })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn contains(&self, symbol: Symbol) -> bool {
        symbol < self.size
    }

    pub fn symbols(&self) -> std::ops::Range<Symbol> {
        0..self.size
    }
}

/// A finite string of symbol ids; the empty word plays the role of λ.
///
/// Words order by length first, then lexicographically (shortlex). This is
/// the canonical order used for basis indices and all deterministic output.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Word(Vec<Symbol>);

impl Word {
    pub fn empty() -> Word {
        Word(Vec::new())
    }

    pub fn from_symbols(symbols: impl Into<Vec<Symbol>>) -> Word {
        Word(symbols.into())
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Concatenation `self · other`.
    pub fn concat(&self, other: &Word) -> Word {
        let mut v = Vec::with_capacity(self.len() + other.len());
        v.extend_from_slice(&self.0);
        v.extend_from_slice(&other.0);
        Word(v)
    }

    /// The one-symbol extension `self · σ`.
    pub fn extended(&self, symbol: Symbol) -> Word {
        let mut v = Vec::with_capacity(self.len() + 1);
        v.extend_from_slice(&self.0);
        v.push(symbol);
        Word(v)
    }

    /// All prefixes from λ up to and including the word itself.
    pub fn prefixes(&self) -> impl Iterator<Item = Word> + '_ {
        (0..=self.len()).map(move |i| Word(self.0[..i].to_vec()))
    }

    /// All suffixes from λ up to and including the word itself.
    pub fn suffixes(&self) -> impl Iterator<Item = Word> + '_ {
        (0..=self.len()).map(move |i| Word(self.0[self.len() - i..].to_vec()))
    }

    /// The word with its final symbol removed, paired with that symbol.
    pub fn split_last(&self) -> Option<(Word, Symbol)> {
        let (&last, head) = self.0.split_last()?;
        Some((Word(head.to_vec()), last))
    }
}

impl From<Vec<Symbol>> for Word {
    fn from(v: Vec<Symbol>) -> Word {
        Word(v)
    }
}

impl From<&[Symbol]> for Word {
    fn from(v: &[Symbol]) -> Word {
        Word(v.to_vec())
    }
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> Ordering {
        self.len()
            .cmp(&other.len())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "λ");
        }
        let mut first = true;
        for s in &self.0 {
            if !first {
                write!(f, " ")?;
            }
            write!(f, "{s}")?;
            first = false;
        }
        Ok(())
    }
}

/// A multiset of words over a shared alphabet.
#[derive(Debug, Clone)]
pub struct SampleSet {
    alphabet: Alphabet,
    words: Vec<Word>,
    counts: BTreeMap<Word, u64>,
}

impl SampleSet {
    pub fn new(alphabet: Alphabet) -> SampleSet {
        SampleSet {
            alphabet,
            words: Vec::new(),
            counts: BTreeMap::new(),
        }
    }

    pub fn from_words(alphabet: Alphabet, words: impl IntoIterator<Item = Word>) -> Result<SampleSet> {
        let mut set = SampleSet::new(alphabet);
        for w in words {
            set.push(w)?;
        }
        Ok(set)
    }

    pub fn push(&mut self, word: Word) -> Result<()> {
        if let Some(&bad) = word.symbols().iter().find(|&&s| !self.alphabet.contains(s)) {
            return invalid(format!(
                "symbol {bad} out of range (alphabet size {})",
                self.alphabet.size()
            ));
        }
        *self.counts.entry(word.clone()).or_insert(0) += 1;
        self.words.push(word);
        Ok(())
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    /// Number of words counted with multiplicity.
    pub fn total(&self) -> u64 {
        self.words.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Words in insertion (file) order, repeats preserved.
    pub fn words(&self) -> &[Word] {
        &self.words
    }

    pub fn multiplicity(&self, word: &Word) -> u64 {
        self.counts.get(word).copied().unwrap_or(0)
    }

    /// Distinct words with multiplicities, in shortlex order.
    pub fn distinct(&self) -> impl Iterator<Item = (&Word, u64)> {
        self.counts.iter().map(|(w, &c)| (w, c))
    }

    pub fn num_distinct(&self) -> usize {
        self.counts.len()
    }

    /// `multiplicity(w) / total`.
    pub fn empirical_frequency(&self, word: &Word) -> Result<f64> {
        if self.words.is_empty() {
            return Err(Error::EmptySamples);
        }
        Ok(self.multiplicity(word) as f64 / self.total() as f64)
    }

    /// Counts, for every substring position, how often each word occurs as a
    /// prefix and as a suffix of a sample (λ and the full word included),
    /// weighted by multiplicity.
    pub fn count_substring_occurrences(&self) -> BTreeMap<Word, (u64, u64)> {
        let mut out: BTreeMap<Word, (u64, u64)> = BTreeMap::new();
        for (word, count) in self.distinct() {
            for p in word.prefixes() {
                out.entry(p).or_insert((0, 0)).0 += count;
            }
            for s in word.suffixes() {
                out.entry(s).or_insert((0, 0)).1 += count;
            }
        }
        out
    }

    /// A new sample set containing the first `n` words in file order.
    pub fn truncated(&self, n: usize) -> SampleSet {
        let words = self.words.iter().take(n).cloned();
        SampleSet::from_words(self.alphabet, words).expect("symbols already validated")
    }

    /// Reads the SPICE text format: header `N A`, then `N` lines `L s1 .. sL`.
    pub fn load_spice(path: impl AsRef<Path>) -> Result<SampleSet> {
        let file = std::fs::File::open(path)?;
        SampleSet::from_spice_reader(std::io::BufReader::new(file))
    }

    pub fn from_spice_str(text: &str) -> Result<SampleSet> {
        SampleSet::from_spice_reader(text.as_bytes())
    }

    pub fn from_spice_reader(reader: impl BufRead) -> Result<SampleSet> {
        let parse_err = |line: usize, message: String| Error::Parse { line, message };
        let mut lines = reader.lines().enumerate();

        let (_, header) = lines
            .next()
            .ok_or_else(|| parse_err(1, "missing header line".into()))?;
        let header = header?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(parse_err(
                1,
                format!("header must be `num_sequences alphabet_size`, got {fields:?}"),
            ));
        }
        let num_sequences: usize = fields[0]
            .parse()
            .map_err(|_| parse_err(1, format!("invalid sequence count `{}`", fields[0])))?;
        let alphabet_size: usize = fields[1]
            .parse()
            .map_err(|_| parse_err(1, format!("invalid alphabet size `{}`", fields[1])))?;
        let alphabet =
            Alphabet::new(alphabet_size).map_err(|e| parse_err(1, e.to_string()))?;

        let mut set = SampleSet::new(alphabet);
        for (idx, line) in lines {
            let line_no = idx + 1;
            let line = line?;
            if line.trim().is_empty() {
                return Err(parse_err(line_no, "empty line".into()));
            }
            let mut tokens = line.split_whitespace();
            let len_token = tokens.next().expect("non-empty line has a first token");
            let declared: usize = len_token
                .parse()
                .map_err(|_| parse_err(line_no, format!("invalid length `{len_token}`")))?;
            let mut symbols = Vec::with_capacity(declared);
            for tok in tokens {
                let sym: usize = tok
                    .parse()
                    .map_err(|_| parse_err(line_no, format!("invalid symbol `{tok}`")))?;
                if !alphabet.contains(sym) {
                    return Err(parse_err(
                        line_no,
                        format!("symbol {sym} out of range (alphabet size {alphabet_size})"),
                    ));
                }
                symbols.push(sym);
            }
            if symbols.len() != declared {
                return Err(parse_err(
                    line_no,
                    format!("line declares {declared} symbols but carries {}", symbols.len()),
                ));
            }
            set.push(Word::from_symbols(symbols))
                .map_err(|e| parse_err(line_no, e.to_string()))?;
        }

        if set.words.len() != num_sequences {
            return Err(parse_err(
                set.words.len() + 1,
                format!(
                    "header declares {num_sequences} sequences but file holds {}",
                    set.words.len()
                ),
            ));
        }
        Ok(set)
    }

    pub fn to_spice_string(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{} {}\n", self.words.len(), self.alphabet.size()));
        for w in &self.words {
            out.push_str(&w.len().to_string());
            for s in w.symbols() {
                out.push(' ');
                out.push_str(&s.to_string());
            }
            out.push('\n');
        }
        out
    }

    pub fn write_spice(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        file.write_all(self.to_spice_string().as_bytes())?;
        Ok(())
    }
}


#[cfg(test)]
mod properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn spice_text_round_trips(words in prop::collection::vec(
            prop::collection::vec(0usize..3, 0..8),
            1..20,
        )) {
            let alphabet = Alphabet::new(3).unwrap();
            let set = SampleSet::from_words(
                alphabet,
                words.into_iter().map(Word::from_symbols),
            )
            .unwrap();
            let text = set.to_spice_string();
            let back = SampleSet::from_spice_str(&text).unwrap();
            prop_assert_eq!(back.words(), set.words());
            prop_assert_eq!(back.alphabet(), set.alphabet());
            prop_assert_eq!(back.to_spice_string(), text);
        }
    }
}
