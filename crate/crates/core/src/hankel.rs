//! Hankel matrices estimated from samples or computed exactly.
//!
//! The Hankel matrix of a function on words has one row per prefix and
//! one column per suffix, with `H[u, v] = f(uv)`. Learning only ever sees
//! finite blocks: a basis picks prefix and suffix sets, rows are extended
//! to every one-symbol continuation of a prefix, and the block for symbol
//! `sigma` holds `f(u sigma v)`. Keeping the prefix set closed under
//! prefixes is what lets a learned model replay every basis row from the
//! empty word outward.

use std::collections::BTreeSet;
use std::io::{BufWriter, Write as _};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Alphabet, SampleSet, Word};
use crate::linwfa::Wfa;
use crate::{invalid, Error, Result};

/// Smallest superset of `words` closed under taking prefixes.
///
/// The empty word is always included. Iteration order of the result is
/// length-then-lexicographic.
pub fn prefix_closure(words: impl IntoIterator<Item = Word>) -> BTreeSet<Word> {
    let mut out = BTreeSet::new();
    out.insert(Word::empty());
    for w in words {
        for p in w.prefixes() {
            out.insert(p);
        }
    }
    out
}

/// Prefixes followed by their one-symbol extensions.
///
/// Keeps `prefixes` in their given order, then appends every extension
/// `u sigma` not already present, in length-then-lexicographic order.
pub fn p_closure(prefixes: &[Word], alphabet: Alphabet) -> Vec<Word> {
    let present: BTreeSet<&Word> = prefixes.iter().collect();
    let mut extra = BTreeSet::new();
    for u in prefixes {
        for s in alphabet.symbols() {
            let e = u.extended(s);
            if !present.contains(&e) {
                extra.insert(e);
            }
        }
    }
    let mut out = prefixes.to_vec();
    out.extend(extra);
    out
}

/// Prefix and suffix index sets for a Hankel block.
///
/// Prefixes are closed under taking prefixes and sorted
/// length-then-lexicographically, so the empty word sits at index 0 on
/// both axes. The closed row list extends the prefixes with every
/// one-symbol continuation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Basis {
    alphabet: Alphabet,
    prefixes: Vec<Word>,
    suffixes: Vec<Word>,
    closed: Vec<Word>,
    extension_rows: Vec<Vec<usize>>,
}

impl Basis {
    pub fn new(
        alphabet: Alphabet,
        prefixes: impl IntoIterator<Item = Word>,
        suffixes: impl IntoIterator<Item = Word>,
    ) -> Result<Basis> {
        let prefixes: Vec<Word> = prefix_closure(prefixes).into_iter().collect();
        let mut suffix_set: BTreeSet<Word> = suffixes.into_iter().collect();
        suffix_set.insert(Word::empty());
        let suffixes: Vec<Word> = suffix_set.into_iter().collect();

        for w in prefixes.iter().chain(&suffixes) {
            for &s in w.symbols() {
                if !alphabet.contains(s) {
                    return invalid(format!("basis word {w} uses symbol {s} outside alphabet"));
                }
            }
        }

        let closed = p_closure(&prefixes, alphabet);
        let closed_index: std::collections::BTreeMap<&Word, usize> =
            closed.iter().enumerate().map(|(i, w)| (w, i)).collect();
        let extension_rows = alphabet
            .symbols()
            .map(|s| {
                prefixes
                    .iter()
                    .map(|u| closed_index[&u.extended(s)])
                    .collect()
            })
            .collect();

        Ok(Basis { alphabet, prefixes, suffixes, closed, extension_rows })
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    /// Prefix set, closed under prefixes, in length-then-lexicographic order.
    pub fn prefixes(&self) -> &[Word] {
        &self.prefixes
    }

    pub fn suffixes(&self) -> &[Word] {
        &self.suffixes
    }

    /// Prefixes followed by their one-symbol extensions; the row index
    /// set of the full Hankel block.
    pub fn closed_prefixes(&self) -> &[Word] {
        &self.closed
    }

    pub fn num_prefixes(&self) -> usize {
        self.prefixes.len()
    }

    pub fn num_suffixes(&self) -> usize {
        self.suffixes.len()
    }

    pub fn num_closed(&self) -> usize {
        self.closed.len()
    }

    /// Row index of `word` among the closed prefixes.
    pub fn closed_index(&self, word: &Word) -> Option<usize> {
        self.closed.iter().position(|w| w == word)
    }

    pub fn suffix_index(&self, word: &Word) -> Option<usize> {
        self.suffixes.binary_search(word).ok()
    }

    /// Row index of `prefix sigma` among the closed prefixes.
    pub fn extension_index(&self, prefix_index: usize, symbol: usize) -> usize {
        self.extension_rows[symbol][prefix_index]
    }

    pub fn lambda_prefix_index(&self) -> usize {
        debug_assert!(self.prefixes[0].is_empty());
        0
    }

    pub fn lambda_suffix_index(&self) -> usize {
        debug_assert!(self.suffixes[0].is_empty());
        0
    }
}

/// Picks the most frequent prefixes and suffixes of a sample set.
///
/// Candidates are ranked by occurrence count (weighted by multiplicity),
/// with ties broken toward shorter then lexicographically smaller words.
/// At most `max_prefixes` and `max_suffixes` are selected before the
/// prefix set is closed, so the final prefix count can exceed the cap by
/// the words needed to restore closure.
pub fn build_basis(
    samples: &SampleSet,
    max_prefixes: usize,
    max_suffixes: usize,
) -> Result<Basis> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    if max_prefixes == 0 || max_suffixes == 0 {
        return invalid("basis size limits must be at least 1");
    }
    let counts = samples.count_substring_occurrences();

    let select = |take: usize, count_of: &dyn Fn(&(u64, u64)) -> u64| -> Vec<Word> {
        let mut ranked: Vec<(&Word, u64)> = counts
            .iter()
            .filter_map(|(w, c)| {
                let n = count_of(c);
                (n > 0).then_some((w, n))
            })
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        ranked.into_iter().take(take).map(|(w, _)| w.clone()).collect()
    };

    let prefixes = select(max_prefixes, &|c| c.0);
    let suffixes = select(max_suffixes, &|c| c.1);
    Basis::new(samples.alphabet(), prefixes, suffixes)
}

/// Hankel values over a basis: the full closed-row block plus views of
/// the empty-shift and per-symbol-shift sub-blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct HankelBlocks {
    basis: Basis,
    h_full: DMatrix<f64>,
}

impl HankelBlocks {
    /// Wraps precomputed values; `h_full` must have one row per closed
    /// prefix and one column per suffix.
    pub fn from_values(basis: Basis, h_full: DMatrix<f64>) -> Result<HankelBlocks> {
        if h_full.nrows() != basis.num_closed() || h_full.ncols() != basis.num_suffixes() {
            return invalid(format!(
                "Hankel block is {}x{}, basis wants {}x{}",
                h_full.nrows(),
                h_full.ncols(),
                basis.num_closed(),
                basis.num_suffixes()
            ));
        }
        if h_full.iter().any(|v| !v.is_finite()) {
            return invalid("Hankel values must be finite");
        }
        Ok(HankelBlocks { basis, h_full })
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    /// One row per closed prefix, one column per suffix.
    pub fn h_full(&self) -> &DMatrix<f64> {
        &self.h_full
    }

    /// The `f(uv)` block over the un-extended prefixes.
    pub fn h_lambda(&self) -> DMatrix<f64> {
        self.h_full.rows(0, self.basis.num_prefixes()).into_owned()
    }

    /// The `f(u sigma v)` block: rows of `h_full` gathered at each
    /// prefix's extension by `symbol`.
    pub fn h_sigma(&self, symbol: usize) -> DMatrix<f64> {
        let p = self.basis.num_prefixes();
        let mut out = DMatrix::zeros(p, self.basis.num_suffixes());
        for u in 0..p {
            out.set_row(u, &self.h_full.row(self.basis.extension_index(u, symbol)));
        }
        out
    }

    /// Closed row `i` as a column vector.
    pub fn row_vector(&self, i: usize) -> DVector<f64> {
        self.h_full.row(i).transpose()
    }

    /// Value at a (closed prefix, suffix) pair, if both are in the basis.
    pub fn value(&self, prefix: &Word, suffix: &Word) -> Option<f64> {
        let r = self.basis.closed_index(prefix)?;
        let c = self.basis.suffix_index(suffix)?;
        Some(self.h_full[(r, c)])
    }

    /// Writes `basis.json`, `h_lambda.txt`, and one `h_sigma_<i>.txt` per
    /// symbol into `dir`.
    pub fn save_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        crate::iofmt::write_json_file(dir.join("basis.json"), &BasisJson::from(&self.basis))?;
        let write = |name: String, m: &DMatrix<f64>| -> Result<()> {
            let mut out = BufWriter::new(std::fs::File::create(dir.join(name))?);
            crate::iofmt::write_matrix_text(&mut out, m)?;
            out.flush()?;
            Ok(())
        };
        write("h_lambda.txt".into(), &self.h_lambda())?;
        for s in self.basis.alphabet.symbols() {
            write(format!("h_sigma_{s}.txt"), &self.h_sigma(s))?;
        }
        Ok(())
    }

    /// Reads blocks written by [`HankelBlocks::save_dir`], checking that
    /// rows shared between blocks agree.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<HankelBlocks> {
        let dir = dir.as_ref();
        let raw: BasisJson = crate::iofmt::read_json_file(dir.join("basis.json"))?;
        let basis = raw.build()?;

        let read = |name: String| -> Result<DMatrix<f64>> {
            let file = std::fs::File::open(dir.join(&name))?;
            let m = crate::iofmt::read_matrix_text(std::io::BufReader::new(file))?;
            if m.nrows() != basis.num_prefixes() || m.ncols() != basis.num_suffixes() {
                return invalid(format!(
                    "{name} is {}x{}, basis wants {}x{}",
                    m.nrows(),
                    m.ncols(),
                    basis.num_prefixes(),
                    basis.num_suffixes()
                ));
            }
            Ok(m)
        };
        let h_lambda = read("h_lambda.txt".into())?;
        let h_sigmas: Vec<DMatrix<f64>> = basis
            .alphabet
            .symbols()
            .map(|s| read(format!("h_sigma_{s}.txt")))
            .collect::<Result<Vec<_>>>()?;

        let p = basis.num_prefixes();
        let mut h_full = DMatrix::zeros(basis.num_closed(), basis.num_suffixes());
        for (i, w) in basis.closed.iter().enumerate() {
            if i < p {
                h_full.set_row(i, &h_lambda.row(i));
            } else {
                let (u, s) = w.split_last().expect("extension rows are nonempty");
                let u_idx = basis
                    .prefixes
                    .binary_search(&u)
                    .map_err(|_| Error::InvalidArgument(format!("prefix {u} missing")))?;
                h_full.set_row(i, &h_sigmas[s].row(u_idx));
            }
        }
        for u in 0..p {
            for s in basis.alphabet.symbols() {
                let ext = basis.extension_index(u, s);
                if ext < p && h_sigmas[s].row(u) != h_lambda.row(ext) {
                    return invalid(format!(
                        "inconsistent blocks: row for {} disagrees between h_lambda and h_sigma_{s}",
                        basis.closed[ext]
                    ));
                }
            }
        }
        HankelBlocks::from_values(basis, h_full)
    }
}

#[derive(Serialize, Deserialize)]
struct BasisJson {
    alphabet_size: usize,
    prefixes: Vec<Vec<usize>>,
    suffixes: Vec<Vec<usize>>,
}

impl From<&Basis> for BasisJson {
    fn from(b: &Basis) -> Self {
        BasisJson {
            alphabet_size: b.alphabet.size(),
            prefixes: b.prefixes.iter().map(|w| w.symbols().to_vec()).collect(),
            suffixes: b.suffixes.iter().map(|w| w.symbols().to_vec()).collect(),
        }
    }
}

impl BasisJson {
    fn build(self) -> Result<Basis> {
        Basis::new(
            Alphabet::new(self.alphabet_size)?,
            self.prefixes.into_iter().map(Word::from_symbols),
            self.suffixes.into_iter().map(Word::from_symbols),
        )
    }
}

/// Fills a Hankel block with empirical frequencies from `samples`.
pub fn estimate_hankel(samples: &SampleSet, basis: &Basis) -> Result<HankelBlocks> {
    if samples.alphabet() != basis.alphabet() {
        return invalid("sample alphabet does not match basis alphabet");
    }
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let total = samples.total() as f64;
    let rows: Vec<Vec<f64>> = basis
        .closed_prefixes()
        .par_iter()
        .map(|u| {
            basis
                .suffixes()
                .iter()
                .map(|v| samples.multiplicity(&u.concat(v)) as f64 / total)
                .collect()
        })
        .collect();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let h_full = DMatrix::from_row_slice(basis.num_closed(), basis.num_suffixes(), &flat);
    HankelBlocks::from_values(basis.clone(), h_full)
}

/// Fills a Hankel block with the exact values of a weighted automaton.
pub fn exact_hankel_from_wfa(wfa: &Wfa, basis: &Basis) -> Result<HankelBlocks> {
    if wfa.alphabet() != basis.alphabet() {
        return invalid("automaton alphabet does not match basis alphabet");
    }
    let suffix_vecs: Vec<DVector<f64>> = basis
        .suffixes()
        .iter()
        .map(|v| {
            let mut vec = wfa.alpha_inf().clone();
            for &s in v.symbols().iter().rev() {
                vec = wfa.transition(s) * vec;
            }
            vec
        })
        .collect();
    let mut h_full = DMatrix::zeros(basis.num_closed(), basis.num_suffixes());
    for (i, u) in basis.closed_prefixes().iter().enumerate() {
        let state = wfa.state_row(u);
        for (j, sv) in suffix_vecs.iter().enumerate() {
            h_full[(i, j)] = (&state * sv)[0];
        }
    }
    HankelBlocks::from_values(basis.clone(), h_full)
}


#[cfg(test)]
mod properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn estimates_are_the_empirical_frequencies(words in prop::collection::vec(
            prop::collection::vec(0usize..2, 0..6),
            1..15,
        )) {
            let samples = SampleSet::from_words(
                Alphabet::new(2).unwrap(),
                words.into_iter().map(Word::from_symbols),
            )
            .unwrap();
            let basis = build_basis(&samples, 8, 8).unwrap();
            let h = estimate_hankel(&samples, &basis).unwrap();
            let total = samples.total() as f64;
            for u in basis.closed_prefixes() {
                for v in basis.suffixes() {
                    let expected = samples.multiplicity(&u.concat(v)) as f64 / total;
                    prop_assert_eq!(h.value(u, v).unwrap(), expected);
                }
            }
        }
    }
}
