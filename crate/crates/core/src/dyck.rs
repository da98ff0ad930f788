//! A probabilistic bracket grammar used as a nonlinear test bed.
//!
//! One nonterminal `S` expands to `S S`, `[ S ]`, or `[ ]` with fixed
//! probabilities. The default weights (0.2, 0.4, 0.4) give a subcritical
//! grammar whose strings have mean length 8. Sampling expands the
//! leftmost nonterminal with one uniform draw per expansion and rejects
//! any derivation that can no longer fit the length cap; the string
//! probability of a word is computed by the standard inside dynamic
//! program over even-length spans.

use rand::Rng;

use crate::corpus::{Alphabet, SampleSet, Word};
use crate::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "GrammarWeights", into = "GrammarWeights")]
pub struct DyckGrammar {
    p_ss: f64,
    p_wrap: f64,
    p_leaf: f64,
}

#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
struct GrammarWeights {
    p_ss: f64,
    p_wrap: f64,
    p_leaf: f64,
}

impl TryFrom<GrammarWeights> for DyckGrammar {
    type Error = crate::Error;

    fn try_from(w: GrammarWeights) -> Result<DyckGrammar> {
        DyckGrammar::new(w.p_ss, w.p_wrap, w.p_leaf)
    }
}

impl From<DyckGrammar> for GrammarWeights {
    fn from(g: DyckGrammar) -> GrammarWeights {
        GrammarWeights { p_ss: g.p_ss, p_wrap: g.p_wrap, p_leaf: g.p_leaf }
    }
}

impl Default for DyckGrammar {
    fn default() -> Self {
        DyckGrammar { p_ss: 0.2, p_wrap: 0.4, p_leaf: 0.4 }
    }
}

enum Pending {
    Nonterminal,
    Open,
    Close,
}

impl DyckGrammar {
    pub const OPEN: usize = 0;
    pub const CLOSE: usize = 1;

    /// Rule probabilities for `S -> S S`, `S -> [ S ]`, and `S -> [ ]`;
    /// they must be nonnegative and sum to 1.
    pub fn new(p_ss: f64, p_wrap: f64, p_leaf: f64) -> Result<DyckGrammar> {
        if !(p_ss >= 0.0 && p_wrap >= 0.0 && p_leaf >= 0.0) {
            return invalid("rule probabilities must be nonnegative");
        }
        if (p_ss + p_wrap + p_leaf - 1.0).abs() > 1e-9 {
            return invalid(format!(
                "rule probabilities sum to {}, expected 1",
                p_ss + p_wrap + p_leaf
            ));
        }
        Ok(DyckGrammar { p_ss, p_wrap, p_leaf })
    }

    pub fn alphabet() -> Alphabet {
        Alphabet::new(2).expect("two bracket symbols")
    }

    pub fn p_ss(&self) -> f64 {
        self.p_ss
    }

    pub fn p_wrap(&self) -> f64 {
        self.p_wrap
    }

    pub fn p_leaf(&self) -> f64 {
        self.p_leaf
    }

    /// Draws one word of length at most `max_len`.
    ///
    /// Derivations that provably exceed the cap are abandoned as soon as
    /// the emitted terminals plus the stack's minimum yield pass it, and
    /// the draw restarts; the generator stream keeps advancing, so a
    /// seeded generator still gives a reproducible word.
    pub fn sample(&self, rng: &mut impl Rng, max_len: usize) -> Word {
        assert!(max_len >= 2, "no bracket word fits in {max_len} symbols");
        loop {
            if let Some(w) = self.try_sample(rng, max_len) {
                return w;
            }
        }
    }

    fn try_sample(&self, rng: &mut impl Rng, max_len: usize) -> Option<Word> {
        let mut stack = vec![Pending::Nonterminal];
        let mut out = Vec::new();
        let mut min_len = 2usize;
        while let Some(top) = stack.pop() {
            match top {
                Pending::Open => out.push(Self::OPEN),
                Pending::Close => out.push(Self::CLOSE),
                Pending::Nonterminal => {
                    let u: f64 = rng.random();
                    if u < self.p_ss {
                        min_len += 2;
                        if min_len > max_len {
                            return None;
                        }
                        stack.push(Pending::Nonterminal);
                        stack.push(Pending::Nonterminal);
                    } else if u < self.p_ss + self.p_wrap {
                        min_len += 2;
                        if min_len > max_len {
                            return None;
                        }
                        stack.push(Pending::Close);
                        stack.push(Pending::Nonterminal);
                        stack.push(Pending::Open);
                    } else {
                        stack.push(Pending::Close);
                        stack.push(Pending::Open);
                    }
                }
            }
        }
        Some(Word::from_symbols(out))
    }

    /// Draws `n` words of length at most `max_len`.
    pub fn sample_set(&self, rng: &mut impl Rng, n: usize, max_len: usize) -> SampleSet {
        let mut samples = SampleSet::new(Self::alphabet());
        for _ in 0..n {
            samples
                .push(self.sample(rng, max_len))
                .expect("sampled words stay in the bracket alphabet");
        }
        samples
    }

    /// Probability that the grammar derives exactly `word`.
    ///
    /// Zero for the empty word, odd lengths, and unbalanced strings.
    pub fn inside_probability(&self, word: &Word) -> f64 {
        let w = word.symbols();
        for &s in w {
            assert!(s < 2, "symbol {s} outside the bracket alphabet");
        }
        let n = w.len();
        if n == 0 || n % 2 != 0 {
            return 0.0;
        }
        let mut inside = vec![vec![0.0_f64; n + 1]; n];
        for len in (2..=n).step_by(2) {
            for i in 0..=(n - len) {
                let j = i + len;
                let mut v = 0.0;
                if len == 2 && w[i] == Self::OPEN && w[i + 1] == Self::CLOSE {
                    v += self.p_leaf;
                }
                if len >= 4 && w[i] == Self::OPEN && w[j - 1] == Self::CLOSE {
                    v += self.p_wrap * inside[i + 1][j - 1];
                }
                let mut split = 0.0;
                let mut m = i + 2;
                while m + 2 <= j {
                    split += inside[i][m] * inside[m][j];
                    m += 2;
                }
                v += self.p_ss * split;
                inside[i][j] = v;
            }
        }
        inside[0][n]
    }

    /// Total probability of each length up to `max_len`; entry `l` is the
    /// mass of all words of length exactly `l`.
    pub fn length_mass(&self, max_len: usize) -> Vec<f64> {
        let mut mass = vec![0.0; max_len + 1];
        for l in (2..=max_len).step_by(2) {
            let mut v = if l == 2 { self.p_leaf } else { 0.0 };
            if l >= 4 {
                v += self.p_wrap * mass[l - 2];
            }
            let mut split = 0.0;
            for a in (2..l).step_by(2) {
                split += mass[a] * mass[l - a];
            }
            v += self.p_ss * split;
            mass[l] = v;
        }
        mass
    }
}
