//! Linear weighted automata over strings and their spectral estimation.
//!
//! A weighted automaton with `k` states assigns each word the value
//! `alpha0' * A_{x1} * ... * A_{xn} * alpha_inf`. The minimal number of
//! states needed to realize a function equals the rank of its Hankel
//! matrix, and a rank-k factorization of an observed Hankel block yields
//! the automaton directly: the initial vector is the empty-prefix row of
//! the left factor, the final vector is the empty-suffix column of the
//! right factor, and each transition solves a least-squares problem
//! between the factors and the symbol-shifted block.

use nalgebra::{DMatrix, DVector, RowDVector};
use serde::{Deserialize, Serialize};

use crate::corpus::{Alphabet, Word};
use crate::hankel::HankelBlocks;
use crate::{invalid, Result};

/// Relative cutoff under which singular values are treated as zero when
/// inverting.
pub const PINV_RELATIVE_TOLERANCE: f64 = 1e-10;

/// A weighted finite automaton with dense real parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Wfa {
    alphabet: Alphabet,
    alpha0: DVector<f64>,
    alpha_inf: DVector<f64>,
    transitions: Vec<DMatrix<f64>>,
}

impl Wfa {
    pub fn new(
        alphabet: Alphabet,
        alpha0: DVector<f64>,
        alpha_inf: DVector<f64>,
        transitions: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        let k = alpha0.len();
        if k == 0 {
            return invalid("automaton needs at least one state");
        }
        if alpha_inf.len() != k {
            return invalid(format!(
                "final vector has {} entries, expected {k}",
                alpha_inf.len()
            ));
        }
        if transitions.len() != alphabet.size() {
            return invalid(format!(
                "{} transition matrices for an alphabet of {} symbols",
                transitions.len(),
                alphabet.size()
            ));
        }
        for (s, m) in transitions.iter().enumerate() {
            if m.nrows() != k || m.ncols() != k {
                return invalid(format!(
                    "transition {s} is {}x{}, expected {k}x{k}",
                    m.nrows(),
                    m.ncols()
                ));
            }
        }
        let finite = alpha0.iter().all(|v| v.is_finite())
            && alpha_inf.iter().all(|v| v.is_finite())
            && transitions.iter().all(|m| m.iter().all(|v| v.is_finite()));
        if !finite {
            return invalid("automaton parameters must be finite");
        }
        Ok(Wfa { alphabet, alpha0, alpha_inf, transitions })
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn num_states(&self) -> usize {
        self.alpha0.len()
    }

    pub fn alpha0(&self) -> &DVector<f64> {
        &self.alpha0
    }

    pub fn alpha_inf(&self) -> &DVector<f64> {
        &self.alpha_inf
    }

    pub fn transition(&self, symbol: usize) -> &DMatrix<f64> {
        &self.transitions[symbol]
    }

    /// Row vector `alpha0' * A_{x1} * ... * A_{xn}` reached after reading `word`.
    pub fn state_row(&self, word: &Word) -> RowDVector<f64> {
        let mut state = self.alpha0.transpose();
        for &s in word.symbols() {
            assert!(s < self.alphabet.size(), "symbol {s} outside alphabet");
            state *= &self.transitions[s];
        }
        state
    }

    /// Value the automaton assigns to `word`.
    pub fn evaluate(&self, word: &Word) -> f64 {
        (self.state_row(word) * &self.alpha_inf)[0]
    }

    /// Automaton computing the square of this automaton's function.
    ///
    /// Uses the Kronecker-product construction: squaring every parameter
    /// block multiplies the word values pairwise, so the result has `k^2`
    /// states and satisfies `g(x) = f(x)^2` exactly.
    pub fn kron_square(&self) -> Wfa {
        let alpha0 = self.alpha0.kronecker(&self.alpha0);
        let alpha_inf = self.alpha_inf.kronecker(&self.alpha_inf);
        let transitions = self.transitions.iter().map(|m| m.kronecker(m)).collect();
        Wfa {
            alphabet: self.alphabet,
            alpha0,
            alpha_inf,
            transitions,
        }
    }

    pub fn to_json_string(&self) -> Result<String> {
        crate::iofmt::to_json_string(&WfaJson::from(self))
    }

    pub fn from_json_str(text: &str) -> Result<Wfa> {
        let raw: WfaJson = serde_json::from_str(text)?;
        raw.build()
    }

    pub fn save_json(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }

    pub fn load_json(path: impl AsRef<std::path::Path>) -> Result<Wfa> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
struct WfaJson {
    alphabet_size: usize,
    num_states: usize,
    alpha0: Vec<f64>,
    alpha_inf: Vec<f64>,
    transitions: Vec<Vec<Vec<f64>>>,
}

impl From<&Wfa> for WfaJson {
    fn from(w: &Wfa) -> Self {
        WfaJson {
            alphabet_size: w.alphabet.size(),
            num_states: w.num_states(),
            alpha0: w.alpha0.iter().copied().collect(),
            alpha_inf: w.alpha_inf.iter().copied().collect(),
            transitions: w.transitions.iter().map(matrix_rows).collect(),
        }
    }
}

impl WfaJson {
    fn build(self) -> Result<Wfa> {
        let k = self.num_states;
        let transitions = self
            .transitions
            .into_iter()
            .map(|rows| matrix_from_rows(&rows, k, k))
            .collect::<Result<Vec<_>>>()?;
        Wfa::new(
            Alphabet::new(self.alphabet_size)?,
            DVector::from_vec(self.alpha0),
            DVector::from_vec(self.alpha_inf),
            transitions,
        )
    }
}

pub(crate) fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|r| m.row(r).iter().copied().collect())
        .collect()
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>], nrows: usize, ncols: usize) -> Result<DMatrix<f64>> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return invalid(format!("matrix must be {nrows}x{ncols}"));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(DMatrix::from_row_slice(nrows, ncols, &flat))
}

/// Rank-k factorization `m ~= p * s` produced by [`svd_truncated`].
#[derive(Debug, Clone)]
pub struct Factorization {
    p: DMatrix<f64>,
    s: DMatrix<f64>,
}

impl Factorization {
    pub fn rank(&self) -> usize {
        self.p.ncols()
    }

    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn s(&self) -> &DMatrix<f64> {
        &self.s
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.p * &self.s
    }
}

fn sorted_svd(
    m: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, Vec<f64>, DMatrix<f64>)> {
    let svd = m.clone().svd(true, true);
    let u = svd.u.ok_or_else(|| crate::Error::InvalidArgument("SVD failed".into()))?;
    let v_t = svd.v_t.ok_or_else(|| crate::Error::InvalidArgument("SVD failed".into()))?;
    let sigma: Vec<f64> = svd.singular_values.iter().copied().collect();

    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&a, &b| sigma[b].partial_cmp(&sigma[a]).unwrap().then(a.cmp(&b)));

    let mut u_sorted = DMatrix::zeros(u.nrows(), order.len());
    let mut vt_sorted = DMatrix::zeros(order.len(), v_t.ncols());
    let mut sigma_sorted = Vec::with_capacity(order.len());
    for (dst, &src) in order.iter().enumerate() {
        u_sorted.set_column(dst, &u.column(src));
        vt_sorted.set_row(dst, &v_t.row(src));
        sigma_sorted.push(sigma[src]);
    }
    Ok((u_sorted, sigma_sorted, vt_sorted))
}

/// Best rank-k factorization of `m` via truncated SVD.
///
/// `p` carries the singular values (`p = U_k * Sigma_k`, `s = V_k'`). Signs
/// are fixed deterministically: the first nonzero entry of each row of `s`
/// is made positive and the matching column of `p` flips with it. A zero
/// singular value yields a zero column of `p` and zero row of `s`.
pub fn svd_truncated(m: &DMatrix<f64>, k: usize) -> Result<Factorization> {
    if k == 0 || k > m.nrows().min(m.ncols()) {
        return invalid(format!(
            "rank {k} out of range for a {}x{} matrix",
            m.nrows(),
            m.ncols()
        ));
    }
    let (u, sigma, v_t) = sorted_svd(m)?;
    let mut p = DMatrix::zeros(m.nrows(), k);
    let mut s = DMatrix::zeros(k, m.ncols());
    for j in 0..k {
        if sigma[j] <= 0.0 {
            continue;
        }
        let mut sign = 1.0;
        for c in 0..v_t.ncols() {
            let v = v_t[(j, c)];
            if v != 0.0 {
                sign = v.signum();
                break;
            }
        }
        for c in 0..v_t.ncols() {
            s[(j, c)] = sign * v_t[(j, c)];
        }
        for r in 0..u.nrows() {
            p[(r, j)] = sign * sigma[j] * u[(r, j)];
        }
    }
    Ok(Factorization { p, s })
}

/// Moore-Penrose pseudoinverse with singular values below
/// [`PINV_RELATIVE_TOLERANCE`] times the largest treated as zero.
pub fn pinv(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (u, sigma, v_t) = sorted_svd(m)?;
    let cutoff = sigma.first().copied().unwrap_or(0.0) * PINV_RELATIVE_TOLERANCE;
    let r = sigma.len();
    let mut inv = DMatrix::zeros(r, r);
    for j in 0..r {
        if sigma[j] > cutoff && sigma[j] > 0.0 {
            inv[(j, j)] = 1.0 / sigma[j];
        }
    }
    Ok(v_t.transpose() * inv * u.transpose())
}

/// Learns a k-state automaton from a Hankel block estimate.
///
/// Factorizes the empty-suffix-shift block at rank k, reads the initial
/// and final weights off the empty-word row and column, and recovers each
/// transition as `pinv(P) * H_sigma * pinv(S)`.
pub fn spectral_learn(h: &HankelBlocks, k: usize) -> Result<Wfa> {
    let basis = h.basis();
    let h_lambda = h.h_lambda();
    if k == 0 || k > h_lambda.nrows().min(h_lambda.ncols()) {
        return invalid(format!(
            "rank {k} out of range for a {}x{} Hankel block",
            h_lambda.nrows(),
            h_lambda.ncols()
        ));
    }
    let f = svd_truncated(&h_lambda, k)?;
    let lambda_row = basis.lambda_prefix_index();
    let lambda_col = basis.lambda_suffix_index();
    let alpha0 = f.p().row(lambda_row).transpose();
    let alpha_inf = f.s().column(lambda_col).into_owned();

    let p_pinv = pinv(f.p())?;
    let s_pinv = pinv(f.s())?;
    let alphabet = basis.alphabet();
    let mut transitions = Vec::with_capacity(alphabet.size());
    for symbol in alphabet.symbols() {
        transitions.push(&p_pinv * h.h_sigma(symbol) * &s_pinv);
    }
    Wfa::new(alphabet, alpha0, alpha_inf, transitions)
}
