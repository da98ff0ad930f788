//! Pautomac score and word error rate for learned models.
//!
//! The Pautomac score is the perplexity `2^{-Σ P*(x) log₂ P_M(x)}` over the
//! distinct strings of a test set, where both the target weights `P*` and the
//! model's (absolute, clamped) values `P_M` are normalized to sum to one over
//! that set. Word error rate scores next-symbol prediction: after every
//! prefix of every test word the model predicts either a symbol or STOP, and
//! the rate is the fraction of wrong predictions over all `len + 1` events
//! per word.

use std::collections::BTreeMap;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::corpus::{Alphabet, SampleSet, Word};
use crate::iofmt::format_f64;
use crate::linwfa::Wfa;
use crate::nlwfa::NlWfa;
use crate::{invalid, Error, Result};

/// Smallest value admitted into the cross-entropy sum; model outputs below
/// this (in absolute value) are clamped up to it so the logarithm stays
/// finite.
pub const PROBABILITY_CLAMP: f64 = 1e-12;

/// Anything that assigns a real value to every word.
pub trait WordScorer {
    fn alphabet(&self) -> Alphabet;
    fn score_word(&self, word: &Word) -> f64;
}

impl WordScorer for Wfa {
    fn alphabet(&self) -> Alphabet {
        Wfa::alphabet(self)
    }

    fn score_word(&self, word: &Word) -> f64 {
        self.evaluate(word)
    }
}

impl WordScorer for NlWfa {
    fn alphabet(&self) -> Alphabet {
        NlWfa::alphabet(self)
    }

    fn score_word(&self, word: &Word) -> f64 {
        self.evaluate(word)
    }
}

/// A scorer whose state advances one symbol at a time and decodes into
/// per-suffix masses, which is what next-symbol prediction reads.
pub trait PredictiveModel: WordScorer {
    fn initial_state(&self) -> DVector<f64>;
    fn step_state(&self, state: &DVector<f64>, symbol: usize) -> DVector<f64>;
    /// Decoded row over the suffix coordinates for the current state.
    fn decode_state(&self, state: &DVector<f64>) -> DVector<f64>;
    /// The model's value for the word that led to `state`.
    fn termination_value(&self, state: &DVector<f64>) -> f64;
}

impl PredictiveModel for NlWfa {
    fn initial_state(&self) -> DVector<f64> {
        NlWfa::initial_state(self).clone()
    }

    fn step_state(&self, state: &DVector<f64>, symbol: usize) -> DVector<f64> {
        self.step(state, symbol)
    }

    fn decode_state(&self, state: &DVector<f64>) -> DVector<f64> {
        self.termination().decode(state)
    }

    fn termination_value(&self, state: &DVector<f64>) -> f64 {
        self.termination().value(state)
    }
}

/// What the model predicts comes after a prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Prediction {
    Symbol(usize),
    Stop,
}

/// Scores for every continuation of one prefix: one entry per alphabet
/// symbol plus the STOP event.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolScores {
    pub symbol_scores: Vec<f64>,
    pub stop_score: f64,
}

impl SymbolScores {
    /// Highest-scoring continuation. Ties go to the smallest symbol id, and
    /// STOP wins only when it strictly beats every symbol.
    pub fn argmax(&self) -> Prediction {
        let mut best = 0;
        for (i, &score) in self.symbol_scores.iter().enumerate().skip(1) {
            if score > self.symbol_scores[best] {
                best = i;
            }
        }
        if self.stop_score > self.symbol_scores[best] {
            Prediction::Stop
        } else {
            Prediction::Symbol(best)
        }
    }
}

fn scores_at_state<M: PredictiveModel + ?Sized>(
    model: &M,
    state: &DVector<f64>,
) -> SymbolScores {
    let alphabet = model.alphabet();
    let symbol_scores = alphabet
        .symbols()
        .map(|sigma| {
            let next = model.step_state(state, sigma);
            model.decode_state(&next).iter().map(|v| v.max(0.0)).sum()
        })
        .collect();
    let stop_score = model.termination_value(state).max(0.0);
    SymbolScores { symbol_scores, stop_score }
}

/// Scores each possible next event after `prefix`: symbol σ by the positive
/// mass of the decoded row one σ-step ahead, STOP by the model's value for
/// the prefix itself (clamped at zero).
pub fn next_symbol_scores<M: PredictiveModel + ?Sized>(
    model: &M,
    prefix: &Word,
) -> SymbolScores {
    let mut state = model.initial_state();
    for &sigma in prefix.symbols() {
        state = model.step_state(&state, sigma);
    }
    scores_at_state(model, &state)
}

fn prediction_errors<M: PredictiveModel + ?Sized>(model: &M, word: &Word) -> u64 {
    let symbols = word.symbols();
    let mut state = model.initial_state();
    let mut errors = 0;
    for i in 0..=symbols.len() {
        let predicted = scores_at_state(model, &state).argmax();
        let target = match symbols.get(i) {
            Some(&sigma) => Prediction::Symbol(sigma),
            None => Prediction::Stop,
        };
        if predicted != target {
            errors += 1;
        }
        if let Some(&sigma) = symbols.get(i) {
            state = model.step_state(&state, sigma);
        }
    }
    errors
}

/// Fraction of wrong next-event predictions over the test set. Every word
/// of length n contributes n + 1 events (each symbol plus STOP), weighted
/// by its multiplicity.
pub fn word_error_rate<M: PredictiveModel + ?Sized>(
    model: &M,
    test: &SampleSet,
) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut errors = 0u64;
    let mut events = 0u64;
    for (word, mult) in test.distinct() {
        errors += prediction_errors(model, word) * mult;
        events += (word.len() as u64 + 1) * mult;
    }
    Ok(errors as f64 / events as f64)
}

/// Perplexity of `model_values` against target weights `p_star`, both taken
/// over the same string list. Model values pass through absolute value, the
/// [`PROBABILITY_CLAMP`] floor, and normalization; targets are normalized
/// as given. Returns `(2^e, e)` for the cross-entropy exponent `e`.
pub fn pautomac_from_values(model_values: &[f64], p_star: &[f64]) -> Result<(f64, f64)> {
    if model_values.is_empty() {
        return Err(Error::EmptySamples);
    }
    if model_values.len() != p_star.len() {
        return invalid(format!(
            "{} model values against {} target weights",
            model_values.len(),
            p_star.len()
        ));
    }
    if let Some(bad) = p_star.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return invalid(format!("target weight {bad} is not a finite non-negative number"));
    }
    if let Some(bad) = model_values.iter().find(|v| !v.is_finite()) {
        return invalid(format!("model value {bad} is not finite"));
    }
    let mut p_m: Vec<f64> = model_values.iter().map(|v| v.abs()).collect();
    if p_m.iter().all(|v| *v < PROBABILITY_CLAMP) {
        return Err(Error::DegenerateModel);
    }
    for v in &mut p_m {
        *v = v.max(PROBABILITY_CLAMP);
    }
    let m_total: f64 = p_m.iter().sum();
    let star_total: f64 = p_star.iter().sum();
    if star_total <= 0.0 {
        return invalid("target weights sum to zero");
    }
    let exponent: f64 = p_m
        .iter()
        .zip(p_star)
        .map(|(m, s)| -(s / star_total) * (m / m_total).log2())
        .sum();
    Ok((exponent.exp2(), exponent))
}

/// Pautomac score of a model on a test set, with target weights looked up
/// per distinct string in `p_star`. Duplicated test strings therefore only
/// matter through the weights, never by repeating terms in the sum.
pub fn pautomac_score<M: WordScorer + ?Sized>(
    model: &M,
    test: &SampleSet,
    p_star: &BTreeMap<Word, f64>,
) -> Result<(f64, f64)> {
    if test.is_empty() {
        return Err(Error::EmptySamples);
    }
    let mut values = Vec::with_capacity(test.num_distinct());
    let mut stars = Vec::with_capacity(test.num_distinct());
    for (word, _) in test.distinct() {
        let star = p_star.get(word).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "no target probability for the test string {:?}",
                word.symbols()
            ))
        })?;
        values.push(model.score_word(word));
        stars.push(*star);
    }
    pautomac_from_values(&values, &stars)
}

/// Target weights read off the test set itself: each distinct string gets
/// its empirical frequency.
pub fn empirical_oracle(test: &SampleSet) -> BTreeMap<Word, f64> {
    let total = test.total() as f64;
    test.distinct()
        .map(|(word, mult)| (word.clone(), mult as f64 / total))
        .collect()
}

/// Where the Pautomac target weights came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PStarSource {
    Oracle,
    Empirical,
}

/// Per-string breakdown inside an [`EvalReport`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WordDetail {
    pub symbols: Vec<usize>,
    pub multiplicity: u64,
    pub model_value: f64,
    pub target_weight: f64,
    pub prediction_errors: u64,
    pub prediction_events: u64,
}

/// Both metrics for one model on one test set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub pautomac: f64,
    pub log2_pautomac: f64,
    pub wer: f64,
    pub num_test: usize,
    pub num_prediction_events: u64,
    pub p_star_source: PStarSource,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub details: Option<Vec<WordDetail>>,
}

impl EvalReport {
    pub fn csv_header() -> &'static str {
        "variant,k,sample_size,seed,pautomac,log2_pautomac,wer"
    }

    pub fn csv_row(&self, variant: &str, k: usize, sample_size: usize, seed: u64) -> String {
        format!(
            "{variant},{k},{sample_size},{seed},{},{},{}",
            format_f64(self.pautomac),
            format_f64(self.log2_pautomac),
            format_f64(self.wer)
        )
    }
}

/// Scores a model on `test` with both metrics. Passing no oracle falls back
/// to empirical target weights, which the report records in
/// `p_star_source`. `with_details` adds the per-string table.
pub fn evaluate_model<M: PredictiveModel + ?Sized>(
    model: &M,
    test: &SampleSet,
    oracle: Option<&BTreeMap<Word, f64>>,
    with_details: bool,
) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(Error::EmptySamples);
    }
    let empirical;
    let (p_star, p_star_source) = match oracle {
        Some(map) => (map, PStarSource::Oracle),
        None => {
            empirical = empirical_oracle(test);
            (&empirical, PStarSource::Empirical)
        }
    };
    let (pautomac, log2_pautomac) = pautomac_score(model, test, p_star)?;
    let mut errors = 0u64;
    let mut events = 0u64;
    let mut details = Vec::new();
    for (word, mult) in test.distinct() {
        let word_errors = prediction_errors(model, word);
        let word_events = word.len() as u64 + 1;
        errors += word_errors * mult;
        events += word_events * mult;
        if with_details {
            details.push(WordDetail {
                symbols: word.symbols().to_vec(),
                multiplicity: mult,
                model_value: model.score_word(word),
                target_weight: p_star[word],
                prediction_errors: word_errors,
                prediction_events: word_events,
            });
        }
    }
    Ok(EvalReport {
        pautomac,
        log2_pautomac,
        wer: errors as f64 / events as f64,
        num_test: test.words().len(),
        num_prediction_events: events,
        p_star_source,
        details: with_details.then_some(details),
    })
}
