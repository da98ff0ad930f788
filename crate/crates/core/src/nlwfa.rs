//! Automata with learned, possibly nonlinear state maps.
//!
//! A model here carries an initial state vector, one transition function
//! per symbol, and a termination function that decodes a state back into
//! Hankel-row coordinates and reads off the empty-suffix entry. With
//! every part linear this is an ordinary weighted automaton; swapping the
//! factorization or the transitions for small networks gives the four
//! variants [`Variant::Sp`], [`Variant::FacNon`], [`Variant::TranNon`],
//! and [`Variant::BothNon`].
//!
//! Learning runs in two phases over a Hankel block estimate. First the
//! rows are factored through a rank-k bottleneck, either by truncated SVD
//! or by an autoencoder trained to reproduce each row. Second, for every
//! symbol, a map is fitted from each encoded prefix row to the encoded
//! row of the extended prefix, by least squares or by a small network.
//! The initial state is the encoded empty-prefix row and the decoder half
//! of the factorization becomes the termination function.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Alphabet, SampleSet, Word};
use crate::hankel::{build_basis, estimate_hankel, HankelBlocks};
use crate::linwfa::{matrix_from_rows, matrix_rows, pinv, svd_truncated};
use crate::neural::{Activation, Mlp, MlpJson, TrainConfig};
use crate::{derive_seed, invalid, Result};

/// Which parts of the model are nonlinear.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    /// Linear factorization and linear transitions.
    #[serde(rename = "sp")]
    Sp,
    /// Autoencoder factorization, linear transitions.
    #[serde(rename = "fac.non")]
    FacNon,
    /// Linear factorization, network transitions.
    #[serde(rename = "tran.non")]
    TranNon,
    /// Autoencoder factorization and network transitions.
    #[serde(rename = "both.non")]
    BothNon,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Sp, Variant::FacNon, Variant::TranNon, Variant::BothNon];

    pub fn factorization_nonlinear(self) -> bool {
        matches!(self, Variant::FacNon | Variant::BothNon)
    }

    pub fn transitions_nonlinear(self) -> bool {
        matches!(self, Variant::TranNon | Variant::BothNon)
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Sp => "sp",
            Variant::FacNon => "fac.non",
            Variant::TranNon => "tran.non",
            Variant::BothNon => "both.non",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Variant> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| {
                crate::Error::InvalidArgument(format!(
                    "unknown variant `{s}`, expected sp, fac.non, tran.non, or both.non"
                ))
            })
    }
}

/// A vector-to-vector map, either a matrix applied as `x' M` or a network.
#[derive(Debug, Clone, PartialEq)]
pub enum MapFn {
    Linear(DMatrix<f64>),
    Network(Mlp),
}

impl MapFn {
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            MapFn::Linear(m) => m.tr_mul(x),
            MapFn::Network(net) => net.forward(x),
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            MapFn::Linear(m) => m.nrows(),
            MapFn::Network(net) => net.input_dim(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            MapFn::Linear(m) => m.ncols(),
            MapFn::Network(net) => net.output_dim(),
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, MapFn::Linear(_))
    }
}

/// Encoder from Hankel-row space into states and decoder back out.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderPair {
    encoder: MapFn,
    decoder: MapFn,
}

impl EncoderPair {
    /// The bottleneck must be strictly narrower than the row space.
    pub fn new(encoder: MapFn, decoder: MapFn) -> Result<EncoderPair> {
        let n = encoder.input_dim();
        let k = encoder.output_dim();
        if decoder.input_dim() != k || decoder.output_dim() != n {
            return invalid(format!(
                "encoder maps {n}->{k} but decoder maps {}->{}",
                decoder.input_dim(),
                decoder.output_dim()
            ));
        }
        if k >= n {
            return invalid(format!("bottleneck {k} must be narrower than the row space {n}"));
        }
        Ok(EncoderPair { encoder, decoder })
    }

    pub fn encoder(&self) -> &MapFn {
        &self.encoder
    }

    pub fn decoder(&self) -> &MapFn {
        &self.decoder
    }

    pub fn rank(&self) -> usize {
        self.encoder.output_dim()
    }
}

/// Per-coordinate affine rescaling between raw states and the squashed
/// range a tanh output layer can reach.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    spread: DVector<f64>,
    center: DVector<f64>,
}

impl AffineMap {
    /// Fits `rows` so that every seen coordinate lands in
    /// `[-half_range, half_range]` after [`AffineMap::squash`]. A constant
    /// coordinate gets zero spread and squashes to 0.
    pub fn fit(rows: &[DVector<f64>], half_range: f64) -> AffineMap {
        assert!(!rows.is_empty(), "cannot fit a scaling to no rows");
        assert!(half_range > 0.0);
        let dim = rows[0].len();
        let mut lo = DVector::from_element(dim, f64::INFINITY);
        let mut hi = DVector::from_element(dim, f64::NEG_INFINITY);
        for r in rows {
            for i in 0..dim {
                lo[i] = lo[i].min(r[i]);
                hi[i] = hi[i].max(r[i]);
            }
        }
        let center = (&lo + &hi) * 0.5;
        let spread = (&hi - &lo) * (0.5 / half_range);
        AffineMap { spread, center }
    }

    pub fn squash(&self, raw: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(raw.len(), |i, _| {
            if self.spread[i] > 0.0 {
                (raw[i] - self.center[i]) / self.spread[i]
            } else {
                0.0
            }
        })
    }

    pub fn unsquash(&self, squashed: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(squashed.len(), |i, _| {
            squashed[i] * self.spread[i] + self.center[i]
        })
    }

    pub fn dim(&self) -> usize {
        self.spread.len()
    }
}

/// State-to-state map for one symbol.
#[derive(Debug, Clone, PartialEq)]
pub enum TransitionFn {
    Linear(DMatrix<f64>),
    /// A network with tanh outputs; `output_map` folds the target
    /// rescaling used during training back into raw state coordinates.
    Network {
        net: Mlp,
        output_map: Option<AffineMap>,
    },
}

impl TransitionFn {
    pub fn apply(&self, state: &DVector<f64>) -> DVector<f64> {
        match self {
            TransitionFn::Linear(m) => m.tr_mul(state),
            TransitionFn::Network { net, output_map } => {
                let y = net.forward(state);
                match output_map {
                    Some(map) => map.unsquash(&y),
                    None => y,
                }
            }
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, TransitionFn::Linear(_))
    }

    fn state_dim_ok(&self, k: usize) -> bool {
        match self {
            TransitionFn::Linear(m) => m.nrows() == k && m.ncols() == k,
            TransitionFn::Network { net, output_map } => {
                net.input_dim() == k
                    && net.output_dim() == k
                    && output_map.as_ref().is_none_or(|m| m.dim() == k)
            }
        }
    }
}

/// Decodes a state into Hankel-row coordinates and reads the empty-suffix
/// entry as the word's value.
#[derive(Debug, Clone, PartialEq)]
pub struct TerminationFn {
    decoder: MapFn,
    lambda_index: usize,
}

impl TerminationFn {
    pub fn new(decoder: MapFn, lambda_index: usize) -> Result<TerminationFn> {
        if lambda_index >= decoder.output_dim() {
            return invalid(format!(
                "empty-suffix index {lambda_index} outside the {}-wide decode",
                decoder.output_dim()
            ));
        }
        Ok(TerminationFn { decoder, lambda_index })
    }

    pub fn decode(&self, state: &DVector<f64>) -> DVector<f64> {
        self.decoder.apply(state)
    }

    pub fn value(&self, state: &DVector<f64>) -> f64 {
        self.decode(state)[self.lambda_index]
    }

    pub fn decoder(&self) -> &MapFn {
        &self.decoder
    }

    pub fn lambda_index(&self) -> usize {
        self.lambda_index
    }
}

/// Automaton with learned state maps; see the module docs.
#[derive(Debug, Clone, PartialEq)]
pub struct NlWfa {
    alphabet: Alphabet,
    variant: Variant,
    alpha0: DVector<f64>,
    transitions: Vec<TransitionFn>,
    termination: TerminationFn,
}

impl NlWfa {
    pub fn new(
        alphabet: Alphabet,
        variant: Variant,
        alpha0: DVector<f64>,
        transitions: Vec<TransitionFn>,
        termination: TerminationFn,
    ) -> Result<NlWfa> {
        let k = alpha0.len();
        if k == 0 {
            return invalid("state dimension must be positive");
        }
        if transitions.len() != alphabet.size() {
            return invalid(format!(
                "{} transitions for an alphabet of {}",
                transitions.len(),
                alphabet.size()
            ));
        }
        if let Some(bad) = transitions.iter().position(|t| !t.state_dim_ok(k)) {
            return invalid(format!("transition {bad} does not map {k}-dimensional states"));
        }
        if termination.decoder.input_dim() != k {
            return invalid(format!(
                "termination decodes {}-dimensional states, model has {k}",
                termination.decoder.input_dim()
            ));
        }
        let fac_nonlinear = !termination.decoder.is_linear();
        if fac_nonlinear != variant.factorization_nonlinear() {
            return invalid(format!("variant {variant} disagrees with the decoder's form"));
        }
        let tran_nonlinear = transitions.iter().any(|t| !t.is_linear());
        if transitions.iter().any(|t| t.is_linear()) && tran_nonlinear {
            return invalid("transitions mix linear and network forms");
        }
        if tran_nonlinear != variant.transitions_nonlinear() {
            return invalid(format!("variant {variant} disagrees with the transitions' form"));
        }
        Ok(NlWfa { alphabet, variant, alpha0, transitions, termination })
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// State dimension.
    pub fn rank(&self) -> usize {
        self.alpha0.len()
    }

    pub fn initial_state(&self) -> &DVector<f64> {
        &self.alpha0
    }

    pub fn transition(&self, symbol: usize) -> &TransitionFn {
        &self.transitions[symbol]
    }

    pub fn termination(&self) -> &TerminationFn {
        &self.termination
    }

    pub fn step(&self, state: &DVector<f64>, symbol: usize) -> DVector<f64> {
        assert!(symbol < self.alphabet.size(), "symbol {symbol} outside alphabet");
        self.transitions[symbol].apply(state)
    }

    pub fn state_after(&self, word: &Word) -> DVector<f64> {
        let mut state = self.alpha0.clone();
        for &s in word.symbols() {
            state = self.step(&state, s);
        }
        state
    }

    pub fn evaluate(&self, word: &Word) -> f64 {
        self.termination.value(&self.state_after(word))
    }

    pub fn to_json_string(&self) -> Result<String> {
        crate::iofmt::to_json_string(&NlWfaJson::from(self))
    }

    pub fn from_json_str(text: &str) -> Result<NlWfa> {
        let raw: NlWfaJson = serde_json::from_str(text)?;
        raw.build()
    }

    pub fn save_json(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string()?)?;
        Ok(())
    }

    pub fn load_json(path: impl AsRef<std::path::Path>) -> Result<NlWfa> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
enum MapFnJson {
    #[serde(rename = "linear")]
    Linear(Vec<Vec<f64>>),
    #[serde(rename = "network")]
    Network(MlpJson),
}

impl MapFnJson {
    fn of(map: &MapFn) -> MapFnJson {
        match map {
            MapFn::Linear(m) => MapFnJson::Linear(matrix_rows(m)),
            MapFn::Network(net) => MapFnJson::Network(MlpJson::from(net)),
        }
    }

    fn build(self, in_dim: usize, out_dim: usize) -> Result<MapFn> {
        match self {
            MapFnJson::Linear(rows) => Ok(MapFn::Linear(matrix_from_rows(&rows, in_dim, out_dim)?)),
            MapFnJson::Network(raw) => {
                let net = raw.build()?;
                if net.input_dim() != in_dim || net.output_dim() != out_dim {
                    return invalid(format!(
                        "network maps {}->{}, expected {in_dim}->{out_dim}",
                        net.input_dim(),
                        net.output_dim()
                    ));
                }
                Ok(MapFn::Network(net))
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
struct AffineMapJson {
    spread: Vec<f64>,
    center: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
enum TransitionFnJson {
    #[serde(rename = "linear")]
    Linear(Vec<Vec<f64>>),
    #[serde(rename = "network")]
    Network {
        net: MlpJson,
        output_map: Option<AffineMapJson>,
    },
}

#[derive(Serialize, Deserialize)]
struct NlWfaJson {
    variant: Variant,
    alphabet_size: usize,
    rank: usize,
    row_width: usize,
    lambda_index: usize,
    alpha0: Vec<f64>,
    transitions: Vec<TransitionFnJson>,
    decoder: MapFnJson,
}

impl From<&NlWfa> for NlWfaJson {
    fn from(model: &NlWfa) -> Self {
        NlWfaJson {
            variant: model.variant,
            alphabet_size: model.alphabet.size(),
            rank: model.rank(),
            row_width: model.termination.decoder.output_dim(),
            lambda_index: model.termination.lambda_index,
            alpha0: model.alpha0.iter().copied().collect(),
            transitions: model
                .transitions
                .iter()
                .map(|t| match t {
                    TransitionFn::Linear(m) => TransitionFnJson::Linear(matrix_rows(m)),
                    TransitionFn::Network { net, output_map } => TransitionFnJson::Network {
                        net: MlpJson::from(net),
                        output_map: output_map.as_ref().map(|m| AffineMapJson {
                            spread: m.spread.iter().copied().collect(),
                            center: m.center.iter().copied().collect(),
                        }),
                    },
                })
                .collect(),
            decoder: MapFnJson::of(&model.termination.decoder),
        }
    }
}

impl NlWfaJson {
    fn build(self) -> Result<NlWfa> {
        let k = self.rank;
        let transitions = self
            .transitions
            .into_iter()
            .map(|t| match t {
                TransitionFnJson::Linear(rows) => {
                    Ok(TransitionFn::Linear(matrix_from_rows(&rows, k, k)?))
                }
                TransitionFnJson::Network { net, output_map } => Ok(TransitionFn::Network {
                    net: net.build()?,
                    output_map: output_map
                        .map(|m| {
                            if m.spread.len() != k || m.center.len() != k {
                                return invalid("output scaling has the wrong width");
                            }
                            Ok(AffineMap {
                                spread: DVector::from_vec(m.spread),
                                center: DVector::from_vec(m.center),
                            })
                        })
                        .transpose()?,
                }),
            })
            .collect::<Result<Vec<_>>>()?;
        let decoder = self.decoder.build(k, self.row_width)?;
        NlWfa::new(
            Alphabet::new(self.alphabet_size)?,
            self.variant,
            DVector::from_vec(self.alpha0),
            transitions,
            TerminationFn::new(decoder, self.lambda_index)?,
        )
    }
}

fn validate_arch(arch: &[usize], k: usize, row_width: usize) -> Result<()> {
    if arch.is_empty() || arch.len() % 2 == 0 {
        return invalid("the width list must have an odd number of entries");
    }
    if arch[arch.len() / 2] != k {
        return invalid(format!(
            "the middle width is {}, expected the rank {k}",
            arch[arch.len() / 2]
        ));
    }
    for i in 0..arch.len() / 2 {
        if arch[i] != arch[arch.len() - 1 - i] {
            return invalid("the width list must be symmetric");
        }
    }
    if arch.iter().any(|&w| w == 0) {
        return invalid("widths must be positive");
    }
    if k >= row_width {
        return invalid(format!(
            "rank {k} must be smaller than the {row_width}-wide Hankel rows"
        ));
    }
    Ok(())
}

/// Trains a bottleneck autoencoder on every closed Hankel row.
///
/// Widths run `row .. arch .. row` with `hidden` activations everywhere
/// except the final, linear layer. Returns the whole network plus the
/// loss history; [`train_factorization`] splits it at the bottleneck.
pub fn train_autoencoder(
    h: &HankelBlocks,
    k: usize,
    arch: &[usize],
    hidden: Activation,
    cfg: &TrainConfig,
) -> Result<(Mlp, Vec<f64>)> {
    let n = h.basis().num_suffixes();
    validate_arch(arch, k, n)?;
    let mut dims = Vec::with_capacity(arch.len() + 2);
    dims.push(n);
    dims.extend_from_slice(arch);
    dims.push(n);

    let mut init_rng =
        rand_chacha::ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0));
    let net = Mlp::feedforward(&dims, hidden, Activation::Identity, true, &mut init_rng)?;
    let data: Vec<(DVector<f64>, DVector<f64>)> = (0..h.basis().num_closed())
        .map(|i| {
            let row = h.row_vector(i);
            (row.clone(), row)
        })
        .collect();
    let train_cfg = TrainConfig { seed: derive_seed(cfg.seed, 1), ..cfg.clone() };
    crate::neural::train(net, &data, &train_cfg)
}

/// Phase one: factors Hankel rows through a rank-k bottleneck.
///
/// Linear mode takes the truncated SVD of the empty-shift block, encoding
/// rows with the pseudoinverse of the right factor and decoding with the
/// right factor itself. Nonlinear mode trains an autoencoder on all
/// closed rows and splits it at the bottleneck.
pub fn train_factorization(
    h: &HankelBlocks,
    k: usize,
    arch: &[usize],
    nonlinear: bool,
    cfg: &TrainConfig,
) -> Result<(EncoderPair, Vec<f64>)> {
    let n = h.basis().num_suffixes();
    if nonlinear {
        let (net, history) = train_autoencoder(h, k, arch, Activation::Tanh, cfg)?;
        let (encoder, decoder) = net.split_at((arch.len() + 1) / 2)?;
        let pair = EncoderPair::new(MapFn::Network(encoder), MapFn::Network(decoder))?;
        Ok((pair, history))
    } else {
        if k >= n {
            return invalid(format!("rank {k} must be smaller than the {n}-wide Hankel rows"));
        }
        let f = svd_truncated(&h.h_lambda(), k)?;
        let encoder = MapFn::Linear(pinv(f.s())?);
        let decoder = MapFn::Linear(f.s().clone());
        Ok((EncoderPair::new(encoder, decoder)?, Vec::new()))
    }
}

/// Range tanh-output transition targets are squashed into.
pub const TRANSITION_TARGET_RANGE: f64 = 0.9;

/// Phase two: fits one state-to-state map per symbol.
///
/// Inputs are the encoded prefix rows, targets the encoded rows of the
/// one-symbol extensions. Linear mode solves least squares through the
/// input pseudoinverse; nonlinear mode trains a rank to twice-rank to
/// rank tanh network per symbol. When the encoder is linear its image is
/// unbounded, so targets are first squashed into
/// [`TRANSITION_TARGET_RANGE`] per coordinate and the inverse map rides
/// along with the returned transition.
pub fn train_transitions(
    h: &HankelBlocks,
    pair: &EncoderPair,
    nonlinear: bool,
    cfg: &TrainConfig,
) -> Result<(Vec<TransitionFn>, Vec<Vec<f64>>)> {
    let basis = h.basis();
    if pair.encoder.input_dim() != basis.num_suffixes() {
        return invalid("encoder width does not match the Hankel rows");
    }
    let k = pair.rank();
    let encoded: Vec<DVector<f64>> = (0..basis.num_closed())
        .map(|i| pair.encoder.apply(&h.row_vector(i)))
        .collect();
    let p = basis.num_prefixes();
    let alphabet = basis.alphabet();

    if nonlinear {
        let output_map = pair
            .encoder
            .is_linear()
            .then(|| AffineMap::fit(&encoded, TRANSITION_TARGET_RANGE));
        let mut transitions = Vec::with_capacity(alphabet.size());
        let mut histories = Vec::with_capacity(alphabet.size());
        for symbol in alphabet.symbols() {
            let data: Vec<(DVector<f64>, DVector<f64>)> = (0..p)
                .map(|u| {
                    let target = &encoded[basis.extension_index(u, symbol)];
                    let target = match &output_map {
                        Some(map) => map.squash(target),
                        None => target.clone(),
                    };
                    (encoded[u].clone(), target)
                })
                .collect();
            let mut init_rng = rand_chacha::ChaCha8Rng::seed_from_u64(derive_seed(
                cfg.seed,
                2 + 2 * symbol as u64,
            ));
            let net = Mlp::feedforward(
                &[k, 2 * k, k],
                Activation::Tanh,
                Activation::Tanh,
                true,
                &mut init_rng,
            )?;
            let train_cfg = TrainConfig {
                seed: derive_seed(cfg.seed, 3 + 2 * symbol as u64),
                ..cfg.clone()
            };
            let (net, history) = crate::neural::train(net, &data, &train_cfg)?;
            transitions.push(TransitionFn::Network { net, output_map: output_map.clone() });
            histories.push(history);
        }
        Ok((transitions, histories))
    } else {
        let mut x = DMatrix::zeros(p, k);
        for u in 0..p {
            x.set_row(u, &encoded[u].transpose());
        }
        let x_pinv = pinv(&x)?;
        let mut transitions = Vec::with_capacity(alphabet.size());
        for symbol in alphabet.symbols() {
            let mut y = DMatrix::zeros(p, k);
            for u in 0..p {
                y.set_row(u, &encoded[basis.extension_index(u, symbol)].transpose());
            }
            transitions.push(TransitionFn::Linear(&x_pinv * y));
        }
        Ok((transitions, Vec::new()))
    }
}

/// Joins trained parts into a model: the initial state encodes the
/// empty-prefix row and the decoder becomes the termination function.
pub fn assemble(
    h: &HankelBlocks,
    pair: EncoderPair,
    transitions: Vec<TransitionFn>,
    variant: Variant,
) -> Result<NlWfa> {
    let basis = h.basis();
    assert!(basis.closed_prefixes()[0].is_empty());
    let alpha0 = pair.encoder.apply(&h.row_vector(0));
    let termination = TerminationFn::new(pair.decoder, basis.lambda_suffix_index())?;
    NlWfa::new(basis.alphabet(), variant, alpha0, transitions, termination)
}

/// Everything both learning phases need beyond the data itself.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LearnConfig {
    pub max_prefixes: usize,
    pub max_suffixes: usize,
    /// Autoencoder hidden widths, bottleneck in the middle.
    pub arch: Vec<usize>,
    pub factorization: TrainConfig,
    pub transition: TrainConfig,
}

impl LearnConfig {
    /// Defaults for rank `k`: a 300-by-300 basis cap, widths
    /// `[2k, k, 2k]`, and the two phase learning rates 0.015 and 0.001.
    pub fn for_rank(k: usize, seed: u64) -> LearnConfig {
        LearnConfig {
            max_prefixes: 300,
            max_suffixes: 300,
            arch: vec![2 * k, k, 2 * k],
            factorization: TrainConfig {
                learning_rate: 0.015,
                seed: derive_seed(seed, 101),
                ..TrainConfig::default()
            },
            transition: TrainConfig {
                learning_rate: 0.001,
                seed: derive_seed(seed, 102),
                ..TrainConfig::default()
            },
        }
    }

    /// Same defaults with the deeper `[4k, 2k, k, 2k, 4k]` width list.
    pub fn deep_for_rank(k: usize, seed: u64) -> LearnConfig {
        LearnConfig {
            arch: vec![4 * k, 2 * k, k, 2 * k, 4 * k],
            ..LearnConfig::for_rank(k, seed)
        }
    }
}

/// A trained model plus the diagnostics of both phases.
#[derive(Debug, Clone)]
pub struct LearnOutput {
    pub model: NlWfa,
    /// Sum over basis prefixes of the squared gap between the model's
    /// value and the Hankel entry at the empty suffix.
    pub loss_j: f64,
    pub factorization_history: Vec<f64>,
    pub transition_histories: Vec<Vec<f64>>,
}

/// Squared error between the model's values and the empty-suffix Hankel
/// column, summed over the basis prefixes.
pub fn fit_loss(model: &NlWfa, h: &HankelBlocks) -> f64 {
    let lambda = h.basis().lambda_suffix_index();
    (0..h.basis().num_prefixes())
        .map(|u| {
            let target = h.h_full()[(u, lambda)];
            let got = model.evaluate(&h.basis().prefixes()[u]);
            (got - target).powi(2)
        })
        .sum()
}

/// Runs both phases on an existing Hankel block estimate.
pub fn learn_from_hankel(
    h: &HankelBlocks,
    k: usize,
    variant: Variant,
    cfg: &LearnConfig,
) -> Result<LearnOutput> {
    let (pair, factorization_history) = train_factorization(
        h,
        k,
        &cfg.arch,
        variant.factorization_nonlinear(),
        &cfg.factorization,
    )?;
    let (transitions, transition_histories) =
        train_transitions(h, &pair, variant.transitions_nonlinear(), &cfg.transition)?;
    let model = assemble(h, pair, transitions, variant)?;
    let loss_j = fit_loss(&model, h);
    Ok(LearnOutput { model, loss_j, factorization_history, transition_histories })
}

/// Builds a basis and Hankel estimate from `samples`, then learns.
pub fn learn(
    samples: &SampleSet,
    k: usize,
    variant: Variant,
    cfg: &LearnConfig,
) -> Result<LearnOutput> {
    let basis = build_basis(samples, cfg.max_prefixes, cfg.max_suffixes)?;
    let h = estimate_hankel(samples, &basis)?;
    learn_from_hankel(&h, k, variant, cfg)
}
