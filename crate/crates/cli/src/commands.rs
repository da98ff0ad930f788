//! The `generate`, `train`, and `eval` commands.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wfalearn_core::dyck::DyckGrammar;
use wfalearn_core::eval::{evaluate_model, EvalReport};
use wfalearn_core::hankel::{build_basis, estimate_hankel};
use wfalearn_core::iofmt::format_f64;
use wfalearn_core::nlwfa::learn_from_hankel;
use wfalearn_core::{derive_seed, NlWfa, SampleSet, Variant, Word};

use crate::config::ExperimentConfig;
use crate::{from_core, CliError};

pub const TRAIN_FILE: &str = "train.spice";
pub const VALIDATION_FILE: &str = "validation.spice";
pub const TEST_FILE: &str = "test.spice";
pub const ORACLE_FILE: &str = "test_oracle.txt";
pub const MODEL_FILE: &str = "model.json";
pub const HISTORY_FILE: &str = "loss_history.csv";
pub const EVAL_FILE: &str = "eval.csv";

/// Seed streams, so that data and model initialization never share a
/// generator: 1..=3 for the three dataset splits, 4 for training.
pub(crate) const TRAIN_STREAM: u64 = 1;
pub(crate) const VALIDATION_STREAM: u64 = 2;
pub(crate) const TEST_STREAM: u64 = 3;
const MODEL_STREAM: u64 = 4;

fn io_err(context: &str, err: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{context}: {err}"))
}

pub(crate) fn dyck_sample(seed: u64, n: usize, max_len: usize) -> SampleSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DyckGrammar::default().sample_set(&mut rng, n, max_len)
}

/// Exact word probabilities for every distinct string of `samples`.
pub(crate) fn grammar_oracle(
    grammar: &DyckGrammar,
    samples: &SampleSet,
) -> BTreeMap<Word, f64> {
    samples
        .distinct()
        .map(|(w, _)| (w.clone(), grammar.inside_probability(w)))
        .collect()
}

#[derive(Debug, Serialize)]
pub struct GenerateSummary {
    pub train: PathBuf,
    pub validation: PathBuf,
    pub test: PathBuf,
    pub oracle: PathBuf,
    pub train_size: usize,
    pub validation_size: usize,
    pub test_size: usize,
}

/// Samples the three dataset splits and writes them in SPICE format,
/// plus a one-probability-per-line oracle file aligned with the test
/// split's lines.
pub fn run_generate(
    cfg: &ExperimentConfig,
    out_dir: &Path,
) -> Result<GenerateSummary, CliError> {
    fs::create_dir_all(out_dir).map_err(|e| io_err("creating output directory", e))?;
    let grammar = DyckGrammar::default();
    let splits = [
        (TRAIN_FILE, cfg.train_size, TRAIN_STREAM),
        (VALIDATION_FILE, cfg.validation_size, VALIDATION_STREAM),
        (TEST_FILE, cfg.test_size, TEST_STREAM),
    ];
    let mut paths = Vec::new();
    let mut test_set = None;
    for (name, size, stream) in splits {
        let samples = dyck_sample(derive_seed(cfg.seed, stream), size, cfg.max_word_length);
        let path = out_dir.join(name);
        samples.write_spice(&path).map_err(from_core)?;
        paths.push(path);
        if name == TEST_FILE {
            test_set = Some(samples);
        }
    }
    let oracle_path = out_dir.join(ORACLE_FILE);
    let mut out = BufWriter::new(
        fs::File::create(&oracle_path).map_err(|e| io_err("creating oracle file", e))?,
    );
    for word in test_set.expect("test split was generated").words() {
        writeln!(out, "{}", format_f64(grammar.inside_probability(word)))
            .map_err(|e| io_err("writing oracle file", e))?;
    }
    out.flush().map_err(|e| io_err("writing oracle file", e))?;
    Ok(GenerateSummary {
        train: paths[0].clone(),
        validation: paths[1].clone(),
        test: paths[2].clone(),
        oracle: oracle_path,
        train_size: cfg.train_size,
        validation_size: cfg.validation_size,
        test_size: cfg.test_size,
    })
}

fn load_spice_config_path(path: &Path) -> Result<SampleSet, CliError> {
    SampleSet::load_spice(path)
        .map_err(|e| CliError::Config(format!("dataset {}: {e}", path.display())))
}

/// Training data: the configured file if set, else a fresh sample.
fn load_train(cfg: &ExperimentConfig) -> Result<SampleSet, CliError> {
    match &cfg.train_path {
        Some(path) => load_spice_config_path(path),
        None => Ok(dyck_sample(
            derive_seed(cfg.seed, TRAIN_STREAM),
            cfg.train_size,
            cfg.max_word_length,
        )),
    }
}

#[derive(Debug, Serialize)]
pub struct TrainSummary {
    pub variant: Variant,
    pub rank: usize,
    pub train_size: usize,
    pub num_prefixes: usize,
    pub num_suffixes: usize,
    pub loss_j: f64,
    pub model: PathBuf,
    pub history: PathBuf,
}

/// Checks the rank against the realized basis before any training runs.
pub(crate) fn check_rank(k: usize, num_prefixes: usize, num_suffixes: usize) -> Result<(), CliError> {
    let limit = num_prefixes.min(num_suffixes);
    if k > limit {
        return Err(CliError::Config(format!(
            "rank {k} exceeds the {num_prefixes}x{num_suffixes} basis (limit {limit})"
        )));
    }
    if k >= num_suffixes {
        return Err(CliError::Config(format!(
            "rank {k} needs more than {num_suffixes} suffixes for a bottleneck"
        )));
    }
    Ok(())
}

/// Learns one model and writes `model.json` plus `loss_history.csv`.
pub fn run_train(cfg: &ExperimentConfig, out_dir: &Path) -> Result<TrainSummary, CliError> {
    let samples = load_train(cfg)?;
    let basis =
        build_basis(&samples, cfg.max_prefixes, cfg.max_suffixes).map_err(from_core)?;
    let k = cfg.rank();
    check_rank(k, basis.num_prefixes(), basis.num_suffixes())?;
    let h = estimate_hankel(&samples, &basis).map_err(from_core)?;
    let lc = cfg.learn_config(k, derive_seed(cfg.seed, MODEL_STREAM));
    let out = learn_from_hankel(&h, k, cfg.variant(), &lc).map_err(from_core)?;

    fs::create_dir_all(out_dir).map_err(|e| io_err("creating output directory", e))?;
    let model_path = out_dir.join(MODEL_FILE);
    out.model.save_json(&model_path).map_err(from_core)?;

    let history_path = out_dir.join(HISTORY_FILE);
    let mut file = BufWriter::new(
        fs::File::create(&history_path).map_err(|e| io_err("creating loss history", e))?,
    );
    let write = |file: &mut BufWriter<fs::File>, phase: &str, symbol: String, hist: &[f64]| {
        for (epoch, loss) in hist.iter().enumerate() {
            writeln!(file, "{phase},{symbol},{epoch},{}", format_f64(*loss))
                .map_err(|e| io_err("writing loss history", e))?;
        }
        Ok::<(), CliError>(())
    };
    writeln!(file, "phase,symbol,epoch,loss").map_err(|e| io_err("writing loss history", e))?;
    write(&mut file, "factorization", String::new(), &out.factorization_history)?;
    for (symbol, hist) in out.transition_histories.iter().enumerate() {
        write(&mut file, "transition", symbol.to_string(), hist)?;
    }
    file.flush().map_err(|e| io_err("writing loss history", e))?;

    Ok(TrainSummary {
        variant: cfg.variant(),
        rank: k,
        train_size: samples.words().len(),
        num_prefixes: basis.num_prefixes(),
        num_suffixes: basis.num_suffixes(),
        loss_j: out.loss_j,
        model: model_path,
        history: history_path,
    })
}

/// Reads a one-probability-per-line oracle file, pairing line `i` with
/// the `i`-th word of `test`.
pub fn read_oracle(test: &SampleSet, path: &Path) -> Result<BTreeMap<Word, f64>, CliError> {
    let file = fs::File::open(path)
        .map_err(|e| io_err(&format!("oracle {}", path.display()), e))?;
    let mut values = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err("reading oracle file", e))?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        let value: f64 = text.parse().map_err(|_| {
            CliError::Config(format!("oracle line {}: '{text}' is not a number", i + 1))
        })?;
        values.push(value);
    }
    let words = test.words();
    if values.len() != words.len() {
        return Err(CliError::Config(format!(
            "oracle has {} values for {} test strings",
            values.len(),
            words.len()
        )));
    }
    let mut map = BTreeMap::new();
    for (word, value) in words.iter().zip(values) {
        if let Some(existing) = map.insert(word.clone(), value) {
            if (existing - value).abs() > 1e-12 {
                return Err(CliError::Config(format!(
                    "oracle assigns both {existing} and {value} to a repeated test string"
                )));
            }
        }
    }
    Ok(map)
}

/// Scores a saved model on a test set. Without an oracle file the target
/// weights fall back to the empirical test frequencies; the report's
/// `p_star_source` says which was used. Also writes the one-row
/// `eval.csv` into `out_dir`.
pub fn run_eval(
    model_path: &Path,
    test_path: &Path,
    oracle_path: Option<&Path>,
    out_dir: &Path,
) -> Result<EvalReport, CliError> {
    let model = NlWfa::load_json(model_path)
        .map_err(|e| io_err(&format!("model {}", model_path.display()), e))?;
    let test = SampleSet::load_spice(test_path)
        .map_err(|e| io_err(&format!("test set {}", test_path.display()), e))?;
    if model.alphabet() != test.alphabet() {
        return Err(CliError::Config(format!(
            "model reads {} symbols but the test set uses {}",
            model.alphabet().size(),
            test.alphabet().size()
        )));
    }
    let oracle = oracle_path.map(|p| read_oracle(&test, p)).transpose()?;
    let report = evaluate_model(&model, &test, oracle.as_ref(), false).map_err(from_core)?;

    fs::create_dir_all(out_dir).map_err(|e| io_err("creating output directory", e))?;
    let csv_path = out_dir.join(EVAL_FILE);
    let row = report.csv_row(model.variant().name(), model.rank(), test.words().len(), 0);
    fs::write(&csv_path, format!("{}\n{row}\n", EvalReport::csv_header()))
        .map_err(|e| io_err("writing eval.csv", e))?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use wfalearn_core::eval::PStarSource;

    fn tiny_cfg(seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            ranks: vec![2],
            train_size: 300,
            validation_size: 40,
            test_size: 40,
            epochs: 10,
            max_prefixes: 20,
            max_suffixes: 20,
            max_word_length: 30,
            seed,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn generate_is_deterministic_and_oracle_matches_known_values() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let cfg = tiny_cfg(7);
        run_generate(&cfg, dir_a.path()).unwrap();
        run_generate(&cfg, dir_b.path()).unwrap();
        for name in [TRAIN_FILE, VALIDATION_FILE, TEST_FILE, ORACLE_FILE] {
            let a = fs::read(dir_a.path().join(name)).unwrap();
            let b = fs::read(dir_b.path().join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between identical runs");
        }

        let test = SampleSet::load_spice(dir_a.path().join(TEST_FILE)).unwrap();
        let oracle = read_oracle(&test, &dir_a.path().join(ORACLE_FILE)).unwrap();
        let pair = Word::from_symbols(vec![0, 1]);
        if let Some(p) = oracle.get(&pair) {
            assert_abs_diff_eq!(*p, 0.4, epsilon = 1e-15);
        } else {
            panic!("40 bracket words without a single '[]'");
        }
    }

    #[test]
    fn generate_rejects_empty_splits() {
        let mut cfg = tiny_cfg(0);
        cfg.train_size = 0;
        assert_eq!(cfg.validate().unwrap_err().exit_code(), 2);
    }

    #[test]
    fn train_writes_a_loadable_model_and_history() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_cfg(1);
        let summary = run_train(&cfg, dir.path()).unwrap();
        assert_eq!(summary.rank, 2);
        assert!(summary.loss_j.is_finite());

        let model = NlWfa::load_json(&summary.model).unwrap();
        assert_eq!(model.variant(), Variant::Sp);
        assert!(model.evaluate(&Word::from_symbols(vec![0, 1])).is_finite());

        let history = fs::read_to_string(&summary.history).unwrap();
        assert!(history.starts_with("phase,symbol,epoch,loss\n"));
    }

    #[test]
    fn training_twice_with_one_seed_writes_identical_models() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let mut cfg = tiny_cfg(5);
        cfg.variants = vec![Variant::BothNon];
        run_train(&cfg, dir_a.path()).unwrap();
        run_train(&cfg, dir_b.path()).unwrap();
        let a = fs::read(dir_a.path().join(MODEL_FILE)).unwrap();
        let b = fs::read(dir_b.path().join(MODEL_FILE)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn oversized_rank_fails_before_training() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = tiny_cfg(2);
        cfg.ranks = vec![500];
        let err = run_train(&cfg, dir.path()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(!dir.path().join(MODEL_FILE).exists());
    }

    #[test]
    fn eval_reports_both_sources_and_writes_a_csv_row() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_cfg(3);
        run_generate(&cfg, dir.path()).unwrap();
        let summary = run_train(
            &ExperimentConfig {
                train_path: Some(dir.path().join(TRAIN_FILE)),
                ..tiny_cfg(3)
            },
            dir.path(),
        )
        .unwrap();

        let with_oracle = run_eval(
            &summary.model,
            &dir.path().join(TEST_FILE),
            Some(&dir.path().join(ORACLE_FILE)),
            dir.path(),
        )
        .unwrap();
        assert_eq!(with_oracle.p_star_source, PStarSource::Oracle);

        let empirical = run_eval(
            &summary.model,
            &dir.path().join(TEST_FILE),
            None,
            dir.path(),
        )
        .unwrap();
        assert_eq!(empirical.p_star_source, PStarSource::Empirical);

        let csv = fs::read_to_string(dir.path().join(EVAL_FILE)).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), EvalReport::csv_header());
        let row = lines.next().unwrap();
        assert!(row.starts_with("sp,2,"));
    }

    #[test]
    fn default_config_trains_an_evaluable_spectral_model() {
        let dir = tempfile::tempdir().unwrap();
        let summary = run_train(&ExperimentConfig::default(), dir.path()).unwrap();
        assert_eq!(summary.variant, Variant::Sp);
        assert_eq!(summary.rank, 5);
        assert_eq!(summary.train_size, 20_000);
        let model = NlWfa::load_json(&summary.model).unwrap();
        assert!(model.evaluate(&Word::from_symbols(vec![0, 1])).is_finite());
    }

    #[test]
    fn exact_model_scores_the_oracle_entropy() {
        use nalgebra::{DMatrix, DVector};
        use wfalearn_core::hankel::{exact_hankel_from_wfa, Basis};
        use wfalearn_core::linwfa::Wfa;
        use wfalearn_core::nlwfa::{learn_from_hankel, LearnConfig};

        let alphabet = wfalearn_core::Alphabet::new(2).unwrap();
        let wfa = Wfa::new(
            alphabet,
            DVector::from_row_slice(&[1.0, 0.0]),
            DVector::from_row_slice(&[0.2, 1.0]),
            vec![
                DMatrix::from_row_slice(2, 2, &[0.3, 0.4, 0.0, 0.1]),
                DMatrix::from_row_slice(2, 2, &[0.1, 0.0, 0.5, 0.2]),
            ],
        )
        .unwrap();
        let prefixes: Vec<Word> = [&[][..], &[0], &[1], &[0, 0], &[0, 1]]
            .iter()
            .map(|s| Word::from_symbols(s.to_vec()))
            .collect();
        let basis = Basis::new(alphabet, prefixes.clone(), prefixes).unwrap();
        let h = exact_hankel_from_wfa(&wfa, &basis).unwrap();
        let model = learn_from_hankel(&h, 2, Variant::Sp, &LearnConfig::for_rank(2, 0))
            .unwrap()
            .model;

        let dir = tempfile::tempdir().unwrap();
        let model_path = dir.path().join(MODEL_FILE);
        model.save_json(&model_path).unwrap();

        let words: Vec<Word> = [&[0, 1][..], &[1], &[1, 1, 0], &[0, 0, 1]]
            .iter()
            .map(|s| Word::from_symbols(s.to_vec()))
            .collect();
        let test = SampleSet::from_words(alphabet, words.clone()).unwrap();
        let test_path = dir.path().join(TEST_FILE);
        test.write_spice(&test_path).unwrap();

        let p_star: Vec<f64> = words.iter().map(|w| wfa.evaluate(w).abs()).collect();
        let oracle_path = dir.path().join(ORACLE_FILE);
        let lines: Vec<String> = p_star.iter().map(|p| format_f64(*p)).collect();
        fs::write(&oracle_path, lines.join("\n") + "\n").unwrap();

        let report =
            run_eval(&model_path, &test_path, Some(&oracle_path), dir.path()).unwrap();
        let total: f64 = p_star.iter().sum();
        let entropy: f64 = p_star.iter().map(|p| -(p / total) * (p / total).log2()).sum();
        assert_abs_diff_eq!(report.log2_pautomac, entropy, epsilon = 1e-9);
        assert_abs_diff_eq!(report.pautomac, entropy.exp2(), epsilon = 1e-9);
    }

    #[test]
    fn eval_rejects_mismatched_alphabets() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny_cfg(4);
        let summary = run_train(&cfg, dir.path()).unwrap();

        let wide = SampleSet::from_words(
            wfalearn_core::Alphabet::new(3).unwrap(),
            [Word::from_symbols(vec![0, 2])],
        )
        .unwrap();
        let test_path = dir.path().join("wide.spice");
        wide.write_spice(&test_path).unwrap();

        let err = run_eval(&summary.model, &test_path, None, dir.path()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn oracle_parsing_validates_shape_and_content() {
        let dir = tempfile::tempdir().unwrap();
        let test = SampleSet::from_words(
            wfalearn_core::Alphabet::new(2).unwrap(),
            [Word::from_symbols(vec![0, 1]), Word::empty()],
        )
        .unwrap();

        let short = dir.path().join("short.txt");
        fs::write(&short, "0.4\n").unwrap();
        assert_eq!(read_oracle(&test, &short).unwrap_err().exit_code(), 2);

        let garbled = dir.path().join("garbled.txt");
        fs::write(&garbled, "0.4\nbrackets\n").unwrap();
        assert_eq!(read_oracle(&test, &garbled).unwrap_err().exit_code(), 2);

        let good = dir.path().join("good.txt");
        fs::write(&good, "0.4\n0.25\n").unwrap();
        let map = read_oracle(&test, &good).unwrap();
        assert_eq!(map[&Word::empty()], 0.25);
    }
}
