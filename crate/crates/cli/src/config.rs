//! The experiment configuration document and command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use wfalearn_core::nlwfa::LearnConfig;
use wfalearn_core::Variant;

use crate::CliError;

/// One JSON document describing an experiment. Every field has a default,
/// so an empty document (or no `--config` at all) is a valid experiment;
/// command-line flags override single fields after loading.
///
/// `train`/`eval` use the first entry of `variants` and `ranks`; `sweep`
/// crosses the full grids. Dataset paths are optional: when absent, the
/// commands sample bracket-language data themselves from the master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub variants: Vec<Variant>,
    pub ranks: Vec<usize>,
    pub max_prefixes: usize,
    pub max_suffixes: usize,
    /// `false` trains the three-layer autoencoder (widths 2k, k, 2k),
    /// `true` the five-layer one (4k, 2k, k, 2k, 4k).
    pub deep_arch: bool,
    pub factorization_learning_rate: f64,
    pub transition_learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub train_size: usize,
    pub validation_size: usize,
    pub test_size: usize,
    /// Training-set sizes for sweeps; empty means just `train_size`.
    pub sample_sizes: Vec<usize>,
    /// Sweep repetitions per cell.
    pub num_seeds: usize,
    pub seed: u64,
    /// Rejection bound for sampled words.
    pub max_word_length: usize,
    /// Sweep worker threads; 0 picks one per core.
    pub jobs: usize,
    pub train_path: Option<PathBuf>,
    pub validation_path: Option<PathBuf>,
    pub test_path: Option<PathBuf>,
    pub oracle_path: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            variants: vec![Variant::Sp],
            ranks: vec![5],
            max_prefixes: 300,
            max_suffixes: 300,
            deep_arch: false,
            factorization_learning_rate: 0.015,
            transition_learning_rate: 0.001,
            epochs: 500,
            batch_size: 32,
            train_size: 20_000,
            validation_size: 250,
            test_size: 250,
            sample_sizes: Vec::new(),
            num_seeds: 1,
            seed: 0,
            max_word_length: 60,
            jobs: 0,
            train_path: None,
            validation_path: None,
            test_path: None,
            oracle_path: None,
        }
    }
}

/// Flag values that replace config fields after loading.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub variant: Option<Variant>,
    pub rank: Option<usize>,
    pub jobs: Option<usize>,
}

impl ExperimentConfig {
    /// Loads the JSON document at `path` (or starts from defaults),
    /// applies `overrides`, and validates the result.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    CliError::Config(format!("cannot read config {}: {e}", p.display()))
                })?;
                serde_json::from_str(&text).map_err(|e| {
                    CliError::Config(format!("malformed config {}: {e}", p.display()))
                })?
            }
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = overrides.seed {
            cfg.seed = seed;
        }
        if let Some(variant) = overrides.variant {
            cfg.variants = vec![variant];
        }
        if let Some(rank) = overrides.rank {
            cfg.ranks = vec![rank];
        }
        if let Some(jobs) = overrides.jobs {
            cfg.jobs = jobs;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.variants.is_empty() {
            return bad("the variant grid is empty".into());
        }
        if self.ranks.is_empty() {
            return bad("the rank grid is empty".into());
        }
        if self.ranks.contains(&0) {
            return bad("ranks must be at least 1".into());
        }
        if self.sample_sizes.contains(&0) {
            return bad("sample sizes must be positive".into());
        }
        if self.num_seeds == 0 {
            return bad("at least one seed repetition is required".into());
        }
        if self.train_size == 0 || self.validation_size == 0 || self.test_size == 0 {
            return bad("dataset sizes must be positive".into());
        }
        if self.max_prefixes == 0 || self.max_suffixes == 0 {
            return bad("basis size limits must be at least 1".into());
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch size must be positive".into());
        }
        if !(self.factorization_learning_rate > 0.0) || !(self.transition_learning_rate > 0.0) {
            return bad("learning rates must be positive".into());
        }
        if self.max_word_length == 0 {
            return bad("the word length bound must be positive".into());
        }
        for p in [&self.train_path, &self.validation_path, &self.test_path, &self.oracle_path]
            .into_iter()
            .flatten()
        {
            if !p.is_file() {
                return bad(format!("referenced path {} is not a readable file", p.display()));
            }
        }
        Ok(())
    }

    /// The variant `train` and `eval` act on.
    pub fn variant(&self) -> Variant {
        self.variants[0]
    }

    /// The rank `train` acts on.
    pub fn rank(&self) -> usize {
        self.ranks[0]
    }

    /// Sweep grid of training-set sizes.
    pub fn sample_size_grid(&self) -> Vec<usize> {
        if self.sample_sizes.is_empty() {
            vec![self.train_size]
        } else {
            self.sample_sizes.clone()
        }
    }

    /// Core learning configuration for rank `k` with all tunables applied.
    pub fn learn_config(&self, k: usize, seed: u64) -> LearnConfig {
        let mut lc = if self.deep_arch {
            LearnConfig::deep_for_rank(k, seed)
        } else {
            LearnConfig::for_rank(k, seed)
        };
        lc.max_prefixes = self.max_prefixes;
        lc.max_suffixes = self.max_suffixes;
        lc.factorization.learning_rate = self.factorization_learning_rate;
        lc.factorization.epochs = self.epochs;
        lc.factorization.batch_size = self.batch_size;
        lc.transition.learning_rate = self.transition_learning_rate;
        lc.transition.epochs = self.epochs;
        lc.transition.batch_size = self.batch_size;
        lc
    }
}
