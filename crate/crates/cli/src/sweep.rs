//! Grid sweeps over (variant, rank, sample size, seed) with a CSV report.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use wfalearn_core::dyck::DyckGrammar;
use wfalearn_core::eval::evaluate_model;
use wfalearn_core::hankel::{build_basis, estimate_hankel};
use wfalearn_core::iofmt::format_f64;
use wfalearn_core::nlwfa::learn_from_hankel;
use wfalearn_core::{derive_seed, Variant};

use crate::commands::{check_rank, dyck_sample, grammar_oracle};
use crate::config::ExperimentConfig;
use crate::CliError;

pub const SWEEP_FILE: &str = "sweep.csv";

const SWEEP_HEADER: &str =
    "row,variant,k,sample_size,seed,pautomac,log2_pautomac,wer,val_pautomac,val_log2_pautomac,val_wer,status";

/// Seed streams for the per-seed-index dataset chain. Every cell that
/// shares a seed index sees the same validation and test sets, and the
/// same training set at equal sample sizes, so variants and ranks stay
/// comparable.
const DATA_TAG: u64 = 0xDA7A;
const TEST_STREAM: u64 = 0;
const VALIDATION_STREAM: u64 = 1;
const TRAIN_STREAM: u64 = 2;
/// Tag for the per-cell training seed chain, kept apart from the data chain.
const CELL_TAG: u64 = 0xCE11;

#[derive(Debug, Clone, Copy)]
struct Cell {
    variant: Variant,
    k: usize,
    sample_size: usize,
    seed_index: usize,
}

#[derive(Debug, Clone, Copy)]
struct CellMetrics {
    pautomac: f64,
    log2_pautomac: f64,
    wer: f64,
    val_pautomac: f64,
    val_log2_pautomac: f64,
    val_wer: f64,
}

fn variant_id(variant: Variant) -> u64 {
    Variant::ALL
        .iter()
        .position(|v| *v == variant)
        .expect("variant is one of the known four") as u64
}

fn data_seed_chain(cfg: &ExperimentConfig, seed_index: usize) -> u64 {
    derive_seed(derive_seed(cfg.seed, DATA_TAG), seed_index as u64)
}

fn cell_training_seed(cfg: &ExperimentConfig, cell: &Cell) -> u64 {
    let mut s = derive_seed(cfg.seed, CELL_TAG);
    s = derive_seed(s, variant_id(cell.variant));
    s = derive_seed(s, cell.k as u64);
    s = derive_seed(s, cell.sample_size as u64);
    derive_seed(s, cell.seed_index as u64)
}

fn run_cell(cfg: &ExperimentConfig, cell: &Cell) -> Result<CellMetrics, String> {
    let chain = data_seed_chain(cfg, cell.seed_index);
    let train = dyck_sample(
        derive_seed(derive_seed(chain, TRAIN_STREAM), cell.sample_size as u64),
        cell.sample_size,
        cfg.max_word_length,
    );
    let validation = dyck_sample(
        derive_seed(chain, VALIDATION_STREAM),
        cfg.validation_size,
        cfg.max_word_length,
    );
    let test = dyck_sample(
        derive_seed(chain, TEST_STREAM),
        cfg.test_size,
        cfg.max_word_length,
    );

    let err = |e: &dyn std::fmt::Display| e.to_string();
    let basis =
        build_basis(&train, cfg.max_prefixes, cfg.max_suffixes).map_err(|e| err(&e))?;
    check_rank(cell.k, basis.num_prefixes(), basis.num_suffixes()).map_err(|e| err(&e))?;
    let h = estimate_hankel(&train, &basis).map_err(|e| err(&e))?;
    let lc = cfg.learn_config(cell.k, cell_training_seed(cfg, cell));
    let out = learn_from_hankel(&h, cell.k, cell.variant, &lc).map_err(|e| err(&e))?;

    let grammar = DyckGrammar::default();
    let test_report = evaluate_model(
        &out.model,
        &test,
        Some(&grammar_oracle(&grammar, &test)),
        false,
    )
    .map_err(|e| err(&e))?;
    let val_report = evaluate_model(
        &out.model,
        &validation,
        Some(&grammar_oracle(&grammar, &validation)),
        false,
    )
    .map_err(|e| err(&e))?;

    Ok(CellMetrics {
        pautomac: test_report.pautomac,
        log2_pautomac: test_report.log2_pautomac,
        wer: test_report.wer,
        val_pautomac: val_report.pautomac,
        val_log2_pautomac: val_report.log2_pautomac,
        val_wer: val_report.wer,
    })
}

fn metric_columns(m: &CellMetrics) -> String {
    [
        m.pautomac,
        m.log2_pautomac,
        m.wer,
        m.val_pautomac,
        m.val_log2_pautomac,
        m.val_wer,
    ]
    .map(format_f64)
    .join(",")
}

const EMPTY_METRICS: &str = ",,,,,";

fn sanitize(message: &str) -> String {
    message.replace([',', '\n'], ";")
}

fn mean_of(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count() as f64;
    values.sum::<f64>() / n
}

fn std_of(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let mean = mean_of(values.clone());
    mean_of(values.map(|v| (v - mean) * (v - mean))).sqrt()
}

fn aggregate(cells: &[&CellMetrics], f: fn(&CellMetrics) -> f64, std: bool) -> f64 {
    let values = cells.iter().map(|m| f(m));
    if std {
        std_of(values)
    } else {
        mean_of(values)
    }
}

fn aggregate_columns(cells: &[&CellMetrics], std: bool) -> String {
    [
        |m: &CellMetrics| m.pautomac,
        |m: &CellMetrics| m.log2_pautomac,
        |m: &CellMetrics| m.wer,
        |m: &CellMetrics| m.val_pautomac,
        |m: &CellMetrics| m.val_log2_pautomac,
        |m: &CellMetrics| m.val_wer,
    ]
    .map(|f| format_f64(aggregate(cells, f, std)))
    .join(",")
}

#[derive(Debug, Serialize)]
pub struct BestSelection {
    pub variant: Variant,
    pub sample_size: usize,
    pub rank: usize,
    pub val_pautomac: f64,
}

#[derive(Debug, Serialize)]
pub struct SweepSummary {
    pub csv: PathBuf,
    pub num_cells: usize,
    pub num_errors: usize,
    pub best: Vec<BestSelection>,
}

/// Runs every grid cell on a bounded worker pool and writes `sweep.csv`:
/// one `cell` row per (variant, k, sample size, seed), then `mean` and
/// `std` rows over seeds, then one `best_k` row per (variant, sample
/// size) selecting the rank with the lowest mean validation Pautomac
/// score. Failed cells keep their row with an `error:` status and the
/// sweep keeps going. Output bytes depend only on the configuration.
pub fn run_sweep(cfg: &ExperimentConfig, out_dir: &Path) -> Result<SweepSummary, CliError> {
    let sample_sizes = cfg.sample_size_grid();
    let mut cells = Vec::new();
    for &variant in &cfg.variants {
        for &k in &cfg.ranks {
            for &sample_size in &sample_sizes {
                for seed_index in 0..cfg.num_seeds {
                    cells.push(Cell {
                        variant,
                        k,
                        sample_size,
                        seed_index,
                    });
                }
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    let outcomes: Vec<Result<CellMetrics, String>> =
        pool.install(|| cells.par_iter().map(|cell| run_cell(cfg, cell)).collect());

    let mut lines = vec![SWEEP_HEADER.to_string()];
    for (cell, outcome) in cells.iter().zip(&outcomes) {
        let (metrics, status) = match outcome {
            Ok(m) => (metric_columns(m), "ok".to_string()),
            Err(message) => (EMPTY_METRICS.to_string(), format!("error: {}", sanitize(message))),
        };
        lines.push(format!(
            "cell,{},{},{},{},{metrics},{status}",
            cell.variant.name(),
            cell.k,
            cell.sample_size,
            cell.seed_index,
        ));
    }

    let group = |variant: Variant, k: usize, sample_size: usize| -> Vec<&CellMetrics> {
        cells
            .iter()
            .zip(&outcomes)
            .filter(|(c, _)| c.variant == variant && c.k == k && c.sample_size == sample_size)
            .filter_map(|(_, o)| o.as_ref().ok())
            .collect()
    };

    for &variant in &cfg.variants {
        for &k in &cfg.ranks {
            for &sample_size in &sample_sizes {
                let ok = group(variant, k, sample_size);
                for (row, std) in [("mean", false), ("std", true)] {
                    let (metrics, status) = if ok.is_empty() {
                        (EMPTY_METRICS.to_string(), "error: all seeds failed".to_string())
                    } else {
                        (aggregate_columns(&ok, std), String::new())
                    };
                    lines.push(format!(
                        "{row},{},{k},{sample_size},,{metrics},{status}",
                        variant.name(),
                    ));
                }
            }
        }
    }

    let mut best = Vec::new();
    for &variant in &cfg.variants {
        for &sample_size in &sample_sizes {
            let candidate = cfg
                .ranks
                .iter()
                .filter(|&&k| !group(variant, k, sample_size).is_empty())
                .map(|&k| {
                    let ok = group(variant, k, sample_size);
                    (k, aggregate(&ok, |m| m.val_pautomac, false))
                })
                .min_by(|a, b| a.1.total_cmp(&b.1));
            match candidate {
                Some((k, _)) => {
                    let ok = group(variant, k, sample_size);
                    lines.push(format!(
                        "best_k,{},{k},{sample_size},,{},selected",
                        variant.name(),
                        aggregate_columns(&ok, false),
                    ));
                    best.push(BestSelection {
                        variant,
                        sample_size,
                        rank: k,
                        val_pautomac: aggregate(&ok, |m| m.val_pautomac, false),
                    });
                }
                None => lines.push(format!(
                    "best_k,{},,{sample_size},,{EMPTY_METRICS},error: all cells failed",
                    variant.name(),
                )),
            }
        }
    }

    fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Io(format!("creating output directory: {e}")))?;
    let csv = out_dir.join(SWEEP_FILE);
    fs::write(&csv, lines.join("\n") + "\n")
        .map_err(|e| CliError::Io(format!("writing sweep.csv: {e}")))?;

    Ok(SweepSummary {
        csv,
        num_cells: cells.len(),
        num_errors: outcomes.iter().filter(|o| o.is_err()).count(),
        best,
    })
}
