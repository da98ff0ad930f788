//! End-to-end acceptance checks, one test per criterion. Each prints a
//! single PASS line (visible with `--nocapture`) after its assertions.

use std::fs;
use std::sync::Mutex;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wfalearn_cli::{run_sweep, ExperimentConfig};
use wfalearn_core::dyck::DyckGrammar;
use wfalearn_core::eval::{pautomac_from_values, word_error_rate};
use wfalearn_core::hankel::{exact_hankel_from_wfa, Basis};
use wfalearn_core::linwfa::spectral_learn;
use wfalearn_core::neural::{backprop, Activation, Adamax, Gradients, LayerSpec, Mlp};
use wfalearn_core::nlwfa::{
    learn_from_hankel, LearnConfig, MapFn, TerminationFn, TransitionFn,
};
use wfalearn_core::{Alphabet, SampleSet, NlWfa, Variant, Wfa, Word};

/// The trend criteria train many models; running them one at a time keeps
/// their reported wall times meaningful.
static HEAVY: Mutex<()> = Mutex::new(());

fn all_words(alphabet: Alphabet, max_len: usize) -> Vec<Word> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for w in &frontier {
            for s in alphabet.symbols() {
                let mut e = w.clone();
                e.push(s);
                next.push(e);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out.into_iter().map(Word::from_symbols).collect()
}

fn random_wfa(k: usize, alphabet: Alphabet, scale: f64, rng: &mut ChaCha8Rng) -> Wfa {
    let mut draw = |n: usize| DVector::from_fn(n, |_, _| rng.random_range(-scale..scale));
    let alpha0 = draw(k);
    let alpha_inf = draw(k);
    let transitions = alphabet
        .symbols()
        .map(|_| DMatrix::from_fn(k, k, |_, _| rng.random_range(-scale..scale)))
        .collect();
    Wfa::new(alphabet, alpha0, alpha_inf, transitions).unwrap()
}

/// A random WFA whose exact Hankel block really has rank `k`, so the
/// function is minimal and recoverable at that rank.
fn random_minimal_wfa(
    k: usize,
    alphabet: Alphabet,
    basis: &Basis,
    rng: &mut ChaCha8Rng,
) -> (Wfa, wfalearn_core::HankelBlocks) {
    loop {
        let wfa = random_wfa(k, alphabet, 0.6, rng);
        let h = exact_hankel_from_wfa(&wfa, basis).unwrap();
        let sv = h.h_lambda().svd(false, false).singular_values;
        if sv.len() >= k && sv[k - 1] > 1e-6 {
            return (wfa, h);
        }
    }
}

#[test]
fn criterion_01_spectral_learning_recovers_random_wfas_exactly() {
    let t = Instant::now();
    let alphabet = Alphabet::new(2).unwrap();
    let basis = Basis::new(
        alphabet,
        all_words(alphabet, 4),
        all_words(alphabet, 4),
    )
    .unwrap();
    let probe = all_words(alphabet, 8);
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for i in 0..20 {
        let k = 1 + i % 4;
        let (wfa, h) = random_minimal_wfa(k, alphabet, &basis, &mut rng);
        let learned = spectral_learn(&h, k).unwrap();
        for w in &probe {
            worst = worst.max((wfa.evaluate(w) - learned.evaluate(w)).abs());
        }
    }
    assert!(worst < 1e-6, "worst recovery error {worst:e}");
    let secs = t.elapsed().as_secs_f64();
    assert!(secs < 30.0, "took {secs:.1}s, budget 30s");
    println!(
        "criterion 01 PASS ({secs:.1}s) spectral recovery of 20 random automata, worst error {worst:.2e}"
    );
}

#[test]
fn criterion_02_linear_learning_reproduces_the_hankel_first_column() {
    let t = Instant::now();
    let alphabet = Alphabet::new(2).unwrap();
    let basis = Basis::new(
        alphabet,
        all_words(alphabet, 4),
        all_words(alphabet, 4),
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst = 0.0f64;
    for seed in 0..3u64 {
        let k = 2 + seed as usize;
        let (_, h) = random_minimal_wfa(k, alphabet, &basis, &mut rng);
        let model = learn_from_hankel(&h, k, Variant::Sp, &LearnConfig::for_rank(k, seed))
            .unwrap()
            .model;
        for u in h.basis().prefixes() {
            let target = h.value(u, &Word::empty()).unwrap();
            worst = worst.max((model.evaluate(u) - target).abs());
        }
    }
    assert!(worst < 1e-8, "worst prefix value error {worst:e}");
    let secs = t.elapsed().as_secs_f64();
    assert!(secs < 10.0, "took {secs:.1}s, budget 10s");
    println!(
        "criterion 02 PASS ({secs:.1}s) learned values match the empty-suffix column, worst error {worst:.2e}"
    );
}

#[test]
fn criterion_03_kronecker_square_computes_the_squared_function() {
    let t = Instant::now();
    let alphabet = Alphabet::new(2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst = 0.0f64;
    for i in 0..10 {
        let wfa = random_wfa(1 + i % 3, alphabet, 0.6, &mut rng);
        let squared = wfa.kron_square();
        for _ in 0..100 {
            let len = rng.random_range(0..=8);
            let w = Word::from_symbols(
                (0..len).map(|_| rng.random_range(0..2)).collect::<Vec<_>>(),
            );
            let f = wfa.evaluate(&w);
            worst = worst.max((squared.evaluate(&w) - f * f).abs());
        }
    }
    assert!(worst < 1e-10, "worst squared-value error {worst:e}");
    let secs = t.elapsed().as_secs_f64();
    assert!(secs < 5.0, "took {secs:.1}s, budget 5s");
    println!(
        "criterion 03 PASS ({secs:.1}s) squared automaton matches f^2 on 1000 words, worst error {worst:.2e}"
    );
}

#[derive(Clone, Copy, PartialEq)]
enum Sym {
    T(usize),
    S,
}

/// Total probability of deriving `target`, summed by expanding every
/// leftmost derivation of the bracket grammar outright.
fn derivation_sum(target: &[usize]) -> f64 {
    fn expand(form: &[Sym], p: f64, target: &[usize], total: &mut f64) {
        let Some(pos) = form.iter().position(|s| *s == Sym::S) else {
            let word: Vec<usize> = form
                .iter()
                .map(|s| match s {
                    Sym::T(t) => *t,
                    Sym::S => unreachable!(),
                })
                .collect();
            if word == target {
                *total += p;
            }
            return;
        };
        let nonterminals = form.iter().filter(|s| **s == Sym::S).count();
        if form.len() - nonterminals + 2 * nonterminals > target.len() {
            return;
        }
        if form[..pos]
            .iter()
            .zip(target)
            .any(|(s, t)| *s != Sym::T(*t))
        {
            return;
        }
        for (replacement, rule_p) in [
            (vec![Sym::S, Sym::S], 0.2),
            (vec![Sym::T(0), Sym::S, Sym::T(1)], 0.4),
            (vec![Sym::T(0), Sym::T(1)], 0.4),
        ] {
            let mut next = form[..pos].to_vec();
            next.extend(replacement);
            next.extend_from_slice(&form[pos + 1..]);
            expand(&next, p * rule_p, target, total);
        }
    }
    let mut total = 0.0;
    expand(&[Sym::S], 1.0, target, &mut total);
    total
}

#[test]
fn criterion_04_bracket_oracle_and_sampler_agree_with_enumeration() {
    let t = Instant::now();
    let grammar = DyckGrammar::default();
    let alphabet = DyckGrammar::alphabet();

    let mut worst = 0.0f64;
    for w in all_words(alphabet, 8) {
        let by_dp = grammar.inside_probability(&w);
        let by_enumeration = derivation_sum(w.symbols());
        worst = worst.max((by_dp - by_enumeration).abs());
    }
    assert!(worst < 1e-12, "worst enumeration gap {worst:e}");

    let word = |text: &str| {
        Word::from_symbols(
            text.chars()
                .map(|c| if c == '[' { 0 } else { 1 })
                .collect::<Vec<_>>(),
        )
    };
    for (text, p) in [("[]", 0.4), ("[[]]", 0.16), ("[][]", 0.032)] {
        let got = grammar.inside_probability(&word(text));
        assert!((got - p).abs() < 1e-15, "{text}: {got} instead of {p}");
    }

    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let draws = grammar.sample_set(&mut rng, 50_000, 4000);
    let mean = draws.words().iter().map(|w| w.len() as f64).sum::<f64>() / 50_000.0;
    assert!((mean - 8.0).abs() <= 1.0, "sampler mean length {mean}");

    let secs = t.elapsed().as_secs_f64();
    assert!(secs < 60.0, "took {secs:.1}s, budget 60s");
    println!(
        "criterion 04 PASS ({secs:.1}s) inside probabilities match enumeration (worst {worst:.1e}), sampler mean length {mean:.3}"
    );
}

fn batch_loss(net: &Mlp, batch: &[(DVector<f64>, DVector<f64>)]) -> f64 {
    batch
        .iter()
        .map(|(x, target)| 0.5 * (net.forward(x) - target).norm_squared())
        .sum::<f64>()
        / batch.len() as f64
}

fn gradient_check(dims: &[usize], seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let specs: Vec<LayerSpec> = dims
        .windows(2)
        .enumerate()
        .map(|(i, w)| LayerSpec {
            in_dim: w[0],
            out_dim: w[1],
            activation: if i + 2 == dims.len() {
                Activation::Identity
            } else {
                Activation::Tanh
            },
        })
        .collect();
    let mut net = Mlp::init(&specs, true, &mut rng).unwrap();
    let batch: Vec<(DVector<f64>, DVector<f64>)> = (0..5)
        .map(|_| {
            (
                DVector::from_fn(dims[0], |_, _| rng.random_range(-1.0..1.0)),
                DVector::from_fn(dims[dims.len() - 1], |_, _| rng.random_range(-1.0..1.0)),
            )
        })
        .collect();

    let (_, grads) = backprop(&net, &batch);
    let analytic = grads.flatten();
    let params = net.params();
    let h = 1e-5;
    let mut worst = 0.0f64;
    for i in 0..params.len() {
        let mut shifted = params.clone();
        shifted[i] = params[i] + h;
        net.set_params(&shifted).unwrap();
        let up = batch_loss(&net, &batch);
        shifted[i] = params[i] - h;
        net.set_params(&shifted).unwrap();
        let down = batch_loss(&net, &batch);
        let numeric = (up - down) / (2.0 * h);
        let rel = (analytic[i] - numeric).abs() / analytic[i].abs().max(numeric.abs()).max(1e-8);
        worst = worst.max(rel);
    }
    worst
}

#[test]
fn criterion_05_backprop_matches_finite_differences() {
    let t = Instant::now();
    let k = 3;
    let shallow = gradient_check(&[2 * k, k, 2 * k], 505);
    let deep = gradient_check(&[4 * k, 2 * k, k, 2 * k, 4 * k], 506);
    assert!(shallow < 1e-4, "bottleneck net relative error {shallow:e}");
    assert!(deep < 1e-4, "deep net relative error {deep:e}");
    let secs = t.elapsed().as_secs_f64();
    assert!(secs < 10.0, "took {secs:.1}s, budget 10s");
    println!(
        "criterion 05 PASS ({secs:.1}s) gradients match central differences, worst relative error {:.2e}",
        shallow.max(deep)
    );
}

#[test]
fn criterion_06_first_optimizer_step_moves_by_the_learning_rate() {
    let t = Instant::now();
    let spec = [LayerSpec {
        in_dim: 1,
        out_dim: 1,
        activation: Activation::Identity,
    }];
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let alpha = 0.015;
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let g = rng.random_range(0.05f64..1e4) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let mut net = Mlp::init(&spec, false, &mut rng).unwrap();
        let theta0 = net.params()[0];
        let mut grads = Gradients::zeros_like(&net);
        grads.weights[0][(0, 0)] = g;
        Adamax::new(alpha, &net).step(&mut net, &grads);
        let step = theta0 - net.params()[0];
        let ratio = step / (alpha * g.signum());
        worst = worst.max((ratio - 1.0).abs());
    }
    assert!(worst <= 1e-6, "step deviates by {worst:e}");
    let secs = t.elapsed().as_secs_f64();
    println!(
        "criterion 06 PASS ({secs:.1}s) first step is -lr*sign(gradient) across 200 gradients, worst deviation {worst:.2e}"
    );
}

fn wrong_first_event_model() -> NlWfa {
    let m_a = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    let m_b = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
    let decoder = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, -1.0, -1.0, 1.0, 0.0]);
    NlWfa::new(
        Alphabet::new(2).unwrap(),
        Variant::Sp,
        DVector::from_row_slice(&[1.0, 0.0, 0.0]),
        vec![TransitionFn::Linear(m_a), TransitionFn::Linear(m_b)],
        TerminationFn::new(MapFn::Linear(decoder), 0).unwrap(),
    )
    .unwrap()
}

#[test]
fn criterion_07_metric_units_come_out_exact() {
    let (p, log2_p) = pautomac_from_values(&[0.5, 0.5], &[0.5, 0.5]).unwrap();
    assert_eq!((p, log2_p), (2.0, 1.0));

    let test = SampleSet::from_words(
        Alphabet::new(2).unwrap(),
        [Word::from_symbols(vec![0, 1])],
    )
    .unwrap();
    let wer = word_error_rate(&wrong_first_event_model(), &test).unwrap();
    assert!((wer - 1.0 / 3.0).abs() < 1e-15, "one error in three events gave {wer}");
    println!("criterion 07 PASS (0.0s) matched uniform scores 2.0, single-error case scores 1/3");
}

struct CellRow {
    variant: String,
    k: usize,
    sample_size: usize,
    pautomac: f64,
    wer: f64,
}

fn parse_cells(csv: &str) -> Vec<CellRow> {
    csv.lines()
        .filter(|l| l.starts_with("cell,"))
        .filter(|l| l.ends_with(",ok"))
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            CellRow {
                variant: f[1].to_string(),
                k: f[2].parse().unwrap(),
                sample_size: f[3].parse().unwrap(),
                pautomac: f[5].parse().unwrap(),
                wer: f[7].parse().unwrap(),
            }
        })
        .collect()
}

fn median(mut values: Vec<f64>) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn median_metrics(cells: &[CellRow], variant: &str, k: usize, size: usize) -> (f64, f64, usize) {
    let picked: Vec<&CellRow> = cells
        .iter()
        .filter(|c| c.variant == variant && c.k == k && c.sample_size == size)
        .collect();
    (
        median(picked.iter().map(|c| c.pautomac).collect()),
        median(picked.iter().map(|c| c.wer).collect()),
        picked.len(),
    )
}

#[test]
fn criterion_08_nonlinear_models_win_at_small_ranks() {
    let _guard = HEAVY.lock().unwrap();
    let t = Instant::now();
    let cfg = ExperimentConfig {
        variants: vec![Variant::Sp, Variant::BothNon],
        ranks: vec![2, 4],
        sample_sizes: vec![20_000],
        num_seeds: 5,
        seed: 8,
        ..ExperimentConfig::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let summary = run_sweep(&cfg, dir.path()).unwrap();
    assert_eq!(summary.num_errors, 0, "every grid cell must train and score");
    let cells = parse_cells(&fs::read_to_string(&summary.csv).unwrap());

    let mut detail = Vec::new();
    for k in [2, 4] {
        let (sp_p, sp_w, sp_n) = median_metrics(&cells, "sp", k, 20_000);
        let (nl_p, nl_w, nl_n) = median_metrics(&cells, "both.non", k, 20_000);
        assert_eq!((sp_n, nl_n), (5, 5));
        assert!(
            nl_w <= sp_w,
            "k={k}: median WER {nl_w:.4} (both.non) vs {sp_w:.4} (sp)"
        );
        assert!(
            nl_p <= 1.10 * sp_p,
            "k={k}: median Pautomac {nl_p:.3} (both.non) vs {sp_p:.3} (sp)"
        );
        detail.push(format!(
            "k={k}: WER {nl_w:.3} vs {sp_w:.3}, Pautomac {nl_p:.1} vs {sp_p:.1}"
        ));
    }
    let secs = t.elapsed().as_secs_f64();
    assert!(secs < 1800.0, "took {secs:.0}s, budget 30min");
    println!(
        "criterion 08 PASS ({secs:.1}s) both.non beats sp over 5-seed medians; {}",
        detail.join("; ")
    );
}

#[test]
fn criterion_09_nonlinear_models_win_at_small_sample_sizes() {
    let _guard = HEAVY.lock().unwrap();
    let t = Instant::now();
    let cfg = ExperimentConfig {
        variants: vec![Variant::Sp, Variant::BothNon],
        ranks: vec![2, 4],
        sample_sizes: vec![500, 5_000],
        num_seeds: 5,
        seed: 9,
        ..ExperimentConfig::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let summary = run_sweep(&cfg, dir.path()).unwrap();
    let cells = parse_cells(&fs::read_to_string(&summary.csv).unwrap());

    let best_k = |variant: Variant, size: usize| -> usize {
        summary
            .best
            .iter()
            .find(|b| b.variant == variant && b.sample_size == size)
            .expect("a best rank was selected on validation data")
            .rank
    };
    let sp_k = best_k(Variant::Sp, 500);
    let nl_k = best_k(Variant::BothNon, 500);
    let (_, sp_w, sp_n) = median_metrics(&cells, "sp", sp_k, 500);
    let (_, nl_w, nl_n) = median_metrics(&cells, "both.non", nl_k, 500);
    assert!(sp_n >= 3 && nl_n >= 3, "need most seeds to survive at the chosen ranks");
    assert!(
        nl_w <= sp_w,
        "500 samples: median WER {nl_w:.4} (both.non, k={nl_k}) vs {sp_w:.4} (sp, k={sp_k})"
    );
    let secs = t.elapsed().as_secs_f64();
    assert!(secs < 1800.0, "took {secs:.0}s, budget 30min");
    println!(
        "criterion 09 PASS ({secs:.1}s) at 500 samples both.non (k={nl_k}) WER {nl_w:.3} <= sp (k={sp_k}) WER {sp_w:.3}"
    );
}

#[test]
fn criterion_10_same_seed_writes_identical_csv_bytes() {
    let _guard = HEAVY.lock().unwrap();
    let t = Instant::now();
    let cfg = ExperimentConfig {
        variants: vec![Variant::Sp, Variant::BothNon],
        ranks: vec![2, 3],
        sample_sizes: vec![800],
        validation_size: 60,
        test_size: 60,
        epochs: 40,
        max_prefixes: 40,
        max_suffixes: 40,
        num_seeds: 2,
        seed: 1010,
        ..ExperimentConfig::default()
    };
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    run_sweep(&cfg, dir_a.path()).unwrap();
    run_sweep(&cfg, dir_b.path()).unwrap();
    let a = fs::read(dir_a.path().join("sweep.csv")).unwrap();
    let b = fs::read(dir_b.path().join("sweep.csv")).unwrap();
    assert_eq!(a, b, "two runs with one master seed diverged");

    let secs = t.elapsed().as_secs_f64();
    println!(
        "criterion 10 PASS ({secs:.1}s) repeated sweep produced byte-identical CSV ({} bytes)",
        a.len()
    );
}
