//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any criterion fails.
//!
//! The full-scale check runs only when `SRSAN_YOOCHOOSE` points at
//! `yoochoose-clicks.dat`.

mod common;

use std::time::{Duration, Instant};

use common::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use srsan::checkpoint::Checkpoint;
use srsan::config::{Preset, RunConfig};
use srsan::data::{augment_prefixes, filter_dataset, Batch, PreprocessConfig, RawSession, Session, Vocabulary};
use srsan::eval::{evaluate, hr_at_k, mrr_at_k, popularity_baseline, rank_of_target};
use srsan::gradcheck::run_suite;
use srsan::model::{forward, init_params, ModelConfig, PredictionMode};
use srsan::synthetic::{long_range_task, successor_task, LongRangeSpec};
use srsan::trainer::{fit, TrainConfig};

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn gradient_correctness() -> Outcome {
    let start = Instant::now();
    let report = match run_suite(42, None) {
        Ok(r) => r,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let worst = report.checks.iter().map(|c| c.max_rel_err).fold(0.0, f64::max);
    let elapsed = start.elapsed();
    check(
        report.passed && elapsed < Duration::from_secs(120),
        format!(
            "{} tensor checks over 2 prediction x 2 loss modes, max rel err {worst:.2e} (tol 1e-4), {:.1}s",
            report.checks.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn forward_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let cfg = random_config(&mut rng);
        let p = random_params(&cfg, &mut rng);
        let sessions = random_sessions(&mut rng, cfg.vocab_size, 3, 6);
        let (scores, _) = forward(&cfg, &p, &Batch::from_sessions(&sessions)).unwrap();
        for (r, s) in sessions.iter().enumerate() {
            for (a, b) in scores.row(r).iter().zip(oracle_scores(&cfg, &p, &s.items)) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    check(worst <= 1e-6, format!("100 random instances, max abs diff {worst:.2e} (tol 1e-6)"))
}

fn permutation_property() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f32;
    for _ in 0..1000 {
        let cfg = random_config(&mut rng);
        let p = init_params::<f32>(&cfg).unwrap();
        let n = rng.random_range(2..=8);
        let items: Vec<usize> = (0..n).map(|_| rng.random_range(1..=cfg.vocab_size)).collect();
        let s = Session::new(items, 1);
        let mut t = s.clone();
        t.items[..n - 1].shuffle(&mut rng);
        let (a, _) = forward(&cfg, &p, &Batch::from_sessions([&s])).unwrap();
        let (b, _) = forward(&cfg, &p, &Batch::from_sessions([&t])).unwrap();
        worst = worst.max(a.max_abs_diff(&b));
    }
    check(worst <= 1e-5, format!("1000 random cases (f32), max abs diff {worst:.2e} (tol 1e-5)"))
}

fn masking_neutrality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut worst_score, mut worst_sum) = (0.0f32, 0.0f32);
    let mut masked_nonzero = 0usize;
    for _ in 0..300 {
        let cfg = random_config(&mut rng);
        let p = init_params::<f32>(&cfg).unwrap();
        let sessions = random_sessions(&mut rng, cfg.vocab_size, 3, 6);
        let batch = Batch::from_sessions(&sessions);
        let (a, _) = forward(&cfg, &p, &batch).unwrap();
        let padded = batch.padded_to(batch.max_len + rng.random_range(1..5));
        let (b, cache) = forward(&cfg, &p, &padded).unwrap();
        worst_score = worst_score.max(a.max_abs_diff(&b));
        for row in &cache.rows {
            for lc in &row.layers {
                for probs in &lc.probs {
                    for i in 0..probs.rows() {
                        let sum: f32 = probs.row(i).iter().sum();
                        worst_sum = worst_sum.max((sum - 1.0).abs());
                        masked_nonzero += probs.row(i)[row.len..].iter().filter(|&&x| x != 0.0).count();
                    }
                }
            }
        }
    }
    check(
        worst_score <= 1e-6 && worst_sum <= 1e-6 && masked_nonzero == 0,
        format!(
            "padding score diff {worst_score:.2e}, attention row-sum err {worst_sum:.2e}, nonzero masked weights {masked_nonzero}"
        ),
    )
}

fn metrics_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mismatches = 0;
    let mut ranks = Vec::new();
    for _ in 0..10_000 {
        let v = rng.random_range(1..60);
        let scores: Vec<f64> = (0..v).map(|_| rng.random_range(0..8) as f64 * 0.25).collect();
        let label = rng.random_range(1..=v);
        let r = rank_of_target(&scores, label).unwrap();
        mismatches += usize::from(r != sort_rank(&scores, label));
        ranks.push(r);
    }
    let k = 20;
    let brute_hr = ranks.iter().filter(|&&r| r <= k).count() as f64 / ranks.len() as f64;
    let mut rr: Vec<f64> = ranks.iter().map(|&r| if r <= k { 1.0 / r as f64 } else { 0.0 }).collect();
    rr.sort_by(f64::total_cmp);
    let brute_mrr = rr.iter().sum::<f64>() / ranks.len() as f64;
    let hr = hr_at_k(&ranks, k).unwrap();
    let mrr = mrr_at_k(&ranks, k).unwrap();
    let hand = [1, 21, 20, 5];
    let hand_ok = hr_at_k(&hand, 20).unwrap() == 0.75 && mrr_at_k(&hand, 20).unwrap() == 0.3125;
    check(
        mismatches == 0 && hr == brute_hr && (mrr - brute_mrr).abs() <= 1e-12 && hand_ok,
        format!(
            "10^4 tied rows, {mismatches} rank mismatches; HR {hr} vs {brute_hr}; MRR diff {:.1e}; hand example exact: {hand_ok}",
            (mrr - brute_mrr).abs()
        ),
    )
}

fn learnability() -> Outcome {
    let start = Instant::now();
    let train = successor_task(2000, 50, 1);
    let test = successor_task(300, 50, 2);
    let cfg = ModelConfig { vocab_size: 50, ..Default::default() };
    let tc = TrainConfig { epochs: 10, ..Default::default() };
    let out = fit::<f32>(&cfg, &train, Some(&test), &tc, |_| {}).unwrap();
    let hr1 = evaluate(&cfg, &out.params, &test, 1).unwrap().hr;
    let hr20 = evaluate(&cfg, &out.params, &test, 20).unwrap().hr;
    let pop = popularity_baseline(&train, &test, 50, 20).unwrap().hr;
    let elapsed = start.elapsed();
    check(
        hr1 >= 0.95 && hr20 - pop >= 0.30 && elapsed < Duration::from_secs(180),
        format!(
            "successor task, {} train instances: HR@1 {hr1:.4}, HR@20 {hr20:.4} vs popularity {pop:.4}, {:.0}s",
            train.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn ablation_direction() -> Outcome {
    let spec = LongRangeSpec::default();
    let train = long_range_task(4000, &spec, 3);
    let test = long_range_task(1000, &spec, 4);
    let v = spec.vocab_size();
    let tc = TrainConfig { epochs: 6, ..Default::default() };
    let pop = popularity_baseline(&train, &test, v, 20).unwrap();
    let mut reports = Vec::new();
    for prediction in [PredictionMode::LastItem, PredictionMode::SessionEmbedding] {
        let cfg = ModelConfig { vocab_size: v, prediction, ..Default::default() };
        match fit::<f32>(&cfg, &train, Some(&test), &tc, |_| {}).and_then(|o| evaluate(&cfg, &o.params, &test, 20)) {
            Ok(r) => reports.push(r),
            Err(e) => return Outcome::Fail(format!("{prediction:?}: {e}")),
        }
    }
    check(
        reports[0].hr - pop.hr >= 0.30,
        format!(
            "first-item task: last-item readout HR@20 {:.4} MRR@20 {:.4}; SE variant HR@20 {:.4} MRR@20 {:.4}; popularity HR@20 {:.4}",
            reports[0].hr, reports[0].mrr, reports[1].hr, reports[1].mrr, pop.hr
        ),
    )
}

fn preprocessing_golden() -> Outcome {
    let g = fixture_golden();
    let out = run_fixture();
    let s = &out.stats;
    let counts_ok = s.clicks as u64 == g["clicks"].as_u64().unwrap()
        && s.train_sessions as u64 == g["train_sessions"].as_u64().unwrap()
        && s.test_sessions as u64 == g["test_sessions"].as_u64().unwrap()
        && s.items as u64 == g["items"].as_u64().unwrap();
    let filter = filter_dataset(
        vec![
            RawSession::new("1", &["X"], 1),
            RawSession::new("2", &["A", "B", "C"], 2),
            RawSession::new("3", &["A", "B"], 3),
            RawSession::new("4", &["C", "A"], 4),
        ],
        2,
        2,
    );
    let seqs = srsan::synthetic::successor_sequences(500, 40, 2, 10, 9);
    let identity = augment_prefixes(&seqs).len() == seqs.iter().map(|s| s.items.len() - 1).sum::<usize>();
    check(
        counts_ok && filter.len() == 3 && identity,
        format!(
            "fixture {} clicks / {} train / {} test / {} items; filter example keeps {}; sum(n-1) identity {identity}",
            s.clicks,
            s.train_sessions,
            s.test_sessions,
            s.items,
            filter.len()
        ),
    )
}

fn determinism_and_persistence() -> Outcome {
    let train = successor_task(200, 20, 5);
    let test = successor_task(50, 20, 6);
    let config = RunConfig {
        model: ModelConfig { dim: 16, heads: 2, vocab_size: 20, ..Default::default() },
        train: TrainConfig { epochs: 2, batch_size: 32, ..Default::default() },
        ..Default::default()
    };
    let vocab = Vocabulary::from_ids((1..=20).map(|i| format!("item{i}")).collect()).unwrap();
    let run = || {
        let out = fit::<f32>(&config.model, &train, Some(&test), &config.train, |_| {}).unwrap();
        Checkpoint { config: config.clone(), vocab: vocab.clone(), params: out.params }
    };
    let a = run();
    let bytes = a.to_bytes();
    let same_bytes = bytes == run().to_bytes();
    let before = evaluate(&config.model, &a.params, &test, 20).unwrap();
    let loaded = Checkpoint::from_bytes(&bytes).unwrap();
    let after = evaluate(&loaded.config.model, &loaded.params, &test, 20).unwrap();
    let bit_identical = before.hr.to_bits() == after.hr.to_bits() && before.mrr.to_bits() == after.mrr.to_bits();
    check(
        same_bytes && bit_identical,
        format!("checkpoint bytes identical across runs: {same_bytes}; metrics bit-identical after reload: {bit_identical}"),
    )
}

fn full_scale() -> Outcome {
    let Ok(path) = std::env::var("SRSAN_YOOCHOOSE") else {
        return Outcome::Skip("set SRSAN_YOOCHOOSE=/path/to/yoochoose-clicks.dat to run".into());
    };
    let file = match std::fs::File::open(&path) {
        Ok(f) => f,
        Err(e) => return Outcome::Fail(format!("{path}: {e}")),
    };
    let pre = match srsan::data::preprocess(std::io::BufReader::new(file), &PreprocessConfig::yoochoose()) {
        Ok(p) => p,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let s = &pre.stats;
    let within = |got: f64, want: f64| (got - want).abs() <= 0.01 * want;
    let stats_ok = within(s.clicks as f64, 557_248.0) && within(s.train_sessions as f64, 369_859.0);
    let mut cfg = RunConfig::preset(Preset::Yoochoose);
    cfg.model.vocab_size = pre.vocab.len();
    let out = match fit::<f32>(&cfg.model, &pre.train, Some(&pre.test), &cfg.train, |r| eprintln!("{r:?}")) {
        Ok(o) => o,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let m = evaluate(&cfg.model, &out.params, &pre.test, 20).unwrap();
    check(
        stats_ok && (m.hr * 100.0 - 71.74).abs() <= 1.5 && (m.mrr * 100.0 - 31.58).abs() <= 1.0,
        format!("stats {} clicks / {} train; HR@20 {:.2} MRR@20 {:.2}", s.clicks, s.train_sessions, m.hr * 100.0, m.mrr * 100.0),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("gradient correctness", gradient_correctness),
        ("forward oracle equivalence", forward_oracle),
        ("permutation property", permutation_property),
        ("masking/padding neutrality", masking_neutrality),
        ("metrics oracle", metrics_oracle),
        ("learnability end-to-end", learnability),
        ("ablation direction", ablation_direction),
        ("preprocessing golden", preprocessing_golden),
        ("determinism & persistence", determinism_and_persistence),
        ("full-scale Yoochoose (optional)", full_scale),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let (tag, detail) = match run() {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::Skip(d) => ("SKIP", d),
        };
        println!("acceptance {:>2} {tag} {name}: {detail}", i + 1);
    }
    println!("acceptance: {} criteria, {failed} failed", criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
