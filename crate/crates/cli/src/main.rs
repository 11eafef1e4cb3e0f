mod args;

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use serde_json::json;
use srsan::checkpoint::Checkpoint;
use srsan::config::RunConfig;
use srsan::data::{preprocess, read_instances, write_instances, Batch, Session, Vocabulary};
use srsan::eval::{evaluate, popularity_baseline, MetricsReport};
use srsan::gradcheck::{run_suite, Corruption};
use srsan::model::forward;
use srsan::sweep::{run_sweep, GridSpec};
use srsan::trainer::fit;
use srsan::{Error, Result};

use args::{Cli, Command, Common};

pub const TRAIN_FILE: &str = "train.txt";
pub const TEST_FILE: &str = "test.txt";
pub const VOCAB_FILE: &str = "vocab.tsv";
pub const STATS_FILE: &str = "stats.json";

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 1,
        Error::Data(_) | Error::Io { .. } | Error::IndexOutOfRange { .. } | Error::Checkpoint(_) => 2,
        Error::Nn(_) | Error::NonFiniteLoss { .. } | Error::Gradcheck(_) => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cmd: Command) -> Result<u8> {
    match cmd {
        Command::Preprocess(c) => cmd_preprocess(&c.resolve()?),
        Command::Train(c) => cmd_train(&c.resolve()?),
        Command::Eval(c) => cmd_eval(&c),
        Command::Recommend { common, items } => cmd_recommend(&common, &items),
        Command::Gradcheck { common, corrupt_backward } => cmd_gradcheck(&common, corrupt_backward),
        Command::Sweep { common, grid } => cmd_sweep(&common.resolve()?, &grid),
    }
}

fn required<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    p.as_deref().ok_or_else(|| Error::Config(format!("--{flag} is required")))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn config_comment(cfg: &RunConfig) -> Vec<String> {
    vec![format!("config {}", cfg.to_json())]
}

fn cmd_preprocess(cfg: &RunConfig) -> Result<u8> {
    let raw = required(&cfg.paths.data, "data")?;
    let out = required(&cfg.paths.out, "out")?;
    let pre = preprocess(open(raw)?, &cfg.data)?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let comments = config_comment(cfg);
    let p = out.join(TRAIN_FILE);
    write_instances(create(&p)?, &pre.train, &comments).map_err(|e| Error::io(&p, e))?;
    let p = out.join(TEST_FILE);
    write_instances(create(&p)?, &pre.test, &comments).map_err(|e| Error::io(&p, e))?;
    let p = out.join(VOCAB_FILE);
    pre.vocab.write_sidecar(create(&p)?, &comments).map_err(|e| Error::io(&p, e))?;
    let stats = json!({ "config": cfg, "stats": pre.stats });
    write_text(&out.join(STATS_FILE), &format!("{stats:#}\n"))?;
    for w in &pre.stats.warnings {
        eprintln!("warning: {w}");
    }
    if pre.stats.malformed_lines > 0 {
        eprintln!("warning: skipped {} malformed lines", pre.stats.malformed_lines);
    }
    println!("{}", pre.stats);
    Ok(0)
}

struct Dataset {
    train: Vec<Session>,
    test: Vec<Session>,
    vocab: Vocabulary,
}

fn load_dataset(dir: &Path) -> Result<Dataset> {
    let vocab = Vocabulary::read_sidecar(open(&dir.join(VOCAB_FILE))?)?;
    let train = read_instances(open(&dir.join(TRAIN_FILE))?)?;
    let test = read_instances(open(&dir.join(TEST_FILE))?)?;
    Ok(Dataset { train, test, vocab })
}

fn cmd_train(cfg: &RunConfig) -> Result<u8> {
    let data = load_dataset(required(&cfg.paths.data, "data")?)?;
    let out = required(&cfg.paths.out, "out")?;
    let mut cfg = cfg.clone();
    cfg.model.vocab_size = data.vocab.len();
    cfg.model.validate()?;

    let log_path = out.with_extension("log.jsonl");
    let mut log = create(&log_path)?;
    writeln!(log, "{}", json!({ "config": &cfg })).map_err(|e| Error::io(&log_path, e))?;
    let mut log_err = None;
    let outcome = fit::<f32>(&cfg.model, &data.train, Some(&data.test), &cfg.train, |r| {
        eprintln!(
            "epoch {} lr {:.1e} loss {:.4} HR@{k} {:.4} MRR@{k} {:.4} ({:.1}s)",
            r.epoch,
            r.lr,
            r.train_loss,
            r.hr.unwrap_or(f64::NAN),
            r.mrr.unwrap_or(f64::NAN),
            r.seconds,
            k = r.k
        );
        if let Err(e) = writeln!(log, "{}", json!(r)) {
            log_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = log_err {
        return Err(Error::io(&log_path, e));
    }
    log.flush().map_err(|e| Error::io(&log_path, e))?;

    let ck = Checkpoint {
        config: cfg,
        vocab: data.vocab,
        params: outcome.params,
    };
    ck.save(out)?;
    match outcome.best_epoch {
        Some(e) => eprintln!("saved epoch {e} parameters to {}", out.display()),
        None => eprintln!("saved initial parameters to {}", out.display()),
    }
    Ok(0)
}

fn load_checkpoint(c: &Common) -> Result<Checkpoint> {
    Checkpoint::load(required(&c.checkpoint, "checkpoint")?)
}

fn emit_json(out: Option<&Path>, value: &serde_json::Value) -> Result<()> {
    match out {
        Some(p) => write_text(p, &format!("{value:#}\n")),
        None => {
            println!("{value}");
            Ok(())
        }
    }
}

fn cmd_eval(c: &Common) -> Result<u8> {
    let ck = load_checkpoint(c)?;
    let dir = required(&c.data, "data")?;
    let test = read_instances(open(&dir.join(TEST_FILE))?)?;
    let k = c.k.unwrap_or(ck.config.train.k);
    let report: MetricsReport = evaluate(&ck.config.model, &ck.params, &test, k)?;
    eprintln!("{report}");
    let mut value = json!({ "config": &ck.config, "metrics": &report });
    if let Ok(file) = open(&dir.join(TRAIN_FILE)) {
        let train = read_instances(file)?;
        let pop = popularity_baseline(&train, &test, ck.config.model.vocab_size, k)?;
        eprintln!("popularity baseline: {pop}");
        value["popularity"] = json!(pop);
    }
    emit_json(c.out.as_deref(), &value)?;
    Ok(0)
}

/// Item indices ordered by score, ties by ascending index.
pub fn top_k(scores: &[f32], k: usize) -> Vec<(usize, f32)> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.into_iter().take(k).map(|i| (i + 1, scores[i])).collect()
}

fn cmd_recommend(c: &Common, items: &[String]) -> Result<u8> {
    let ck = load_checkpoint(c)?;
    let mut known = Vec::with_capacity(items.len());
    for id in items {
        match ck.vocab.get(id) {
            Some(i) => known.push(i),
            None => eprintln!("warning: unknown item {id:?} dropped"),
        }
    }
    if known.is_empty() {
        return Err(Error::Data("no known items in the session".into()));
    }
    let batch = Batch::from_sessions(&[Session::new(known, 1)]);
    let (scores, _) = forward(&ck.config.model, &ck.params, &batch)?;
    let k = c.k.unwrap_or(ck.config.train.k);
    let recs: Vec<_> = top_k(scores.row(0), k)
        .into_iter()
        .map(|(i, s)| json!({ "item": ck.vocab.id(i), "score": s }))
        .collect();
    emit_json(c.out.as_deref(), &json!({ "config": &ck.config, "recommendations": recs }))?;
    Ok(0)
}

fn cmd_gradcheck(c: &Common, corrupt: bool) -> Result<u8> {
    let seed = c.seed.unwrap_or(42);
    let corruption = corrupt.then_some(Corruption { tensor: 1, factor: 1.01 });
    let report = run_suite(seed, corruption)?;
    eprintln!("{report}");
    emit_json(c.out.as_deref(), &json!(report))?;
    Ok(if report.passed { 0 } else { 3 })
}

fn cmd_sweep(cfg: &RunConfig, grid: &str) -> Result<u8> {
    let grid: GridSpec = grid.parse()?;
    let data = load_dataset(required(&cfg.paths.data, "data")?)?;
    let mut base = cfg.model.clone();
    base.vocab_size = data.vocab.len();
    let report = run_sweep(&base, &grid, &data.train, &data.test, &cfg.train, |s| eprintln!("{s}"))?;
    print!("{report}");
    if let Some(out) = &cfg.paths.out {
        write_text(out, &format!("{:#}\n", json!({ "config": cfg, "sweep": report })))?;
    }
    Ok(0)
}
