//! Independent reference implementations used as test oracles. Everything
//! here is plain nested loops over `Vec<f64>`; nothing calls the library's
//! kernels.

#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use srsan::data::Session;
use srsan::loss::LossMode;
use srsan::model::{init_params, ModelConfig, ModelParams, PredictionMode};
use srsan::nncore::Matrix;

type Mat = Vec<Vec<f64>>;

fn to_mat(m: &Matrix<f64>) -> Mat {
    (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
}

fn mm(a: &Mat, b: &Mat) -> Mat {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for j in 0..m {
            let mut s = 0.0;
            for t in 0..k {
                s += a[i][t] * b[t][j];
            }
            out[i][j] = s;
        }
    }
    out
}

fn cols(a: &Mat, start: usize, width: usize) -> Mat {
    a.iter().map(|r| r[start..start + width].to_vec()).collect()
}

fn softmax(xs: &[f64]) -> Vec<f64> {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = xs.iter().map(|x| (x - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

/// Scores of every item `1..=V` for one unpadded session.
pub fn oracle_scores(cfg: &ModelConfig, p: &ModelParams<f64>, items: &[usize]) -> Vec<f64> {
    let n = items.len();
    let d = cfg.dim;
    let dk = d / cfg.heads;
    let scale = if cfg.scale_per_head { (dk as f64).sqrt() } else { (d as f64).sqrt() };
    let mut x: Mat = items.iter().map(|&i| p.embed.row(i).to_vec()).collect();
    for layer in &p.layers {
        let mut concat = vec![vec![0.0; d]; n];
        for h in 0..cfg.heads {
            let q = mm(&x, &cols(&to_mat(&layer.wq), h * dk, dk));
            let k = mm(&x, &cols(&to_mat(&layer.wk), h * dk, dk));
            let v = mm(&x, &cols(&to_mat(&layer.wv), h * dk, dk));
            for i in 0..n {
                let logits: Vec<f64> = (0..n)
                    .map(|j| (0..dk).map(|t| q[i][t] * k[j][t]).sum::<f64>() / scale)
                    .collect();
                let a = softmax(&logits);
                for t in 0..dk {
                    concat[i][h * dk + t] = (0..n).map(|j| a[j] * v[j][t]).sum();
                }
            }
        }
        let mixed = mm(&concat, &to_mat(&layer.wo));
        let f: Mat = (0..n)
            .map(|i| (0..d).map(|c| mixed[i][c] + x[i][c]).collect())
            .collect();
        let pre = mm(&f, &to_mat(&layer.w1));
        let hidden: Mat = pre
            .iter()
            .map(|r| r.iter().zip(layer.b1.row(0)).map(|(a, b)| (a + b).max(0.0)).collect())
            .collect();
        let out = mm(&hidden, &to_mat(&layer.w2));
        x = (0..n)
            .map(|i| (0..d).map(|c| out[i][c] + layer.b2[(0, c)] + f[i][c]).collect())
            .collect();
    }
    let last = x[n - 1].clone();
    let query = match cfg.prediction {
        PredictionMode::LastItem => last,
        PredictionMode::SessionEmbedding => {
            let se = p.se.as_ref().unwrap();
            let g1 = mm(&x, &to_mat(&se.wg1));
            let g2 = mm(&vec![last.clone()], &to_mat(&se.wg2));
            let mut global = vec![0.0; d];
            for j in 0..n {
                let mut alpha = 0.0;
                for c in 0..d {
                    let u = g1[j][c] + g2[0][c] + se.c[(0, c)];
                    alpha += se.q[(0, c)] / (1.0 + (-u).exp());
                }
                for c in 0..d {
                    global[c] += alpha * x[j][c];
                }
            }
            let joined: Vec<f64> = global.into_iter().chain(last).collect();
            mm(&vec![joined], &to_mat(&se.w3)).remove(0)
        }
    };
    (1..=cfg.vocab_size)
        .map(|i| (0..d).map(|c| query[c] * p.embed[(i, c)]).sum())
        .collect()
}

/// Rank by full sort: descending score, ascending index on ties.
pub fn sort_rank(scores: &[f64], label: usize) -> usize {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
    order.iter().position(|&i| i == label - 1).unwrap() + 1
}

pub fn random_config(rng: &mut ChaCha8Rng) -> ModelConfig {
    let heads = [1, 2, 4][rng.random_range(0..3)];
    let dim = heads * rng.random_range(1..=4);
    ModelConfig {
        dim,
        heads,
        layers: rng.random_range(1..=3),
        ffn_mult: rng.random_range(1..=3),
        vocab_size: rng.random_range(5..=20),
        prediction: if rng.random_bool(0.5) {
            PredictionMode::LastItem
        } else {
            PredictionMode::SessionEmbedding
        },
        loss: LossMode::CategoricalCe,
        scale_per_head: rng.random_bool(0.3),
        seed: rng.random(),
    }
}

/// Initialized parameters with a random overall scale so that attention
/// is not always near-uniform.
pub fn random_params(cfg: &ModelConfig, rng: &mut ChaCha8Rng) -> ModelParams<f64> {
    let mut p = init_params::<f64>(cfg).unwrap();
    let s = rng.random_range(1.0..6.0);
    p.for_each_mut(|m| m.scale(s));
    p
}

pub fn random_sessions(rng: &mut ChaCha8Rng, vocab: usize, rows: usize, max_len: usize) -> Vec<Session> {
    (0..rows)
        .map(|_| {
            let n = rng.random_range(1..=max_len);
            let items = (0..n).map(|_| rng.random_range(1..=vocab)).collect();
            Session::new(items, rng.random_range(1..=vocab))
        })
        .collect()
}

pub fn fixture_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn fixture_golden() -> serde_json::Value {
    let text = std::fs::read_to_string(fixture_dir().join("golden.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

/// Preprocessing settings the golden file was generated with.
pub fn fixture_config() -> srsan::data::PreprocessConfig {
    let g = fixture_golden();
    let c = &g["config"];
    srsan::data::PreprocessConfig {
        min_item_count: c["min_item_count"].as_u64().unwrap() as usize,
        min_session_len: c["min_session_len"].as_u64().unwrap() as usize,
        holdout_days: c["holdout_days"].as_f64().unwrap(),
        fraction: c["fraction"].as_f64().unwrap(),
        ..srsan::data::PreprocessConfig::yoochoose()
    }
}

pub fn run_fixture() -> srsan::data::Preprocessed {
    let f = std::fs::File::open(fixture_dir().join("clicks.csv")).unwrap();
    srsan::data::preprocess(std::io::BufReader::new(f), &fixture_config()).unwrap()
}

/// Instances rendered with raw ids, sorted, as in the golden file.
pub fn raw_instances(instances: &[Session], vocab: &srsan::data::Vocabulary) -> Vec<String> {
    let mut out: Vec<String> = instances
        .iter()
        .map(|s| {
            let items: Vec<&str> = s.items.iter().map(|&i| vocab.id(i).unwrap()).collect();
            format!("{}\t{}", items.join(" "), vocab.id(s.label).unwrap())
        })
        .collect();
    out.sort();
    out
}
