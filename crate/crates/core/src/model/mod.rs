//! The self-attention recommender: item embeddings, stacked attention +
//! feed-forward blocks with residuals, and tied-embedding scoring.
//!
//! There is no positional encoding, layer norm or dropout. Order enters
//! only through which position is read out as the last item, so permuting
//! the earlier items of a session leaves the scores unchanged.

mod backward;
mod config;
mod forward;
mod params;

pub use backward::{backward, backward_from_scores};
pub use config::{ModelConfig, PredictionMode};
pub use forward::{
    attention_head, embed_session, ffn_block, forward, forward_session, multi_head, predict_probs,
    score_candidates, session_embedding_variant, ForwardCache, LayerCache, RowCache,
    SessionEmbeddingCache,
};
pub use params::{init_params, Gradients, LayerParams, ModelParams, SessionEmbeddingParams, INIT_STD};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Batch, Session};
    use crate::loss::LossMode;
    use crate::nncore::{MaskVector, Matrix};

    fn tiny(prediction: PredictionMode) -> ModelConfig {
        ModelConfig {
            dim: 8,
            heads: 2,
            layers: 1,
            ffn_mult: 2,
            vocab_size: 20,
            prediction,
            seed: 3,
            ..Default::default()
        }
    }

    fn zero_blocks(p: &mut ModelParams<f64>) {
        for l in &mut p.layers {
            for m in [&mut l.wq, &mut l.wk, &mut l.wv, &mut l.wo, &mut l.w1, &mut l.b1, &mut l.w2, &mut l.b2] {
                m.fill(0.0);
            }
        }
    }

    #[test]
    fn single_item_head_is_value_projection() {
        let cfg = tiny(PredictionMode::LastItem);
        let p = init_params::<f64>(&cfg).unwrap();
        let x = embed_session(&p, &[5]).unwrap();
        for h in 0..cfg.heads {
            let out = attention_head(&cfg, &p, 0, &x, h, &MaskVector::all_valid(1)).unwrap();
            let expected = crate::nncore::matmul(&x, &p.layers[0].wv.col_slice(h * 4, 4)).unwrap();
            assert_eq!(out, expected);
        }
    }

    #[test]
    fn identical_items_get_identical_rows() {
        let cfg = tiny(PredictionMode::LastItem);
        let p = init_params::<f64>(&cfg).unwrap();
        let x = embed_session(&p, &[7, 7]).unwrap();
        let out = attention_head(&cfg, &p, 0, &x, 1, &MaskVector::all_valid(2)).unwrap();
        assert_eq!(out.row(0), out.row(1));
    }

    #[test]
    fn zero_output_projection_passes_input_through() {
        let cfg = tiny(PredictionMode::LastItem);
        let mut p = init_params::<f64>(&cfg).unwrap();
        p.layers[0].wo.fill(0.0);
        let x = embed_session(&p, &[1, 2, 3]).unwrap();
        assert_eq!(multi_head(&cfg, &p, 0, &x, &MaskVector::all_valid(3)).unwrap(), x);
    }

    #[test]
    fn single_head_concat_is_the_head() {
        let cfg = ModelConfig { heads: 1, ..tiny(PredictionMode::LastItem) };
        let p = init_params::<f64>(&cfg).unwrap();
        let x = embed_session(&p, &[4, 9]).unwrap();
        let mask = MaskVector::all_valid(2);
        let head = attention_head(&cfg, &p, 0, &x, 0, &mask).unwrap();
        let mut expected = crate::nncore::matmul(&head, &p.layers[0].wo).unwrap();
        expected.add_assign(&x).unwrap();
        assert_eq!(multi_head(&cfg, &p, 0, &x, &mask).unwrap(), expected);
    }

    #[test]
    fn ffn_residual_cases() {
        let cfg = tiny(PredictionMode::LastItem);
        let mut p = init_params::<f64>(&cfg).unwrap();
        let f = embed_session(&p, &[1, 2]).unwrap();
        let l = &mut p.layers[0];
        l.w1.fill(0.0);
        l.w2.fill(0.0);
        l.b1.fill(0.0);
        l.b2.fill(0.0);
        assert_eq!(ffn_block(&p, 0, &f).unwrap(), f);
        p.layers[0].b2.fill(0.25);
        let h = ffn_block(&p, 0, &f).unwrap();
        assert_eq!(h, f.map(|v| v + 0.25));
    }

    #[test]
    fn embeddings_carry_through_zero_blocks() {
        for layers in [1, 3] {
            let cfg = ModelConfig { layers, ..tiny(PredictionMode::LastItem) };
            let mut p = init_params::<f64>(&cfg).unwrap();
            zero_blocks(&mut p);
            let sessions = [Session::new(vec![3, 8, 11], 2), Session::new(vec![6], 1)];
            let (scores, _) = forward(&cfg, &p, &Batch::from_sessions(&sessions)).unwrap();
            for (r, s) in sessions.iter().enumerate() {
                let last = *s.items.last().unwrap();
                for i in 1..=cfg.vocab_size {
                    let expected = crate::nncore::dot(p.embed.row(last), p.embed.row(i));
                    assert_eq!(scores[(r, i - 1)], expected);
                }
            }
        }
    }

    #[test]
    fn out_of_range_index_rejected() {
        let cfg = tiny(PredictionMode::LastItem);
        let p = init_params::<f64>(&cfg).unwrap();
        let batch = Batch::from_sessions(&[Session::new(vec![1, 21], 2)]);
        assert!(forward(&cfg, &p, &batch).is_err());
    }

    #[test]
    fn predict_probs_examples() {
        let p = predict_probs(&Matrix::filled(1, 4, 3.0f64));
        assert_eq!(p.as_slice(), &[0.25; 4]);
        let p = predict_probs(&Matrix::from_rows(&[vec![2f64.ln(), 0.0]]));
        assert!((p[(0, 0)] - 2.0 / 3.0).abs() < 1e-15);
        assert!((p[(0, 1)] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn dead_paths_get_zero_gradient() {
        let cfg = tiny(PredictionMode::LastItem);
        let mut p = init_params::<f64>(&cfg).unwrap();
        // hidden unit 3 feeds nothing once its W2 row is zero
        p.layers[0].w2.row_mut(3).fill(0.0);
        let sessions = [Session::new(vec![1, 2], 3), Session::new(vec![7, 5, 9], 4)];
        let batch = Batch::from_sessions(&sessions);
        let (_, cache) = forward(&cfg, &p, &batch).unwrap();
        let (_, g) = backward(&cfg, &p, &cache, &batch.labels).unwrap();
        assert_eq!(g.layers[0].b1[(0, 3)], 0.0);
        for r in 0..cfg.dim {
            assert_eq!(g.layers[0].w1[(r, 3)], 0.0);
        }
        assert!(g.embed.row(0).iter().all(|&x| x == 0.0));
        // tied scoring: an item absent from the batch still gets p_i * h_n
        assert!(g.embed.row(15).iter().any(|&x| x != 0.0));
    }

    #[test]
    fn gradients_are_deterministic() {
        for mode in [PredictionMode::LastItem, PredictionMode::SessionEmbedding] {
            let cfg = ModelConfig { loss: LossMode::Literal, ..tiny(mode) };
            let p = init_params::<f32>(&cfg).unwrap();
            let sessions = [Session::new(vec![1, 2, 3], 4), Session::new(vec![5], 6)];
            let batch = Batch::from_sessions(&sessions);
            let (_, c1) = forward(&cfg, &p, &batch).unwrap();
            let (_, c2) = forward(&cfg, &p, &batch).unwrap();
            let g1 = backward(&cfg, &p, &c1, &batch.labels).unwrap();
            let g2 = backward(&cfg, &p, &c2, &batch.labels).unwrap();
            assert_eq!(g1.0.to_bits(), g2.0.to_bits());
            assert_eq!(g1.1, g2.1);
        }
    }

    #[test]
    fn session_embedding_single_position() {
        let cfg = tiny(PredictionMode::SessionEmbedding);
        let p = init_params::<f64>(&cfg).unwrap();
        let row = forward_session(&cfg, &p, &[4], 1).unwrap();
        let sc = row.se.as_ref().unwrap();
        assert_eq!(sc.alpha.len(), 1);
        let h1 = row.final_output().row(0);
        for (g, &h) in sc.global.iter().zip(h1) {
            assert!((g - sc.alpha[0] * h).abs() < 1e-15);
        }
        let mut joined: Vec<f64> = h1.iter().map(|h| sc.alpha[0] * h).collect();
        joined.extend_from_slice(h1);
        let s = crate::nncore::matmul(&Matrix::row_vector(&joined), &p.se.as_ref().unwrap().w3).unwrap();
        for (a, b) in s.as_slice().iter().zip(&sc.session) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn session_embedding_reduces_to_last_item() {
        let se_cfg = tiny(PredictionMode::SessionEmbedding);
        let mut p = init_params::<f64>(&se_cfg).unwrap();
        let w3 = &mut p.se.as_mut().unwrap().w3;
        w3.fill(0.0);
        for i in 0..se_cfg.dim {
            w3[(se_cfg.dim + i, i)] = 1.0;
        }
        let sessions = [Session::new(vec![2, 9, 4], 1), Session::new(vec![13], 2)];
        let batch = Batch::from_sessions(&sessions);
        let (se_scores, cache) = forward(&se_cfg, &p, &batch).unwrap();
        let last_cfg = tiny(PredictionMode::LastItem);
        let base = ModelParams { se: None, ..p.clone() };
        let (last_scores, _) = forward(&last_cfg, &base, &batch).unwrap();
        assert!(se_scores.max_abs_diff(&last_scores) < 1e-14);
        let again = session_embedding_variant(&se_cfg, &p, &cache).unwrap();
        assert_eq!(again, se_scores);
    }

    #[test]
    fn session_embedding_variant_mode_mismatch() {
        let cfg = tiny(PredictionMode::LastItem);
        let p = init_params::<f64>(&cfg).unwrap();
        let batch = Batch::from_sessions(&[Session::new(vec![1], 2)]);
        let (_, cache) = forward(&cfg, &p, &batch).unwrap();
        assert!(session_embedding_variant(&cfg, &p, &cache).is_err());
    }
}
