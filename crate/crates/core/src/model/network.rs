//! Bidirectional GRU encoder, GRU decoder with hard attention at the
//! transducer pointer, and the teacher-forced backward pass.

use super::gru::{self, GruCache};
use super::params::ModelParams;
use super::tensor::{add_assign, log_softmax, matvec_acc, matvec_t_acc, outer_acc};
use crate::actions::{Action, TransducerState};
use crate::error::{Error, Result};
use crate::patches::PatchTable;

struct EncoderTrace {
    outputs: Vec<Vec<f64>>,
    init: Vec<f64>,
    fwd: Vec<GruCache>,
    bwd: Vec<GruCache>,
}

fn check_indices(indices: &[usize], params: &ModelParams) -> Result<()> {
    if indices.is_empty() {
        return Err(Error::Shape("encoder input is empty".into()));
    }
    let rows = params.char_embeddings.rows();
    if let Some(&bad) = indices.iter().find(|&&i| i >= rows) {
        return Err(Error::Shape(format!("character index {bad} outside embedding table of {rows}")));
    }
    Ok(())
}

fn encode_traced(indices: &[usize], params: &ModelParams) -> EncoderTrace {
    let hs = params.hidden_size();
    let n = indices.len();
    let mut fwd = Vec::with_capacity(n);
    let mut h = vec![0.0; hs];
    let mut fwd_states = Vec::with_capacity(n);
    for &i in indices {
        let (next, cache) = gru::forward(params.char_embeddings.row(i), &h, &params.encoder_fwd);
        fwd.push(cache);
        fwd_states.push(next.clone());
        h = next;
    }
    let init = h;

    let mut bwd = Vec::with_capacity(n);
    let mut bwd_states = vec![Vec::new(); n];
    let mut h = vec![0.0; hs];
    for (pos, &i) in indices.iter().enumerate().rev() {
        let (next, cache) = gru::forward(params.char_embeddings.row(i), &h, &params.encoder_bwd);
        bwd.push(cache);
        bwd_states[pos] = next.clone();
        h = next;
    }
    bwd.reverse();

    let outputs = fwd_states
        .iter()
        .zip(&bwd_states)
        .map(|(f, b)| f.iter().zip(b).map(|(x, y)| x + y).collect())
        .collect();
    EncoderTrace { outputs, init, fwd, bwd }
}

/// Encoder outputs (forward plus backward state per position) and the final
/// forward state used to start the decoder. `indices` ends with the sentinel.
pub fn encode(indices: &[usize], params: &ModelParams) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    check_indices(indices, params)?;
    let t = encode_traced(indices, params);
    Ok((t.outputs, t.init))
}

fn decoder_input(prev: usize, enc: &[f64], feat: &[f64], params: &ModelParams) -> Vec<f64> {
    let mut x = Vec::with_capacity(params.decoder.input_size());
    x.extend_from_slice(params.action_embeddings.row(prev));
    x.extend_from_slice(enc);
    x.extend_from_slice(feat);
    x
}

fn project(hidden: &[f64], params: &ModelParams) -> Vec<f64> {
    let mut logits = params.output_bias.values().to_vec();
    matvec_acc(&mut logits, &params.output_proj, hidden);
    log_softmax(&logits)
}

/// One decoder step: returns log-probabilities over the action vocabulary and
/// the new hidden state. `prev` indexes `action_embeddings`, whose last row is
/// the begin-of-sequence action.
pub fn decode_step(
    prev: usize,
    encoder_output: &[f64],
    feature_vec: &[f64],
    hidden: &[f64],
    params: &ModelParams,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let embed = params.action_embeddings.cols();
    let expected = params.decoder.input_size();
    if prev >= params.action_embeddings.rows() {
        return Err(Error::Shape(format!("action index {prev} out of range")));
    }
    if embed + encoder_output.len() + feature_vec.len() != expected {
        return Err(Error::Shape(format!(
            "decoder input needs {expected} values, got {}",
            embed + encoder_output.len() + feature_vec.len()
        )));
    }
    let x = decoder_input(prev, encoder_output, feature_vec, params);
    let h = gru::gru_cell(&x, hidden, &params.decoder)?;
    Ok((project(&h, params), h))
}

/// `L = −Σ lᵢ / ln(1 + s)`.
pub fn sequence_loss(step_loglikes: &[f64]) -> Result<f64> {
    if step_loglikes.is_empty() {
        return Err(Error::InvalidArgument("sequence loss over an empty path".into()));
    }
    let s = step_loglikes.len() as f64;
    Ok(-step_loglikes.iter().sum::<f64>() / (1.0 + s).ln())
}

/// Pointer position before each action when the gold sequence is replayed.
pub fn gold_pointers(lemma: &[char], actions: &[Action], table: &PatchTable) -> Result<Vec<usize>> {
    let mut state = TransducerState::with_cap(lemma.to_vec(), usize::MAX);
    let mut out = Vec::with_capacity(actions.len());
    for &a in actions {
        out.push(state.pointer());
        state.step(a, table)?;
    }
    Ok(out)
}

/// A gold path prepared for teacher forcing.
#[derive(Debug, Clone, PartialEq)]
pub struct TeacherPath {
    /// Encoder input, ending with the sentinel index.
    pub chars: Vec<usize>,
    pub features: Vec<f64>,
    /// Gold action indices.
    pub actions: Vec<usize>,
    /// Pointer position before each gold action.
    pub pointers: Vec<usize>,
}

impl TeacherPath {
    fn check(&self, params: &ModelParams) -> Result<()> {
        check_indices(&self.chars, params)?;
        if self.actions.is_empty() || self.actions.len() != self.pointers.len() {
            return Err(Error::LengthMismatch {
                what: "gold actions and pointers",
                left: self.actions.len(),
                right: self.pointers.len(),
            });
        }
        let vocab = params.output_bias.len();
        if self.actions.iter().any(|&a| a >= vocab) || self.pointers.iter().any(|&p| p >= self.chars.len()) {
            return Err(Error::Shape("gold path indexes outside the model".into()));
        }
        if self.features.len() + params.action_embeddings.cols() + params.hidden_size()
            != params.decoder.input_size()
        {
            return Err(Error::Shape(format!("feature vector of length {} does not fit the decoder", self.features.len())));
        }
        Ok(())
    }
}

struct StepTrace {
    prev: usize,
    pointer: usize,
    cache: GruCache,
    hidden: Vec<f64>,
    log_probs: Vec<f64>,
}

/// Teacher-forced loss without gradients.
pub fn path_loss(params: &ModelParams, path: &TeacherPath) -> Result<f64> {
    path.check(params)?;
    let enc = encode_traced(&path.chars, params);
    let mut h = enc.init;
    let mut prev = params.bos_index();
    let mut ll = Vec::with_capacity(path.actions.len());
    for (&a, &p) in path.actions.iter().zip(&path.pointers) {
        let x = decoder_input(prev, &enc.outputs[p], &path.features, params);
        h = gru::forward(&x, &h, &params.decoder).0;
        ll.push(project(&h, params)[a]);
        prev = a;
    }
    sequence_loss(&ll)
}

/// Teacher-forced loss and its gradient with respect to every parameter.
pub fn loss_and_gradients(params: &ModelParams, path: &TeacherPath) -> Result<(f64, ModelParams)> {
    path.check(params)?;
    let enc = encode_traced(&path.chars, params);
    let hs = params.hidden_size();
    let embed = params.action_embeddings.cols();

    let mut steps: Vec<StepTrace> = Vec::with_capacity(path.actions.len());
    let mut h = enc.init.clone();
    let mut prev = params.bos_index();
    for (&a, &p) in path.actions.iter().zip(&path.pointers) {
        let x = decoder_input(prev, &enc.outputs[p], &path.features, params);
        let (next, cache) = gru::forward(&x, &h, &params.decoder);
        let log_probs = project(&next, params);
        steps.push(StepTrace { prev, pointer: p, cache, hidden: next.clone(), log_probs });
        h = next;
        prev = a;
    }
    let ll: Vec<f64> = steps.iter().zip(&path.actions).map(|(s, &a)| s.log_probs[a]).collect();
    let loss = sequence_loss(&ll)?;
    let scale = 1.0 / (1.0 + steps.len() as f64).ln();

    let mut g = params.zeros_like();
    let mut d_enc = vec![vec![0.0; hs]; path.chars.len()];
    let mut dh = vec![0.0; hs];
    for (s, &gold) in steps.iter().zip(&path.actions).rev() {
        let mut dlogits: Vec<f64> = s.log_probs.iter().map(|lp| scale * lp.exp()).collect();
        dlogits[gold] -= scale;
        outer_acc(&mut g.output_proj, &dlogits, &s.hidden);
        add_assign(g.output_bias.values_mut(), &dlogits);
        matvec_t_acc(&mut dh, &params.output_proj, &dlogits);

        let (dx, dprev) = gru::backward(&dh, &s.cache, &params.decoder, &mut g.decoder);
        add_assign(g.action_embeddings.row_mut(s.prev), &dx[..embed]);
        add_assign(&mut d_enc[s.pointer], &dx[embed..embed + hs]);
        dh = dprev;
    }

    // dh now holds the gradient at the decoder's initial state, i.e. the
    // final forward encoder state.
    let mut dh_f = dh;
    for pos in (0..path.chars.len()).rev() {
        add_assign(&mut dh_f, &d_enc[pos]);
        let (dx, dprev) = gru::backward(&dh_f, &enc.fwd[pos], &params.encoder_fwd, &mut g.encoder_fwd);
        add_assign(g.char_embeddings.row_mut(path.chars[pos]), &dx);
        dh_f = dprev;
    }
    let mut dh_b = vec![0.0; hs];
    for pos in 0..path.chars.len() {
        add_assign(&mut dh_b, &d_enc[pos]);
        let (dx, dprev) = gru::backward(&dh_b, &enc.bwd[pos], &params.encoder_bwd, &mut g.encoder_bwd);
        add_assign(g.char_embeddings.row_mut(path.chars[pos]), &dx);
        dh_b = dprev;
    }
    Ok((loss, g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::params::{init_params, ModelConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny(seed: u64) -> ModelParams {
        let cfg = ModelConfig {
            hidden_size: 4,
            embed_size: 3,
            action_vocab_size: 5,
            char_vocab_size: 6,
            feature_dim: 2,
            use_patches: false,
            seed,
        };
        init_params(&cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    #[test]
    fn loss_formula() {
        assert!((sequence_loss(&[0.5f64.ln()]).unwrap() - 1.0).abs() < 1e-15);
        let l = sequence_loss(&[-0.1, -0.2, -0.3]).unwrap();
        assert!((l - 0.6 / 4f64.ln()).abs() < 1e-15);
        assert!((l - 0.432808).abs() < 1e-6);
        assert_eq!(sequence_loss(&[0.0, 0.0]).unwrap(), 0.0);
        assert!(sequence_loss(&[]).is_err());
    }

    #[test]
    fn encoder_shapes() {
        let p = tiny(1);
        let (out, init) = encode(&[2], &p).unwrap();
        assert_eq!(out.len(), 1);
        let fwd0 = gru::gru_cell(p.char_embeddings.row(2), &[0.0; 4], &p.encoder_fwd).unwrap();
        assert_eq!(init, fwd0);
        let (out, _) = encode(&[2, 3, 4, 1], &p).unwrap();
        assert_eq!(out.len(), 4);
        assert!(encode(&[9], &p).is_err());
    }

    #[test]
    fn reversal_swaps_directions() {
        let p = tiny(2);
        let mut q = p.clone();
        std::mem::swap(&mut q.encoder_fwd, &mut q.encoder_bwd);
        let seq = [2, 5, 3, 1];
        let rev: Vec<usize> = seq.iter().rev().copied().collect();
        let (a, _) = encode(&seq, &p).unwrap();
        let (b, _) = encode(&rev, &q).unwrap();
        for (x, y) in a.iter().zip(b.iter().rev()) {
            for (u, v) in x.iter().zip(y) {
                assert!((u - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn decode_step_normalized() {
        let p = tiny(3);
        let (out, init) = encode(&[2, 3, 1], &p).unwrap();
        let (lp, h) = decode_step(p.bos_index(), &out[0], &[1.0, 0.0], &init, &p).unwrap();
        let total: f64 = lp.iter().map(|v| v.exp()).sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert!(lp.iter().all(|&v| v <= 0.0));
        assert_eq!(h.len(), 4);
        let again = decode_step(p.bos_index(), &out[0], &[1.0, 0.0], &init, &p).unwrap();
        assert_eq!((lp, h), again);
        assert!(decode_step(0, &out[0], &[1.0], &init, &p).is_err());
    }

    #[test]
    fn gradient_matches_loss() {
        let p = tiny(4);
        let path = TeacherPath {
            chars: vec![2, 3, 1],
            features: vec![1.0, 0.0],
            actions: vec![0, 1, 2],
            pointers: vec![0, 0, 1],
        };
        let (loss, g) = loss_and_gradients(&p, &path).unwrap();
        assert!((loss - path_loss(&p, &path).unwrap()).abs() < 1e-12);
        assert!(g.is_finite());
    }

    #[test]
    fn finite_difference_check() {
        let mut p = tiny(5);
        let path = TeacherPath {
            chars: vec![2, 4, 1],
            features: vec![0.0, 1.0],
            actions: vec![3, 1],
            pointers: vec![0, 0],
        };
        let (_, g) = loss_and_gradients(&p, &path).unwrap();
        let analytic: Vec<Vec<f64>> = g.named_tensors().iter().map(|(_, t)| t.values().to_vec()).collect();
        let mut worst = 0.0f64;
        let eps = 1e-5;
        let count = analytic.len();
        for k in 0..count {
            for i in 0..analytic[k].len() {
                p.tensors_mut()[k].values_mut()[i] += eps;
                let up = path_loss(&p, &path).unwrap();
                p.tensors_mut()[k].values_mut()[i] -= 2.0 * eps;
                let down = path_loss(&p, &path).unwrap();
                p.tensors_mut()[k].values_mut()[i] += eps;
                let numeric = (up - down) / (2.0 * eps);
                let a = analytic[k][i];
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
                worst = worst.max(rel);
            }
        }
        assert!(worst < 1e-4, "worst relative error {worst}");
    }
}
