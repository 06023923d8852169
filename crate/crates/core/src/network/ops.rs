//! Single-sentence building blocks of the detector.
//!
//! These follow the cell and layer equations one vector at a time. The
//! batched engine in `engine.rs` computes the same quantities with packed
//! matrices; these functions are its reference.

use super::params::{LstmLayerParams, ModelParams};
use crate::corpus::PAD_ID;
use crate::error::{Error, Result};
use crate::numerics::{check_finite, sigmoid, softmax, Mat, Scalar};

/// Word vectors of one sentence, one row per position.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddedSequence<T> {
    pub matrix: Mat<T>,
    pub valid_len: usize,
}

/// Gate activations of one cell step: input, forget, candidate, output.
#[derive(Clone, Debug, PartialEq)]
pub struct GateCache<T> {
    pub input: Vec<T>,
    pub forget: Vec<T>,
    pub candidate: Vec<T>,
    pub output: Vec<T>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Looks up every token. PAD rows are zero; `valid_len` counts non-PAD tokens.
pub fn embed_sequence<T: Scalar>(token_ids: &[u32], params: &ModelParams<T>) -> Result<EmbeddedSequence<T>> {
    let d = params.config.embedding_dim;
    let vocab = params.config.vocab_size;
    let mut matrix = Mat::zeros(token_ids.len().max(1), d);
    let mut valid_len = 0;
    for (pos, &id) in token_ids.iter().enumerate() {
        if id as usize >= vocab {
            return Err(Error::data(format!(
                "token id {id} at position {pos} is outside the vocabulary of {vocab}"
            )));
        }
        if id == PAD_ID {
            continue;
        }
        valid_len += 1;
        matrix.row_mut(pos).copy_from_slice(params.embedding.row(id as usize));
    }
    Ok(EmbeddedSequence { matrix, valid_len })
}

fn gate_preactivation<T: Scalar>(w: &Mat<T>, b: &Mat<T>, h_prev: &[T], x: &[T]) -> Vec<T> {
    let n = w.cols();
    let mut out = b.data().to_vec();
    for (r, &v) in h_prev.iter().chain(x).enumerate() {
        let row = w.row(r);
        for j in 0..n {
            out[j] += row[j] * v;
        }
    }
    out
}

/// One LSTM step:
///
/// ```text
/// I = σ(W_i·[h, x] + b_i)    F = σ(W_f·[h, x] + b_f)
/// C = F ⊙ C_prev + I ⊙ tanh(W_c·[h, x] + b_c)
/// O = σ(W_o·[h, x] + b_o)    h = O ⊙ tanh(C)
/// ```
pub fn lstm_step<T: Scalar>(
    x: &[T],
    h_prev: &[T],
    c_prev: &[T],
    layer: &LstmLayerParams<T>,
) -> Result<(Vec<T>, Vec<T>, GateCache<T>)> {
    let n = layer.units();
    if x.len() != layer.input_dim() || h_prev.len() != n || c_prev.len() != n {
        return Err(Error::Shape {
            op: "lstm_step",
            left: (h_prev.len() + x.len(), c_prev.len()),
            right: layer.w_i.shape(),
        });
    }
    let input: Vec<T> = gate_preactivation(&layer.w_i, &layer.b_i, h_prev, x)
        .into_iter()
        .map(sigmoid)
        .collect();
    let forget: Vec<T> = gate_preactivation(&layer.w_f, &layer.b_f, h_prev, x)
        .into_iter()
        .map(sigmoid)
        .collect();
    let candidate: Vec<T> = gate_preactivation(&layer.w_c, &layer.b_c, h_prev, x)
        .into_iter()
        .map(|v| v.tanh())
        .collect();
    let output: Vec<T> = gate_preactivation(&layer.w_o, &layer.b_o, h_prev, x)
        .into_iter()
        .map(sigmoid)
        .collect();
    let c: Vec<T> = (0..n)
        .map(|j| forget[j] * c_prev[j] + input[j] * candidate[j])
        .collect();
    let h: Vec<T> = (0..n).map(|j| output[j] * c[j].tanh()).collect();
    check_finite("lstm_step", &h);
    check_finite("lstm_step", &c);
    Ok((
        h,
        c,
        GateCache {
            input,
            forget,
            candidate,
            output,
        },
    ))
}

/// Runs a stack of layers over the valid prefix of `seq` in inference mode.
///
/// Returns the top layer's hidden state per timestep, indexed by original
/// position (entry `t` is the state right after consuming `x_t`), so for the
/// backward direction entry 0 is the last state computed.
pub fn rnn_forward<T: Scalar>(
    seq: &EmbeddedSequence<T>,
    direction: Direction,
    layers: &[LstmLayerParams<T>],
) -> Result<Vec<Vec<T>>> {
    if seq.valid_len == 0 {
        return Err(Error::data("cannot run a recurrent pass over an empty sentence"));
    }
    let len = seq.valid_len;
    let order: Vec<usize> = match direction {
        Direction::Forward => (0..len).collect(),
        Direction::Backward => (0..len).rev().collect(),
    };
    // inputs[t] is the current layer input at original position t.
    let mut inputs: Vec<Vec<T>> = (0..len).map(|t| seq.matrix.row(t).to_vec()).collect();
    for layer in layers {
        let n = layer.units();
        let mut h = vec![T::zero(); n];
        let mut c = vec![T::zero(); n];
        let mut outputs = vec![Vec::new(); len];
        for &t in &order {
            let (h_next, c_next, _) = lstm_step(&inputs[t], &h, &c, layer)?;
            outputs[t] = h_next.clone();
            h = h_next;
            c = c_next;
        }
        inputs = outputs;
    }
    Ok(inputs)
}

/// Splices the sentence feature: forward state at the last valid position,
/// then (if present) backward state at the first position.
pub fn extract_sentence_feature<T: Scalar>(
    fwd_states: &[Vec<T>],
    bwd_states: Option<&[Vec<T>]>,
    valid_len: usize,
) -> Result<Vec<T>> {
    if valid_len == 0 || fwd_states.len() < valid_len {
        return Err(Error::data(format!(
            "valid length {valid_len} does not fit {} forward states",
            fwd_states.len()
        )));
    }
    let mut z = fwd_states[valid_len - 1].clone();
    if let Some(bwd) = bwd_states {
        let first = bwd.first().ok_or_else(|| Error::data("no backward states"))?;
        z.extend_from_slice(first);
    }
    Ok(z)
}

/// Affine fusion `F = Zᵀ·W_F + b_F`.
pub fn fuse_features<T: Scalar>(z: &[T], params: &ModelParams<T>) -> Result<Vec<T>> {
    affine(z, &params.fusion_w, &params.fusion_b, "fuse_features")
}

/// Classifier head: logits and their softmax.
pub fn classify<T: Scalar>(f: &[T], params: &ModelParams<T>) -> Result<(Vec<T>, Vec<T>)> {
    let logits = affine(f, &params.out_w, &params.out_b, "classify")?;
    let probs = softmax(&logits)?;
    Ok((logits, probs))
}

/// Stego (1) iff the stego probability reaches the threshold.
pub fn decide(y_stego: f64, threshold: f64) -> usize {
    usize::from(y_stego >= threshold)
}

fn affine<T: Scalar>(v: &[T], w: &Mat<T>, b: &Mat<T>, op: &'static str) -> Result<Vec<T>> {
    if v.len() != w.rows() {
        return Err(Error::Shape {
            op,
            left: (1, v.len()),
            right: w.shape(),
        });
    }
    let mut out = b.data().to_vec();
    for (i, &vi) in v.iter().enumerate() {
        for (o, &wij) in out.iter_mut().zip(w.row(i)) {
            *o += vi * wij;
        }
    }
    check_finite(op, &out);
    Ok(out)
}

/// Reference prediction for one sentence: class probabilities.
pub fn predict_one<T: Scalar>(token_ids: &[u32], params: &ModelParams<T>) -> Result<Vec<T>> {
    let f = sentence_features(token_ids, params)?;
    Ok(classify(&f, params)?.1)
}

/// Reference fused feature `F` for one sentence.
pub fn sentence_features<T: Scalar>(token_ids: &[u32], params: &ModelParams<T>) -> Result<Vec<T>> {
    let seq = embed_sequence(token_ids, params)?;
    let fwd = rnn_forward(&seq, Direction::Forward, &params.forward_layers)?;
    let bwd = if params.config.bidirectional {
        Some(rnn_forward(&seq, Direction::Backward, &params.backward_layers)?)
    } else {
        None
    };
    let z = extract_sentence_feature(&fwd, bwd.as_deref(), seq.valid_len)?;
    fuse_features(&z, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::ModelConfig;
    use crate::numerics::Rng;

    fn cfg(bidirectional: bool, layers: usize) -> ModelConfig {
        ModelConfig {
            vocab_size: 20,
            embedding_dim: 4,
            num_layers: layers,
            hidden_units: 3,
            bidirectional,
            fused_dim: 5,
            num_classes: 2,
            dropout_rate: 0.0,
            threshold: 0.5,
        }
    }

    #[test]
    fn zero_cell_stays_zero() {
        let layer = LstmLayerParams::<f64>::zeros(2, 3);
        let (h, c, gates) = lstm_step(&[0.3, -0.2], &[0.0; 3], &[0.0; 3], &layer).unwrap();
        assert_eq!(h, vec![0.0; 3]);
        assert_eq!(c, vec![0.0; 3]);
        assert_eq!(gates.input, vec![0.5; 3]);
    }

    #[test]
    fn forget_bias_only_cell() {
        let mut layer = LstmLayerParams::<f64>::zeros(1, 1);
        layer.b_f.fill(1.0);
        let c_prev = 0.8;
        let (h, c, _) = lstm_step(&[0.5], &[0.2], &[c_prev], &layer).unwrap();
        let sig1 = 1.0 / (1.0 + (-1.0f64).exp());
        assert!((c[0] - sig1 * c_prev).abs() < 1e-15);
        assert!((h[0] - 0.5 * (sig1 * c_prev).tanh()).abs() < 1e-15);
    }

    #[test]
    fn lstm_step_rejects_bad_shapes() {
        let layer = LstmLayerParams::<f32>::zeros(2, 3);
        assert!(lstm_step(&[0.0; 3], &[0.0; 3], &[0.0; 3], &layer).is_err());
    }

    #[test]
    fn embedding_lookup() {
        let p: ModelParams<f64> = ModelParams::init(&cfg(false, 1), &mut Rng::new(0)).unwrap();
        let seq = embed_sequence(&[5, 2, 0, 0], &p).unwrap();
        assert_eq!(seq.valid_len, 2);
        assert_eq!(seq.matrix.row(0), p.embedding.row(5));
        assert_eq!(seq.matrix.row(1), p.embedding.row(2));
        assert!(seq.matrix.row(3).iter().all(|&x| x == 0.0));
        let pads = embed_sequence(&[0, 0], &p).unwrap();
        assert_eq!(pads.valid_len, 0);
        assert!(rnn_forward(&pads, Direction::Forward, &p.forward_layers).is_err());
        let err = embed_sequence(&[1, 99], &p).unwrap_err().to_string();
        assert!(err.contains("position 1"), "{err}");
    }

    #[test]
    fn single_layer_base_case() {
        let p: ModelParams<f64> = ModelParams::init(&cfg(false, 1), &mut Rng::new(3)).unwrap();
        let seq = embed_sequence(&[7], &p).unwrap();
        let states = rnn_forward(&seq, Direction::Forward, &p.forward_layers).unwrap();
        let (h, _, _) = lstm_step(p.embedding.row(7), &[0.0; 3], &[0.0; 3], &p.forward_layers[0]).unwrap();
        assert_eq!(states[0], h);
    }

    #[test]
    fn backward_direction_visits_last_token_first() {
        let p: ModelParams<f64> = ModelParams::init(&cfg(true, 1), &mut Rng::new(4)).unwrap();
        let seq = embed_sequence(&[3, 9], &p).unwrap();
        let states = rnn_forward(&seq, Direction::Backward, &p.backward_layers).unwrap();
        let layer = &p.backward_layers[0];
        let (h2, c2, _) = lstm_step(p.embedding.row(9), &[0.0; 3], &[0.0; 3], layer).unwrap();
        let (h1, _, _) = lstm_step(p.embedding.row(3), &h2, &c2, layer).unwrap();
        assert_eq!(states[1], h2);
        assert_eq!(states[0], h1);
    }

    #[test]
    fn feature_splice() {
        let fwd = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        let bwd = vec![vec![5.0], vec![6.0]];
        assert_eq!(
            extract_sentence_feature(&fwd, Some(&bwd), 2).unwrap(),
            vec![3.0, 4.0, 5.0]
        );
        assert_eq!(extract_sentence_feature(&fwd, None, 1).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn fusion_and_head() {
        let mut p: ModelParams<f64> = ModelParams::init(&cfg(false, 1), &mut Rng::new(5)).unwrap();
        p.fusion_w = Mat::zeros(3, 3);
        p.config.fused_dim = 3;
        for i in 0..3 {
            p.fusion_w.set(i, i, 1.0);
        }
        p.fusion_b = Mat::zeros(1, 3);
        assert_eq!(fuse_features(&[0.1, 0.2, 0.3], &p).unwrap(), vec![0.1, 0.2, 0.3]);
        p.fusion_b = Mat::from_vec(1, 3, vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(fuse_features(&[0.0; 3], &p).unwrap(), vec![1.0, 2.0, 3.0]);
        assert!(fuse_features(&[0.0; 2], &p).is_err());

        p.out_w = Mat::zeros(3, 2);
        p.out_b = Mat::zeros(1, 2);
        assert_eq!(classify(&[0.4, 0.1, -2.0], &p).unwrap().1, vec![0.5, 0.5]);
        p.out_b = Mat::from_vec(1, 2, vec![0.0, 3f64.ln()]).unwrap();
        let (_, y) = classify(&[0.4, 0.1, -2.0], &p).unwrap();
        assert!((y[1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn threshold_is_inclusive() {
        assert_eq!(decide(0.5, 0.5), 1);
        assert_eq!(decide(0.49, 0.5), 0);
        assert_eq!(decide(1.0, 0.5), 1);
    }
}
