//! Batched forward and backward passes.
//!
//! A batch is sorted by sentence length (longest first) and laid out time
//! major, so the sentences still running at step `s` are always a prefix of
//! the rows. Padded positions are never computed, which is what makes the
//! result independent of how much padding a sentence carries.

use super::params::{LstmLayerParams, ModelParams};
use crate::corpus::PAD_ID;
use crate::error::{Error, Result};
use crate::numerics::{check_finite, gemm, sigmoid, softmax_in_place, Mat, Rng, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Row layout of a length-sorted, time-major packed batch.
#[derive(Clone, Debug)]
struct Packing {
    /// Sorted position → batch index.
    order: Vec<usize>,
    /// Sentence lengths in sorted order.
    lens: Vec<usize>,
    /// Number of running sentences per step.
    active: Vec<usize>,
    /// First packed row of each step; one extra entry holds the total.
    offsets: Vec<usize>,
}

impl Packing {
    fn new(lens_by_sample: &[usize]) -> Self {
        let mut order: Vec<usize> = (0..lens_by_sample.len()).collect();
        // Stable: equal lengths keep batch order.
        order.sort_by(|&a, &b| lens_by_sample[b].cmp(&lens_by_sample[a]));
        let lens: Vec<usize> = order.iter().map(|&i| lens_by_sample[i]).collect();
        let steps = lens.first().copied().unwrap_or(0);
        let active: Vec<usize> = (0..steps)
            .map(|s| lens.iter().take_while(|&&l| l > s).count())
            .collect();
        let mut offsets = Vec::with_capacity(steps + 1);
        let mut acc = 0;
        for &k in &active {
            offsets.push(acc);
            acc += k;
        }
        offsets.push(acc);
        Packing {
            order,
            lens,
            active,
            offsets,
        }
    }

    fn rows(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    fn steps(&self) -> usize {
        self.active.len()
    }

    /// Packed row of the final step of sorted sentence `r`.
    fn last_row(&self, r: usize) -> usize {
        self.offsets[self.lens[r] - 1] + r
    }

    /// Packed token ids, either in reading order or reversed per sentence.
    fn pack_tokens(&self, seqs: &[&[u32]], reversed: bool) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.rows());
        for s in 0..self.steps() {
            for r in 0..self.active[s] {
                let seq = seqs[self.order[r]];
                let len = self.lens[r];
                let pos = if reversed { len - 1 - s } else { s };
                out.push(seq[pos]);
            }
        }
        out
    }
}

/// The four gate matrices of a layer split by operand and laid side by side
/// in `i, f, c, o` order.
struct PackedLayer<T> {
    units: usize,
    input_dim: usize,
    /// `input_dim × 4n`
    wx: Vec<T>,
    /// `n × 4n`
    wh: Vec<T>,
    /// `4n`
    bias: Vec<T>,
}

impl<T: Scalar> PackedLayer<T> {
    fn new(layer: &LstmLayerParams<T>) -> Self {
        let n = layer.units();
        let input_dim = layer.input_dim();
        let width = 4 * n;
        let mut wx = vec![T::zero(); input_dim * width];
        let mut wh = vec![T::zero(); n * width];
        let mut bias = vec![T::zero(); width];
        let gates = [&layer.w_i, &layer.w_f, &layer.w_c, &layer.w_o];
        let biases = [&layer.b_i, &layer.b_f, &layer.b_c, &layer.b_o];
        for (g, (w, b)) in gates.iter().zip(biases).enumerate() {
            for r in 0..n {
                wh[r * width + g * n..r * width + (g + 1) * n].copy_from_slice(w.row(r));
            }
            for r in 0..input_dim {
                wx[r * width + g * n..r * width + (g + 1) * n].copy_from_slice(w.row(n + r));
            }
            bias[g * n..(g + 1) * n].copy_from_slice(b.data());
        }
        PackedLayer {
            units: n,
            input_dim,
            wx,
            wh,
            bias,
        }
    }
}

/// Scatters packed gradients back into the four gate tensors (accumulating).
fn unpack_layer_grads<T: Scalar>(
    n: usize,
    input_dim: usize,
    d_wx: &[T],
    d_wh: &[T],
    d_b: &[T],
    grads: &mut LstmLayerParams<T>,
) {
    let width = 4 * n;
    let gates = [
        (&mut grads.w_i, &mut grads.b_i),
        (&mut grads.w_f, &mut grads.b_f),
        (&mut grads.w_c, &mut grads.b_c),
        (&mut grads.w_o, &mut grads.b_o),
    ];
    for (g, (w, b)) in gates.into_iter().enumerate() {
        for r in 0..n {
            for (dst, &src) in w.row_mut(r).iter_mut().zip(&d_wh[r * width + g * n..]) {
                *dst += src;
            }
        }
        for r in 0..input_dim {
            for (dst, &src) in w.row_mut(n + r).iter_mut().zip(&d_wx[r * width + g * n..]) {
                *dst += src;
            }
        }
        for (dst, &src) in b.data_mut().iter_mut().zip(&d_b[g * n..(g + 1) * n]) {
            *dst += src;
        }
    }
}

/// Cached activations of one layer in one direction, packed rows.
#[derive(Clone, Debug)]
struct LayerTrace<T> {
    /// Layer input after dropout, `rows × input_dim`.
    input: Vec<T>,
    /// Activated gates, `rows × 4n`.
    gates: Vec<T>,
    cells: Vec<T>,
    tanh_cells: Vec<T>,
    hidden: Vec<T>,
    /// Inverted-dropout mask applied to `hidden` before the next layer.
    out_mask: Option<Vec<T>>,
}

#[derive(Clone, Debug)]
struct DirectionTrace<T> {
    tokens: Vec<u32>,
    layers: Vec<LayerTrace<T>>,
}

/// Everything the backward pass needs from a forward pass over one batch.
///
/// Per-sample quantities (`z`, `fused`, `logits`, `probs`) are stored in
/// batch order, one row per sentence.
#[derive(Clone, Debug)]
pub struct ForwardTrace<T> {
    mode: Mode,
    packing: Packing,
    directions: Vec<DirectionTrace<T>>,
    pub z: Mat<T>,
    pub fused: Mat<T>,
    fused_mask: Option<Vec<T>>,
    fused_dropped: Mat<T>,
    pub logits: Mat<T>,
    pub probs: Mat<T>,
}

impl<T: Scalar> ForwardTrace<T> {
    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn batch_size(&self) -> usize {
        self.probs.rows()
    }

    pub fn probabilities(&self, sample: usize) -> &[T] {
        self.probs.row(sample)
    }

    pub fn features(&self, sample: usize) -> &[T] {
        self.fused.row(sample)
    }

    pub fn valid_len(&self, sample: usize) -> usize {
        let r = self.packing.order.iter().position(|&i| i == sample).unwrap();
        self.packing.lens[r]
    }
}

/// Length of the content prefix of a padded sentence.
pub fn content_len(seq: &[u32]) -> Result<usize> {
    let len = seq.iter().position(|&t| t == PAD_ID).unwrap_or(seq.len());
    if let Some(p) = seq[len..].iter().position(|&t| t != PAD_ID) {
        return Err(Error::data(format!("token at position {} follows padding", len + p)));
    }
    Ok(len)
}

fn dropout_mask<T: Scalar>(len: usize, rate: f64, rng: &mut Rng) -> Vec<T> {
    let keep = 1.0 - rate;
    let scale = T::from_f64_lossy(1.0 / keep);
    (0..len)
        .map(|_| if rng.bernoulli(keep) { scale } else { T::zero() })
        .collect()
}

fn layer_forward<T: Scalar>(packing: &Packing, input: Vec<T>, layer: &PackedLayer<T>) -> LayerTrace<T> {
    let n = layer.units;
    let width = 4 * n;
    let rows = packing.rows();
    let mut gates = Vec::with_capacity(rows * width);
    for _ in 0..rows {
        gates.extend_from_slice(&layer.bias);
    }
    gemm(
        rows,
        layer.input_dim,
        width,
        &input,
        false,
        &layer.wx,
        false,
        T::one(),
        &mut gates,
    );

    let mut cells = vec![T::zero(); rows * n];
    let mut tanh_cells = vec![T::zero(); rows * n];
    let mut hidden = vec![T::zero(); rows * n];
    for s in 0..packing.steps() {
        let o = packing.offsets[s];
        let k = packing.active[s];
        let prev = if s > 0 { Some(packing.offsets[s - 1]) } else { None };
        if let Some(po) = prev {
            gemm(
                k,
                n,
                width,
                &hidden[po * n..(po + k) * n],
                false,
                &layer.wh,
                false,
                T::one(),
                &mut gates[o * width..(o + k) * width],
            );
        }
        for r in 0..k {
            let row = o + r;
            let g = &mut gates[row * width..(row + 1) * width];
            for j in 0..n {
                let i_g = sigmoid(g[j]);
                let f_g = sigmoid(g[n + j]);
                let c_g = g[2 * n + j].tanh();
                let o_g = sigmoid(g[3 * n + j]);
                g[j] = i_g;
                g[n + j] = f_g;
                g[2 * n + j] = c_g;
                g[3 * n + j] = o_g;
                let c_prev = match prev {
                    Some(po) => cells[(po + r) * n + j],
                    None => T::zero(),
                };
                let c = f_g * c_prev + i_g * c_g;
                let tc = c.tanh();
                cells[row * n + j] = c;
                tanh_cells[row * n + j] = tc;
                hidden[row * n + j] = o_g * tc;
            }
        }
    }
    check_finite("lstm layer forward", &hidden);
    LayerTrace {
        input,
        gates,
        cells,
        tanh_cells,
        hidden,
        out_mask: None,
    }
}

struct LayerGrads<T> {
    d_wx: Vec<T>,
    d_wh: Vec<T>,
    d_b: Vec<T>,
    d_input: Vec<T>,
}

/// Backpropagation through time for one layer, given the gradient flowing
/// into its hidden states from above.
fn layer_backward<T: Scalar>(
    packing: &Packing,
    trace: &LayerTrace<T>,
    layer: &PackedLayer<T>,
    dh_ext: &[T],
) -> LayerGrads<T> {
    let n = layer.units;
    let width = 4 * n;
    let rows = packing.rows();
    let max_active = packing.active.first().copied().unwrap_or(0);
    let mut da = vec![T::zero(); rows * width];
    let mut dh_rec = vec![T::zero(); max_active * n];
    let mut dc_carry = vec![T::zero(); max_active * n];
    let one = T::one();

    for s in (0..packing.steps()).rev() {
        let o = packing.offsets[s];
        let k = packing.active[s];
        let k_next = packing.active.get(s + 1).copied().unwrap_or(0);
        let prev = if s > 0 { Some(packing.offsets[s - 1]) } else { None };
        for r in 0..k {
            let row = o + r;
            let g = &trace.gates[row * width..(row + 1) * width];
            let d = &mut da[row * width..(row + 1) * width];
            for j in 0..n {
                let (i_g, f_g, c_g, o_g) = (g[j], g[n + j], g[2 * n + j], g[3 * n + j]);
                let tc = trace.tanh_cells[row * n + j];
                let carried = r < k_next;
                let mut dh = dh_ext[row * n + j];
                let mut dc = T::zero();
                if carried {
                    dh += dh_rec[r * n + j];
                    dc = dc_carry[r * n + j];
                }
                dc += dh * o_g * (one - tc * tc);
                let c_prev = match prev {
                    Some(po) => trace.cells[(po + r) * n + j],
                    None => T::zero(),
                };
                d[j] = dc * c_g * i_g * (one - i_g);
                d[n + j] = dc * c_prev * f_g * (one - f_g);
                d[2 * n + j] = dc * i_g * (one - c_g * c_g);
                d[3 * n + j] = dh * tc * o_g * (one - o_g);
                dc_carry[r * n + j] = dc * f_g;
            }
        }
        if s > 0 {
            gemm(
                k,
                width,
                n,
                &da[o * width..(o + k) * width],
                false,
                &layer.wh,
                true,
                T::zero(),
                &mut dh_rec[..k * n],
            );
        }
    }

    let mut d_wx = vec![T::zero(); layer.input_dim * width];
    gemm(
        layer.input_dim,
        rows,
        width,
        &trace.input,
        true,
        &da,
        false,
        T::zero(),
        &mut d_wx,
    );

    let mut h_prev = vec![T::zero(); rows * n];
    for s in 1..packing.steps() {
        let o = packing.offsets[s];
        let po = packing.offsets[s - 1];
        let k = packing.active[s];
        h_prev[o * n..(o + k) * n].copy_from_slice(&trace.hidden[po * n..(po + k) * n]);
    }
    let mut d_wh = vec![T::zero(); n * width];
    gemm(n, rows, width, &h_prev, true, &da, false, T::zero(), &mut d_wh);

    let mut d_b = vec![T::zero(); width];
    for row in da.chunks_exact(width) {
        for (acc, &v) in d_b.iter_mut().zip(row) {
            *acc += v;
        }
    }

    let mut d_input = vec![T::zero(); rows * layer.input_dim];
    gemm(
        rows,
        width,
        layer.input_dim,
        &da,
        false,
        &layer.wx,
        true,
        T::zero(),
        &mut d_input,
    );
    LayerGrads {
        d_wx,
        d_wh,
        d_b,
        d_input,
    }
}

/// `out = a·w + bias` for row-major `a` (`rows × w.rows()`).
fn affine_rows<T: Scalar>(a: &Mat<T>, w: &Mat<T>, bias: &Mat<T>) -> Mat<T> {
    let mut out = Mat::zeros(a.rows(), w.cols());
    for r in 0..a.rows() {
        out.row_mut(r).copy_from_slice(bias.data());
    }
    gemm(
        a.rows(),
        a.cols(),
        w.cols(),
        a.data(),
        false,
        w.data(),
        false,
        T::one(),
        out.data_mut(),
    );
    out
}

fn add_column_sums<T: Scalar>(m: &Mat<T>, acc: &mut Mat<T>) {
    for r in 0..m.rows() {
        for (a, &v) in acc.data_mut().iter_mut().zip(m.row(r)) {
            *a += v;
        }
    }
}

impl<T: Scalar> ModelParams<T> {
    /// Forward pass over a batch of sentences.
    ///
    /// Sentences may carry trailing PAD tokens. Train mode draws dropout
    /// masks from `rng` (required when dropout is enabled); infer mode uses
    /// no dropout at all.
    pub fn forward(&self, seqs: &[&[u32]], mode: Mode, rng: Option<&mut Rng>) -> Result<ForwardTrace<T>> {
        if seqs.is_empty() {
            return Err(Error::usage("forward on an empty batch"));
        }
        let cfg = &self.config;
        let mut lens = Vec::with_capacity(seqs.len());
        for (i, seq) in seqs.iter().enumerate() {
            let len = content_len(seq)?;
            if len == 0 {
                return Err(Error::data(format!("sentence {i} in batch is empty")));
            }
            if let Some(&bad) = seq[..len].iter().find(|&&t| t as usize >= cfg.vocab_size) {
                return Err(Error::data(format!(
                    "sentence {i}: token id {bad} outside the vocabulary of {}",
                    cfg.vocab_size
                )));
            }
            lens.push(len);
        }
        let dropout = mode == Mode::Train && cfg.dropout_rate > 0.0;
        let mut rng = match (dropout, rng) {
            (false, _) => None,
            (true, Some(r)) => Some(r),
            (true, None) => return Err(Error::usage("train-mode forward with dropout needs an rng")),
        };

        let packing = Packing::new(&lens);
        let rows = packing.rows();
        let n = cfg.hidden_units;
        let d = cfg.embedding_dim;
        let batch = seqs.len();
        let mut z = Mat::zeros(batch, cfg.feature_dim());
        let mut directions = Vec::with_capacity(cfg.directions());

        for dir in 0..cfg.directions() {
            let reversed = dir == 1;
            let tokens = packing.pack_tokens(seqs, reversed);
            let mut input = Vec::with_capacity(rows * d);
            for &t in &tokens {
                input.extend_from_slice(self.embedding.row(t as usize));
            }
            let stack = self.stack(reversed);
            let mut layers = Vec::with_capacity(stack.len());
            for (l, layer) in stack.iter().enumerate() {
                let packed = PackedLayer::new(layer);
                let mut trace = layer_forward(&packing, input, &packed);
                let is_top = l + 1 == stack.len();
                input = if is_top {
                    Vec::new()
                } else if let Some(rng) = rng.as_deref_mut() {
                    let mask: Vec<T> = dropout_mask(rows * n, cfg.dropout_rate, rng);
                    let next = trace.hidden.iter().zip(&mask).map(|(&h, &m)| h * m).collect();
                    trace.out_mask = Some(mask);
                    next
                } else {
                    trace.hidden.clone()
                };
                layers.push(trace);
            }
            let top = layers.last().unwrap();
            for r in 0..batch {
                let row = packing.last_row(r);
                z.row_mut(packing.order[r])[dir * n..(dir + 1) * n]
                    .copy_from_slice(&top.hidden[row * n..(row + 1) * n]);
            }
            directions.push(DirectionTrace { tokens, layers });
        }

        let fused = affine_rows(&z, &self.fusion_w, &self.fusion_b);
        let (fused_dropped, fused_mask) = match rng {
            Some(rng) => {
                let mask: Vec<T> = dropout_mask(fused.len(), cfg.dropout_rate, rng);
                let mut dropped = fused.clone();
                for (v, &m) in dropped.data_mut().iter_mut().zip(&mask) {
                    *v *= m;
                }
                (dropped, Some(mask))
            }
            None => (fused.clone(), None),
        };
        let logits = affine_rows(&fused_dropped, &self.out_w, &self.out_b);
        check_finite("classifier logits", logits.data());
        let mut probs = logits.clone();
        for r in 0..batch {
            softmax_in_place(probs.row_mut(r));
        }
        Ok(ForwardTrace {
            mode,
            packing,
            directions,
            z,
            fused,
            fused_mask,
            fused_dropped,
            logits,
            probs,
        })
    }

    /// Accumulates into `grads` the gradient of a loss whose derivative with
    /// respect to the logits is `d_logits` (one row per sample).
    pub fn backward(&self, trace: &ForwardTrace<T>, d_logits: &Mat<T>, grads: &mut ModelParams<T>) -> Result<()> {
        if trace.mode != Mode::Train {
            return Err(Error::usage("backward needs a train-mode trace"));
        }
        if d_logits.shape() != trace.logits.shape() {
            return Err(Error::Shape {
                op: "backward",
                left: d_logits.shape(),
                right: trace.logits.shape(),
            });
        }
        let cfg = &self.config;
        let batch = trace.batch_size();
        let h = cfg.fused_dim;
        let classes = cfg.num_classes;
        let m = cfg.feature_dim();
        let n = cfg.hidden_units;

        gemm(
            h,
            batch,
            classes,
            trace.fused_dropped.data(),
            true,
            d_logits.data(),
            false,
            T::one(),
            grads.out_w.data_mut(),
        );
        add_column_sums(d_logits, &mut grads.out_b);

        let mut d_fused = Mat::zeros(batch, h);
        gemm(
            batch,
            classes,
            h,
            d_logits.data(),
            false,
            self.out_w.data(),
            true,
            T::zero(),
            d_fused.data_mut(),
        );
        if let Some(mask) = &trace.fused_mask {
            for (v, &k) in d_fused.data_mut().iter_mut().zip(mask) {
                *v *= k;
            }
        }
        gemm(
            m,
            batch,
            h,
            trace.z.data(),
            true,
            d_fused.data(),
            false,
            T::one(),
            grads.fusion_w.data_mut(),
        );
        add_column_sums(&d_fused, &mut grads.fusion_b);

        let mut d_z = Mat::zeros(batch, m);
        gemm(
            batch,
            h,
            m,
            d_fused.data(),
            false,
            self.fusion_w.data(),
            true,
            T::zero(),
            d_z.data_mut(),
        );

        let packing = &trace.packing;
        let rows = packing.rows();
        let d = cfg.embedding_dim;
        for (dir, dtrace) in trace.directions.iter().enumerate() {
            let reversed = dir == 1;
            let mut dh_ext = vec![T::zero(); rows * n];
            for r in 0..batch {
                let row = packing.last_row(r);
                dh_ext[row * n..(row + 1) * n].copy_from_slice(&d_z.row(packing.order[r])[dir * n..(dir + 1) * n]);
            }
            let stack = self.stack(reversed);
            let grad_stack = if reversed {
                &mut grads.backward_layers
            } else {
                &mut grads.forward_layers
            };
            for l in (0..stack.len()).rev() {
                let packed = PackedLayer::new(&stack[l]);
                let lg = layer_backward(packing, &dtrace.layers[l], &packed, &dh_ext);
                unpack_layer_grads(n, packed.input_dim, &lg.d_wx, &lg.d_wh, &lg.d_b, &mut grad_stack[l]);
                if l > 0 {
                    dh_ext = lg.d_input;
                    if let Some(mask) = &dtrace.layers[l - 1].out_mask {
                        for (v, &k) in dh_ext.iter_mut().zip(mask) {
                            *v *= k;
                        }
                    }
                } else {
                    for (row, &tok) in dtrace.tokens.iter().enumerate() {
                        let dst = grads.embedding.row_mut(tok as usize);
                        for (a, &v) in dst.iter_mut().zip(&lg.d_input[row * d..(row + 1) * d]) {
                            *a += v;
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Class probabilities for many sentences, one row each, in chunks.
    pub fn predict_proba(&self, seqs: &[&[u32]]) -> Result<Mat<T>> {
        self.infer_rows(seqs, |t| &t.probs)
    }

    /// Fused sentence features `F`, one row per sentence.
    pub fn fused_features(&self, seqs: &[&[u32]]) -> Result<Mat<T>> {
        self.infer_rows(seqs, |t| &t.fused)
    }

    fn infer_rows(&self, seqs: &[&[u32]], pick: impl Fn(&ForwardTrace<T>) -> &Mat<T>) -> Result<Mat<T>> {
        const CHUNK: usize = 256;
        let mut data = Vec::new();
        let mut cols = 0;
        for chunk in seqs.chunks(CHUNK) {
            let trace = self.forward(chunk, Mode::Infer, None)?;
            let m = pick(&trace);
            cols = m.cols();
            data.extend_from_slice(m.data());
        }
        Mat::from_vec(seqs.len(), cols, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packing_layout() {
        let p = Packing::new(&[2, 4, 1, 4]);
        assert_eq!(p.order, vec![1, 3, 0, 2]);
        assert_eq!(p.active, vec![4, 3, 2, 2]);
        assert_eq!(p.offsets, vec![0, 4, 7, 9, 11]);
        assert_eq!(p.rows(), 11);
        assert_eq!(p.last_row(2), 4 + 2);
        assert_eq!(p.last_row(0), 9);
        let a: &[u32] = &[10, 11];
        let b: &[u32] = &[20, 21, 22, 23];
        let c: &[u32] = &[30];
        let d: &[u32] = &[40, 41, 42, 43];
        let fwd = p.pack_tokens(&[a, b, c, d], false);
        assert_eq!(fwd, vec![20, 40, 10, 30, 21, 41, 11, 22, 42, 23, 43]);
        let bwd = p.pack_tokens(&[a, b, c, d], true);
        assert_eq!(bwd, vec![23, 43, 11, 30, 22, 42, 10, 21, 41, 20, 40]);
    }

    #[test]
    fn content_len_rules() {
        assert_eq!(content_len(&[3, 4, 0, 0]).unwrap(), 2);
        assert_eq!(content_len(&[3, 4]).unwrap(), 2);
        assert_eq!(content_len(&[0]).unwrap(), 0);
        assert!(content_len(&[3, 0, 5]).is_err());
    }
}
