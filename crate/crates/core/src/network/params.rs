use super::config::ModelConfig;
use crate::corpus::PAD_ID;
use crate::error::Result;
use crate::numerics::{init_weights, InitScheme, Mat, Rng, Scalar, FORGET_BIAS_INIT};

/// What a tensor is, for regularization and optimizer bookkeeping.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TensorKind {
    Embedding,
    Weight,
    Bias,
}

/// One LSTM layer. Each gate matrix acts on the concatenation
/// `[h_{t-1}, x_t]`: rows `0..n` read the previous hidden state, rows
/// `n..n+input_dim` read the layer input.
#[derive(Clone, Debug, PartialEq)]
pub struct LstmLayerParams<T> {
    pub w_i: Mat<T>,
    pub w_f: Mat<T>,
    pub w_c: Mat<T>,
    pub w_o: Mat<T>,
    pub b_i: Mat<T>,
    pub b_f: Mat<T>,
    pub b_c: Mat<T>,
    pub b_o: Mat<T>,
}

impl<T: Scalar> LstmLayerParams<T> {
    pub fn init(input_dim: usize, units: usize, rng: &mut Rng) -> Result<Self> {
        let rows = units + input_dim;
        Ok(LstmLayerParams {
            w_i: init_weights(rows, units, rng, InitScheme::GlorotUniform)?,
            w_f: init_weights(rows, units, rng, InitScheme::GlorotUniform)?,
            w_c: init_weights(rows, units, rng, InitScheme::GlorotUniform)?,
            w_o: init_weights(rows, units, rng, InitScheme::GlorotUniform)?,
            b_i: init_weights(1, units, rng, InitScheme::Zeros)?,
            b_f: init_weights(1, units, rng, InitScheme::Constant(FORGET_BIAS_INIT))?,
            b_c: init_weights(1, units, rng, InitScheme::Zeros)?,
            b_o: init_weights(1, units, rng, InitScheme::Zeros)?,
        })
    }

    pub fn zeros(input_dim: usize, units: usize) -> Self {
        let rows = units + input_dim;
        LstmLayerParams {
            w_i: Mat::zeros(rows, units),
            w_f: Mat::zeros(rows, units),
            w_c: Mat::zeros(rows, units),
            w_o: Mat::zeros(rows, units),
            b_i: Mat::zeros(1, units),
            b_f: Mat::zeros(1, units),
            b_c: Mat::zeros(1, units),
            b_o: Mat::zeros(1, units),
        }
    }

    pub fn units(&self) -> usize {
        self.w_i.cols()
    }

    pub fn input_dim(&self) -> usize {
        self.w_i.rows() - self.w_i.cols()
    }

    fn weights(&self) -> [&Mat<T>; 4] {
        [&self.w_i, &self.w_f, &self.w_c, &self.w_o]
    }

    fn biases(&self) -> [&Mat<T>; 4] {
        [&self.b_i, &self.b_f, &self.b_c, &self.b_o]
    }
}

/// Gate order used everywhere a layer's four gates are laid side by side.
pub(crate) const GATE_NAMES: [&str; 4] = ["i", "f", "c", "o"];

/// Every trainable tensor of a detector. The same struct doubles as the
/// gradient buffer (see [`ModelParams::zeros_like`]).
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<T> {
    pub config: ModelConfig,
    /// `vocab_size × embedding_dim`; the PAD row stays zero.
    pub embedding: Mat<T>,
    pub forward_layers: Vec<LstmLayerParams<T>>,
    /// Empty for unidirectional models.
    pub backward_layers: Vec<LstmLayerParams<T>>,
    /// `feature_dim × fused_dim`.
    pub fusion_w: Mat<T>,
    pub fusion_b: Mat<T>,
    /// `fused_dim × num_classes`.
    pub out_w: Mat<T>,
    pub out_b: Mat<T>,
}

impl<T: Scalar> ModelParams<T> {
    pub fn init(config: &ModelConfig, rng: &mut Rng) -> Result<Self> {
        config.validate()?;
        let mut embedding: Mat<T> =
            init_weights(config.vocab_size, config.embedding_dim, rng, InitScheme::GlorotUniform)?;
        embedding.row_mut(PAD_ID as usize).fill(T::zero());
        let stack = |rng: &mut Rng| -> Result<Vec<LstmLayerParams<T>>> {
            (0..config.num_layers)
                .map(|l| LstmLayerParams::init(config.layer_input_dim(l), config.hidden_units, rng))
                .collect()
        };
        let forward_layers = stack(rng)?;
        let backward_layers = if config.bidirectional { stack(rng)? } else { Vec::new() };
        Ok(ModelParams {
            config: config.clone(),
            embedding,
            forward_layers,
            backward_layers,
            fusion_w: init_weights(config.feature_dim(), config.fused_dim, rng, InitScheme::GlorotUniform)?,
            fusion_b: Mat::zeros(1, config.fused_dim),
            out_w: init_weights(config.fused_dim, config.num_classes, rng, InitScheme::GlorotUniform)?,
            out_b: Mat::zeros(1, config.num_classes),
        })
    }

    /// All-zero tensors with this model's shapes.
    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.config)
    }

    pub fn zeros(config: &ModelConfig) -> Self {
        let stack = || {
            (0..config.num_layers)
                .map(|l| LstmLayerParams::zeros(config.layer_input_dim(l), config.hidden_units))
                .collect::<Vec<_>>()
        };
        ModelParams {
            config: config.clone(),
            embedding: Mat::zeros(config.vocab_size, config.embedding_dim),
            forward_layers: stack(),
            backward_layers: if config.bidirectional { stack() } else { Vec::new() },
            fusion_w: Mat::zeros(config.feature_dim(), config.fused_dim),
            fusion_b: Mat::zeros(1, config.fused_dim),
            out_w: Mat::zeros(config.fused_dim, config.num_classes),
            out_b: Mat::zeros(1, config.num_classes),
        }
    }

    pub fn stack(&self, backward: bool) -> &[LstmLayerParams<T>] {
        if backward {
            &self.backward_layers
        } else {
            &self.forward_layers
        }
    }

    /// Canonical tensor names in canonical order. Checkpoints, the optimizer
    /// and gradient checks all walk tensors in this order.
    pub fn tensor_names(config: &ModelConfig) -> Vec<(String, TensorKind)> {
        let mut names = vec![("embedding".to_string(), TensorKind::Embedding)];
        let dirs: &[&str] = if config.bidirectional {
            &["fwd", "bwd"]
        } else {
            &["fwd"]
        };
        for dir in dirs {
            for l in 0..config.num_layers {
                for g in GATE_NAMES {
                    names.push((format!("{dir}.{l}.w_{g}"), TensorKind::Weight));
                }
                for g in GATE_NAMES {
                    names.push((format!("{dir}.{l}.b_{g}"), TensorKind::Bias));
                }
            }
        }
        names.push(("fusion.w".into(), TensorKind::Weight));
        names.push(("fusion.b".into(), TensorKind::Bias));
        names.push(("out.w".into(), TensorKind::Weight));
        names.push(("out.b".into(), TensorKind::Bias));
        names
    }

    /// Tensors in canonical order (names from [`Self::tensor_names`]).
    pub fn tensors(&self) -> Vec<&Mat<T>> {
        let mut out = vec![&self.embedding];
        for layer in self.forward_layers.iter().chain(&self.backward_layers) {
            out.extend(layer.weights());
            out.extend(layer.biases());
        }
        out.extend([&self.fusion_w, &self.fusion_b, &self.out_w, &self.out_b]);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Mat<T>> {
        let mut out = vec![&mut self.embedding];
        for layer in self.forward_layers.iter_mut().chain(self.backward_layers.iter_mut()) {
            out.extend([&mut layer.w_i, &mut layer.w_f, &mut layer.w_c, &mut layer.w_o]);
            out.extend([&mut layer.b_i, &mut layer.b_f, &mut layer.b_c, &mut layer.b_o]);
        }
        out.extend([&mut self.fusion_w, &mut self.fusion_b, &mut self.out_w, &mut self.out_b]);
        out
    }

    pub fn zero(&mut self) {
        for t in self.tensors_mut() {
            t.fill(T::zero());
        }
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        let layers = |ls: &[LstmLayerParams<T>]| {
            ls.iter()
                .map(|l| LstmLayerParams {
                    w_i: l.w_i.cast(),
                    w_f: l.w_f.cast(),
                    w_c: l.w_c.cast(),
                    w_o: l.w_o.cast(),
                    b_i: l.b_i.cast(),
                    b_f: l.b_f.cast(),
                    b_c: l.b_c.cast(),
                    b_o: l.b_o.cast(),
                })
                .collect()
        };
        ModelParams {
            config: self.config.clone(),
            embedding: self.embedding.cast(),
            forward_layers: layers(&self.forward_layers),
            backward_layers: layers(&self.backward_layers),
            fusion_w: self.fusion_w.cast(),
            fusion_b: self.fusion_b.cast(),
            out_w: self.out_w.cast(),
            out_b: self.out_b.cast(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(bidirectional: bool) -> ModelConfig {
        ModelConfig {
            vocab_size: 20,
            embedding_dim: 4,
            num_layers: 2,
            hidden_units: 3,
            bidirectional,
            fused_dim: 5,
            num_classes: 2,
            dropout_rate: 0.0,
            threshold: 0.5,
        }
    }

    #[test]
    fn names_match_tensors() {
        for bi in [false, true] {
            let cfg = tiny(bi);
            let p: ModelParams<f64> = ModelParams::init(&cfg, &mut Rng::new(1)).unwrap();
            let names = ModelParams::<f64>::tensor_names(&cfg);
            assert_eq!(names.len(), p.tensors().len());
            let g = p.zeros_like();
            for (a, b) in p.tensors().iter().zip(g.tensors()) {
                assert_eq!(a.shape(), b.shape());
            }
        }
    }

    #[test]
    fn init_conventions() {
        let p: ModelParams<f32> = ModelParams::init(&tiny(true), &mut Rng::new(2)).unwrap();
        assert!(p.embedding.row(0).iter().all(|&x| x == 0.0));
        for layer in p.forward_layers.iter().chain(&p.backward_layers) {
            assert!(layer.b_f.data().iter().all(|&x| x == 1.0));
            assert!(layer.b_i.data().iter().all(|&x| x == 0.0));
        }
        assert_eq!(p.fusion_w.shape(), (6, 5));
        assert_eq!(p.backward_layers[1].input_dim(), 3);
        assert_eq!(p.forward_layers[0].input_dim(), 4);
    }
}
