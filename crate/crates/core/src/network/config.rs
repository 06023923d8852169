use crate::error::{Error, Result};

/// Architecture and decision settings of a detector.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub embedding_dim: usize,
    pub num_layers: usize,
    /// Hidden units per layer (per direction when bidirectional).
    pub hidden_units: usize,
    pub bidirectional: bool,
    pub fused_dim: usize,
    pub num_classes: usize,
    pub dropout_rate: f64,
    pub threshold: f64,
}

pub const DEFAULT_EMBEDDING_DIM: usize = 256;
pub const DEFAULT_FUSED_DIM: usize = 128;
pub const DEFAULT_DROPOUT: f64 = 0.5;
pub const DEFAULT_THRESHOLD: f64 = 0.5;

impl ModelConfig {
    /// Unidirectional detector: 3 layers of 200 units.
    pub fn ts_rnn(vocab_size: usize, num_classes: usize) -> Self {
        ModelConfig {
            vocab_size,
            embedding_dim: DEFAULT_EMBEDDING_DIM,
            num_layers: 3,
            hidden_units: 200,
            bidirectional: false,
            fused_dim: DEFAULT_FUSED_DIM,
            num_classes,
            dropout_rate: DEFAULT_DROPOUT,
            threshold: DEFAULT_THRESHOLD,
        }
    }

    /// Bidirectional detector: 2 layers of 100 units per direction.
    pub fn ts_birnn(vocab_size: usize, num_classes: usize) -> Self {
        ModelConfig {
            num_layers: 2,
            hidden_units: 100,
            bidirectional: true,
            ..Self::ts_rnn(vocab_size, num_classes)
        }
    }

    pub fn directions(&self) -> usize {
        if self.bidirectional {
            2
        } else {
            1
        }
    }

    /// Width of the spliced sentence feature.
    pub fn feature_dim(&self) -> usize {
        self.hidden_units * self.directions()
    }

    pub fn layer_input_dim(&self, layer: usize) -> usize {
        if layer == 0 {
            self.embedding_dim
        } else {
            self.hidden_units
        }
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("vocab_size", self.vocab_size),
            ("embedding_dim", self.embedding_dim),
            ("num_layers", self.num_layers),
            ("hidden_units", self.hidden_units),
            ("fused_dim", self.fused_dim),
            ("num_classes", self.num_classes),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::usage(format!("{name} must be at least 1")));
            }
        }
        if self.num_classes < 2 {
            return Err(Error::usage("num_classes must be at least 2"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::usage(format!(
                "dropout_rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::usage(format!("threshold {} outside (0, 1)", self.threshold)));
        }
        Ok(())
    }
}
