//! Analytic gradients against central finite differences, in f64.

use stegodetect::network::{Mode, ModelConfig, ModelParams};
use stegodetect::numerics::Rng;
use stegodetect::training::{add_l2_gradient, compute_loss};

const STEP: f64 = 1e-5;
const TOLERANCE: f64 = 1e-4;
// Gradients smaller than this are compared on an absolute scale.
const FLOOR: f64 = 1e-6;

pub fn config(layers: usize, bidirectional: bool, classes: usize) -> ModelConfig {
    ModelConfig {
        vocab_size: 20,
        embedding_dim: 4,
        num_layers: layers,
        hidden_units: 3,
        bidirectional,
        fused_dim: 5,
        num_classes: classes,
        dropout_rate: 0.0,
        threshold: 0.5,
    }
}

pub fn batch() -> (Vec<Vec<u32>>, Vec<usize>) {
    let seqs = vec![
        vec![3, 7, 2, 19, 5],
        vec![4, 4, 0, 0, 0],
        vec![11, 0, 0, 0, 0],
        vec![8, 16, 9, 0, 0],
    ];
    (seqs, vec![1, 0, 1, 0])
}

fn loss_of(params: &ModelParams<f64>, seqs: &[&[u32]], labels: &[usize], lambda: f64) -> f64 {
    let trace = params.forward(seqs, Mode::Infer, None).unwrap();
    compute_loss(&trace.probs, labels, params, lambda).unwrap().loss
}

/// Compares every parameter's gradient; returns the worst relative error,
/// or a description of the first entry over tolerance.
pub fn check(cfg: ModelConfig, seed: u64, lambda: f64) -> Result<f64, String> {
    let mut params: ModelParams<f64> = ModelParams::init(&cfg, &mut Rng::new(seed)).unwrap();
    // Nonzero biases exercise every bias path.
    let mut rng = Rng::new(seed ^ 0xb1a5);
    for t in params.tensors_mut() {
        if t.rows() == 1 {
            for v in t.data_mut() {
                *v += rng.uniform(-0.5, 0.5);
            }
        }
    }
    let (owned, mut labels) = batch();
    let seqs: Vec<&[u32]> = owned.iter().map(|s| s.as_slice()).collect();
    for l in labels.iter_mut() {
        *l %= cfg.num_classes;
    }

    let trace = params.forward(&seqs, Mode::Train, None).unwrap();
    let out = compute_loss(&trace.probs, &labels, &params, lambda).unwrap();
    let mut grads = params.zeros_like();
    params.backward(&trace, &out.d_logits, &mut grads).unwrap();
    add_l2_gradient(&params, lambda, &mut grads);

    let names = ModelParams::<f64>::tensor_names(&cfg);
    let analytic: Vec<Vec<f64>> = grads.tensors().iter().map(|t| t.data().to_vec()).collect();
    let mut worst = (0.0f64, String::new());
    for (ti, (name, _)) in names.iter().enumerate() {
        for (k, &a) in analytic[ti].iter().enumerate() {
            let orig = params.tensors()[ti].data()[k];
            params.tensors_mut()[ti].data_mut()[k] = orig + STEP;
            let up = loss_of(&params, &seqs, &labels, lambda);
            params.tensors_mut()[ti].data_mut()[k] = orig - STEP;
            let down = loss_of(&params, &seqs, &labels, lambda);
            params.tensors_mut()[ti].data_mut()[k] = orig;

            let numeric = (up - down) / (2.0 * STEP);
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(FLOOR);
            if rel > worst.0 {
                worst = (rel, format!("{name}[{k}]: analytic {a:e}, numeric {numeric:e}"));
            }
            if rel >= TOLERANCE {
                return Err(format!(
                    "{name}[{k}] layers={} bi={}: analytic {a:e} vs numeric {numeric:e} (rel {rel:e})",
                    cfg.num_layers, cfg.bidirectional
                ));
            }
        }
    }
    eprintln!(
        "layers={} bi={} classes={}: worst relative error {:.2e} at {}",
        cfg.num_layers, cfg.bidirectional, cfg.num_classes, worst.0, worst.1
    );
    Ok(worst.0)
}
