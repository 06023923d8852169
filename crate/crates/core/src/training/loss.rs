use crate::error::{Error, Result};
use crate::network::{ModelParams, TensorKind};
use crate::numerics::{lit, Mat, Scalar};

/// Probabilities below this are clamped before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct LossOutput<T> {
    /// Mean cross-entropy plus the L2 penalty.
    pub loss: T,
    /// Mean cross-entropy alone.
    pub data_loss: T,
    /// Gradient of the data term with respect to the logits, `(Y - onehot(T)) / N`.
    pub d_logits: Mat<T>,
    /// How many true-class probabilities had to be clamped.
    pub clamped: usize,
}

/// `λ · Σ w²` over the regularized tensors: every weight matrix, but not the
/// embedding table and not the biases.
pub fn l2_penalty<T: Scalar>(params: &ModelParams<T>, lambda: f64) -> T {
    if lambda == 0.0 {
        return T::zero();
    }
    let names = ModelParams::<T>::tensor_names(&params.config);
    let total: T = params
        .tensors()
        .into_iter()
        .zip(&names)
        .filter(|(_, (_, kind))| *kind == TensorKind::Weight)
        .map(|(t, _)| t.sum_squares())
        .sum();
    lit::<T>(lambda) * total
}

/// Adds `2λ·w` to the gradient of every regularized tensor.
pub fn add_l2_gradient<T: Scalar>(params: &ModelParams<T>, lambda: f64, grads: &mut ModelParams<T>) {
    if lambda == 0.0 {
        return;
    }
    let names = ModelParams::<T>::tensor_names(&params.config);
    let factor = lit::<T>(2.0 * lambda);
    for ((p, g), (_, kind)) in params.tensors().into_iter().zip(grads.tensors_mut()).zip(&names) {
        if *kind == TensorKind::Weight {
            for (gv, &pv) in g.data_mut().iter_mut().zip(p.data()) {
                *gv += factor * pv;
            }
        }
    }
}

/// Batch loss: mean categorical cross-entropy of `probs` against `labels`
/// plus the L2 penalty of `params`.
pub fn compute_loss<T: Scalar>(
    probs: &Mat<T>,
    labels: &[usize],
    params: &ModelParams<T>,
    lambda: f64,
) -> Result<LossOutput<T>> {
    let n = probs.rows();
    if n == 0 || labels.len() != n {
        return Err(Error::Shape {
            op: "compute_loss",
            left: probs.shape(),
            right: (labels.len(), 1),
        });
    }
    let classes = probs.cols();
    let inv_n = T::one() / lit::<T>(n as f64);
    let floor = lit::<T>(PROB_FLOOR);
    let mut data_loss = T::zero();
    let mut clamped = 0;
    let mut d_logits = probs.clone();
    for (r, &label) in labels.iter().enumerate() {
        if label >= classes {
            return Err(Error::data(format!(
                "label {label} of sample {r} is not below {classes}"
            )));
        }
        let p = probs.get(r, label);
        if p < floor {
            clamped += 1;
        }
        data_loss -= p.max(floor).ln();
        let row = d_logits.row_mut(r);
        row[label] -= T::one();
        for v in row.iter_mut() {
            *v *= inv_n;
        }
    }
    if cfg!(debug_assertions) && clamped > 0 {
        eprintln!("compute_loss: clamped {clamped} true-class probabilities to {PROB_FLOOR}");
    }
    data_loss *= inv_n;
    Ok(LossOutput {
        loss: data_loss + l2_penalty(params, lambda),
        data_loss,
        d_logits,
        clamped,
    })
}
