use crate::error::{Error, Result};
use crate::network::ModelParams;
use crate::numerics::{lit, Mat, Scalar};

/// Adam moments for every tensor of a model, in canonical tensor order.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    pub first_moment: Vec<Mat<T>>,
    pub second_moment: Vec<Mat<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &ModelParams<T>) -> Self {
        let zeros: Vec<Mat<T>> = params
            .tensors()
            .iter()
            .map(|t| Mat::zeros(t.rows(), t.cols()))
            .collect();
        AdamState {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first_moment: zeros.clone(),
            second_moment: zeros,
        }
    }
}

/// One bias-corrected Adam update. Fails without touching anything if a
/// gradient holds a NaN or infinity, naming the tensor.
pub fn adam_step<T: Scalar>(
    params: &mut ModelParams<T>,
    grads: &ModelParams<T>,
    state: &mut AdamState<T>,
    learning_rate: f64,
) -> Result<()> {
    let names = ModelParams::<T>::tensor_names(&params.config);
    for (g, (name, _)) in grads.tensors().iter().zip(&names) {
        if !g.is_finite() {
            return Err(Error::Divergence(format!("gradient of {name}")));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let step_size = lit::<T>(learning_rate / (1.0 - b1.powi(t)));
    let v_correction = lit::<T>(1.0 / (1.0 - b2.powi(t)));
    let (b1, b2, eps) = (lit::<T>(b1), lit::<T>(b2), lit::<T>(state.epsilon));
    let one = T::one();

    let tensors = params.tensors_mut();
    for (((p, g), m), v) in tensors
        .into_iter()
        .zip(grads.tensors())
        .zip(state.first_moment.iter_mut())
        .zip(state.second_moment.iter_mut())
    {
        for (((pv, &gv), mv), vv) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut().iter_mut())
            .zip(v.data_mut().iter_mut())
        {
            *mv = b1 * *mv + (one - b1) * gv;
            *vv = b2 * *vv + (one - b2) * gv * gv;
            *pv -= step_size * *mv / ((*vv * v_correction).sqrt() + eps);
        }
    }
    Ok(())
}
