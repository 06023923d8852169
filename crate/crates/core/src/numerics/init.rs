use super::mat::Mat;
use super::rng::Rng;
use super::scalar::Scalar;
use crate::error::{Error, Result};

/// Forget-gate bias at initialization.
pub const FORGET_BIAS_INIT: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitScheme {
    /// Uniform in `±sqrt(6 / (fan_in + fan_out))`, with fan-in = rows and
    /// fan-out = cols.
    GlorotUniform,
    Zeros,
    Constant(f64),
}

pub fn init_weights<T: Scalar>(rows: usize, cols: usize, rng: &mut Rng, scheme: InitScheme) -> Result<Mat<T>> {
    if rows == 0 || cols == 0 {
        return Err(Error::usage(format!("cannot initialize a {rows}x{cols} tensor")));
    }
    Ok(match scheme {
        InitScheme::Zeros => Mat::zeros(rows, cols),
        InitScheme::Constant(v) => Mat::filled(rows, cols, T::from_f64_lossy(v)),
        InitScheme::GlorotUniform => {
            let bound = (6.0 / (rows + cols) as f64).sqrt();
            let data = (0..rows * cols)
                .map(|_| T::from_f64_lossy(bound * (2.0 * rng.next_f64() - 1.0)))
                .collect();
            Mat::from_vec(rows, cols, data)?
        }
    })
}
