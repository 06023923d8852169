use super::scalar::Scalar;
use crate::error::{Error, Result};

/// Logistic function, evaluated on the branch that cannot overflow.
#[inline]
pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

#[inline]
pub fn sigmoid_derivative<T: Scalar>(x: T) -> T {
    let s = sigmoid(x);
    s * (T::one() - s)
}

/// Derivative of the sigmoid expressed through its output `s = σ(x)`.
#[inline]
pub fn sigmoid_derivative_from_output<T: Scalar>(s: T) -> T {
    s * (T::one() - s)
}

#[inline]
pub fn tanh<T: Scalar>(x: T) -> T {
    x.tanh()
}

#[inline]
pub fn tanh_derivative<T: Scalar>(x: T) -> T {
    let t = x.tanh();
    T::one() - t * t
}

#[inline]
pub fn tanh_derivative_from_output<T: Scalar>(t: T) -> T {
    T::one() - t * t
}

/// Softmax with max-subtraction.
pub fn softmax<T: Scalar>(logits: &[T]) -> Result<Vec<T>> {
    if logits.is_empty() {
        return Err(Error::usage("softmax of an empty logit vector"));
    }
    let mut out = logits.to_vec();
    softmax_in_place(&mut out);
    Ok(out)
}

/// In-place softmax over a non-empty slice.
pub fn softmax_in_place<T: Scalar>(values: &mut [T]) {
    let max = values.iter().copied().fold(T::neg_infinity(), T::max);
    let mut total = T::zero();
    for v in values.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    for v in values.iter_mut() {
        *v /= total;
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax<T: Scalar>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
