//! Scalar float helpers over `libm`.
//!
//! `no_std` leaves f64 without transcendentals; `libm` supplies them and is
//! bit-deterministic across platforms, which the reproducibility contract
//! (same seed ⇒ byte-identical artifacts) leans on.

pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

pub fn tanh(x: f64) -> f64 {
    libm::tanh(x)
}

pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

pub fn powi(x: f64, n: u64) -> f64 {
    libm::pow(x, n as f64)
}

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + exp(-x))
    } else {
        let e = exp(x);
        e / (1.0 + e)
    }
}

/// In-place stable softmax (shifts by the max before exponentiating).
/// The result sums to 1 up to float rounding.
pub fn softmax_in_place(xs: &mut [f64]) {
    let mut max = f64::NEG_INFINITY;
    for &x in xs.iter() {
        if x > max {
            max = x;
        }
    }
    let mut sum = 0.0;
    for x in xs.iter_mut() {
        *x = exp(*x - max);
        sum += *x;
    }
    for x in xs.iter_mut() {
        *x /= sum;
    }
}
