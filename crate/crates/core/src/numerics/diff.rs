use crate::error::{Error, Result};
use crate::numerics::linalg::Vector;

/// Central-difference estimate of the first or second derivative of `f` at `t`.
pub fn finite_difference(f: impl Fn(f64) -> Vector, t: f64, order: u8, h: f64) -> Vector {
    try_finite_difference(|s| Ok(f(s)), t, order, h)
        .expect("infallible callback with a valid order")
}

/// Same as [`finite_difference`] for callbacks that can fail.
pub fn try_finite_difference(
    f: impl Fn(f64) -> Result<Vector>,
    t: f64,
    order: u8,
    h: f64,
) -> Result<Vector> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {h}")));
    }
    match order {
        1 => {
            let fp = f(t + h)?;
            let fm = f(t - h)?;
            Ok(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect())
        }
        2 => {
            let fp = f(t + h)?;
            let f0 = f(t)?;
            let fm = f(t - h)?;
            Ok(fp
                .iter()
                .zip(&f0)
                .zip(&fm)
                .map(|((a, b), c)| (a - 2.0 * b + c) / (h * h))
                .collect())
        }
        _ => Err(Error::InvalidArgument(format!(
            "finite differences support orders 1 and 2, got {order}"
        ))),
    }
}
