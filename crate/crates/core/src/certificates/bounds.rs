use crate::error::{Error, Result};

/// Safety factor applied to sampled estimates of `a` before they feed a gain
/// bound; sampling can only under-estimate a supremum.
pub const DEFAULT_A_SAFETY: f64 = 1.2;

fn check_positive(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::param("weight vector is empty"));
    }
    if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(Error::param(format!("weights must be element-wise positive, found {w}")));
    }
    Ok(())
}

/// Uniform gain level above which state feedback certifies the sampled domain:
/// `max_j (a r / (c (1 - d))) (1 + sum_i v_i / v_j)`.
pub fn required_gain_bound(a: f64, r: usize, d: f64, c: f64, v: &[f64]) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::param(format!("decay margin c must be positive, got {c}")));
    }
    if !(0.0..1.0).contains(&d) {
        return Err(Error::param(format!("delay derivative bound must lie in [0, 1), got {d}")));
    }
    if !(a >= 0.0 && a.is_finite()) {
        return Err(Error::param(format!("a must be finite and >= 0, got {a}")));
    }
    check_positive(v)?;
    let total: f64 = v.iter().sum();
    let scale = a * r as f64 / (c * (1.0 - d));
    Ok(v.iter().map(|vj| scale * (1.0 + total / vj)).fold(0.0, f64::max))
}

/// Output-feedback counterpart: `max_i (a r / c) (1 + sum_j w_j / w_i)`.
pub fn required_gain_bound_dual(a: f64, r: usize, c: f64, w: &[f64]) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::param(format!("decay margin c must be positive, got {c}")));
    }
    if !(a >= 0.0 && a.is_finite()) {
        return Err(Error::param(format!("a must be finite and >= 0, got {a}")));
    }
    check_positive(w)?;
    let total: f64 = w.iter().sum();
    let scale = a * r as f64 / c;
    Ok(w.iter().map(|wi| scale * (1.0 + total / wi)).fold(0.0, f64::max))
}
