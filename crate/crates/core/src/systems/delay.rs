use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

pub type DelayFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A transmission delay `T(t)`, either constant or time-varying with a
/// declared derivative bound `d < 1` and range `[min, max]`.
#[derive(Clone)]
pub enum DelaySpec {
    Constant(f64),
    TimeVarying {
        func: DelayFn,
        rate_bound: f64,
        min: f64,
        max: f64,
    },
}

impl DelaySpec {
    pub fn constant(value: f64) -> Result<Self> {
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::param(format!("delay must be positive and finite, got {value}")));
        }
        Ok(DelaySpec::Constant(value))
    }

    /// Builds a time-varying delay; the declared bounds are spot-checked on a
    /// grid over `[0, probe_horizon]`.
    pub fn time_varying(
        func: impl Fn(f64) -> f64 + Send + Sync + 'static,
        rate_bound: f64,
        min: f64,
        max: f64,
        probe_horizon: f64,
    ) -> Result<Self> {
        if !(0.0..1.0).contains(&rate_bound) {
            return Err(Error::param(format!("delay derivative bound must lie in [0, 1), got {rate_bound}")));
        }
        if !(min > 0.0 && max >= min && max.is_finite()) {
            return Err(Error::param(format!("invalid delay range [{min}, {max}]")));
        }
        const PROBES: usize = 1000;
        let dt = probe_horizon.max(1.0) / PROBES as f64;
        let mut prev = func(0.0);
        for k in 0..=PROBES {
            let t = k as f64 * dt;
            let v = func(t);
            if !(v >= min * (1.0 - 1e-12) && v <= max * (1.0 + 1e-12)) {
                return Err(Error::param(format!("delay T({t}) = {v} outside declared range [{min}, {max}]")));
            }
            if k > 0 && (v - prev) / dt > rate_bound + 1e-9 {
                return Err(Error::param(format!(
                    "delay slope near t = {t} exceeds declared bound {rate_bound}"
                )));
            }
            prev = v;
        }
        Ok(DelaySpec::TimeVarying {
            func: Arc::new(func),
            rate_bound,
            min,
            max,
        })
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            DelaySpec::Constant(v) => *v,
            DelaySpec::TimeVarying { func, .. } => func(t),
        }
    }

    /// Declared bound `d` on the delay derivative; zero for constant delays.
    pub fn rate_bound(&self) -> f64 {
        match self {
            DelaySpec::Constant(_) => 0.0,
            DelaySpec::TimeVarying { rate_bound, .. } => *rate_bound,
        }
    }

    pub fn bounds(&self) -> (f64, f64) {
        match self {
            DelaySpec::Constant(v) => (*v, *v),
            DelaySpec::TimeVarying { min, max, .. } => (*min, *max),
        }
    }
}

impl fmt::Debug for DelaySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DelaySpec::Constant(v) => f.debug_tuple("Constant").field(v).finish(),
            DelaySpec::TimeVarying {
                rate_bound, min, max, ..
            } => f
                .debug_struct("TimeVarying")
                .field("rate_bound", rate_bound)
                .field("min", min)
                .field("max", max)
                .finish_non_exhaustive(),
        }
    }
}

/// Largest declared delay bound, `T_d`.
pub fn max_delay(delays: &[DelaySpec]) -> f64 {
    delays.iter().map(|d| d.bounds().1).fold(0.0, f64::max)
}

/// Largest declared derivative bound, `d`.
pub fn max_rate_bound(delays: &[DelaySpec]) -> f64 {
    delays.iter().map(DelaySpec::rate_bound).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_delay_reports_zero_rate() {
        let d = DelaySpec::constant(2.5).unwrap();
        assert_eq!(d.rate_bound(), 0.0);
        assert_eq!(d.value(17.0), 2.5);
        assert!(DelaySpec::constant(0.0).is_err());
        assert!(DelaySpec::constant(-1.0).is_err());
    }

    #[test]
    fn time_varying_delay_validates_declarations() {
        let ok = DelaySpec::time_varying(|t| 1.0 + 0.5 * (0.2 * t).sin(), 0.1, 0.5, 1.5, 50.0).unwrap();
        assert!((ok.value(0.0) - 1.0).abs() < 1e-15);
        assert_eq!(ok.rate_bound(), 0.1);
        assert!(DelaySpec::time_varying(|_| 1.0, 1.0, 0.5, 1.5, 1.0).is_err());
        assert!(DelaySpec::time_varying(|t| 1.0 + t, 0.5, 0.5, 100.0, 10.0).is_err());
        assert!(DelaySpec::time_varying(|_| 2.0, 0.5, 0.5, 1.5, 10.0).is_err());
    }
}
