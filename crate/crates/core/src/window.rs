//! Time discretization and the landmark, damped and sliding window models.
//!
//! Time is split into steps of `delta_t` seconds. Step boundaries sit on
//! multiples of `delta_t`, so the step ending at `T` covers `(T - delta_t, T]`.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowModel {
    #[default]
    Sliding,
    Landmark,
    Damped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowConfig<T> {
    /// Step length in seconds.
    pub delta_t: i64,
    /// Window length in steps.
    pub ell: u32,
    /// Decay rate of the damped model. Defaults to 1 per second of age,
    /// which is an arbitrary choice.
    pub lambda: T,
    pub model: WindowModel,
}

impl<T: Scalar> Default for WindowConfig<T> {
    fn default() -> Self {
        Self {
            delta_t: 3600,
            ell: 6,
            lambda: T::one(),
            model: WindowModel::Sliding,
        }
    }
}

impl<T: Scalar> WindowConfig<T> {
    pub fn sliding(delta_t: i64, ell: u32) -> Self {
        Self {
            delta_t,
            ell,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.delta_t <= 0 {
            return Err(Error::Config("delta_t must be positive".into()));
        }
        if self.ell == 0 {
            return Err(Error::Config("ell must be at least 1".into()));
        }
        if self.model == WindowModel::Damped && self.lambda.partial_cmp(&T::zero()) != Some(Ordering::Greater) {
            return Err(Error::Config("lambda must be positive for the damped model".into()));
        }
        Ok(())
    }

    /// Window duration `ell * delta_t` in seconds.
    pub fn span(&self) -> i64 {
        self.delta_t * i64::from(self.ell)
    }

    /// Data with `timestamp <= cutoff` is outside the window ending at `now`.
    /// `None` for the models that never drop data.
    pub fn expiry_cutoff(&self, now: i64) -> Option<i64> {
        match self.model {
            WindowModel::Sliding => Some(now - self.span()),
            WindowModel::Landmark | WindowModel::Damped => None,
        }
    }
}

/// `(lower_exclusive, upper_inclusive)` bounds of the window ending at `now`.
/// The landmark and damped models keep everything since time 0.
pub fn window_interval<T: Scalar>(now: i64, cfg: &WindowConfig<T>) -> (i64, i64) {
    match cfg.model {
        WindowModel::Sliding => (now - cfg.span(), now),
        WindowModel::Landmark | WindowModel::Damped => (0, now),
    }
}

/// Damped-model weight `2^(-lambda (now - t))`.
pub fn damped_weight<T: Scalar>(t: i64, now: i64, lambda: T) -> Result<T> {
    if t > now {
        return Err(Error::Contract(format!("timestamp {t} lies after {now}")));
    }
    if lambda.partial_cmp(&T::zero()) != Some(Ordering::Greater) {
        return Err(Error::Contract("lambda must be positive".into()));
    }
    let age = T::from_i64(now - t).expect("age representable");
    Ok(T::lit(2.0).powf(-lambda * age))
}

/// The next step end.
pub fn advance<T: Scalar>(now: i64, cfg: &WindowConfig<T>) -> i64 {
    now + cfg.delta_t
}

/// End of the step containing `ts`: the smallest multiple of `delta_t` that
/// is `>= ts`.
pub fn step_end(ts: i64, delta_t: i64) -> i64 {
    ts.div_euclid(delta_t) * delta_t + if ts.rem_euclid(delta_t) == 0 { 0 } else { delta_t }
}
