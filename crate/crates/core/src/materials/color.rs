//! Anthocyanin colour: piecewise-linear Lab equilibrium with two-mode
//! exponential relaxation and irreversible acid/base locks.

use serde::{Deserialize, Serialize};

use super::calib::CalibrationSet;
use super::{check_dt, MaterialError};
use crate::color::Lab;

/// Equilibrium colour at `ph`, interpolated linearly between knots.
pub fn color_equilibrium(ph: f64, calib: &CalibrationSet) -> Result<Lab, MaterialError> {
    let knots = &calib.color.knots;
    let (lo, hi) = calib.color_range();
    if !(lo..=hi).contains(&ph) {
        return Err(MaterialError::OutOfCalibration { ph, min: lo, max: hi });
    }
    let i = knots.partition_point(|k| k.ph <= ph);
    if i == knots.len() {
        let k = &knots[i - 1];
        return Ok(Lab::new(k.l, k.a, k.b));
    }
    let (k0, k1) = (&knots[i - 1], &knots[i]);
    let t = (ph - k0.ph) / (k1.ph - k0.ph);
    Ok(Lab::new(k0.l, k0.a, k0.b).lerp(&Lab::new(k1.l, k1.a, k1.b), t))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorState {
    pub current: Lab,
    pub target: Lab,
    pub acid_locked: bool,
    pub base_locked: bool,
    pub elapsed_since_activation: f64,
    pub last_applied_ph: Option<f64>,
    /// Displacement `current - target` at the last deposition.
    pub displacement: Lab,
    /// Remaining weight of the fast and slow relaxation modes.
    pub fast_weight: f64,
    pub slow_weight: f64,
    pub tau_slow: f64,
}

impl ColorState {
    /// Untreated film at the calibration's native pH.
    pub fn fresh(calib: &CalibrationSet) -> Self {
        let c = color_equilibrium(calib.color.native_ph, calib).expect("native pH inside knot range");
        Self {
            current: c,
            target: c,
            acid_locked: false,
            base_locked: false,
            elapsed_since_activation: 0.0,
            last_applied_ph: None,
            displacement: Lab::default(),
            fast_weight: 0.0,
            slow_weight: 0.0,
            tau_slow: calib.color_tau(calib.color.native_ph),
        }
    }

    /// pH actually seen by the pigment once lock clamping is applied.
    pub fn effective_ph(&self, ph: f64, calib: &CalibrationSet) -> f64 {
        if self.acid_locked {
            ph.min(calib.color.acid_lock_ph)
        } else if self.base_locked {
            ph.max(calib.color.base_lock_ph)
        } else {
            ph
        }
    }

    pub fn deposit(&self, ph: f64, calib: &CalibrationSet) -> Result<Self, MaterialError> {
        let cc = &calib.color;
        let mut next = self.clone();
        if !next.acid_locked && !next.base_locked {
            if ph <= cc.acid_lock_ph {
                next.acid_locked = true;
            } else if ph >= cc.base_lock_ph {
                next.base_locked = true;
            }
        }
        let eff = next.effective_ph(ph, calib);
        next.target = color_equilibrium(eff, calib)?;
        next.displacement = next.current.sub(&next.target);
        next.fast_weight = cc.fast_fraction;
        next.slow_weight = 1.0 - cc.fast_fraction;
        next.tau_slow = calib.color_tau(eff);
        next.elapsed_since_activation = 0.0;
        next.last_applied_ph = Some(ph);
        Ok(next)
    }

    pub fn advance(&self, dt: f64, calib: &CalibrationSet) -> Result<Self, MaterialError> {
        check_dt(dt)?;
        let mut next = self.clone();
        next.fast_weight *= (-dt / calib.color.fast_tau_s).exp();
        next.slow_weight *= (-dt / next.tau_slow).exp();
        next.current = next
            .target
            .add_scaled(&next.displacement, next.fast_weight + next.slow_weight);
        next.elapsed_since_activation += dt;
        Ok(next)
    }

    pub fn delta_e_to_target(&self) -> f64 {
        self.current.delta_e(&self.target)
    }
}

/// Treat `ph` as the solution present on the film: deposit when it differs
/// from the last applied pH, then advance by `dt`.
pub fn color_step(state: &ColorState, ph: f64, dt: f64, calib: &CalibrationSet) -> Result<ColorState, MaterialError> {
    let s = if state.last_applied_ph == Some(ph) {
        state.clone()
    } else {
        state.deposit(ph, calib)?
    };
    s.advance(dt, calib)
}
