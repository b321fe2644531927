//! Vanillin odor: emission from the protonated phenol, delayed release
//! after wetting, evaporative depletion and irreversible alkaline suppression.

use serde::{Deserialize, Serialize};

use super::calib::{CalibrationSet, OdorCalibration};
use super::{check_dt, MaterialError};
use crate::chemistry::protonation_fraction;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdorState {
    /// Fraction of volatile vanillin left, in `[0, 1]`.
    pub reservoir: f64,
    pub intensity: f64,
    pub suppressed: bool,
    pub last_applied_ph: Option<f64>,
    /// Seconds since the film was first wetted by a non-suppressing solution.
    pub release_time: Option<f64>,
    /// Seconds into the suppression transition, once started.
    pub suppression_elapsed: Option<f64>,
    pub faint_start: f64,
}

/// Emission level once release is complete, before depletion.
pub fn steady_intensity(ph: f64, reservoir: f64, calib: &CalibrationSet) -> f64 {
    let o = &calib.odor;
    o.i_max * protonation_fraction(ph, o.pka_eff) * reservoir
}

/// Release ramp in `[0, 1]` at `t` seconds after wetting.
fn release(o: &OdorCalibration, t: f64) -> f64 {
    if t <= o.release_delay_s {
        0.0
    } else {
        -(-(t - o.release_delay_s) / o.onset_tau_s).exp_m1()
    }
}

/// Integral of [`release`] from 0 to `t`.
fn release_integral(o: &OdorCalibration, t: f64) -> f64 {
    if t <= o.release_delay_s {
        0.0
    } else {
        let u = t - o.release_delay_s;
        u + o.onset_tau_s * (-u / o.onset_tau_s).exp_m1()
    }
}

impl OdorState {
    pub fn fresh(calib: &CalibrationSet) -> Self {
        Self {
            reservoir: calib.odor.reservoir0,
            intensity: 0.0,
            suppressed: false,
            last_applied_ph: None,
            release_time: None,
            suppression_elapsed: None,
            faint_start: 0.0,
        }
    }

    /// True once suppression has started, including the faint transition.
    pub fn is_suppressing(&self) -> bool {
        self.suppressed || self.suppression_elapsed.is_some()
    }

    pub fn perceptible(&self, calib: &CalibrationSet) -> bool {
        self.intensity > calib.odor.perception_threshold
    }

    fn emitting_intensity(&self, calib: &CalibrationSet) -> f64 {
        match (self.last_applied_ph, self.release_time) {
            (Some(ph), Some(t)) => steady_intensity(ph, self.reservoir, calib) * release(&calib.odor, t),
            _ => 0.0,
        }
    }

    pub fn deposit(&self, ph: f64, calib: &CalibrationSet) -> Result<Self, MaterialError> {
        let o = &calib.odor;
        let mut next = self.clone();
        next.last_applied_ph = Some(ph);
        if self.is_suppressing() {
            return Ok(next);
        }
        if ph >= o.suppress_ph {
            next.faint_start = self.intensity.max(o.faint_level * o.i_max * self.reservoir);
            next.suppression_elapsed = Some(0.0);
            next.intensity = next.faint_start;
        } else {
            next.release_time.get_or_insert(0.0);
            next.intensity = next.emitting_intensity(calib);
        }
        Ok(next)
    }

    pub fn advance(&self, dt: f64, calib: &CalibrationSet) -> Result<Self, MaterialError> {
        check_dt(dt)?;
        let o = &calib.odor;
        let mut next = self.clone();
        if next.suppressed {
            next.intensity = 0.0;
            return Ok(next);
        }
        if let Some(e) = next.suppression_elapsed {
            let e = e + dt;
            next.suppression_elapsed = Some(e);
            if e >= o.suppression_s {
                next.suppressed = true;
                next.intensity = 0.0;
            } else {
                next.intensity = next.faint_start * (-e / o.faint_tau_s).exp();
            }
            return Ok(next);
        }
        if let (Some(ph), Some(t0)) = (next.last_applied_ph, next.release_time) {
            let t1 = t0 + dt;
            let f = protonation_fraction(ph, o.pka_eff);
            let emitted = release_integral(o, t1) - release_integral(o, t0);
            next.reservoir *= (-o.release_rate * f * emitted).exp();
            next.release_time = Some(t1);
            next.intensity = next.emitting_intensity(calib);
        }
        Ok(next)
    }
}

/// Treat `ph` as the solution present on the film: deposit when it differs
/// from the last applied pH, then advance by `dt`.
pub fn odor_step(state: &OdorState, ph: f64, dt: f64, calib: &CalibrationSet) -> Result<OdorState, MaterialError> {
    let s = if state.last_applied_ph == Some(ph) {
        state.clone()
    } else {
        state.deposit(ph, calib)?
    };
    s.advance(dt, calib)
}
