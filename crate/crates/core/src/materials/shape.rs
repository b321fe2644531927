//! Chitosan bending: a common swell toward a fixed angle, then relaxation
//! toward a pH-dependent equilibrium given by two split-normal bumps.

use serde::{Deserialize, Serialize};

use super::calib::{CalibrationSet, ShapeCalibration, SHAPE_PH_RANGE};
use super::{check_dt, relax, MaterialError};

/// Number of free parameters of the two-bump curve: (center, amplitude,
/// width) per bump.
pub const TWO_BUMP_PARAMS: usize = 6;

/// Two split-normal bumps evaluated at `x`, unclamped. `p` is
/// `[c1, a1, w1, c2, a2, w2]`; the acidic side of each bump has standard
/// deviation `kappa * w`.
pub fn two_bump(p: &[f64; TWO_BUMP_PARAMS], kappa: f64, x: f64) -> f64 {
    two_bump_with_grad(p, kappa, x).0
}

/// Value and analytic gradient with respect to `p`.
pub fn two_bump_with_grad(p: &[f64; TWO_BUMP_PARAMS], kappa: f64, x: f64) -> (f64, [f64; TWO_BUMP_PARAMS]) {
    let mut grad = [0.0; TWO_BUMP_PARAMS];
    let mut value = 0.0;
    for k in 0..2 {
        let (c, a, w) = (p[3 * k], p[3 * k + 1], p[3 * k + 2]);
        let s = if x < c { kappa * w } else { w };
        let z = (x - c) / s;
        let e = (-0.5 * z * z).exp();
        value += a * e;
        grad[3 * k] = a * e * z / s;
        grad[3 * k + 1] = e;
        grad[3 * k + 2] = a * e * z * z / w;
    }
    (value, grad)
}

pub fn params_of(s: &ShapeCalibration) -> [f64; TWO_BUMP_PARAMS] {
    let [b1, b2] = s.bumps;
    [b1.center, b1.amplitude, b1.width, b2.center, b2.amplitude, b2.width]
}

pub fn set_params(s: &mut ShapeCalibration, p: &[f64; TWO_BUMP_PARAMS]) {
    for k in 0..2 {
        s.bumps[k].center = p[3 * k];
        s.bumps[k].amplitude = p[3 * k + 1];
        s.bumps[k].width = p[3 * k + 2];
    }
}

fn curve(s: &ShapeCalibration, x: f64) -> f64 {
    two_bump(&params_of(s), s.acid_side_width_ratio, x)
}

/// Interior local maxima of the curve on the calibrated range, located on a
/// grid of spacing `h` and refined by golden-section search.
pub fn local_maxima(s: &ShapeCalibration, h: f64) -> Vec<f64> {
    let (lo, hi) = SHAPE_PH_RANGE;
    let n = ((hi - lo) / h).round() as usize;
    let xs: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| curve(s, x)).collect();
    let mut out = Vec::new();
    for i in 1..n {
        if ys[i] >= ys[i - 1] && ys[i] > ys[i + 1] {
            out.push(golden_max(|x| curve(s, x), xs[i - 1], xs[i + 1]));
        }
    }
    out
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    while (b - a).abs() > 1e-10 {
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
    }
    0.5 * (a + b)
}

/// Equilibrium bend angle (degrees) after long exposure to `ph`.
pub fn shape_equilibrium_angle(ph: f64, calib: &CalibrationSet) -> Result<f64, MaterialError> {
    let (lo, hi) = SHAPE_PH_RANGE;
    if !(lo..=hi).contains(&ph) {
        return Err(MaterialError::OutOfCalibration { ph, min: lo, max: hi });
    }
    Ok(curve(&calib.shape, ph).clamp(0.0, 180.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapePhase {
    CommonSwell,
    PhDependent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeState {
    /// Bend angle in degrees, 0 = flat.
    pub angle: f64,
    pub phase: ShapePhase,
    pub last_applied_ph: Option<f64>,
    pub time_in_phase: f64,
    /// Angle approached once the pH-dependent phase begins.
    pub target: f64,
}

impl Default for ShapeState {
    fn default() -> Self {
        Self::fresh()
    }
}

impl ShapeState {
    pub fn fresh() -> Self {
        Self {
            angle: 0.0,
            phase: ShapePhase::CommonSwell,
            last_applied_ph: None,
            time_in_phase: 0.0,
            target: 0.0,
        }
    }

    /// Apply a solution of pH `ph`.
    pub fn deposit(&self, ph: f64, calib: &CalibrationSet) -> Result<Self, MaterialError> {
        let eq = shape_equilibrium_angle(ph, calib)?;
        let mut next = self.clone();
        match (self.last_applied_ph, self.phase) {
            (None, _) => {
                next.phase = ShapePhase::CommonSwell;
                next.time_in_phase = 0.0;
                next.target = eq;
            }
            (Some(_), ShapePhase::CommonSwell) => next.target = eq,
            (Some(old), ShapePhase::PhDependent) => {
                let shift = calib.shape.redeposit_gain * (ph - old).abs();
                let dir = if eq > self.target {
                    1.0
                } else if eq < self.target {
                    -1.0
                } else {
                    0.0
                };
                next.target = (self.target + dir * shift).clamp(0.0, 180.0);
            }
        }
        next.last_applied_ph = Some(ph);
        Ok(next)
    }

    /// Let `dt` seconds pass with no new deposition.
    pub fn advance(&self, dt: f64, calib: &CalibrationSet) -> Result<Self, MaterialError> {
        check_dt(dt)?;
        let mut next = self.clone();
        if self.last_applied_ph.is_none() {
            return Ok(next);
        }
        let s = &calib.shape;
        let mut rest = dt;
        if next.phase == ShapePhase::CommonSwell {
            let handoff = s.handoff_factor * s.tau_common_s;
            let left = (handoff - next.time_in_phase).max(0.0);
            if rest >= left {
                next.angle = relax(next.angle, s.common_angle, left, s.tau_common_s);
                next.phase = ShapePhase::PhDependent;
                next.time_in_phase = 0.0;
                rest -= left;
            } else {
                next.angle = relax(next.angle, s.common_angle, rest, s.tau_common_s);
                next.time_in_phase += rest;
                rest = 0.0;
            }
        }
        if next.phase == ShapePhase::PhDependent && rest > 0.0 {
            next.angle = relax(next.angle, next.target, rest, s.tau_ph_s);
            next.time_in_phase += rest;
        }
        Ok(next)
    }

    /// Distance to the angle currently being approached.
    pub fn distance_to_target(&self, calib: &CalibrationSet) -> f64 {
        match (self.last_applied_ph, self.phase) {
            (None, _) => 0.0,
            (Some(_), ShapePhase::CommonSwell) => (self.angle - calib.shape.common_angle).abs(),
            (Some(_), ShapePhase::PhDependent) => (self.angle - self.target).abs(),
        }
    }
}

/// Treat `ph` as the solution present on the film: deposit when it differs
/// from the last applied pH, then advance by `dt`.
pub fn shape_step(state: &ShapeState, ph: f64, dt: f64, calib: &CalibrationSet) -> Result<ShapeState, MaterialError> {
    let s = if state.last_applied_ph == Some(ph) {
        state.clone()
    } else {
        state.deposit(ph, calib)?
    };
    s.advance(dt, calib)
}
