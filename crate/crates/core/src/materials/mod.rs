//! Time-dependent response models for the colour, odor and shape
//! primitives.
//!
//! States are plain values. `deposit` records a new solution on the film and
//! `advance` integrates with exact exponentials, so splitting an interval
//! into smaller steps gives the same result up to rounding.

mod calib;
mod color;
mod composite;
mod odor;
mod shape;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use calib::{
    Bump, CalibrationSet, ColorCalibration, ColorKnot, Formulation, OdorCalibration, ShapeCalibration,
    TauBand, SHAPE_PH_RANGE,
};
pub use color::{color_equilibrium, color_step, ColorState};
pub use composite::{
    make_composite, CompatibilityWarning, Composite, CompositeMethod, Layer, PanelRegion, PrimitiveKind,
    SuccessCriterion,
};
pub use odor::{odor_step, steady_intensity, OdorState};
pub use shape::{
    local_maxima, params_of, set_params, shape_equilibrium_angle, shape_step, two_bump, two_bump_with_grad,
    ShapePhase, ShapeState, TWO_BUMP_PARAMS,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MaterialError {
    #[error("pH {ph} is outside the calibrated range [{min}, {max}]")]
    OutOfCalibration { ph: f64, min: f64, max: f64 },
    #[error("time step must be finite and >= 0, got {0}")]
    InvalidTimeStep(f64),
    #[error("invalid calibration: {0}")]
    InvalidCalibration(String),
    #[error("invalid composite: {0}")]
    InvalidComposite(String),
}

pub(crate) fn check_dt(dt: f64) -> Result<(), MaterialError> {
    if dt >= 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(MaterialError::InvalidTimeStep(dt))
    }
}

pub(crate) fn relax(x: f64, target: f64, dt: f64, tau: f64) -> f64 {
    target + (x - target) * (-dt / tau).exp()
}

/// State of one material layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PrimitiveState {
    Color(ColorState),
    Odor(OdorState),
    Shape(ShapeState),
}

impl PrimitiveState {
    pub fn fresh(kind: PrimitiveKind, calib: &CalibrationSet) -> Self {
        match kind {
            PrimitiveKind::Color => Self::Color(ColorState::fresh(calib)),
            PrimitiveKind::Odor => Self::Odor(OdorState::fresh(calib)),
            PrimitiveKind::Shape => Self::Shape(ShapeState::fresh()),
        }
    }

    pub fn kind(&self) -> PrimitiveKind {
        match self {
            Self::Color(_) => PrimitiveKind::Color,
            Self::Odor(_) => PrimitiveKind::Odor,
            Self::Shape(_) => PrimitiveKind::Shape,
        }
    }

    pub fn deposit(&self, ph: f64, calib: &CalibrationSet) -> Result<Self, MaterialError> {
        Ok(match self {
            Self::Color(s) => Self::Color(s.deposit(ph, calib)?),
            Self::Odor(s) => Self::Odor(s.deposit(ph, calib)?),
            Self::Shape(s) => Self::Shape(s.deposit(ph, calib)?),
        })
    }

    pub fn advance(&self, dt: f64, calib: &CalibrationSet) -> Result<Self, MaterialError> {
        Ok(match self {
            Self::Color(s) => Self::Color(s.advance(dt, calib)?),
            Self::Odor(s) => Self::Odor(s.advance(dt, calib)?),
            Self::Shape(s) => Self::Shape(s.advance(dt, calib)?),
        })
    }

    pub fn last_applied_ph(&self) -> Option<f64> {
        match self {
            Self::Color(s) => s.last_applied_ph,
            Self::Odor(s) => s.last_applied_ph,
            Self::Shape(s) => s.last_applied_ph,
        }
    }
}
