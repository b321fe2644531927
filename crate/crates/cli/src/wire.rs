//! JSON bodies exchanged with the local service.
//!
//! Request bodies reuse the field names of scenario files: a deposit body
//! has the same `mode`, `channel` and `droplets` keys as a `[[events]]`
//! entry, and frames and scene descriptions are the library types
//! serialised as-is.

use phreact_core::controller::{DepositionMode, Droplet, TraceIteration, Targets};
use phreact_core::scene::{Frame, SceneDescription};
use serde::{Deserialize, Serialize};

/// Header carrying the scene clock (seconds) on every response.
pub const CLOCK_HEADER: &str = "x-scene-clock";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorDetail {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub details: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub clock: f64,
    pub error: ErrorDetail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetpointRequest {
    pub target: f64,
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub sensor_noise_sigma: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub max_iterations: Option<usize>,
}

/// One `iteration` event of the setpoint stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationEvent {
    pub clock: f64,
    #[serde(flatten)]
    pub iteration: TraceIteration,
}

/// Final `done` event of the setpoint stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetpointSummary {
    pub clock: f64,
    pub setpoint: f64,
    pub tolerance: f64,
    pub converged: bool,
    pub iterations: usize,
    pub final_ratio: f64,
    pub final_ph: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DepositRequest {
    pub mode: DepositionMode,
    #[serde(default)]
    pub channel: Option<String>,
    #[serde(default)]
    pub droplets: Option<Vec<Droplet>>,
    /// Deposit the last batch even if its trace did not converge.
    #[serde(default)]
    pub force: bool,
}

impl DepositRequest {
    pub fn targets(&self) -> Result<Targets, String> {
        match (self.mode, &self.channel, &self.droplets) {
            (DepositionMode::Global, None, None) => Ok(Targets::Global),
            (DepositionMode::Local, Some(c), None) => Ok(Targets::Local { channel: c.clone() }),
            (DepositionMode::Discrete, None, Some(d)) => Ok(Targets::Discrete { droplets: d.clone() }),
            (DepositionMode::Global, ..) => Err("global deposition takes no channel or droplets".into()),
            (DepositionMode::Local, ..) => Err("local deposition takes exactly a `channel`".into()),
            (DepositionMode::Discrete, ..) => Err("discrete deposition takes exactly `droplets`".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepositResponse {
    pub clock: f64,
    /// Scene time at which the deposit fires (the start of the next step).
    pub event_time: f64,
    pub mode: DepositionMode,
    pub forced: bool,
    pub pending_events: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepRequest {
    #[serde(default)]
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameResponse {
    pub clock: f64,
    pub frame: Frame,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneResponse {
    pub clock: f64,
    pub scene: SceneDescription,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deposit_body_matches_event_keys() {
        let r: DepositRequest =
            serde_json::from_str(r#"{"mode":"discrete","droplets":[{"x":1,"y":2}]}"#).unwrap();
        assert_eq!(
            r.targets().unwrap(),
            Targets::Discrete {
                droplets: vec![Droplet { x: 1, y: 2, volume_ul: 0.75 }]
            }
        );
        let r: DepositRequest = serde_json::from_str(r#"{"mode":"global","channel":"c"}"#).unwrap();
        assert!(r.targets().is_err());
        assert!(serde_json::from_str::<DepositRequest>(r#"{"mode":"global","extra":1}"#).is_err());
    }

    #[test]
    fn iteration_event_is_flat() {
        let e = IterationEvent {
            clock: 1.5,
            iteration: TraceIteration {
                iteration: 3,
                pump_ratio: 0.25,
                true_ph: 4.0,
                measured_ph: 4.1,
            },
        };
        let v: serde_json::Value = serde_json::to_value(&e).unwrap();
        assert_eq!(v["iteration"], 3);
        assert_eq!(v["clock"], 1.5);
    }
}
