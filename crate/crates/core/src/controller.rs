//! Closed-loop two-reservoir mixer.
//!
//! Each iteration the pumps run at base fraction `r`, the mixer output is
//! read by a pH sensor with additive Gaussian noise and a lag of
//! `sensor_lag` iterations, and the controller updates `r`.
//!
//! The search runs in logit space, `u = log10(r / (1 - r))`, because the
//! titration curve of a buffered acid against a dilute base is extremely
//! steep near `r = 1`. `u` is bisected on `[-12, 12]`; the ends map to the
//! pure reservoirs. A reading only counts once it reflects the current
//! ratio. A single out-of-tolerance reading at a ratio that already produced
//! an in-tolerance one is re-read before the bracket moves. If the bracket
//! collapses without convergence, a noisy reading has excluded the root and
//! the bracket is re-opened by `ratio_gain` decades around the current point.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chemistry::{equilibrium_ph, mix, ChemistryError, PhValue, Solution, DEFAULT_PH_TOL};

const U_LIMIT: f64 = 12.0;
/// Bracket width (logit decades) treated as collapsed.
const COLLAPSED_WIDTH: f64 = 1e-3;
/// Default droplet volume for discrete activation, microlitres.
pub const DEFAULT_DROPLET_UL: f64 = 0.75;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControllerError {
    #[error(transparent)]
    Chemistry(#[from] ChemistryError),
    #[error("invalid controller configuration: {0}")]
    Config(String),
    #[error("trace did not converge; pass force to deposit anyway")]
    NotConverged,
    #[error("invalid deposition target: {0}")]
    Target(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerConfig {
    pub setpoint: PhValue,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub sensor_noise_sigma: f64,
    pub sensor_lag: usize,
    /// Half-width, in logit decades, of the bracket re-opened after a
    /// contradiction.
    pub ratio_gain: f64,
    pub rng_seed: u64,
    /// Volume mixed per iteration and dispensed on deposit, litres.
    pub batch_volume_l: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            setpoint: PhValue::NEUTRAL,
            tolerance: 0.1,
            max_iterations: 50,
            sensor_noise_sigma: 0.05,
            sensor_lag: 1,
            ratio_gain: 0.5,
            rng_seed: 0,
            batch_volume_l: 0.01,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<(), ControllerError> {
        let bad = |m: String| Err(ControllerError::Config(m));
        if !(self.tolerance > 0.0) {
            return bad(format!("tolerance must be > 0, got {}", self.tolerance));
        }
        if self.max_iterations < 1 {
            return bad("max_iterations must be >= 1".into());
        }
        if !(self.sensor_noise_sigma >= 0.0 && self.sensor_noise_sigma.is_finite()) {
            return bad(format!("sensor noise sigma must be >= 0, got {}", self.sensor_noise_sigma));
        }
        if !(self.ratio_gain > 0.0) {
            return bad(format!("ratio_gain must be > 0, got {}", self.ratio_gain));
        }
        if !(self.batch_volume_l > 0.0) {
            return bad(format!("batch volume must be > 0, got {}", self.batch_volume_l));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceIteration {
    pub iteration: usize,
    /// Fraction of the batch drawn from the base reservoir.
    pub pump_ratio: f64,
    pub true_ph: f64,
    pub measured_ph: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerTrace {
    pub setpoint: PhValue,
    pub tolerance: f64,
    pub iterations: Vec<TraceIteration>,
    pub converged: bool,
    pub final_solution: Solution,
}

impl ControllerTrace {
    pub fn final_ratio(&self) -> f64 {
        self.iterations.last().map_or(0.0, |i| i.pump_ratio)
    }

    pub fn final_true_ph(&self) -> f64 {
        self.iterations.last().map_or(f64::NAN, |i| i.true_ph)
    }
}

fn ratio_of(u: f64) -> f64 {
    if u <= -U_LIMIT {
        0.0
    } else if u >= U_LIMIT {
        1.0
    } else {
        1.0 / (1.0 + 10f64.powf(-u))
    }
}

fn batch(acid: &Solution, base: &Solution, r: f64, volume: f64) -> Result<Solution, ChemistryError> {
    mix(acid, (1.0 - r) * volume, base, r * volume)
}

/// Run the loop until the setpoint is held or the iteration budget is spent.
pub fn run_to_setpoint(
    config: &ControllerConfig,
    acid: &Solution,
    base: &Solution,
) -> Result<ControllerTrace, ControllerError> {
    config.validate()?;
    let ph_acid = equilibrium_ph(acid, DEFAULT_PH_TOL)?.value();
    let ph_base = equilibrium_ph(base, DEFAULT_PH_TOL)?.value();
    let sp = config.setpoint.value();
    if sp < ph_acid - config.tolerance || sp > ph_base + config.tolerance {
        return Err(ChemistryError::UnreachableSetpoint {
            target: sp,
            min: ph_acid,
            max: ph_base,
        }
        .into());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let (mut lo, mut hi) = (-U_LIMIT, U_LIMIT);
    // the line starts primed with acid
    let mut u = -U_LIMIT;
    let mut set_at = 0usize;
    let mut in_tol_run = 0;
    let mut held_here = false;
    let mut rechecked = false;
    let mut history: Vec<f64> = Vec::with_capacity(config.max_iterations);
    let mut iterations = Vec::with_capacity(config.max_iterations);
    let mut converged = false;

    for k in 0..config.max_iterations {
        let r = ratio_of(u);
        let true_ph = equilibrium_ph(&batch(acid, base, r, config.batch_volume_l)?, DEFAULT_PH_TOL)?.value();
        history.push(true_ph);
        let seen = k.saturating_sub(config.sensor_lag);
        let noise: f64 = rng.sample(StandardNormal);
        let measured = history[seen] + config.sensor_noise_sigma * noise;
        iterations.push(TraceIteration {
            iteration: k,
            pump_ratio: r,
            true_ph,
            measured_ph: measured,
        });
        if seen < set_at {
            continue;
        }
        if (measured - sp).abs() <= config.tolerance {
            in_tol_run += 1;
            held_here = true;
            if in_tol_run >= 2 {
                converged = true;
                break;
            }
            continue;
        }
        in_tol_run = 0;
        if held_here && !rechecked {
            rechecked = true;
            continue;
        }
        if measured < sp {
            lo = u;
        } else {
            hi = u;
        }
        if hi - lo < COLLAPSED_WIDTH {
            lo = (u - config.ratio_gain).max(-U_LIMIT);
            hi = (u + config.ratio_gain).min(U_LIMIT);
        }
        u = 0.5 * (lo + hi);
        set_at = k + 1;
        held_here = false;
        rechecked = false;
    }

    let r = iterations.last().map_or(0.0, |i: &TraceIteration| i.pump_ratio);
    Ok(ControllerTrace {
        setpoint: config.setpoint,
        tolerance: config.tolerance,
        iterations,
        converged,
        final_solution: batch(acid, base, r, config.batch_volume_l)?,
    })
}

/// Fixed-width text table of a trace, one row per iteration.
pub fn format_trace_table(trace: &ControllerTrace) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:>4}  {:>22}  {:>9}  {:>11}", "iter", "pump_ratio", "true_ph", "measured_ph");
    for it in &trace.iterations {
        let _ = writeln!(
            out,
            "{:>4}  {:>22.17e}  {:>9.6}  {:>11.6}",
            it.iteration, it.pump_ratio, it.true_ph, it.measured_ph
        );
    }
    let _ = writeln!(
        out,
        "converged={} setpoint={} final_ph={:.6} iterations={}",
        trace.converged,
        trace.setpoint,
        trace.final_true_ph(),
        trace.iterations.len()
    );
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Droplet {
    pub x: usize,
    pub y: usize,
    #[serde(default = "default_droplet")]
    pub volume_ul: f64,
}

fn default_droplet() -> f64 {
    DEFAULT_DROPLET_UL
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DepositionMode {
    Global,
    Local,
    Discrete,
}

/// Where a solution lands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Targets {
    /// Every unmasked cell.
    Global,
    /// Cells lining the named channel, fed through its inlet.
    Local { channel: String },
    /// Individual droplets, each affecting exactly its cell.
    Discrete { droplets: Vec<Droplet> },
}

impl Targets {
    pub fn mode(&self) -> DepositionMode {
        match self {
            Self::Global => DepositionMode::Global,
            Self::Local { .. } => DepositionMode::Local,
            Self::Discrete { .. } => DepositionMode::Discrete,
        }
    }

    pub fn validate(&self) -> Result<(), ControllerError> {
        match self {
            Self::Local { channel } if channel.is_empty() => {
                Err(ControllerError::Target("local deposition needs a channel id".into()))
            }
            Self::Discrete { droplets } if droplets.is_empty() => {
                Err(ControllerError::Target("discrete deposition needs at least one droplet".into()))
            }
            Self::Discrete { droplets } => match droplets.iter().find(|d| !(d.volume_ul > 0.0)) {
                Some(d) => Err(ControllerError::Target(format!(
                    "droplet at ({}, {}) has volume {} uL; must be > 0",
                    d.x, d.y, d.volume_ul
                ))),
                None => Ok(()),
            },
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepositionEvent {
    pub time: f64,
    pub solution: Solution,
    pub targets: Targets,
    /// Set when the source trace had not converged.
    pub forced: bool,
}

impl DepositionEvent {
    pub fn mode(&self) -> DepositionMode {
        self.targets.mode()
    }
}

/// Package the trace's final batch as an event at scene time `time`.
pub fn deposit(
    trace: &ControllerTrace,
    targets: Targets,
    time: f64,
    force: bool,
) -> Result<DepositionEvent, ControllerError> {
    targets.validate()?;
    if !trace.converged && !force {
        return Err(ControllerError::NotConverged);
    }
    Ok(DepositionEvent {
        time,
        solution: trace.final_solution.clone(),
        targets,
        forced: !trace.converged,
    })
}
