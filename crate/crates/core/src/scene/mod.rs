//! A grid of material cells driven by timed depositions.

mod export;
mod scenario;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chemistry::{equilibrium_ph, ChemistryError, Solution, DEFAULT_PH_TOL};
use crate::color::Lab;
use crate::controller::{DepositionEvent, DepositionMode, Targets};
use crate::fluidics::{Boundary, Channel, FluidicsError, Side};
use crate::materials::{
    CalibrationSet, Composite, CompositeMethod, MaterialError, PrimitiveKind, PrimitiveState, SHAPE_PH_RANGE,
};

pub use export::{frame_csv_header, series_csv_header, write_frame_rows, write_series_row};
pub use scenario::{load_scenario, ScenarioError};

/// Default simulation step, seconds.
pub const DEFAULT_DT: f64 = 0.1;
/// Change in local channel pH that re-activates a lining cell.
pub const LINING_REDEPOSIT_PH: f64 = 0.5;
/// Colour shown for cells without a colour layer.
pub const SUBSTRATE_LAB: Lab = Lab::new(92.0, 0.0, 4.0);
const PH_SNAP: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("event error: {0}")]
    Event(String),
    #[error("time step must be > 0, got {0}")]
    InvalidStep(f64),
    #[error(transparent)]
    Material(#[from] MaterialError),
    #[error(transparent)]
    Chemistry(#[from] ChemistryError),
    #[error(transparent)]
    Fluidics(#[from] FluidicsError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    /// Index into the scene's composite table; `None` for bare substrate.
    pub composite: Option<usize>,
    pub states: Vec<PrimitiveState>,
    pub cloaked: bool,
    pub thickness_factor: f64,
    pub responsive: bool,
}

impl Cell {
    fn bare() -> Self {
        Self {
            composite: None,
            states: Vec::new(),
            cloaked: false,
            thickness_factor: 1.0,
            responsive: true,
        }
    }

    fn accepts(&self) -> bool {
        !self.cloaked && self.responsive && self.composite.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hinge {
    pub name: String,
    pub cells: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneChannel {
    pub id: String,
    pub channel: Channel,
    /// Cells along the channel, inlet first.
    pub lining: Vec<(usize, usize)>,
    last_ph: Vec<f64>,
}

impl SceneChannel {
    fn lining_position(&self, j: usize) -> f64 {
        if self.lining.len() <= 1 {
            0.0
        } else {
            j as f64 / (self.lining.len() - 1) as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct QueuedEvent {
    event: DepositionEvent,
    ph: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    name: String,
    width: usize,
    height: usize,
    cells: Vec<Cell>,
    composites: Vec<(String, Composite)>,
    hinges: Vec<Hinge>,
    channels: Vec<SceneChannel>,
    clock: f64,
    queue: VecDeque<QueuedEvent>,
    applied_events: usize,
    seed: u64,
    default_dt: f64,
    warnings: Vec<String>,
}

/// Rendered snapshot of a scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub time: f64,
    pub width: usize,
    pub height: usize,
    /// Row-major, `y * width + x`.
    pub color_grid: Vec<Lab>,
    pub angle_list: Vec<f64>,
    pub odor_field: Vec<f64>,
    pub aggregate_odor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellDescription {
    pub x: usize,
    pub y: usize,
    pub composite: Option<String>,
    pub method: Option<CompositeMethod>,
    pub kinds: Vec<PrimitiveKind>,
    pub cloaked: bool,
    pub responsive: bool,
    pub thickness_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelDescription {
    pub id: String,
    pub length_m: f64,
    pub diameter_m: f64,
    pub n_cells: usize,
    pub lining: Vec<(usize, usize)>,
}

/// Static description of a scene for clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneDescription {
    pub name: String,
    pub width: usize,
    pub height: usize,
    pub clock: f64,
    pub default_dt: f64,
    pub seed: u64,
    pub cells: Vec<CellDescription>,
    pub hinges: Vec<Hinge>,
    pub channels: Vec<ChannelDescription>,
    pub pending_events: usize,
    pub warnings: Vec<String>,
}

fn snap_ph(ph: f64) -> Result<f64, SceneError> {
    let (lo, hi) = SHAPE_PH_RANGE;
    if ph < lo - PH_SNAP || ph > hi + PH_SNAP {
        return Err(MaterialError::OutOfCalibration { ph, min: lo, max: hi }.into());
    }
    Ok(ph.clamp(lo, hi))
}

impl Scene {
    /// Bare grid with no materials, channels or events.
    pub fn new(name: &str, width: usize, height: usize) -> Self {
        Self {
            name: name.to_string(),
            width,
            height,
            cells: vec![Cell::bare(); width * height],
            composites: Vec::new(),
            hinges: Vec::new(),
            channels: Vec::new(),
            clock: 0.0,
            queue: VecDeque::new(),
            applied_events: 0,
            seed: 0,
            default_dt: DEFAULT_DT,
            warnings: Vec::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn default_dt(&self) -> f64 {
        self.default_dt
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn hinges(&self) -> &[Hinge] {
        &self.hinges
    }

    pub fn channels(&self) -> &[SceneChannel] {
        &self.channels
    }

    pub fn pending_events(&self) -> usize {
        self.queue.len()
    }

    pub fn applied_events(&self) -> usize {
        self.applied_events
    }

    pub fn cell(&self, x: usize, y: usize) -> Option<&Cell> {
        (x < self.width && y < self.height).then(|| &self.cells[y * self.width + x])
    }

    pub fn composite(&self, index: usize) -> Option<&Composite> {
        self.composites.get(index).map(|c| &c.1)
    }

    fn index(&self, x: usize, y: usize) -> Result<usize, SceneError> {
        if x < self.width && y < self.height {
            Ok(y * self.width + x)
        } else {
            Err(SceneError::Event(format!(
                "cell ({x}, {y}) is outside the {}x{} grid",
                self.width, self.height
            )))
        }
    }

    /// Add a named composite and return its index.
    pub fn add_composite(&mut self, name: &str, composite: Composite) -> usize {
        if let Some(w) = &composite.warning {
            self.warnings.push(format!("composite `{name}`: {}", w.message));
        }
        self.composites.push((name.to_string(), composite));
        self.composites.len() - 1
    }

    /// Place a composite on a cell, resetting its states.
    pub fn set_cell(&mut self, x: usize, y: usize, composite: usize, thickness_factor: f64, responsive: bool) -> Result<(), SceneError> {
        let i = self.index(x, y)?;
        let comp = &self
            .composites
            .get(composite)
            .ok_or_else(|| SceneError::Event(format!("no composite #{composite}")))?
            .1;
        if !(thickness_factor > 0.0 && thickness_factor.is_finite()) {
            return Err(SceneError::Event(format!("thickness factor must be > 0, got {thickness_factor}")));
        }
        let states = comp
            .layers
            .iter()
            .map(|l| PrimitiveState::fresh(l.kind, &l.calibration))
            .collect();
        let cell = &mut self.cells[i];
        cell.composite = Some(composite);
        cell.states = states;
        cell.thickness_factor = thickness_factor;
        cell.responsive = responsive;
        Ok(())
    }

    pub fn set_cloaked(&mut self, x: usize, y: usize, cloaked: bool) -> Result<(), SceneError> {
        let i = self.index(x, y)?;
        self.cells[i].cloaked = cloaked;
        Ok(())
    }

    pub fn add_hinge(&mut self, hinge: Hinge) -> Result<(), SceneError> {
        for &(x, y) in &hinge.cells {
            self.index(x, y)?;
        }
        self.hinges.push(hinge);
        Ok(())
    }

    pub fn add_channel(&mut self, id: &str, channel: Channel, lining: Vec<(usize, usize)>) -> Result<(), SceneError> {
        if self.channels.iter().any(|c| c.id == id) {
            return Err(SceneError::Event(format!("duplicate channel `{id}`")));
        }
        for &(x, y) in &lining {
            self.index(x, y)?;
        }
        let mut sc = SceneChannel {
            id: id.to_string(),
            channel,
            lining,
            last_ph: Vec::new(),
        };
        sc.last_ph = (0..sc.lining.len())
            .map(|j| Ok(equilibrium_ph(&sc.channel.solution_at(sc.lining_position(j)), DEFAULT_PH_TOL)?.value()))
            .collect::<Result<_, SceneError>>()?;
        self.channels.push(sc);
        Ok(())
    }

    /// Check an event against the grid and channels; returns its pH.
    pub fn validate_event(&self, event: &DepositionEvent) -> Result<f64, SceneError> {
        if !(event.time.is_finite() && event.time >= 0.0) {
            return Err(SceneError::Event(format!("event time must be >= 0, got {}", event.time)));
        }
        event
            .targets
            .validate()
            .map_err(|e| SceneError::Event(e.to_string()))?;
        match &event.targets {
            Targets::Global => {}
            Targets::Local { channel } => {
                if !self.channels.iter().any(|c| &c.id == channel) {
                    return Err(SceneError::Event(format!("no channel `{channel}`")));
                }
            }
            Targets::Discrete { droplets } => {
                for d in droplets {
                    self.index(d.x, d.y)?;
                }
            }
        }
        snap_ph(equilibrium_ph(&event.solution, DEFAULT_PH_TOL)?.value())
    }

    /// Queue an event; events at equal times keep insertion order.
    pub fn enqueue(&mut self, event: DepositionEvent) -> Result<(), SceneError> {
        let ph = self.validate_event(&event)?;
        let pos = self.queue.partition_point(|q| q.event.time <= event.time);
        self.queue.insert(pos, QueuedEvent { event, ph });
        Ok(())
    }

    fn deposit_cell(&mut self, i: usize, ph: f64) -> Result<(), SceneError> {
        let cell = &self.cells[i];
        if !cell.accepts() {
            return Ok(());
        }
        let comp = &self.composites[cell.composite.expect("accepting cell has a composite")].1;
        let states = cell
            .states
            .iter()
            .zip(&comp.layers)
            .map(|(s, l)| s.deposit(ph, &l.calibration))
            .collect::<Result<Vec<_>, _>>()?;
        self.cells[i].states = states;
        Ok(())
    }

    fn apply(&mut self, q: QueuedEvent) -> Result<(), SceneError> {
        match q.event.targets {
            Targets::Global => {
                for i in 0..self.cells.len() {
                    self.deposit_cell(i, q.ph)?;
                }
            }
            Targets::Local { channel } => {
                let sc = self
                    .channels
                    .iter_mut()
                    .find(|c| c.id == channel)
                    .ok_or_else(|| SceneError::Event(format!("no channel `{channel}`")))?;
                sc.channel.set_boundary(Side::Left, Boundary::Fixed(q.event.solution));
            }
            Targets::Discrete { droplets } => {
                for d in droplets {
                    let i = self.index(d.x, d.y)?;
                    self.deposit_cell(i, q.ph)?;
                }
            }
        }
        self.applied_events += 1;
        Ok(())
    }

    /// Advance the scene by `dt` seconds.
    pub fn step(&mut self, dt: f64) -> Result<(), SceneError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(SceneError::InvalidStep(dt));
        }
        let horizon = self.clock + dt;
        while self.queue.front().is_some_and(|q| q.event.time <= horizon + 1e-9) {
            let q = self.queue.pop_front().expect("front checked");
            self.apply(q)?;
        }

        let mut lining_updates = Vec::new();
        for sc in &mut self.channels {
            let dt_max = sc.channel.max_stable_dt();
            sc.channel.advance(dt, dt_max)?;
            for j in 0..sc.lining.len() {
                let ph = equilibrium_ph(&sc.channel.solution_at(sc.lining_position(j)), DEFAULT_PH_TOL)?.value();
                if (ph - sc.last_ph[j]).abs() >= LINING_REDEPOSIT_PH {
                    sc.last_ph[j] = ph;
                    lining_updates.push((sc.lining[j], ph));
                }
            }
        }
        let (lo, hi) = SHAPE_PH_RANGE;
        for ((x, y), ph) in lining_updates {
            let i = self.index(x, y)?;
            self.deposit_cell(i, ph.clamp(lo, hi))?;
        }

        for ci in 0..self.cells.len() {
            let cell = &self.cells[ci];
            let Some(k) = cell.composite else { continue };
            if cell.cloaked {
                continue;
            }
            let local_dt = dt / cell.thickness_factor;
            let comp = &self.composites[k].1;
            let states = cell
                .states
                .iter()
                .zip(&comp.layers)
                .map(|(s, l)| s.advance(local_dt, &l.calibration))
                .collect::<Result<Vec<_>, _>>()?;
            self.cells[ci].states = states;
        }
        self.clock = horizon;
        Ok(())
    }

    pub fn render_frame(&self) -> Frame {
        let mut color_grid = Vec::with_capacity(self.cells.len());
        let mut odor_field = Vec::with_capacity(self.cells.len());
        for cell in &self.cells {
            let mut color = SUBSTRATE_LAB;
            let mut odor = 0.0;
            let mut seen_color = false;
            for s in &cell.states {
                match s {
                    PrimitiveState::Color(c) if !seen_color => {
                        color = c.current;
                        seen_color = true;
                    }
                    PrimitiveState::Odor(o) => odor += o.intensity,
                    _ => {}
                }
            }
            color_grid.push(color);
            odor_field.push(odor);
        }
        let angle_list = self
            .hinges
            .iter()
            .map(|h| {
                let angles: Vec<f64> = h
                    .cells
                    .iter()
                    .flat_map(|&(x, y)| self.cells[y * self.width + x].states.iter())
                    .filter_map(|s| match s {
                        PrimitiveState::Shape(sh) => Some(sh.angle),
                        _ => None,
                    })
                    .collect();
                if angles.is_empty() {
                    0.0
                } else {
                    angles.iter().sum::<f64>() / angles.len() as f64
                }
            })
            .collect();
        let aggregate_odor = odor_field.iter().sum();
        Frame {
            time: self.clock,
            width: self.width,
            height: self.height,
            color_grid,
            angle_list,
            odor_field,
            aggregate_odor,
        }
    }

    pub fn describe(&self) -> SceneDescription {
        let cells = (0..self.cells.len())
            .map(|i| {
                let c = &self.cells[i];
                let comp = c.composite.map(|k| &self.composites[k]);
                CellDescription {
                    x: i % self.width,
                    y: i / self.width,
                    composite: comp.map(|(n, _)| n.clone()),
                    method: comp.map(|(_, c)| c.method),
                    kinds: comp.map(|(_, c)| c.kinds()).unwrap_or_default(),
                    cloaked: c.cloaked,
                    responsive: c.responsive,
                    thickness_factor: c.thickness_factor,
                }
            })
            .collect();
        SceneDescription {
            name: self.name.clone(),
            width: self.width,
            height: self.height,
            clock: self.clock,
            default_dt: self.default_dt,
            seed: self.seed,
            cells,
            hinges: self.hinges.clone(),
            channels: self
                .channels
                .iter()
                .map(|c| ChannelDescription {
                    id: c.id.clone(),
                    length_m: c.channel.length_m(),
                    diameter_m: c.channel.diameter_m(),
                    n_cells: c.channel.n_cells(),
                    lining: c.lining.clone(),
                })
                .collect(),
            pending_events: self.queue.len(),
            warnings: self.warnings.clone(),
        }
    }

    /// Modes of the queued events, in firing order.
    pub fn queued_modes(&self) -> Vec<DepositionMode> {
        self.queue.iter().map(|q| q.event.mode()).collect()
    }

    /// Convenience: queue `solution` over the whole scene at `time`.
    pub fn spray(&mut self, solution: Solution, time: f64) -> Result<(), SceneError> {
        self.enqueue(DepositionEvent {
            time,
            solution,
            targets: Targets::Global,
            forced: false,
        })
    }
}

/// Pure form of [`Scene::step`].
pub fn step(scene: &Scene, dt: f64) -> Result<Scene, SceneError> {
    let mut next = scene.clone();
    next.step(dt)?;
    Ok(next)
}

/// Example scenarios bundled with the library, by preset name.
pub const SHIPPED_SCENARIOS: [(&str, &str); 6] = [
    ("umbrella", include_str!("../../data/scenarios/umbrella.scn")),
    ("toothbrush", include_str!("../../data/scenarios/toothbrush.scn")),
    ("apple_display", include_str!("../../data/scenarios/apple_display.scn")),
    ("ticker", include_str!("../../data/scenarios/ticker.scn")),
    ("gradiator", include_str!("../../data/scenarios/gradiator.scn")),
    ("pasta", include_str!("../../data/scenarios/pasta.scn")),
];

pub fn shipped_scenario(name: &str) -> Option<&'static str> {
    SHIPPED_SCENARIOS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// Calibration used when a scene is built without an explicit one.
pub fn default_calibration() -> CalibrationSet {
    CalibrationSet::default_synthetic()
}
