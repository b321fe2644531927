//! One-dimensional diffusion of dissolved species along a cast channel.
//!
//! The channel is discretised into `n_cells` nodes at `x_i = i / (n - 1)`
//! (fractional position), spacing `dx = length / (n - 1)`. Each species is
//! advanced with the explicit forward-time centred-space scheme
//!
//! ```text
//! c_i <- c_i + r (c_{i-1} - 2 c_i + c_{i+1}),   r = D dt / dx^2 <= 1/2
//! ```
//!
//! A fixed end holds its node at the boundary composition. A closed end is a
//! half-width node with zero flux through the wall, `c_0 <- c_0 + 2 r (c_1 - c_0)`,
//! which conserves the trapezoid-weighted total exactly.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chemistry::{equilibrium_ph, AcidBaseSpecies, ChemistryError, PhValue, Solution};

/// Shared default diffusivity of small ions in water, m^2/s.
pub const DEFAULT_DIFFUSIVITY: f64 = 1.0e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FluidicsError {
    #[error("time step {dt} s exceeds the stability limit; maximum admissible dt is {max_dt} s")]
    Stability { dt: f64, max_dt: f64 },
    #[error("invalid channel: {0}")]
    InvalidChannel(String),
    #[error(transparent)]
    Chemistry(#[from] ChemistryError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Boundary {
    Fixed(Solution),
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Left,
    Right,
}

/// pH sampled along a channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhProfile {
    pub positions: Vec<f64>,
    pub ph_values: Vec<PhValue>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    length_m: f64,
    diameter_m: f64,
    n_cells: usize,
    species: Vec<AcidBaseSpecies>,
    diffusivity: Vec<f64>,
    default_diffusivity: f64,
    left: Boundary,
    right: Boundary,
    /// `field[s][i]`: concentration of species `s` at node `i`, mol/L.
    field: Vec<Vec<f64>>,
    time: f64,
}

impl Channel {
    /// Channel filled uniformly with `fill`, boundaries imposed at t = 0.
    pub fn new(
        length_m: f64,
        diameter_m: f64,
        n_cells: usize,
        fill: &Solution,
        left: Boundary,
        right: Boundary,
    ) -> Result<Self, FluidicsError> {
        if !(length_m > 0.0 && length_m.is_finite()) {
            return Err(FluidicsError::InvalidChannel(format!("length must be > 0, got {length_m}")));
        }
        if !(diameter_m > 0.0 && diameter_m.is_finite()) {
            return Err(FluidicsError::InvalidChannel(format!("diameter must be > 0, got {diameter_m}")));
        }
        if n_cells < 3 {
            return Err(FluidicsError::InvalidChannel(format!("need at least 3 cells, got {n_cells}")));
        }
        let mut ch = Self {
            length_m,
            diameter_m,
            n_cells,
            species: Vec::new(),
            diffusivity: Vec::new(),
            default_diffusivity: DEFAULT_DIFFUSIVITY,
            left: Boundary::Closed,
            right: Boundary::Closed,
            field: Vec::new(),
            time: 0.0,
        };
        for c in fill.components() {
            let s = ch.ensure_species(&c.species);
            ch.field[s].fill(c.concentration);
        }
        ch.set_boundary(Side::Left, left);
        ch.set_boundary(Side::Right, right);
        Ok(ch)
    }

    fn ensure_species(&mut self, sp: &AcidBaseSpecies) -> usize {
        if let Some(i) = self.species.iter().position(|s| s.name == sp.name) {
            return i;
        }
        self.species.push(sp.clone());
        self.diffusivity.push(self.default_diffusivity);
        self.field.push(vec![0.0; self.n_cells]);
        self.species.len() - 1
    }

    /// Replace one end condition and impose it immediately.
    pub fn set_boundary(&mut self, side: Side, boundary: Boundary) {
        if let Boundary::Fixed(sol) = &boundary {
            for c in sol.components() {
                self.ensure_species(&c.species);
            }
        }
        match side {
            Side::Left => self.left = boundary,
            Side::Right => self.right = boundary,
        }
        self.impose_boundaries();
    }

    fn impose_boundaries(&mut self) {
        let last = self.n_cells - 1;
        for (node, b) in [(0, &self.left), (last, &self.right)] {
            if let Boundary::Fixed(sol) = b {
                for (s, sp) in self.species.iter().enumerate() {
                    self.field[s][node] = sol.concentration(&sp.name);
                }
            }
        }
    }

    /// Set every species' diffusivity, including species added later.
    pub fn with_uniform_diffusivity(mut self, d: f64) -> Result<Self, FluidicsError> {
        check_diffusivity(d)?;
        self.default_diffusivity = d;
        self.diffusivity.fill(d);
        Ok(self)
    }

    pub fn with_species_diffusivity(mut self, name: &str, d: f64) -> Result<Self, FluidicsError> {
        check_diffusivity(d)?;
        let i = self
            .species
            .iter()
            .position(|s| s.name == name)
            .ok_or_else(|| FluidicsError::InvalidChannel(format!("no species `{name}` in channel")))?;
        self.diffusivity[i] = d;
        Ok(self)
    }

    pub fn length_m(&self) -> f64 {
        self.length_m
    }

    pub fn diameter_m(&self) -> f64 {
        self.diameter_m
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn dx(&self) -> f64 {
        self.length_m / (self.n_cells - 1) as f64
    }

    pub fn species(&self) -> &[AcidBaseSpecies] {
        &self.species
    }

    pub fn left(&self) -> &Boundary {
        &self.left
    }

    pub fn right(&self) -> &Boundary {
        &self.right
    }

    /// Fractional node positions in `[0, 1]`.
    pub fn positions(&self) -> Vec<f64> {
        (0..self.n_cells).map(|i| i as f64 / (self.n_cells - 1) as f64).collect()
    }

    pub fn max_stable_dt(&self) -> f64 {
        let dmax = self.diffusivity.iter().copied().fold(self.default_diffusivity, f64::max);
        self.dx().powi(2) / (2.0 * dmax)
    }

    pub fn concentration(&self, name: &str, node: usize) -> f64 {
        self.species
            .iter()
            .position(|s| s.name == name)
            .map_or(0.0, |s| self.field[s][node])
    }

    /// Cross-section area times length of one full node, in litres.
    fn node_volume_l(&self) -> f64 {
        let area = std::f64::consts::PI * (self.diameter_m / 2.0).powi(2);
        area * self.dx() * 1000.0
    }

    /// Total moles of `name` in the channel (trapezoid rule over nodes).
    pub fn total_moles(&self, name: &str) -> f64 {
        let Some(s) = self.species.iter().position(|sp| sp.name == name) else {
            return 0.0;
        };
        let f = &self.field[s];
        let inner: f64 = f[1..self.n_cells - 1].iter().sum();
        (inner + 0.5 * (f[0] + f[self.n_cells - 1])) * self.node_volume_l()
    }

    /// Composition at fractional position `x`, linear between nodes.
    pub fn solution_at(&self, x: f64) -> Solution {
        let u = x.clamp(0.0, 1.0) * (self.n_cells - 1) as f64;
        let i = (u.floor() as usize).min(self.n_cells - 2);
        let t = u - i as f64;
        let conc: Vec<f64> = self
            .field
            .iter()
            .map(|f| f[i] + (f[i + 1] - f[i]) * t)
            .collect();
        Solution::from_concentrations(&self.species, &conc, self.node_volume_l())
    }

    pub fn node_solution(&self, node: usize) -> Solution {
        let conc: Vec<f64> = self.field.iter().map(|f| f[node]).collect();
        Solution::from_concentrations(&self.species, &conc, self.node_volume_l())
    }

    pub fn ph_profile(&self, tol: f64) -> Result<PhProfile, FluidicsError> {
        let ph_values = (0..self.n_cells)
            .map(|i| equilibrium_ph(&self.node_solution(i), tol))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(PhProfile {
            positions: self.positions(),
            ph_values,
        })
    }

    /// Advance in place by `dt`.
    pub fn step(&mut self, dt: f64) -> Result<(), FluidicsError> {
        let max_dt = self.max_stable_dt();
        if !(dt > 0.0) || dt > max_dt * (1.0 + 1e-12) {
            return Err(FluidicsError::Stability { dt, max_dt });
        }
        let inv_dx2 = 1.0 / self.dx().powi(2);
        let n = self.n_cells;
        let left_closed = matches!(self.left, Boundary::Closed);
        let right_closed = matches!(self.right, Boundary::Closed);
        for (f, d) in self.field.iter_mut().zip(&self.diffusivity) {
            let r = d * dt * inv_dx2;
            let old = f.clone();
            for i in 1..n - 1 {
                f[i] = old[i] + r * (old[i - 1] - 2.0 * old[i] + old[i + 1]);
            }
            if left_closed {
                f[0] = old[0] + 2.0 * r * (old[1] - old[0]);
            }
            if right_closed {
                f[n - 1] = old[n - 1] + 2.0 * r * (old[n - 2] - old[n - 1]);
            }
        }
        self.impose_boundaries();
        self.time += dt;
        Ok(())
    }

    /// Advance by `duration` using steps no larger than `dt_max`.
    pub fn advance(&mut self, duration: f64, dt_max: f64) -> Result<(), FluidicsError> {
        if duration <= 0.0 {
            return Ok(());
        }
        let steps = (duration / dt_max.min(self.max_stable_dt())).ceil().max(1.0) as usize;
        let dt = duration / steps as f64;
        for _ in 0..steps {
            self.step(dt)?;
        }
        Ok(())
    }
}

fn check_diffusivity(d: f64) -> Result<(), FluidicsError> {
    if d > 0.0 && d.is_finite() {
        Ok(())
    } else {
        Err(FluidicsError::InvalidChannel(format!("diffusivity must be > 0, got {d}")))
    }
}

/// Pure form of [`Channel::step`].
pub fn diffuse_step(channel: &Channel, dt: f64) -> Result<Channel, FluidicsError> {
    let mut next = channel.clone();
    next.step(dt)?;
    Ok(next)
}

/// Time step used by the ticker: a fixed fraction of the stability limit,
/// so runs on geometrically similar channels take identical step counts.
pub const TICKER_CFL: f64 = 0.9;

/// For each marker, the first time its local pH leaves `band`. `None` marks
/// a marker not reached within `horizon_s`.
pub fn ticker_arrival_times(
    channel: &Channel,
    markers: &[f64],
    band: (f64, f64),
    horizon_s: f64,
    tol: f64,
) -> Result<Vec<Option<f64>>, FluidicsError> {
    if !matches!(channel.left, Boundary::Fixed(_)) {
        return Err(FluidicsError::InvalidChannel(
            "ticker needs a fixed (activating) left boundary".into(),
        ));
    }
    if let Some(m) = markers.iter().find(|m| !(0.0..=1.0).contains(*m)) {
        return Err(FluidicsError::InvalidChannel(format!("marker {m} outside [0, 1]")));
    }
    let (lo, hi) = band;
    // signed distance outside the band, > 0 once the marker has switched
    let excess = |ph: f64| (lo - ph).max(ph - hi);
    let sample = |ch: &Channel, x: f64| -> Result<f64, FluidicsError> {
        Ok(excess(equilibrium_ph(&ch.solution_at(x), tol)?.value()))
    };

    let mut ch = channel.clone();
    let dt = TICKER_CFL * ch.max_stable_dt();
    let mut out = vec![None; markers.len()];
    let mut prev = Vec::with_capacity(markers.len());
    for (k, &m) in markers.iter().enumerate() {
        let e = sample(&ch, m)?;
        if e > 0.0 {
            out[k] = Some(0.0);
        }
        prev.push(e);
    }
    let mut t = 0.0;
    while out.iter().any(Option::is_none) && t < horizon_s {
        ch.step(dt)?;
        for (k, &m) in markers.iter().enumerate() {
            if out[k].is_some() {
                continue;
            }
            let e = sample(&ch, m)?;
            if e > 0.0 {
                // interpolate the crossing inside the step
                let frac = prev[k] / (prev[k] - e);
                out[k] = Some(t + frac.clamp(0.0, 1.0) * dt);
            }
            prev[k] = e;
        }
        t += dt;
    }
    Ok(out)
}

/// Steady gradient between two fixed reservoirs: each species varies
/// linearly in concentration, and pH follows from the local composition.
pub fn gradiator_profile(
    channel: &Channel,
    left: &Solution,
    right: &Solution,
    tol: f64,
) -> Result<PhProfile, FluidicsError> {
    let positions = channel.positions();
    let ph_values = positions
        .iter()
        .map(|&x| equilibrium_ph(&Solution::blend(left, right, x)?, tol))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PhProfile { positions, ph_values })
}

/// Transient route to the gradiator profile: fix both ends and diffuse for
/// `duration` seconds.
pub fn gradiator_transient(
    channel: &Channel,
    left: &Solution,
    right: &Solution,
    duration: f64,
    tol: f64,
) -> Result<PhProfile, FluidicsError> {
    let mut ch = channel.clone();
    ch.set_boundary(Side::Left, Boundary::Fixed(left.clone()));
    ch.set_boundary(Side::Right, Boundary::Fixed(right.clone()));
    ch.advance(duration, ch.max_stable_dt() * TICKER_CFL)?;
    ch.ph_profile(tol)
}
