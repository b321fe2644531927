//! Scenario documents (TOML, `version = 1`).
//!
//! ```toml
//! version = 1
//! name = "demo"
//! width = 4
//! height = 2
//! seed = 7                      # optional, seeds generated rain
//! dt = 0.1                      # optional default step
//!
//! [solutions.acid4]             # named solutions, same schema as .sol files
//! stock = "citric_acid"
//! ph = 4.0
//!
//! [composites.film]
//! method = "layer"              # layer | panel | mix
//! parts = ["color", "odor"]     # top/inner first
//!
//! [[regions]]                   # later regions override earlier ones
//! composite = "film"
//! rect = { x = 0, y = 0, w = 4, h = 2 }   # or cells = [[x, y], ...]
//! thickness = 1.0               # or thickness_ramp = { axis = "x", from = 0.5, to = 2.0, shape = "linear" }
//! pattern = { axis = "x", period = 2, on = 1 }   # optional dopant stripes
//!
//! [[cloak]]
//! cells = [[1, 1]]
//!
//! [[hinges]]
//! name = "fold"
//! cells = [[1, 0], [1, 1]]
//!
//! [[channels]]
//! id = "c1"
//! length_mm = 4.0
//! diameter_mm = 0.6
//! n_cells = 41
//! fill = { contents = { sodium_citrate = 0.01 } }
//! left = "closed"               # "closed", a solution name or an inline solution
//! right = "closed"
//! lining = [[0, 0], [1, 0]]
//!
//! [[events]]                    # sorted by time
//! time = 0.0
//! solution = "acid4"
//! mode = "global"               # global | local (channel = ..) | discrete (droplets = [..])
//!
//! [rain]                        # optional seeded droplet generator
//! solution = "acid4"
//! start = 0.0
//! end = 60.0
//! rate_per_s = 0.5
//! ```

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use thiserror::Error;
use toml::Spanned;

use super::{Hinge, Scene, DEFAULT_DT};
use crate::chemistry::{Solution, SolutionSpec, SpeciesDb};
use crate::controller::{DepositionEvent, Droplet, Targets, DEFAULT_DROPLET_UL};
use crate::fluidics::{Boundary, Channel};
use crate::materials::{make_composite, CalibrationSet, CompositeMethod, PrimitiveKind};

/// Load failure with its location in the document.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{path} (line {line}, column {column}): {message}")]
pub struct ScenarioError {
    pub path: String,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Doc {
    version: Spanned<u32>,
    name: String,
    #[serde(default)]
    #[allow(dead_code)]
    description: String,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    dt: Option<f64>,
    width: usize,
    height: usize,
    #[serde(default)]
    solutions: BTreeMap<String, Spanned<SolutionSpec>>,
    #[serde(default)]
    composites: BTreeMap<String, Spanned<CompositeDoc>>,
    #[serde(default)]
    regions: Vec<Spanned<RegionDoc>>,
    #[serde(default)]
    cloak: Vec<Spanned<AreaDoc>>,
    #[serde(default)]
    hinges: Vec<Spanned<HingeDoc>>,
    #[serde(default)]
    channels: Vec<Spanned<ChannelDoc>>,
    #[serde(default)]
    events: Vec<Spanned<EventDoc>>,
    #[serde(default)]
    rain: Option<Spanned<RainDoc>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CompositeDoc {
    #[serde(default = "default_method")]
    method: CompositeMethod,
    parts: Vec<Spanned<String>>,
}

fn default_method() -> CompositeMethod {
    CompositeMethod::Layer
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
struct Rect {
    x: usize,
    y: usize,
    w: usize,
    h: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Axis {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
enum RampShape {
    #[default]
    Linear,
    /// `from` at both ends of the region, `to` at its centre.
    Triangle,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
struct Ramp {
    axis: Axis,
    from: f64,
    to: f64,
    #[serde(default)]
    shape: RampShape,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
struct Pattern {
    axis: Axis,
    period: usize,
    on: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegionDoc {
    composite: String,
    #[serde(default)]
    rect: Option<Rect>,
    #[serde(default)]
    cells: Option<Vec<[usize; 2]>>,
    #[serde(default)]
    thickness: Option<f64>,
    #[serde(default)]
    thickness_ramp: Option<Ramp>,
    #[serde(default)]
    pattern: Option<Pattern>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AreaDoc {
    #[serde(default)]
    rect: Option<Rect>,
    #[serde(default)]
    cells: Option<Vec<[usize; 2]>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct HingeDoc {
    name: String,
    cells: Vec<[usize; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum SolutionRef {
    Named(String),
    Inline(SolutionSpec),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelDoc {
    id: String,
    length_mm: f64,
    diameter_mm: f64,
    n_cells: usize,
    #[serde(default)]
    diffusivity: Option<f64>,
    fill: SolutionRef,
    left: SolutionRef,
    right: SolutionRef,
    #[serde(default)]
    lining: Vec<[usize; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
enum ModeDoc {
    Global,
    Local,
    Discrete,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EventDoc {
    time: f64,
    solution: SolutionRef,
    mode: ModeDoc,
    #[serde(default)]
    channel: Option<String>,
    #[serde(default)]
    droplets: Option<Vec<Droplet>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RainDoc {
    solution: SolutionRef,
    #[serde(default)]
    start: f64,
    end: f64,
    rate_per_s: f64,
    #[serde(default = "default_droplet")]
    droplet_ul: f64,
    #[serde(default)]
    rect: Option<Rect>,
}

fn default_droplet() -> f64 {
    DEFAULT_DROPLET_UL
}

struct Locator<'a> {
    text: &'a str,
}

impl Locator<'_> {
    fn at(&self, offset: usize, path: impl Into<String>, message: impl Into<String>) -> ScenarioError {
        let before = &self.text[..offset.min(self.text.len())];
        let line = before.matches('\n').count() + 1;
        let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
        ScenarioError {
            path: path.into(),
            line,
            column,
            message: message.into(),
        }
    }
}

fn parse_kind(s: &str) -> Option<PrimitiveKind> {
    match s {
        "color" => Some(PrimitiveKind::Color),
        "odor" => Some(PrimitiveKind::Odor),
        "shape" => Some(PrimitiveKind::Shape),
        _ => None,
    }
}

fn area_cells(rect: Option<Rect>, cells: &Option<Vec<[usize; 2]>>) -> Result<Vec<(usize, usize)>, String> {
    match (rect, cells) {
        (Some(r), None) => Ok((r.y..r.y + r.h)
            .flat_map(|y| (r.x..r.x + r.w).map(move |x| (x, y)))
            .collect()),
        (None, Some(c)) => Ok(c.iter().map(|[x, y]| (*x, *y)).collect()),
        (None, None) => Err("give either `rect` or `cells`".into()),
        (Some(_), Some(_)) => Err("`rect` and `cells` are mutually exclusive".into()),
    }
}

fn ramp_value(r: &Ramp, cells: &[(usize, usize)], (x, y): (usize, usize)) -> f64 {
    let coord = |c: (usize, usize)| if r.axis == Axis::X { c.0 } else { c.1 } as f64;
    let lo = cells.iter().map(|&c| coord(c)).fold(f64::INFINITY, f64::min);
    let hi = cells.iter().map(|&c| coord(c)).fold(f64::NEG_INFINITY, f64::max);
    let t = if hi > lo { (coord((x, y)) - lo) / (hi - lo) } else { 0.0 };
    let t = match r.shape {
        RampShape::Linear => t,
        RampShape::Triangle => 1.0 - (2.0 * t - 1.0).abs(),
    };
    r.from + (r.to - r.from) * t
}

/// Parse a scenario document into a ready-to-run scene. `seed` overrides the
/// document's seed for generated events. Returns the scene (with all events
/// queued) and the expanded schedule.
pub fn load_scenario(
    text: &str,
    db: &SpeciesDb,
    calibration: &CalibrationSet,
    seed: Option<u64>,
) -> Result<(Scene, Vec<DepositionEvent>), ScenarioError> {
    let loc = Locator { text };
    let doc: Doc = toml::from_str(text).map_err(|e| {
        let offset = e.span().map_or(0, |s| s.start);
        loc.at(offset, "", e.message().to_string())
    })?;
    if *doc.version.get_ref() != 1 {
        return Err(loc.at(
            doc.version.span().start,
            "version",
            format!("unsupported scenario version {}", doc.version.get_ref()),
        ));
    }

    let mut scene = Scene::new(&doc.name, doc.width, doc.height);
    scene.seed = seed.or(doc.seed).unwrap_or(0);
    if let Some(dt) = doc.dt {
        if !(dt > 0.0) {
            return Err(loc.at(0, "dt", format!("dt must be > 0, got {dt}")));
        }
        scene.default_dt = dt;
    } else {
        scene.default_dt = DEFAULT_DT;
    }

    let mut solutions: BTreeMap<String, Solution> = BTreeMap::new();
    for (name, spec) in &doc.solutions {
        let sol = spec
            .get_ref()
            .resolve(db)
            .map_err(|e| loc.at(spec.span().start, format!("solutions.{name}"), e.to_string()))?;
        solutions.insert(name.clone(), sol);
    }
    let resolve = |r: &SolutionRef| -> Result<Solution, String> {
        match r {
            SolutionRef::Named(n) => solutions
                .get(n)
                .cloned()
                .ok_or_else(|| format!("unknown solution `{n}`")),
            SolutionRef::Inline(spec) => spec.resolve(db).map_err(|e| e.to_string()),
        }
    };

    let mut composite_index = BTreeMap::new();
    for (name, c) in &doc.composites {
        let mut parts = Vec::new();
        for (j, p) in c.get_ref().parts.iter().enumerate() {
            let kind = parse_kind(p.get_ref()).ok_or_else(|| {
                loc.at(
                    p.span().start,
                    format!("composites.{name}.parts[{j}]"),
                    format!("unknown primitive kind `{}` (expected color, odor or shape)", p.get_ref()),
                )
            })?;
            parts.push((kind, calibration.clone()));
        }
        let comp = make_composite(parts, c.get_ref().method)
            .map_err(|e| loc.at(c.span().start, format!("composites.{name}"), e.to_string()))?;
        composite_index.insert(name.clone(), scene.add_composite(name, comp));
    }

    for (i, r) in doc.regions.iter().enumerate() {
        let path = format!("regions[{i}]");
        let at = |m: String| loc.at(r.span().start, path.clone(), m);
        let reg = r.get_ref();
        let k = *composite_index
            .get(&reg.composite)
            .ok_or_else(|| at(format!("unknown composite `{}`", reg.composite)))?;
        let cells = area_cells(reg.rect, &reg.cells).map_err(&at)?;
        if reg.thickness.is_some() && reg.thickness_ramp.is_some() {
            return Err(at("`thickness` and `thickness_ramp` are mutually exclusive".into()));
        }
        if let Some(p) = reg.pattern {
            if p.period == 0 || p.on > p.period {
                return Err(at("pattern needs period >= 1 and on <= period".into()));
            }
        }
        for &(x, y) in &cells {
            let thickness = match (reg.thickness, &reg.thickness_ramp) {
                (Some(t), _) => t,
                (None, Some(ramp)) => ramp_value(ramp, &cells, (x, y)),
                (None, None) => 1.0,
            };
            let responsive = reg.pattern.is_none_or(|p| {
                let c = if p.axis == Axis::X { x } else { y };
                c % p.period < p.on
            });
            scene
                .set_cell(x, y, k, thickness, responsive)
                .map_err(|e| at(e.to_string()))?;
        }
    }

    for (i, m) in doc.cloak.iter().enumerate() {
        let at = |msg: String| loc.at(m.span().start, format!("cloak[{i}]"), msg);
        for (x, y) in area_cells(m.get_ref().rect, &m.get_ref().cells).map_err(&at)? {
            scene.set_cloaked(x, y, true).map_err(|e| at(e.to_string()))?;
        }
    }

    for (i, h) in doc.hinges.iter().enumerate() {
        let hd = h.get_ref();
        scene
            .add_hinge(Hinge {
                name: hd.name.clone(),
                cells: hd.cells.iter().map(|[x, y]| (*x, *y)).collect(),
            })
            .map_err(|e| loc.at(h.span().start, format!("hinges[{i}]"), e.to_string()))?;
    }

    for (i, c) in doc.channels.iter().enumerate() {
        let at = |m: String| loc.at(c.span().start, format!("channels[{i}]"), m);
        let cd = c.get_ref();
        let boundary = |r: &SolutionRef| -> Result<Boundary, String> {
            match r {
                SolutionRef::Named(n) if n == "closed" => Ok(Boundary::Closed),
                other => Ok(Boundary::Fixed(resolve(other)?)),
            }
        };
        let fill = resolve(&cd.fill).map_err(&at)?;
        let mut ch = Channel::new(
            cd.length_mm * 1e-3,
            cd.diameter_mm * 1e-3,
            cd.n_cells,
            &fill,
            boundary(&cd.left).map_err(&at)?,
            boundary(&cd.right).map_err(&at)?,
        )
        .map_err(|e| at(e.to_string()))?;
        if let Some(d) = cd.diffusivity {
            ch = ch.with_uniform_diffusivity(d).map_err(|e| at(e.to_string()))?;
        }
        scene
            .add_channel(&cd.id, ch, cd.lining.iter().map(|[x, y]| (*x, *y)).collect())
            .map_err(|e| at(e.to_string()))?;
    }

    let mut schedule = Vec::new();
    let mut last_time = f64::NEG_INFINITY;
    for (i, e) in doc.events.iter().enumerate() {
        let path = format!("events[{i}]");
        let at = |m: String| loc.at(e.span().start, path.clone(), m);
        let ed = e.get_ref();
        if ed.time < last_time {
            return Err(at(format!(
                "events must be sorted by time ({} follows {last_time})",
                ed.time
            )));
        }
        last_time = ed.time;
        let targets = match (ed.mode, &ed.channel, &ed.droplets) {
            (ModeDoc::Global, None, None) => Targets::Global,
            (ModeDoc::Local, Some(c), None) => Targets::Local { channel: c.clone() },
            (ModeDoc::Discrete, None, Some(d)) => Targets::Discrete { droplets: d.clone() },
            _ => {
                return Err(at(
                    "global takes no targets, local needs `channel`, discrete needs `droplets`".into(),
                ))
            }
        };
        let event = DepositionEvent {
            time: ed.time,
            solution: resolve(&ed.solution).map_err(&at)?,
            targets,
            forced: false,
        };
        scene.validate_event(&event).map_err(|e| at(e.to_string()))?;
        if let Some(prev) = schedule.iter().find(|p: &&DepositionEvent| p.time == event.time && overlaps(&p.targets, &event.targets)) {
            return Err(at(format!(
                "two events at t = {} hit the same target ({:?})",
                prev.time,
                event.mode()
            )));
        }
        schedule.push(event);
    }

    if let Some(r) = &doc.rain {
        let at = |m: String| loc.at(r.span().start, "rain", m);
        let rd = r.get_ref();
        if !(rd.rate_per_s > 0.0) || !(rd.end >= rd.start) || !(rd.droplet_ul > 0.0) {
            return Err(at("rain needs rate_per_s > 0, end >= start and droplet_ul > 0".into()));
        }
        let solution = resolve(&rd.solution).map_err(&at)?;
        let area = match rd.rect {
            Some(rect) => area_cells(Some(rect), &None).map_err(&at)?,
            None => (0..doc.height)
                .flat_map(|y| (0..doc.width).map(move |x| (x, y)))
                .collect(),
        };
        if area.is_empty() {
            return Err(at("rain area is empty".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(scene.seed);
        let mut t = rd.start;
        loop {
            let u: f64 = rng.random();
            t += -(1.0 - u).ln() / rd.rate_per_s;
            if t > rd.end {
                break;
            }
            let (x, y) = area[rng.random_range(0..area.len())];
            let event = DepositionEvent {
                time: t,
                solution: solution.clone(),
                targets: Targets::Discrete {
                    droplets: vec![Droplet {
                        x,
                        y,
                        volume_ul: rd.droplet_ul,
                    }],
                },
                forced: false,
            };
            scene.validate_event(&event).map_err(|e| at(e.to_string()))?;
            schedule.push(event);
        }
        // stable: explicit events stay ahead of rain at equal times
        schedule.sort_by(|a, b| a.time.total_cmp(&b.time));
    }

    for ev in &schedule {
        scene
            .enqueue(ev.clone())
            .map_err(|e| loc.at(0, "events", e.to_string()))?;
    }
    Ok((scene, schedule))
}

fn overlaps(a: &Targets, b: &Targets) -> bool {
    match (a, b) {
        (Targets::Global, _) | (_, Targets::Global) => true,
        (Targets::Local { channel: x }, Targets::Local { channel: y }) => x == y,
        (Targets::Discrete { droplets: x }, Targets::Discrete { droplets: y }) => {
            x.iter().any(|p| y.iter().any(|q| p.x == q.x && p.y == q.y))
        }
        _ => false,
    }
}
