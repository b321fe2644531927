//! Fitting calibration parameters to measurement tables.
//!
//! Measurement tables are CSV files with a header row:
//!
//! | kind  | columns                                   |
//! |-------|-------------------------------------------|
//! | color | `ph,L,a,b` and optional `time`            |
//! | odor  | `ph,intensity` and optional `time`, or `ph,perceived` (0/1) |
//! | shape | `ph,angle` and optional `time`            |
//!
//! Rows without a time are equilibrium readings. Timed rows are readings
//! taken `time` seconds after depositing onto a fresh film and feed the
//! rate-constant fits.

mod lm;

use std::collections::BTreeMap;
use std::io::Read;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use lm::{levenberg_marquardt, numeric_jacobian, LmOptions, LmResult};

use crate::color::Lab;
use crate::materials::{
    params_of, set_params, shape_equilibrium_angle, two_bump, two_bump_with_grad, CalibrationSet, ColorKnot,
    ColorState, MaterialError, OdorState, PrimitiveKind, ShapeState, TWO_BUMP_PARAMS,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibrationError {
    #[error("{component}: under-determined fit, {rows} usable rows for {needed} parameters; {missing}")]
    UnderDetermined {
        component: String,
        rows: usize,
        needed: usize,
        missing: String,
    },
    #[error("row {row}: {message}")]
    Data { row: usize, message: String },
    #[error("table: {0}")]
    Table(String),
    #[error("no measurement tables given")]
    NoTables,
    #[error("{component}: least-squares fit failed at the initial point")]
    FitFailed { component: String },
    #[error(transparent)]
    Material(#[from] MaterialError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Observable {
    Lab { l: f64, a: f64, b: f64 },
    Intensity { value: f64 },
    Perceived { value: bool },
    Angle { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRow {
    pub ph: f64,
    pub time: Option<f64>,
    pub value: Observable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementTable {
    pub kind: PrimitiveKind,
    pub rows: Vec<MeasurementRow>,
}

fn header_index(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.trim().eq_ignore_ascii_case(name))
}

impl MeasurementTable {
    pub fn new(kind: PrimitiveKind, rows: Vec<MeasurementRow>) -> Result<Self, CalibrationError> {
        let t = Self { kind, rows };
        t.validate()?;
        Ok(t)
    }

    pub fn from_csv<R: Read>(kind: PrimitiveKind, reader: R) -> Result<Self, CalibrationError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| CalibrationError::Table(e.to_string()))?
            .clone();
        let col = |name: &str| header_index(&headers, name);
        let need = |name: &str| {
            col(name).ok_or_else(|| CalibrationError::Table(format!("{kind} table needs a `{name}` column")))
        };
        let ph_col = need("ph")?;
        let time_col = col("time");
        let value_cols: Vec<usize> = match kind {
            PrimitiveKind::Color => vec![need("L")?, need("a")?, need("b")?],
            PrimitiveKind::Shape => vec![need("angle")?],
            PrimitiveKind::Odor => match (col("intensity"), col("perceived")) {
                (Some(i), None) => vec![i],
                (None, Some(p)) => vec![p],
                _ => {
                    return Err(CalibrationError::Table(
                        "odor table needs exactly one of `intensity` or `perceived`".into(),
                    ))
                }
            },
        };
        let perceived = kind == PrimitiveKind::Odor && col("perceived").is_some();

        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| CalibrationError::Data {
                row: i,
                message: e.to_string(),
            })?;
            let num = |c: usize| -> Result<f64, CalibrationError> {
                let s = rec.get(c).unwrap_or("");
                s.parse::<f64>().map_err(|_| CalibrationError::Data {
                    row: i,
                    message: format!("`{s}` in column `{}` is not a number", &headers[c]),
                })
            };
            let ph = num(ph_col)?;
            let time = match time_col {
                Some(c) if !rec.get(c).unwrap_or("").is_empty() => Some(num(c)?),
                _ => None,
            };
            let value = match kind {
                PrimitiveKind::Color => Observable::Lab {
                    l: num(value_cols[0])?,
                    a: num(value_cols[1])?,
                    b: num(value_cols[2])?,
                },
                PrimitiveKind::Shape => Observable::Angle {
                    value: num(value_cols[0])?,
                },
                PrimitiveKind::Odor if perceived => {
                    let v = num(value_cols[0])?;
                    if v != 0.0 && v != 1.0 {
                        return Err(CalibrationError::Data {
                            row: i,
                            message: format!("perceived must be 0 or 1, got {v}"),
                        });
                    }
                    Observable::Perceived { value: v == 1.0 }
                }
                PrimitiveKind::Odor => Observable::Intensity {
                    value: num(value_cols[0])?,
                },
            };
            rows.push(MeasurementRow { ph, time, value });
        }
        Self::new(kind, rows)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let perceived = self.rows.iter().any(|r| matches!(r.value, Observable::Perceived { .. }));
        let mut header: Vec<&str> = match (self.kind, perceived) {
            (PrimitiveKind::Color, _) => vec!["ph", "L", "a", "b"],
            (PrimitiveKind::Shape, _) => vec!["ph", "angle"],
            (PrimitiveKind::Odor, true) => vec!["ph", "perceived"],
            (PrimitiveKind::Odor, false) => vec!["ph", "intensity"],
        };
        header.push("time");
        w.write_record(&header).expect("in-memory write");
        for r in &self.rows {
            let mut rec = vec![r.ph.to_string()];
            match r.value {
                Observable::Lab { l, a, b } => rec.extend([l.to_string(), a.to_string(), b.to_string()]),
                Observable::Intensity { value } | Observable::Angle { value } => rec.push(value.to_string()),
                Observable::Perceived { value } => rec.push(u8::from(value).to_string()),
            }
            rec.push(r.time.map(|t| t.to_string()).unwrap_or_default());
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
    }

    pub fn validate(&self) -> Result<(), CalibrationError> {
        let mut keys = BTreeMap::new();
        for (i, r) in self.rows.iter().enumerate() {
            let bad = |m: String| Err(CalibrationError::Data { row: i, message: m });
            let finite = match r.value {
                Observable::Lab { l, a, b } => l.is_finite() && a.is_finite() && b.is_finite(),
                Observable::Intensity { value } | Observable::Angle { value } => value.is_finite(),
                Observable::Perceived { .. } => true,
            };
            if !finite || !r.ph.is_finite() || r.time.is_some_and(|t| !t.is_finite()) {
                return bad("non-finite value".into());
            }
            if !(0.0..=14.0).contains(&r.ph) {
                return bad(format!("pH {} outside [0, 14]", r.ph));
            }
            if r.time.is_some_and(|t| t < 0.0) {
                return bad("time must be >= 0".into());
            }
            let kind_ok = matches!(
                (self.kind, r.value),
                (PrimitiveKind::Color, Observable::Lab { .. })
                    | (PrimitiveKind::Odor, Observable::Intensity { .. } | Observable::Perceived { .. })
                    | (PrimitiveKind::Shape, Observable::Angle { .. })
            );
            if !kind_ok {
                return bad(format!("observable does not match a {} table", self.kind));
            }
            let key = (r.ph.to_bits(), r.time.map(f64::to_bits));
            if let Some(j) = keys.insert(key, i) {
                return bad(format!("duplicate (pH, time) key, first seen at row {j}"));
            }
        }
        let mut phs: Vec<f64> = self.rows.iter().map(|r| r.ph).collect();
        phs.sort_by(f64::total_cmp);
        phs.dedup();
        if phs.len() < 3 {
            return Err(CalibrationError::Table(format!(
                "need at least 3 distinct pH values, got {}",
                phs.len()
            )));
        }
        Ok(())
    }

    fn equilibrium_rows(&self) -> impl Iterator<Item = &MeasurementRow> {
        self.rows.iter().filter(|r| r.time.is_none())
    }

    fn timed_rows(&self) -> impl Iterator<Item = &MeasurementRow> {
        self.rows.iter().filter(|r| r.time.is_some())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterFit {
    pub name: String,
    pub initial: f64,
    pub fitted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentFit {
    pub component: String,
    pub rows: usize,
    pub residual_norm_before: f64,
    pub residual_norm_after: f64,
    pub iterations: usize,
    pub converged: bool,
    pub parameters: Vec<ParameterFit>,
    /// Objective at each accepted iterate; empty for direct (non-iterative) updates.
    pub objective_history: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub components: Vec<ComponentFit>,
    /// Parameters retained from the initial set for lack of data.
    pub retained: Vec<String>,
}

fn norm_from_objective(f: f64) -> f64 {
    (2.0 * f).sqrt()
}

fn lm_component(
    component: &str,
    names: &[String],
    initial: &[f64],
    rows: usize,
    res: LmResult,
) -> ComponentFit {
    ComponentFit {
        component: component.to_string(),
        rows,
        residual_norm_before: norm_from_objective(res.initial_objective()),
        residual_norm_after: norm_from_objective(res.final_objective()),
        iterations: res.iterations,
        converged: res.converged,
        parameters: names
            .iter()
            .zip(initial)
            .zip(&res.params)
            .map(|((n, i), f)| ParameterFit {
                name: n.clone(),
                initial: *i,
                fitted: *f,
            })
            .collect(),
        objective_history: res.objective_history,
    }
}

/// Fit the two-bump shape curve to `(pH, angle)` pairs, keeping the
/// acid-side width ratio fixed.
pub fn fit_shape_curve(
    data: &[(f64, f64)],
    initial: &[f64; TWO_BUMP_PARAMS],
    kappa: f64,
    opts: LmOptions,
) -> Result<LmResult, CalibrationError> {
    if data.len() < TWO_BUMP_PARAMS {
        return Err(CalibrationError::UnderDetermined {
            component: "shape.curve".into(),
            rows: data.len(),
            needed: TWO_BUMP_PARAMS,
            missing: format!(
                "add equilibrium angle rows at {} more distinct pH values",
                TWO_BUMP_PARAMS - data.len()
            ),
        });
    }
    let to_arr = |p: &[f64]| -> [f64; TWO_BUMP_PARAMS] { p.try_into().expect("six parameters") };
    let residuals = |p: &[f64]| {
        let p = to_arr(p);
        if p[2] <= 0.0 || p[5] <= 0.0 {
            return None;
        }
        Some(DVector::from_iterator(
            data.len(),
            data.iter().map(|&(x, y)| two_bump(&p, kappa, x) - y),
        ))
    };
    let jacobian = |p: &[f64]| {
        let p = to_arr(p);
        let mut j = DMatrix::zeros(data.len(), TWO_BUMP_PARAMS);
        for (i, &(x, _)) in data.iter().enumerate() {
            let (_, g) = two_bump_with_grad(&p, kappa, x);
            for (k, gk) in g.iter().enumerate() {
                j[(i, k)] = *gk;
            }
        }
        j
    };
    levenberg_marquardt(residuals, jacobian, initial, opts).ok_or(CalibrationError::FitFailed {
        component: "shape.curve".into(),
    })
}

/// Fit `I(pH) = i_max / (1 + 10^(pH - pka))` to intensity readings.
pub fn fit_odor_logistic(data: &[(f64, f64)], initial: [f64; 2], opts: LmOptions) -> Result<LmResult, CalibrationError> {
    if data.len() < 2 {
        return Err(CalibrationError::UnderDetermined {
            component: "odor.logistic".into(),
            rows: data.len(),
            needed: 2,
            missing: "add steady intensity rows at 2 or more distinct pH values".into(),
        });
    }
    let residuals = |p: &[f64]| {
        Some(DVector::from_iterator(
            data.len(),
            data.iter().map(|&(x, y)| p[0] / (1.0 + 10f64.powf(x - p[1])) - y),
        ))
    };
    let jacobian = |p: &[f64]| {
        let mut j = DMatrix::zeros(data.len(), 2);
        for (i, &(x, _)) in data.iter().enumerate() {
            let q = 10f64.powf(x - p[1]);
            j[(i, 0)] = 1.0 / (1.0 + q);
            j[(i, 1)] = p[0] * q * std::f64::consts::LN_10 / (1.0 + q).powi(2);
        }
        j
    };
    levenberg_marquardt(residuals, jacobian, &initial, opts).ok_or(CalibrationError::FitFailed {
        component: "odor.logistic".into(),
    })
}

/// One time constant fitted in log space against a simulated trajectory.
fn fit_time_constant<F>(
    component: &str,
    name: &str,
    initial_tau: f64,
    m: usize,
    rows: usize,
    mut model_residuals: F,
) -> Result<(f64, ComponentFit), CalibrationError>
where
    F: FnMut(f64) -> Option<DVector<f64>>,
{
    let mut res = |p: &[f64]| {
        let tau = p[0].exp();
        if !tau.is_finite() || tau <= 0.0 {
            return None;
        }
        model_residuals(tau)
    };
    let p0 = [initial_tau.ln()];
    let jac_res = std::cell::RefCell::new(&mut res);
    let out = levenberg_marquardt(
        |p| (jac_res.borrow_mut())(p),
        |p| numeric_jacobian(|q| (jac_res.borrow_mut())(q), p, m),
        &p0,
        LmOptions::default(),
    )
    .ok_or(CalibrationError::FitFailed {
        component: component.into(),
    })?;
    let tau = out.params[0].exp();
    let mut fit = lm_component(component, &[name.to_string()], &[initial_tau], rows, out);
    fit.parameters[0].fitted = tau;
    Ok((tau, fit))
}

fn lab_of(o: Observable) -> Lab {
    match o {
        Observable::Lab { l, a, b } => Lab::new(l, a, b),
        _ => unreachable!("validated color table"),
    }
}

fn scalar_of(o: Observable) -> f64 {
    match o {
        Observable::Intensity { value } | Observable::Angle { value } => value,
        Observable::Perceived { value } => f64::from(u8::from(value)),
        Observable::Lab { .. } => unreachable!("validated scalar table"),
    }
}

fn fit_color(table: &MeasurementTable, calib: &mut CalibrationSet, report: &mut FitReport) -> Result<(), CalibrationError> {
    let mut knots: Vec<ColorKnot> = table
        .equilibrium_rows()
        .map(|r| {
            let lab = lab_of(r.value);
            ColorKnot {
                ph: r.ph,
                l: lab.l,
                a: lab.a,
                b: lab.b,
            }
        })
        .collect();
    if knots.is_empty() {
        report.retained.push("color.knots".into());
    } else {
        knots.sort_by(|a, b| a.ph.total_cmp(&b.ph));
        let before = calib.color.knots.clone();
        calib.color.knots = knots;
        calib.validate()?;
        let rows = calib.color.knots.len();
        report.components.push(ComponentFit {
            component: "color.knots".into(),
            rows,
            residual_norm_before: knot_residual(&before, &calib.color.knots),
            residual_norm_after: 0.0,
            iterations: 0,
            converged: true,
            parameters: Vec::new(),
            objective_history: Vec::new(),
        });
    }

    let timed: Vec<&MeasurementRow> = table.timed_rows().collect();
    if timed.is_empty() {
        report.retained.push("color.tau_bands".into());
        return Ok(());
    }
    for b in 0..calib.color.tau_bands.len() {
        let in_band: Vec<&MeasurementRow> = timed
            .iter()
            .copied()
            .filter(|r| band_of(calib, r.ph) == b)
            .collect();
        if in_band.is_empty() {
            report.retained.push(format!("color.tau_bands[{b}]"));
            continue;
        }
        let base = calib.clone();
        let m = 3 * in_band.len();
        let (tau, fit) = fit_time_constant(
            &format!("color.tau_bands[{b}]"),
            "tau_s",
            base.color.tau_bands[b].tau_s,
            m,
            in_band.len(),
            |tau| {
                let mut c = base.clone();
                c.color.tau_bands[b].tau_s = tau;
                let fresh = ColorState::fresh(&c);
                let mut out = Vec::with_capacity(m);
                for r in &in_band {
                    let s = fresh.deposit(r.ph, &c).ok()?.advance(r.time?, &c).ok()?;
                    let obs = lab_of(r.value);
                    out.extend([s.current.l - obs.l, s.current.a - obs.a, s.current.b - obs.b]);
                }
                Some(DVector::from_vec(out))
            },
        )?;
        calib.color.tau_bands[b].tau_s = tau;
        report.components.push(fit);
    }
    Ok(())
}

fn band_of(calib: &CalibrationSet, ph: f64) -> usize {
    let bands = &calib.color.tau_bands;
    bands.iter().position(|b| ph <= b.max_ph).unwrap_or(bands.len() - 1)
}

fn knot_residual(before: &[ColorKnot], after: &[ColorKnot]) -> f64 {
    let tmp = |knots: &[ColorKnot], ph: f64| -> Option<Lab> {
        let i = knots.partition_point(|k| k.ph <= ph);
        if i == 0 || i > knots.len() {
            return None;
        }
        if i == knots.len() {
            let k = &knots[i - 1];
            return (k.ph == ph).then(|| Lab::new(k.l, k.a, k.b));
        }
        let (k0, k1) = (&knots[i - 1], &knots[i]);
        let t = (ph - k0.ph) / (k1.ph - k0.ph);
        Some(Lab::new(k0.l, k0.a, k0.b).lerp(&Lab::new(k1.l, k1.a, k1.b), t))
    };
    after
        .iter()
        .filter_map(|k| tmp(before, k.ph).map(|old| old.delta_e(&Lab::new(k.l, k.a, k.b)).powi(2)))
        .sum::<f64>()
        .sqrt()
}

fn fit_shape(table: &MeasurementTable, calib: &mut CalibrationSet, report: &mut FitReport) -> Result<(), CalibrationError> {
    let data: Vec<(f64, f64)> = table.equilibrium_rows().map(|r| (r.ph, scalar_of(r.value))).collect();
    if data.is_empty() {
        report.retained.push("shape.bumps".into());
    } else {
        let p0 = params_of(&calib.shape);
        let res = fit_shape_curve(&data, &p0, calib.shape.acid_side_width_ratio, LmOptions::default())?;
        let p: [f64; TWO_BUMP_PARAMS] = res.params.as_slice().try_into().expect("six parameters");
        let names: Vec<String> = ["center", "amplitude", "width"]
            .iter()
            .cycle()
            .take(TWO_BUMP_PARAMS)
            .enumerate()
            .map(|(i, n)| format!("bumps[{}].{n}", i / 3))
            .collect();
        report
            .components
            .push(lm_component("shape.curve", &names, &p0, data.len(), res));
        set_params(&mut calib.shape, &p);
        calib.validate()?;
    }

    let timed: Vec<&MeasurementRow> = table.timed_rows().collect();
    let handoff = calib.shape.handoff_factor * calib.shape.tau_common_s;
    let usable: Vec<&MeasurementRow> = timed.iter().copied().filter(|r| r.time.is_some_and(|t| t > handoff)).collect();
    if usable.is_empty() {
        report.retained.push("shape.tau_ph_s".into());
        return Ok(());
    }
    // the initial angle is needed to reach every usable row's pH
    for r in &usable {
        shape_equilibrium_angle(r.ph, calib)?;
    }
    let base = calib.clone();
    let (tau, fit) = fit_time_constant("shape.tau_ph_s", "tau_ph_s", base.shape.tau_ph_s, usable.len(), usable.len(), |tau| {
        let mut c = base.clone();
        c.shape.tau_ph_s = tau;
        let fresh = ShapeState::fresh();
        let mut out = Vec::with_capacity(usable.len());
        for r in &usable {
            let s = fresh.deposit(r.ph, &c).ok()?.advance(r.time?, &c).ok()?;
            out.push(s.angle - scalar_of(r.value));
        }
        Some(DVector::from_vec(out))
    })?;
    calib.shape.tau_ph_s = tau;
    report.components.push(fit);
    Ok(())
}

fn fit_odor(table: &MeasurementTable, calib: &mut CalibrationSet, report: &mut FitReport) -> Result<(), CalibrationError> {
    let eq: Vec<&MeasurementRow> = table.equilibrium_rows().collect();
    let binary = eq.iter().any(|r| matches!(r.value, Observable::Perceived { .. }));
    if eq.is_empty() {
        report.retained.push("odor.i_max".into());
        report.retained.push("odor.pka_eff".into());
    } else if binary {
        let on = eq
            .iter()
            .filter(|r| matches!(r.value, Observable::Perceived { value: true }))
            .map(|r| r.ph)
            .fold(f64::NEG_INFINITY, f64::max);
        let off = eq
            .iter()
            .filter(|r| matches!(r.value, Observable::Perceived { value: false }))
            .map(|r| r.ph)
            .fold(f64::INFINITY, f64::min);
        if !on.is_finite() || !off.is_finite() {
            return Err(CalibrationError::UnderDetermined {
                component: "odor.threshold".into(),
                rows: eq.len(),
                needed: 2,
                missing: "need both perceived and not-perceived rows to place the switch".into(),
            });
        }
        if on >= off {
            return Err(CalibrationError::Table(format!(
                "perceived rows reach pH {on} but not-perceived rows start at pH {off}; the switch is not separable"
            )));
        }
        let o = &calib.odor;
        let ratio = o.i_max / o.perception_threshold;
        if !(ratio > 1.0) {
            return Err(CalibrationError::Table("perception threshold must lie below i_max".into()));
        }
        let boundary = 0.5 * (on + off);
        let before = o.pka_eff;
        // I(boundary) = threshold  <=>  pKa = boundary - log10(i_max / threshold - 1)
        calib.odor.pka_eff = boundary - (ratio - 1.0).log10();
        report.components.push(ComponentFit {
            component: "odor.threshold".into(),
            rows: eq.len(),
            residual_norm_before: 0.0,
            residual_norm_after: 0.0,
            iterations: 0,
            converged: true,
            parameters: vec![ParameterFit {
                name: "pka_eff".into(),
                initial: before,
                fitted: calib.odor.pka_eff,
            }],
            objective_history: Vec::new(),
        });
    } else {
        let data: Vec<(f64, f64)> = eq.iter().map(|r| (r.ph, scalar_of(r.value))).collect();
        let p0 = [calib.odor.i_max, calib.odor.pka_eff];
        let res = fit_odor_logistic(&data, p0, LmOptions::default())?;
        calib.odor.i_max = res.params[0];
        calib.odor.pka_eff = res.params[1];
        report.components.push(lm_component(
            "odor.logistic",
            &["i_max".into(), "pka_eff".into()],
            &p0,
            data.len(),
            res,
        ));
        calib.validate()?;
    }

    let delay = calib.odor.release_delay_s;
    let usable: Vec<&MeasurementRow> = table
        .timed_rows()
        .filter(|r| matches!(r.value, Observable::Intensity { .. }) && r.time.is_some_and(|t| t > delay))
        .collect();
    if usable.is_empty() {
        report.retained.push("odor.onset_tau_s".into());
        return Ok(());
    }
    let base = calib.clone();
    let (tau, fit) = fit_time_constant("odor.onset_tau_s", "onset_tau_s", base.odor.onset_tau_s, usable.len(), usable.len(), |tau| {
        let mut c = base.clone();
        c.odor.onset_tau_s = tau;
        let fresh = OdorState::fresh(&c);
        let mut out = Vec::with_capacity(usable.len());
        for r in &usable {
            let s = fresh.deposit(r.ph, &c).ok()?.advance(r.time?, &c).ok()?;
            out.push(s.intensity - scalar_of(r.value));
        }
        Some(DVector::from_vec(out))
    })?;
    calib.odor.onset_tau_s = tau;
    report.components.push(fit);
    Ok(())
}

/// Fit every parameter the tables inform, keeping the rest from `initial`.
pub fn fit_calibration(
    tables: &[MeasurementTable],
    initial: &CalibrationSet,
) -> Result<(CalibrationSet, FitReport), CalibrationError> {
    if tables.is_empty() {
        return Err(CalibrationError::NoTables);
    }
    let mut calib = initial.clone();
    let mut report = FitReport::default();
    for t in tables {
        t.validate()?;
    }
    // colour knots and curve shapes first; rate constants depend on them
    for kind in [PrimitiveKind::Color, PrimitiveKind::Shape, PrimitiveKind::Odor] {
        if !tables.iter().any(|t| t.kind == kind) {
            let names: &[&str] = match kind {
                PrimitiveKind::Color => &["color.knots", "color.tau_bands"],
                PrimitiveKind::Shape => &["shape.bumps", "shape.tau_ph_s"],
                PrimitiveKind::Odor => &["odor.i_max", "odor.pka_eff", "odor.onset_tau_s"],
            };
            report.retained.extend(names.iter().map(|n| n.to_string()));
        }
        for t in tables.iter().filter(|t| t.kind == kind) {
            match kind {
                PrimitiveKind::Color => fit_color(t, &mut calib, &mut report)?,
                PrimitiveKind::Shape => fit_shape(t, &mut calib, &mut report)?,
                PrimitiveKind::Odor => fit_odor(t, &mut calib, &mut report)?,
            }
        }
    }
    calib.validate()?;
    Ok((calib, report))
}
