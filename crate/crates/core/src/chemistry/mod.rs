//! Aqueous acid-base equilibria at 25 °C.
//!
//! Solutions are ideal (activities equal concentrations) and closed: carbonate
//! does not exchange CO2 with air. The equilibrium pH is the root of the
//! electroneutrality condition
//!
//! ```text
//! f(h) = h - Kw/h + sum_s C_s * z_s(h) = 0
//! ```
//!
//! where `z_s(h)` is the mean charge per mole of species `s` (spectator
//! cations plus the alpha-weighted charge of its acid moiety). Every term is
//! non-decreasing in `h`, so `f` is strictly increasing and has exactly one
//! root. The root is bracketed on `log10 h` in `[-14, 0]`.

mod solution;
mod species;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use solution::{mix, stock_solution, Component, Solution, SolutionSpec};
pub use species::{AcidBaseSpecies, SpeciesDb, SpeciesKind};

use crate::roots::{brent, RootError, Tolerance};

/// Ion product of water at 25 °C.
pub const KW: f64 = 1.0e-14;
pub const DEFAULT_PH_TOL: f64 = 1e-6;
const MAX_ITERATIONS: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChemistryError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("unknown species `{0}`")]
    UnknownSpecies(String),
    #[error("species `{0}` is defined differently in the two solutions")]
    ConflictingSpecies(String),
    #[error("invalid solution: {0}")]
    InvalidSolution(String),
    #[error("requested {requested} L but the reservoir holds {available} L")]
    InsufficientVolume { requested: f64, available: f64 },
    #[error("pH {target:.4} is unreachable; achievable range is [{min:.4}, {max:.4}]")]
    UnreachableSetpoint { target: f64, min: f64, max: f64 },
    #[error("pH must lie in [0, 14], got {0}")]
    PhOutOfRange(f64),
    #[error("internal consistency error: {0}")]
    Internal(String),
}

/// A pH value in `[0, 14]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct PhValue(f64);

impl PhValue {
    pub const NEUTRAL: PhValue = PhValue(7.0);

    pub fn new(value: f64) -> Result<Self, ChemistryError> {
        if (0.0..=14.0).contains(&value) {
            Ok(Self(value))
        } else {
            Err(ChemistryError::PhOutOfRange(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn hydrogen_concentration(self) -> f64 {
        10f64.powf(-self.0)
    }
}

impl TryFrom<f64> for PhValue {
    type Error = ChemistryError;
    fn try_from(v: f64) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<PhValue> for f64 {
    fn from(p: PhValue) -> f64 {
        p.0
    }
}

impl std::fmt::Display for PhValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.4}", self.0)
    }
}

/// Electroneutrality residual (mol/L of net charge) at `log10 [H+] = log_h`.
pub fn charge_balance(solution: &Solution, log_h: f64) -> f64 {
    let h = 10f64.powf(log_h);
    let ions: f64 = solution
        .components()
        .map(|c| c.concentration * c.species.charge_per_mole(log_h))
        .sum();
    h - KW / h + ions
}

/// Equilibrium pH, accurate to `tol` pH units.
pub fn equilibrium_ph(solution: &Solution, tol: f64) -> Result<PhValue, ChemistryError> {
    if !(tol > 0.0) {
        return Err(ChemistryError::Config(format!("tolerance must be > 0, got {tol}")));
    }
    // Tighter internal bracket so the residual at the returned root stays
    // well under `tol` for GRAS-scale concentrations.
    let xtol = (tol * 1e-3).max(1e-13);
    let root = brent(
        |x| charge_balance(solution, x),
        -14.0,
        0.0,
        Tolerance {
            xtol,
            ftol: 0.0,
            max_iter: MAX_ITERATIONS,
        },
    )
    .map_err(|e| match e {
        RootError::NoSignChange { f_lo, f_hi, .. } => ChemistryError::Internal(format!(
            "charge balance has no sign change on pH [0, 14] (f = {f_hi:e} at pH 0, {f_lo:e} at pH 14)"
        )),
        other => ChemistryError::Internal(other.to_string()),
    })?;
    PhValue::new(-root)
}

/// Fraction of a single ionisable group still protonated at `ph`.
pub fn protonation_fraction(ph: f64, pka: f64) -> f64 {
    1.0 / (1.0 + 10f64.powf(ph - pka))
}

/// Base fraction `r` such that mixing `(1 - r)` of the acid reservoir with `r`
/// of the base reservoir reaches `target` within `tol` pH units.
pub fn reservoir_ratio_for_target(
    acid: &Solution,
    base: &Solution,
    target: PhValue,
    tol: f64,
) -> Result<f64, ChemistryError> {
    if !(tol > 0.0) {
        return Err(ChemistryError::Config(format!("tolerance must be > 0, got {tol}")));
    }
    let inner_tol = (tol * 1e-3).max(1e-10);
    let ph_acid = equilibrium_ph(acid, inner_tol)?.value();
    let ph_base = equilibrium_ph(base, inner_tol)?.value();
    let t = target.value();
    if t < ph_acid - tol || t > ph_base + tol {
        return Err(ChemistryError::UnreachableSetpoint {
            target: t,
            min: ph_acid,
            max: ph_base,
        });
    }
    if (t - ph_acid).abs() <= tol {
        return Ok(0.0);
    }
    if (t - ph_base).abs() <= tol {
        return Ok(1.0);
    }
    let mut failure = None;
    let r = brent(
        |r| match Solution::blend(acid, base, r).and_then(|m| equilibrium_ph(&m, inner_tol)) {
            Ok(p) => p.value() - t,
            Err(e) => {
                failure = Some(e);
                f64::NAN
            }
        },
        0.0,
        1.0,
        Tolerance {
            xtol: 1e-15,
            ftol: 0.5 * tol,
            max_iter: MAX_ITERATIONS,
        },
    );
    if let Some(e) = failure {
        return Err(e);
    }
    r.map_err(|e| ChemistryError::Internal(e.to_string()))
}

/// Default stock reservoirs: citric acid at pH 2 and sodium hydroxide at
/// pH 10, one litre each, with concentrations solved from the species file.
pub fn default_reservoirs(db: &SpeciesDb) -> Result<(Solution, Solution), ChemistryError> {
    let acid = stock_solution(db.get("citric_acid")?, PhValue::new(2.0)?, 1.0)?;
    let base = stock_solution(db.get("sodium_hydroxide")?, PhValue::new(10.0)?, 1.0)?;
    Ok((acid, base))
}
