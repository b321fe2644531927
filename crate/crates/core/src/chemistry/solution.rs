use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{equilibrium_ph, AcidBaseSpecies, ChemistryError, PhValue, SpeciesDb, DEFAULT_PH_TOL};
use crate::roots::{brent, Tolerance};

#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub species: AcidBaseSpecies,
    /// Analytical concentration, mol/L.
    pub concentration: f64,
}

/// Aqueous mixture at 25 °C. Water itself is implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    components: BTreeMap<String, Component>,
    volume_l: f64,
}

impl Solution {
    pub fn water(volume_l: f64) -> Result<Self, ChemistryError> {
        Self::new(Vec::new(), volume_l)
    }

    pub fn new(
        contents: Vec<(AcidBaseSpecies, f64)>,
        volume_l: f64,
    ) -> Result<Self, ChemistryError> {
        if !(volume_l > 0.0 && volume_l.is_finite()) {
            return Err(ChemistryError::InvalidSolution(format!(
                "volume must be positive, got {volume_l}"
            )));
        }
        let mut components = BTreeMap::new();
        for (species, concentration) in contents {
            if !(concentration >= 0.0 && concentration.is_finite()) {
                return Err(ChemistryError::InvalidSolution(format!(
                    "concentration of `{}` must be >= 0, got {concentration}",
                    species.name
                )));
            }
            add_component(&mut components, species, concentration)?;
        }
        Ok(Self {
            components,
            volume_l,
        })
    }

    pub fn volume_l(&self) -> f64 {
        self.volume_l
    }

    pub fn components(&self) -> impl Iterator<Item = &Component> {
        self.components.values()
    }

    pub fn concentration(&self, name: &str) -> f64 {
        self.components.get(name).map_or(0.0, |c| c.concentration)
    }

    pub fn is_water(&self) -> bool {
        self.components.values().all(|c| c.concentration == 0.0)
    }

    pub fn with_volume(mut self, volume_l: f64) -> Result<Self, ChemistryError> {
        if !(volume_l > 0.0 && volume_l.is_finite()) {
            return Err(ChemistryError::InvalidSolution(format!(
                "volume must be positive, got {volume_l}"
            )));
        }
        self.volume_l = volume_l;
        Ok(self)
    }

    /// Moles of each species contained in the whole volume.
    pub fn moles(&self) -> BTreeMap<String, f64> {
        self.components
            .iter()
            .map(|(k, c)| (k.clone(), c.concentration * self.volume_l))
            .collect()
    }

    /// Composition `(1 - r) * a + r * b` at unit volume. Used where only the
    /// composition of a mixing ratio matters, not reservoir bookkeeping.
    pub fn blend(a: &Solution, b: &Solution, r: f64) -> Result<Solution, ChemistryError> {
        let mut components = BTreeMap::new();
        if r < 1.0 {
            for c in a.components.values() {
                add_component(&mut components, c.species.clone(), (1.0 - r) * c.concentration)?;
            }
        }
        if r > 0.0 {
            for c in b.components.values() {
                add_component(&mut components, c.species.clone(), r * c.concentration)?;
            }
        }
        Ok(Solution {
            components,
            volume_l: 1.0,
        })
    }

    /// Rebuild a solution from parallel species/concentration slices.
    pub(crate) fn from_concentrations(
        species: &[AcidBaseSpecies],
        conc: &[f64],
        volume_l: f64,
    ) -> Solution {
        let components = species
            .iter()
            .zip(conc)
            .map(|(s, &c)| {
                (
                    s.name.clone(),
                    Component {
                        species: s.clone(),
                        concentration: c.max(0.0),
                    },
                )
            })
            .collect();
        Solution {
            components,
            volume_l,
        }
    }
}

fn add_component(
    map: &mut BTreeMap<String, Component>,
    species: AcidBaseSpecies,
    concentration: f64,
) -> Result<(), ChemistryError> {
    match map.get_mut(&species.name) {
        Some(existing) => {
            if existing.species != species {
                return Err(ChemistryError::ConflictingSpecies(species.name));
            }
            existing.concentration += concentration;
        }
        None => {
            map.insert(
                species.name.clone(),
                Component {
                    species,
                    concentration,
                },
            );
        }
    }
    Ok(())
}

/// Draw `vol_a` litres from `a` and `vol_b` litres from `b` and combine them.
///
/// Ideal mixing: moles add and volumes add. No equilibrium is computed.
pub fn mix(a: &Solution, vol_a: f64, b: &Solution, vol_b: f64) -> Result<Solution, ChemistryError> {
    if !(vol_a >= 0.0 && vol_b >= 0.0) || !(vol_a + vol_b > 0.0) {
        return Err(ChemistryError::InvalidSolution(format!(
            "mixing volumes must be >= 0 with a positive total, got {vol_a} and {vol_b}"
        )));
    }
    for (vol, src) in [(vol_a, a), (vol_b, b)] {
        if vol > src.volume_l {
            return Err(ChemistryError::InsufficientVolume {
                requested: vol,
                available: src.volume_l,
            });
        }
    }
    let total = vol_a + vol_b;
    let mut moles: BTreeMap<String, Component> = BTreeMap::new();
    for (vol, src) in [(vol_a, a), (vol_b, b)] {
        if vol == 0.0 {
            continue;
        }
        for c in src.components.values() {
            add_component(&mut moles, c.species.clone(), c.concentration * vol)?;
        }
    }
    for c in moles.values_mut() {
        c.concentration /= total;
    }
    Ok(Solution {
        components: moles,
        volume_l: total,
    })
}

/// Single-species solution whose equilibrium pH equals `target`.
///
/// The concentration is found by root-finding on log10(concentration).
pub fn stock_solution(
    species: &AcidBaseSpecies,
    target: PhValue,
    volume_l: f64,
) -> Result<Solution, ChemistryError> {
    let ph_of = |log_c: f64| -> Result<f64, ChemistryError> {
        let s = Solution::new(vec![(species.clone(), 10f64.powf(log_c))], volume_l)?;
        Ok(equilibrium_ph(&s, 1e-10)?.value())
    };
    let (lo, hi) = (-12.0, -0.5);
    let (p_lo, p_hi) = (ph_of(lo)?, ph_of(hi)?);
    let t = target.value();
    if (t - p_lo) * (t - p_hi) > 0.0 {
        let (min, max) = (p_lo.min(p_hi), p_lo.max(p_hi));
        return Err(ChemistryError::UnreachableSetpoint {
            target: t,
            min,
            max,
        });
    }
    let mut failure = None;
    let log_c = brent(
        |x| match ph_of(x) {
            Ok(p) => p - t,
            Err(e) => {
                failure = Some(e);
                f64::NAN
            }
        },
        lo,
        hi,
        Tolerance {
            xtol: 1e-13,
            ftol: DEFAULT_PH_TOL * 1e-3,
            max_iter: 200,
        },
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let log_c = log_c.map_err(|e| ChemistryError::Internal(e.to_string()))?;
    Solution::new(vec![(species.clone(), 10f64.powf(log_c))], volume_l)
}

/// On-disk solution description.
///
/// Either an explicit `[contents]` table of mol/L values, or a `stock`
/// species plus a target `ph` that is solved for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionSpec {
    #[serde(default = "default_volume")]
    pub volume_l: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stock: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ph: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub contents: BTreeMap<String, f64>,
}

fn default_volume() -> f64 {
    1.0
}

impl SolutionSpec {
    pub fn parse(text: &str) -> Result<Self, ChemistryError> {
        toml::from_str(text).map_err(|e| ChemistryError::InvalidSolution(e.to_string()))
    }

    pub fn resolve(&self, db: &SpeciesDb) -> Result<Solution, ChemistryError> {
        match (&self.stock, self.ph) {
            (Some(name), Some(ph)) => {
                if !self.contents.is_empty() {
                    return Err(ChemistryError::InvalidSolution(
                        "`stock` and `contents` are mutually exclusive".into(),
                    ));
                }
                stock_solution(db.get(name)?, PhValue::new(ph)?, self.volume_l)
            }
            (None, None) => {
                let contents = self
                    .contents
                    .iter()
                    .map(|(name, &c)| Ok((db.get(name)?.clone(), c)))
                    .collect::<Result<Vec<_>, ChemistryError>>()?;
                Solution::new(contents, self.volume_l)
            }
            _ => Err(ChemistryError::InvalidSolution(
                "`stock` requires `ph` and vice versa".into(),
            )),
        }
    }

    pub fn from_solution(s: &Solution) -> Self {
        Self {
            volume_l: s.volume_l,
            stock: None,
            ph: None,
            contents: s
                .components
                .iter()
                .map(|(k, c)| (k.clone(), c.concentration))
                .collect(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("solution serializes")
    }
}
