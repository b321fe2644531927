use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ChemistryError;

const BUILTIN_DB: &str = include_str!("../../data/species.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpeciesKind {
    WeakPolyproticAcid,
    StrongAcid,
    StrongBase,
    ConjugateSalt,
}

impl SpeciesKind {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "weak-polyprotic-acid" => Self::WeakPolyproticAcid,
            "strong-acid" => Self::StrongAcid,
            "strong-base" => Self::StrongBase,
            "conjugate-salt" => Self::ConjugateSalt,
            _ => return None,
        })
    }
}

/// One dissolved acid/base species.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AcidBaseSpecies {
    pub name: String,
    pub kind: SpeciesKind,
    /// Strictly increasing; empty for strong acids and bases.
    pub pka: Vec<f64>,
    /// Charge of the fully protonated form of the acid moiety.
    pub charge: i32,
    pub counter_cations: u32,
    pub protons: u32,
}

impl AcidBaseSpecies {
    pub fn weak_acid(name: &str, pka: &[f64], charge: i32) -> Result<Self, ChemistryError> {
        Self {
            name: name.to_string(),
            kind: SpeciesKind::WeakPolyproticAcid,
            pka: pka.to_vec(),
            charge,
            counter_cations: 0,
            protons: 0,
        }
        .validated()
    }

    pub fn strong_acid(name: &str, protons: u32) -> Result<Self, ChemistryError> {
        Self {
            name: name.to_string(),
            kind: SpeciesKind::StrongAcid,
            pka: Vec::new(),
            charge: 0,
            counter_cations: 0,
            protons,
        }
        .validated()
    }

    pub fn strong_base(name: &str, counter_cations: u32) -> Result<Self, ChemistryError> {
        Self {
            name: name.to_string(),
            kind: SpeciesKind::StrongBase,
            pka: Vec::new(),
            charge: 0,
            counter_cations,
            protons: 0,
        }
        .validated()
    }

    pub fn salt(
        name: &str,
        pka: &[f64],
        charge: i32,
        counter_cations: u32,
    ) -> Result<Self, ChemistryError> {
        Self {
            name: name.to_string(),
            kind: SpeciesKind::ConjugateSalt,
            pka: pka.to_vec(),
            charge,
            counter_cations,
            protons: 0,
        }
        .validated()
    }

    fn validated(self) -> Result<Self, ChemistryError> {
        let bad = |reason: &str| ChemistryError::Config(format!("species `{}`: {reason}", self.name));
        if self.name.is_empty() {
            return Err(ChemistryError::Config("species with empty name".into()));
        }
        if self.pka.iter().any(|p| !p.is_finite()) {
            return Err(bad("non-finite pKa"));
        }
        if self.pka.windows(2).any(|w| w[0] >= w[1]) {
            return Err(bad("pKa list must be strictly increasing"));
        }
        match self.kind {
            SpeciesKind::StrongAcid | SpeciesKind::StrongBase if !self.pka.is_empty() => {
                Err(bad("strong acids and bases take no pKa list"))
            }
            SpeciesKind::StrongAcid if self.protons == 0 => Err(bad("strong acid releases no protons")),
            SpeciesKind::WeakPolyproticAcid | SpeciesKind::ConjugateSalt if self.pka.is_empty() => {
                Err(bad("weak acids and salts need at least one pKa"))
            }
            _ => Ok(self),
        }
    }

    /// Net charge carried per mole of this species at `log10 [H+] = log_h`,
    /// excluding H+ and OH- themselves.
    pub fn charge_per_mole(&self, log_h: f64) -> f64 {
        match self.kind {
            SpeciesKind::StrongAcid => f64::from(self.charge) - f64::from(self.protons),
            SpeciesKind::StrongBase => f64::from(self.counter_cations),
            SpeciesKind::WeakPolyproticAcid | SpeciesKind::ConjugateSalt => {
                f64::from(self.counter_cations) + self.mean_acid_charge(-log_h)
            }
        }
    }

    /// Speciation fractions of the acid moiety, index = protons removed.
    pub fn alpha_fractions(&self, ph: f64) -> Vec<f64> {
        // log10 of the unnormalised weight of each deprotonation state
        let mut logs = Vec::with_capacity(self.pka.len() + 1);
        let mut acc = 0.0;
        logs.push(acc);
        for pka in &self.pka {
            acc += ph - pka;
            logs.push(acc);
        }
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = logs.iter().map(|l| 10f64.powf(l - max)).collect();
        let total: f64 = weights.iter().sum();
        weights.into_iter().map(|w| w / total).collect()
    }

    fn mean_acid_charge(&self, ph: f64) -> f64 {
        self.alpha_fractions(ph)
            .iter()
            .enumerate()
            .map(|(i, a)| a * f64::from(self.charge - i as i32))
            .sum()
    }
}

#[derive(Debug, Deserialize)]
struct RawSpecies {
    name: String,
    #[serde(default)]
    formula: Option<String>,
    kind: String,
    #[serde(default)]
    pka: Vec<f64>,
    #[serde(default)]
    charge: i32,
    #[serde(default)]
    counter_cations: u32,
    #[serde(default)]
    protons: Option<u32>,
}

#[derive(Debug, Deserialize)]
struct RawDb {
    version: u32,
    #[serde(default)]
    species: Vec<RawSpecies>,
}

/// Named collection of species, usually loaded from a species file.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeciesDb {
    entries: BTreeMap<String, AcidBaseSpecies>,
    formulas: BTreeMap<String, String>,
}

impl SpeciesDb {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_DB).expect("built-in species database is valid")
    }

    pub fn builtin_source() -> &'static str {
        BUILTIN_DB
    }

    pub fn load(path: &Path) -> Result<Self, ChemistryError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ChemistryError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ChemistryError> {
        let raw: RawDb =
            toml::from_str(text).map_err(|e| ChemistryError::Config(format!("species file: {e}")))?;
        if raw.version != 1 {
            return Err(ChemistryError::Config(format!(
                "unsupported species file version {}",
                raw.version
            )));
        }
        let mut db = Self {
            entries: BTreeMap::new(),
            formulas: BTreeMap::new(),
        };
        for r in raw.species {
            let kind = SpeciesKind::parse(&r.kind).ok_or_else(|| {
                ChemistryError::Config(format!("species `{}`: unsupported kind `{}`", r.name, r.kind))
            })?;
            let protons = r.protons.unwrap_or(match kind {
                SpeciesKind::StrongAcid => 1,
                _ => 0,
            });
            let sp = AcidBaseSpecies {
                name: r.name.clone(),
                kind,
                pka: r.pka,
                charge: r.charge,
                counter_cations: r.counter_cations,
                protons,
            }
            .validated()?;
            if db.entries.insert(r.name.clone(), sp).is_some() {
                return Err(ChemistryError::Config(format!("duplicate species `{}`", r.name)));
            }
            if let Some(f) = r.formula {
                db.formulas.insert(r.name, f);
            }
        }
        Ok(db)
    }

    pub fn get(&self, name: &str) -> Result<&AcidBaseSpecies, ChemistryError> {
        self.entries
            .get(name)
            .ok_or_else(|| ChemistryError::UnknownSpecies(name.to_string()))
    }

    pub fn formula(&self, name: &str) -> Option<&str> {
        self.formulas.get(name).map(String::as_str)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn insert(&mut self, species: AcidBaseSpecies) {
        self.entries.insert(species.name.clone(), species);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_has_required_species() {
        let db = SpeciesDb::builtin();
        for name in [
            "citric_acid",
            "sodium_citrate",
            "sodium_bicarbonate",
            "sodium_hydroxide",
        ] {
            db.get(name).unwrap();
        }
        assert_eq!(db.get("citric_acid").unwrap().pka, vec![3.13, 4.76, 6.40]);
        assert_eq!(db.get("sodium_bicarbonate").unwrap().pka, vec![6.35, 10.33]);
        assert_eq!(db.formula("citric_acid"), Some("H3Cit"));
    }

    #[test]
    fn unknown_kind_is_a_config_error() {
        let text = "version = 1\n[[species]]\nname = \"x\"\nkind = \"zwitterion\"\npka = [1.0]\n";
        let err = SpeciesDb::parse(text).unwrap_err();
        assert!(matches!(err, ChemistryError::Config(m) if m.contains("zwitterion")));
    }

    #[test]
    fn pka_must_increase() {
        assert!(AcidBaseSpecies::weak_acid("bad", &[5.0, 4.0], 0).is_err());
        assert!(AcidBaseSpecies::weak_acid("dup", &[5.0, 5.0], 0).is_err());
    }

    #[test]
    fn strong_species_reject_pka() {
        let text = "version = 1\n[[species]]\nname = \"x\"\nkind = \"strong-acid\"\npka = [1.0]\n";
        assert!(SpeciesDb::parse(text).is_err());
    }

    #[test]
    fn alpha_fractions_sum_to_one_and_cross_at_pka() {
        let cit = SpeciesDb::builtin().get("citric_acid").unwrap().clone();
        for ph in [0.0, 3.13, 7.0, 14.0] {
            let s: f64 = cit.alpha_fractions(ph).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        let a = cit.alpha_fractions(4.76);
        assert!((a[1] - a[2]).abs() < 1e-12);
    }
}
