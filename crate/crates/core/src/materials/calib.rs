use std::path::Path;

use serde::{Deserialize, Serialize};

use super::MaterialError;

const DEFAULT_CALIB: &str = include_str!("../../data/default_synthetic.calib");

/// pH window over which the shape curve is defined and checked.
pub const SHAPE_PH_RANGE: (f64, f64) = (2.0, 10.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColorKnot {
    pub ph: f64,
    pub l: f64,
    pub a: f64,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TauBand {
    pub max_ph: f64,
    pub tau_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColorCalibration {
    pub native_ph: f64,
    pub acid_lock_ph: f64,
    pub base_lock_ph: f64,
    /// Share of the displacement carried by the fast relaxation mode.
    pub fast_fraction: f64,
    pub fast_tau_s: f64,
    pub knots: Vec<ColorKnot>,
    pub tau_bands: Vec<TauBand>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdorCalibration {
    pub i_max: f64,
    pub pka_eff: f64,
    /// Reservoir depletion rate (1/s) at full emission.
    pub release_rate: f64,
    pub reservoir0: f64,
    /// Absolute intensity below which the odor is not perceived.
    pub perception_threshold: f64,
    pub release_delay_s: f64,
    pub onset_tau_s: f64,
    pub suppress_ph: f64,
    pub suppression_s: f64,
    /// Faint residual level (fraction of `i_max`) during suppression.
    pub faint_level: f64,
    pub faint_tau_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump {
    pub center: f64,
    pub amplitude: f64,
    /// Standard deviation on the basic side; the acidic side is wider by
    /// `acid_side_width_ratio`.
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeCalibration {
    pub common_angle: f64,
    pub tau_common_s: f64,
    /// Common-swell phase lasts `handoff_factor * tau_common_s`.
    pub handoff_factor: f64,
    pub tau_ph_s: f64,
    /// Degrees of target shift per pH unit of re-deposition difference.
    pub redeposit_gain: f64,
    pub acid_side_width_ratio: f64,
    pub bumps: [Bump; 2],
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Formulation {
    #[serde(default)]
    pub color: String,
    #[serde(default)]
    pub odor: String,
    #[serde(default)]
    pub shape: String,
}

/// Response parameters for one material formulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSet {
    pub version: u32,
    pub name: String,
    #[serde(default)]
    pub synthetic: bool,
    #[serde(default)]
    pub formulation: Formulation,
    pub color: ColorCalibration,
    pub odor: OdorCalibration,
    pub shape: ShapeCalibration,
}

impl Default for CalibrationSet {
    fn default() -> Self {
        Self::default_synthetic()
    }
}

impl CalibrationSet {
    pub fn default_synthetic() -> Self {
        Self::parse(DEFAULT_CALIB).expect("shipped calibration is valid")
    }

    pub fn default_source() -> &'static str {
        DEFAULT_CALIB
    }

    pub fn parse(text: &str) -> Result<Self, MaterialError> {
        let set: Self =
            toml::from_str(text).map_err(|e| MaterialError::InvalidCalibration(e.to_string()))?;
        set.validate()?;
        Ok(set)
    }

    pub fn load(path: &Path) -> Result<Self, MaterialError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| MaterialError::InvalidCalibration(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
            .map_err(|e| MaterialError::InvalidCalibration(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("calibration serializes")
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn sha256(&self) -> String {
        crate::sha256_hex(self.to_toml().as_bytes())
    }

    /// pH range covered by the colour knots.
    pub fn color_range(&self) -> (f64, f64) {
        let k = &self.color.knots;
        (k[0].ph, k[k.len() - 1].ph)
    }

    /// Slow colour time constant for a deposited pH.
    pub fn color_tau(&self, ph: f64) -> f64 {
        let bands = &self.color.tau_bands;
        bands
            .iter()
            .find(|b| ph <= b.max_ph)
            .unwrap_or(&bands[bands.len() - 1])
            .tau_s
    }

    /// Copy with every time constant multiplied by `factor` (a thicker film
    /// responds more slowly).
    pub fn with_thickness(&self, factor: f64) -> Result<Self, MaterialError> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(MaterialError::InvalidCalibration(format!(
                "thickness factor must be > 0, got {factor}"
            )));
        }
        let mut s = self.clone();
        s.color.fast_tau_s *= factor;
        for b in &mut s.color.tau_bands {
            b.tau_s *= factor;
        }
        s.odor.release_rate /= factor;
        s.odor.release_delay_s *= factor;
        s.odor.onset_tau_s *= factor;
        s.odor.suppression_s *= factor;
        s.odor.faint_tau_s *= factor;
        s.shape.tau_common_s *= factor;
        s.shape.tau_ph_s *= factor;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), MaterialError> {
        let bad = |m: String| Err(MaterialError::InvalidCalibration(m));
        if self.version != 1 {
            return bad(format!("unsupported calibration version {}", self.version));
        }
        let c = &self.color;
        if c.knots.len() < 2 {
            return bad("color needs at least two knots".into());
        }
        if c.knots.windows(2).any(|w| !(w[0].ph < w[1].ph)) {
            return bad("color knot pH values must be strictly increasing".into());
        }
        let (lo, hi) = (c.knots[0].ph, c.knots[c.knots.len() - 1].ph);
        if lo > 2.0 || hi < 10.0 {
            return bad(format!("color knots cover [{lo}, {hi}], need at least [2, 10]"));
        }
        if let Some(k) = c.knots.iter().find(|k| !(0.0..=100.0).contains(&k.l)) {
            return bad(format!("color knot at pH {} has L* = {} outside [0, 100]", k.ph, k.l));
        }
        if c.knots.iter().any(|k| !(k.a.is_finite() && k.b.is_finite())) {
            return bad("non-finite color knot".into());
        }
        if c.tau_bands.is_empty() {
            return bad("color needs at least one tau band".into());
        }
        if c.tau_bands.windows(2).any(|w| !(w[0].max_ph < w[1].max_ph)) {
            return bad("color tau bands must have increasing max_ph".into());
        }
        if !(0.0..=1.0).contains(&c.fast_fraction) {
            return bad(format!("fast_fraction {} outside [0, 1]", c.fast_fraction));
        }
        if !(c.acid_lock_ph < c.base_lock_ph) {
            return bad("acid lock pH must be below base lock pH".into());
        }
        if !(lo..=hi).contains(&c.native_ph) {
            return bad(format!("native pH {} outside the knot range", c.native_ph));
        }

        let o = &self.odor;
        if !(o.i_max > 0.0) {
            return bad(format!("i_max must be > 0, got {}", o.i_max));
        }
        if !(o.release_rate > 0.0) {
            return bad(format!("release_rate must be > 0, got {}", o.release_rate));
        }
        if !(0.0..=1.0).contains(&o.reservoir0) {
            return bad(format!("reservoir0 {} outside [0, 1]", o.reservoir0));
        }
        if !(o.release_delay_s >= 0.0) || !(o.perception_threshold >= 0.0) || !(o.faint_level >= 0.0)
        {
            return bad("odor delay, threshold and faint level must be >= 0".into());
        }
        if !o.pka_eff.is_finite() || !o.suppress_ph.is_finite() {
            return bad("non-finite odor parameter".into());
        }

        let s = &self.shape;
        if !(s.handoff_factor >= 0.0) || !(s.redeposit_gain >= 0.0) {
            return bad("handoff_factor and redeposit_gain must be >= 0".into());
        }
        if !(s.acid_side_width_ratio > 0.0) {
            return bad("acid_side_width_ratio must be > 0".into());
        }
        if s.bumps.iter().any(|b| !(b.width > 0.0) || !b.center.is_finite() || !b.amplitude.is_finite()) {
            return bad("shape bumps need finite centers/amplitudes and positive widths".into());
        }
        if !(0.0..=180.0).contains(&s.common_angle) {
            return bad(format!("common_angle {} outside [0, 180]", s.common_angle));
        }

        let taus = [
            ("color.fast_tau_s", c.fast_tau_s),
            ("odor.onset_tau_s", o.onset_tau_s),
            ("odor.suppression_s", o.suppression_s),
            ("odor.faint_tau_s", o.faint_tau_s),
            ("shape.tau_common_s", s.tau_common_s),
            ("shape.tau_ph_s", s.tau_ph_s),
        ];
        for (name, v) in taus.into_iter().chain(c.tau_bands.iter().map(|b| ("color.tau_bands", b.tau_s))) {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be > 0, got {v}"));
            }
        }

        let maxima = super::shape::local_maxima(s, 1e-3);
        if maxima.len() != 2 {
            return bad(format!(
                "shape curve must have exactly two local maxima on [2, 10], found {}",
                maxima.len()
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_parses_and_round_trips() {
        let c = CalibrationSet::default_synthetic();
        assert!(c.synthetic);
        assert_eq!(c.odor.pka_eff, 7.38);
        let back = CalibrationSet::parse(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.sha256(), c.sha256());
        assert_eq!(c.sha256().len(), 64);
    }

    #[test]
    fn tau_band_lookup() {
        let c = CalibrationSet::default_synthetic();
        assert_eq!(c.color_tau(2.0), 15.0);
        assert_eq!(c.color_tau(5.5), 22.0);
        assert_eq!(c.color_tau(10.0), 18.0);
    }

    #[test]
    fn thickness_scales_time_constants() {
        let c = CalibrationSet::default_synthetic();
        let t = c.with_thickness(2.0).unwrap();
        assert_eq!(t.color.tau_bands[0].tau_s, 30.0);
        assert_eq!(t.shape.tau_ph_s, 300.0);
        assert_eq!(t.odor.release_rate, c.odor.release_rate / 2.0);
        assert!(c.with_thickness(0.0).is_err());
    }

    #[test]
    fn rejects_narrow_knots() {
        let mut c = CalibrationSet::default_synthetic();
        c.color.knots.pop();
        assert!(c.validate().is_err());
    }

    #[test]
    fn rejects_single_maximum_shape() {
        let mut c = CalibrationSet::default_synthetic();
        c.shape.bumps[1].center = 3.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn rejects_nonpositive_tau() {
        let mut c = CalibrationSet::default_synthetic();
        c.shape.tau_ph_s = 0.0;
        assert!(c.validate().is_err());
        let mut c = CalibrationSet::default_synthetic();
        c.odor.i_max = -1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn unknown_field_is_rejected() {
        let text = CalibrationSet::default_source().replace("synthetic = true", "synthetic = true\nbogus = 1");
        assert!(CalibrationSet::parse(&text).is_err());
    }
}
