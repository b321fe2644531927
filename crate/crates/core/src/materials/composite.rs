use std::fmt;

use serde::{Deserialize, Serialize};

use super::calib::CalibrationSet;
use super::MaterialError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PrimitiveKind {
    Color,
    Odor,
    Shape,
}

impl fmt::Display for PrimitiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Color => "color",
            Self::Odor => "odor",
            Self::Shape => "shape",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CompositeMethod {
    /// Stacked films, listed top first.
    Layer,
    /// Side-by-side regions, listed inner first.
    Panel,
    /// Dopants blended into one film; order is irrelevant.
    Mix,
}

impl fmt::Display for CompositeMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Layer => "layer",
            Self::Panel => "panel",
            Self::Mix => "mix",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PanelRegion {
    Inner,
    Outer,
}

/// Checks a combination outside the validated set has not passed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuccessCriterion {
    /// Each primitive still responds to pH as it does alone.
    Reactive,
    /// The combined film holds together through activation.
    StructurallySound,
    /// Responses stay within a human-perceptible timescale.
    PerceptibleTiming,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompatibilityWarning {
    pub method: CompositeMethod,
    pub kinds: Vec<PrimitiveKind>,
    pub unverified: Vec<SuccessCriterion>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub kind: PrimitiveKind,
    pub calibration: CalibrationSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Composite {
    pub layers: Vec<Layer>,
    pub method: CompositeMethod,
    pub panel_regions: Option<Vec<PanelRegion>>,
    pub warning: Option<CompatibilityWarning>,
}

impl Composite {
    pub fn kinds(&self) -> Vec<PrimitiveKind> {
        self.layers.iter().map(|l| l.kind).collect()
    }

    /// Index of the topmost colour layer, the one that is seen.
    pub fn visible_color_layer(&self) -> Option<usize> {
        self.layers.iter().position(|l| l.kind == PrimitiveKind::Color)
    }
}

fn validated(method: CompositeMethod, kinds: &[PrimitiveKind]) -> bool {
    use PrimitiveKind::*;
    match (method, kinds) {
        (_, [_]) => true,
        (CompositeMethod::Layer, [Color, Odor]) => true,
        (CompositeMethod::Panel, [Shape, Odor] | [Odor, Shape] | [Odor, Color]) => true,
        (CompositeMethod::Mix, [a, b]) => {
            let mut pair = [*a, *b];
            pair.sort();
            pair == [Color, Odor]
        }
        _ => false,
    }
}

pub fn make_composite(
    parts: Vec<(PrimitiveKind, CalibrationSet)>,
    method: CompositeMethod,
) -> Result<Composite, MaterialError> {
    if parts.is_empty() || parts.len() > 3 {
        return Err(MaterialError::InvalidComposite(format!(
            "a composite takes 1 to 3 parts, got {}",
            parts.len()
        )));
    }
    let kinds: Vec<PrimitiveKind> = parts.iter().map(|p| p.0).collect();
    if method == CompositeMethod::Mix {
        let mut sorted = kinds.clone();
        sorted.sort();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(MaterialError::InvalidComposite(format!(
                "mix lists `{}` more than once",
                w[0]
            )));
        }
    }
    let warning = (!validated(method, &kinds)).then(|| {
        let names: Vec<String> = kinds.iter().map(ToString::to_string).collect();
        CompatibilityWarning {
            method,
            kinds: kinds.clone(),
            unverified: vec![
                SuccessCriterion::Reactive,
                SuccessCriterion::StructurallySound,
                SuccessCriterion::PerceptibleTiming,
            ],
            message: format!(
                "{method}({}) is not a validated combination; check reactivity, structural soundness and response timing",
                names.join(", ")
            ),
        }
    });
    let panel_regions = (method == CompositeMethod::Panel).then(|| {
        (0..kinds.len())
            .map(|i| if i == 0 { PanelRegion::Inner } else { PanelRegion::Outer })
            .collect()
    });
    Ok(Composite {
        layers: parts
            .into_iter()
            .map(|(kind, calibration)| Layer { kind, calibration })
            .collect(),
        method,
        panel_regions,
        warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use PrimitiveKind::*;

    fn parts(kinds: &[PrimitiveKind]) -> Vec<(PrimitiveKind, CalibrationSet)> {
        let c = CalibrationSet::default_synthetic();
        kinds.iter().map(|k| (*k, c.clone())).collect()
    }

    #[test]
    fn validated_set_has_no_warning() {
        for (m, k) in [
            (CompositeMethod::Layer, vec![Color, Odor]),
            (CompositeMethod::Panel, vec![Shape, Odor]),
            (CompositeMethod::Panel, vec![Odor, Shape]),
            (CompositeMethod::Panel, vec![Odor, Color]),
            (CompositeMethod::Mix, vec![Color, Odor]),
            (CompositeMethod::Mix, vec![Odor, Color]),
        ] {
            assert!(make_composite(parts(&k), m).unwrap().warning.is_none(), "{m} {k:?}");
        }
    }

    #[test]
    fn single_primitive_always_passes() {
        for k in [Color, Odor, Shape] {
            for m in [CompositeMethod::Layer, CompositeMethod::Panel, CompositeMethod::Mix] {
                assert!(make_composite(parts(&[k]), m).unwrap().warning.is_none());
            }
        }
    }

    #[test]
    fn other_combinations_warn() {
        let c = make_composite(parts(&[Shape, Color]), CompositeMethod::Mix).unwrap();
        let w = c.warning.unwrap();
        assert_eq!(w.unverified.len(), 3);
        let c = make_composite(parts(&[Odor, Color]), CompositeMethod::Layer).unwrap();
        assert!(c.warning.is_some());
    }

    #[test]
    fn size_and_duplicate_errors() {
        assert!(make_composite(vec![], CompositeMethod::Layer).is_err());
        assert!(make_composite(parts(&[Color, Odor, Shape, Color]), CompositeMethod::Layer).is_err());
        assert!(make_composite(parts(&[Color, Color]), CompositeMethod::Mix).is_err());
        assert!(make_composite(parts(&[Color, Color]), CompositeMethod::Layer).is_ok());
    }
}
