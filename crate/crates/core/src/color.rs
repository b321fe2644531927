//! CIELAB values, ΔE*ab and conversion to sRGB for display.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Lab {
    pub l: f64,
    pub a: f64,
    pub b: f64,
}

impl Lab {
    pub const fn new(l: f64, a: f64, b: f64) -> Self {
        Self { l, a, b }
    }

    /// CIE76 colour difference.
    pub fn delta_e(&self, other: &Lab) -> f64 {
        ((self.l - other.l).powi(2) + (self.a - other.a).powi(2) + (self.b - other.b).powi(2)).sqrt()
    }

    /// Hue angle in degrees, `atan2(b*, a*)`, in `(-180, 180]`.
    pub fn hue_deg(&self) -> f64 {
        self.b.atan2(self.a).to_degrees()
    }

    pub fn chroma(&self) -> f64 {
        self.a.hypot(self.b)
    }

    pub fn lerp(&self, other: &Lab, t: f64) -> Lab {
        Lab {
            l: self.l + (other.l - self.l) * t,
            a: self.a + (other.a - self.a) * t,
            b: self.b + (other.b - self.b) * t,
        }
    }

    pub(crate) fn sub(&self, other: &Lab) -> Lab {
        Lab::new(self.l - other.l, self.a - other.a, self.b - other.b)
    }

    pub(crate) fn add_scaled(&self, d: &Lab, s: f64) -> Lab {
        Lab::new(self.l + d.l * s, self.a + d.a * s, self.b + d.b * s)
    }

    /// Convert to 8-bit sRGB under D65. The flag reports whether any channel
    /// had to be clipped into gamut.
    pub fn to_srgb8(&self) -> ([u8; 3], bool) {
        // D65 reference white
        const XN: f64 = 0.950_47;
        const YN: f64 = 1.0;
        const ZN: f64 = 1.088_83;
        const DELTA: f64 = 6.0 / 29.0;

        let finv = |t: f64| {
            if t > DELTA {
                t * t * t
            } else {
                3.0 * DELTA * DELTA * (t - 4.0 / 29.0)
            }
        };
        let fy = (self.l + 16.0) / 116.0;
        let fx = fy + self.a / 500.0;
        let fz = fy - self.b / 200.0;
        let (x, y, z) = (XN * finv(fx), YN * finv(fy), ZN * finv(fz));

        let lin = [
            3.240_454_2 * x - 1.537_138_5 * y - 0.498_531_4 * z,
            -0.969_266_0 * x + 1.876_010_8 * y + 0.041_556_0 * z,
            0.055_643_4 * x - 0.204_025_9 * y + 1.057_225_2 * z,
        ];
        let mut clipped = false;
        let mut out = [0u8; 3];
        for (o, c) in out.iter_mut().zip(lin) {
            let g = if c <= 0.003_130_8 {
                12.92 * c
            } else {
                1.055 * c.powf(1.0 / 2.4) - 0.055
            };
            // matrix rounding pushes white slightly past 1
            if !(-1e-3..=1.0 + 1e-3).contains(&g) {
                clipped = true;
            }
            *o = (g.clamp(0.0, 1.0) * 255.0).round() as u8;
        }
        (out, clipped)
    }
}
