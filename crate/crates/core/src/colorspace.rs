//! sRGB to CIELAB conversion and the ΔE76 perceptual distance.
//!
//! Conversion path: gamma-expanded sRGB, linear RGB to XYZ under the D65
//! illuminant (2° observer), then XYZ to CIELAB relative to the D65 white.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// D65 reference white, 2° observer, Y normalized to 1.
pub const D65_WHITE: [f64; 3] = [0.950_47, 1.0, 1.088_83];

/// Linear sRGB to XYZ (D65), IEC 61966-2-1.
pub const SRGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.412_456_4, 0.357_576_1, 0.180_437_5],
    [0.212_672_9, 0.715_152_2, 0.072_175_0],
    [0.019_333_9, 0.119_192_0, 0.950_304_1],
];

/// CIE constants: (6/29)^3 and (29/6)^2 / 3.
const LAB_EPSILON: f64 = 216.0 / 24_389.0;
const LAB_KAPPA_SLOPE: f64 = 841.0 / 108.0;

/// An 8-bit sRGB triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Srgb {
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

impl Srgb {
    pub const fn new(r: u8, g: u8, b: u8) -> Self {
        Srgb { r, g, b }
    }

    /// Builds a triple from wider integers, rejecting channels outside [0, 255].
    pub fn from_channels(r: i64, g: i64, b: i64) -> Result<Self> {
        let check = |name: &str, v: i64| -> Result<u8> {
            u8::try_from(v)
                .map_err(|_| Error::Domain(format!("sRGB channel {name}={v} outside [0, 255]")))
        };
        Ok(Srgb {
            r: check("r", r)?,
            g: check("g", g)?,
            b: check("b", b)?,
        })
    }

    pub fn to_lab(self) -> LabPoint {
        srgb_to_lab(self)
    }

    /// `#RRGGBB`, uppercase.
    pub fn to_hex(self) -> String {
        format!("#{:02X}{:02X}{:02X}", self.r, self.g, self.b)
    }
}

impl fmt::Display for Srgb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl FromStr for Srgb {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let digits = s
            .strip_prefix('#')
            .ok_or_else(|| Error::Domain(format!("hex color {s:?} must start with '#'")))?;
        if digits.len() != 6 || !digits.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(Error::Domain(format!(
                "hex color {s:?} must be '#' followed by six hex digits"
            )));
        }
        let channel = |i: usize| u8::from_str_radix(&digits[i..i + 2], 16).expect("validated hex");
        Ok(Srgb::new(channel(0), channel(2), channel(4)))
    }
}

/// A point in CIELAB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabPoint {
    pub l: f64,
    pub a: f64,
    pub b: f64,
}

impl LabPoint {
    pub const fn new(l: f64, a: f64, b: f64) -> Self {
        LabPoint { l, a, b }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.l, self.a, self.b]
    }

    pub fn is_finite(&self) -> bool {
        self.l.is_finite() && self.a.is_finite() && self.b.is_finite()
    }

    pub fn delta_e(&self, other: &LabPoint) -> f64 {
        delta_e(self, other)
    }
}

impl From<[f64; 3]> for LabPoint {
    fn from(v: [f64; 3]) -> Self {
        LabPoint::new(v[0], v[1], v[2])
    }
}

fn srgb_expand(channel: u8) -> f64 {
    let c = f64::from(channel) / 255.0;
    if c <= 0.040_45 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn lab_f(t: f64) -> f64 {
    if t > LAB_EPSILON {
        t.cbrt()
    } else {
        LAB_KAPPA_SLOPE * t + 4.0 / 29.0
    }
}

pub fn srgb_to_xyz(rgb: Srgb) -> [f64; 3] {
    let lin = [srgb_expand(rgb.r), srgb_expand(rgb.g), srgb_expand(rgb.b)];
    let mut xyz = [0.0; 3];
    for (out, row) in xyz.iter_mut().zip(SRGB_TO_XYZ.iter()) {
        *out = row.iter().zip(lin.iter()).map(|(m, c)| m * c).sum();
    }
    xyz
}

pub fn srgb_to_lab(rgb: Srgb) -> LabPoint {
    let [x, y, z] = srgb_to_xyz(rgb);
    let fx = lab_f(x / D65_WHITE[0]);
    let fy = lab_f(y / D65_WHITE[1]);
    let fz = lab_f(z / D65_WHITE[2]);
    LabPoint {
        l: 116.0 * fy - 16.0,
        a: 500.0 * (fx - fy),
        b: 200.0 * (fy - fz),
    }
}

/// CIE 1976 color difference: Euclidean distance in CIELAB.
pub fn delta_e(p: &LabPoint, q: &LabPoint) -> f64 {
    let dl = p.l - q.l;
    let da = p.a - q.a;
    let db = p.b - q.b;
    (dl * dl + da * da + db * db).sqrt()
}
