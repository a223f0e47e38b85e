//! Hex colors to English names by nearest neighbor in CIELAB.

use std::collections::HashMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const CSS_COLORS: &str = include_str!("../data/css_colors.txt");

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ColorError {
    #[error("malformed hex color `{0}`")]
    MalformedHex(String),
    #[error("palette is empty")]
    EmptyPalette,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamedColor {
    pub name: String,
    pub hex: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabColor {
    pub l: f64,
    pub a: f64,
    pub b: f64,
}

impl LabColor {
    /// CIE76 color difference.
    pub fn distance(&self, other: &LabColor) -> f64 {
        ((self.l - other.l).powi(2) + (self.a - other.a).powi(2) + (self.b - other.b).powi(2)).sqrt()
    }
}

/// Normalizes `#rgb`, `#rrggbb`, or the same without `#` to lowercase `#rrggbb`.
pub fn normalize_hex(raw: &str) -> Result<String, ColorError> {
    let s = raw.trim();
    let body = s.strip_prefix('#').unwrap_or(s);
    if !body.bytes().all(|b| b.is_ascii_hexdigit()) {
        return Err(ColorError::MalformedHex(raw.to_string()));
    }
    match body.len() {
        6 => Ok(format!("#{}", body.to_ascii_lowercase())),
        3 => Ok(body.chars().fold(String::from("#"), |mut acc, c| {
            let c = c.to_ascii_lowercase();
            acc.push(c);
            acc.push(c);
            acc
        })),
        _ => Err(ColorError::MalformedHex(raw.to_string())),
    }
}

/// Accepts a hex color or a CSS color name; returns lowercase `#rrggbb`.
pub fn parse_hex_or_name(raw: &str) -> Option<String> {
    if let Ok(hex) = normalize_hex(raw) {
        return Some(hex);
    }
    let name = raw.trim().to_ascii_lowercase();
    css_palette().iter().find(|c| c.name == name).map(|c| c.hex.clone())
}

/// The 148 CSS named colors in file order.
pub fn css_palette() -> &'static [NamedColor] {
    static PALETTE: OnceLock<Vec<NamedColor>> = OnceLock::new();
    PALETTE.get_or_init(|| parse_palette(CSS_COLORS).expect("shipped palette is valid"))
}

/// Parses `name,hex` lines; blank lines are skipped.
pub fn parse_palette(text: &str) -> Result<Vec<NamedColor>, ColorError> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| {
            let (name, hex) = l.split_once(',').ok_or_else(|| ColorError::MalformedHex(l.to_string()))?;
            Ok(NamedColor {
                name: name.trim().to_string(),
                hex: normalize_hex(hex)?,
            })
        })
        .collect()
}

fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

const SRGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
];

fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

/// sRGB hex to CIELAB under D65.
pub fn hex_to_lab(hex: &str) -> Result<LabColor, ColorError> {
    let h = normalize_hex(hex)?;
    let channel = |i: usize| u8::from_str_radix(&h[i..i + 2], 16).map(|v| srgb_to_linear(v as f64 / 255.0));
    let rgb = [
        channel(1).map_err(|_| ColorError::MalformedHex(hex.into()))?,
        channel(3).map_err(|_| ColorError::MalformedHex(hex.into()))?,
        channel(5).map_err(|_| ColorError::MalformedHex(hex.into()))?,
    ];
    let xyz: Vec<f64> = SRGB_TO_XYZ.iter().map(|row| row.iter().zip(&rgb).map(|(m, c)| m * c).sum()).collect();
    // reference white is the matrix image of (1, 1, 1), so white maps to a = b = 0
    let white: Vec<f64> = SRGB_TO_XYZ.iter().map(|row| row.iter().sum()).collect();
    let fx = lab_f(xyz[0] / white[0]);
    let fy = lab_f(xyz[1] / white[1]);
    let fz = lab_f(xyz[2] / white[2]);
    Ok(LabColor {
        l: 116.0 * fy - 16.0,
        a: 500.0 * (fx - fy),
        b: 200.0 * (fy - fz),
    })
}

/// Name of the palette entry nearest `hex`; ties go to the earlier entry.
pub fn nearest_name(hex: &str, palette: &[NamedColor]) -> Result<String, ColorError> {
    let target = hex_to_lab(hex)?;
    let mut best: Option<(f64, &str)> = None;
    for entry in palette {
        let d = target.distance(&hex_to_lab(&entry.hex)?);
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, &entry.name));
        }
    }
    best.map(|(_, n)| n.to_string()).ok_or(ColorError::EmptyPalette)
}

/// Nearest CSS name, using cached palette coordinates.
pub fn css_name(hex: &str) -> Result<String, ColorError> {
    static LABS: OnceLock<Vec<LabColor>> = OnceLock::new();
    let labs = LABS.get_or_init(|| {
        css_palette()
            .iter()
            .map(|c| hex_to_lab(&c.hex).expect("shipped palette is valid"))
            .collect()
    });
    let target = hex_to_lab(hex)?;
    let mut best = (f64::INFINITY, 0);
    for (i, lab) in labs.iter().enumerate() {
        let d = target.distance(lab);
        if d < best.0 {
            best = (d, i);
        }
    }
    Ok(css_palette()[best.1].name.clone())
}

/// hex → CSS name for every distinct hex in `hexes`; malformed entries are skipped.
pub fn name_map<'a>(hexes: impl IntoIterator<Item = &'a String>) -> HashMap<String, String> {
    let mut out = HashMap::new();
    for h in hexes {
        if !out.contains_key(h) {
            if let Ok(name) = css_name(h) {
                out.insert(h.clone(), name);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    /// Textbook pipeline written out separately: decode, linearize, convert
    /// with the published D65 white, then the CIE kappa/epsilon form.
    fn reference_lab(r: u8, g: u8, b: u8) -> (f64, f64, f64) {
        let lin = |v: u8| {
            let c = v as f64 / 255.0;
            if c > 0.04045 {
                ((c + 0.055) / 1.055).powf(2.4)
            } else {
                c / 12.92
            }
        };
        let (r, g, b) = (lin(r), lin(g), lin(b));
        let x = r * 0.4124564 + g * 0.3575761 + b * 0.1804375;
        let y = r * 0.2126729 + g * 0.7151522 + b * 0.0721750;
        let z = r * 0.0193339 + g * 0.1191920 + b * 0.9503041;
        let (xn, yn, zn) = (0.95047, 1.0, 1.08883);
        let eps = 216.0 / 24389.0;
        let kappa = 24389.0 / 27.0;
        let f = |t: f64| if t > eps { t.powf(1.0 / 3.0) } else { (kappa * t + 16.0) / 116.0 };
        let (fx, fy, fz) = (f(x / xn), f(y / yn), f(z / zn));
        (116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz))
    }

    #[test]
    fn white_and_black() {
        let w = hex_to_lab("#FFFFFF").unwrap();
        assert!((w.l - 100.0).abs() < 0.01 && w.a.abs() < 0.01 && w.b.abs() < 0.01, "{w:?}");
        let k = hex_to_lab("#000000").unwrap();
        assert!(k.l.abs() < 1e-9);
    }

    #[test]
    fn red_matches_reference_conversion() {
        let lab = hex_to_lab("#FF0000").unwrap();
        let (l, a, b) = reference_lab(255, 0, 0);
        assert!((lab.l - l).abs() < 0.05 && (lab.a - a).abs() < 0.05 && (lab.b - b).abs() < 0.05);
        // published values for sRGB red
        assert!((lab.l - 53.24).abs() < 0.05 && (lab.a - 80.09).abs() < 0.05 && (lab.b - 67.20).abs() < 0.05);
    }

    #[test]
    fn random_colors_match_reference_conversion() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..500 {
            let (r, g, b): (u8, u8, u8) = (rng.gen(), rng.gen(), rng.gen());
            let lab = hex_to_lab(&format!("#{r:02x}{g:02x}{b:02x}")).unwrap();
            let want = reference_lab(r, g, b);
            assert!((lab.l - want.0).abs() < 0.05 && (lab.a - want.1).abs() < 0.05 && (lab.b - want.2).abs() < 0.05);
        }
    }

    #[test]
    fn malformed_hex_is_rejected() {
        for bad in ["", "#12345", "#gggggg", "red", "#1234567"] {
            assert!(matches!(hex_to_lab(bad), Err(ColorError::MalformedHex(_))), "{bad}");
        }
        assert_eq!(normalize_hex("#AbC").unwrap(), "#aabbcc");
    }

    #[test]
    fn palette_has_148_entries() {
        assert_eq!(css_palette().len(), 148);
        assert_eq!(parse_hex_or_name("SteelBlue").as_deref(), Some("#4682b4"));
    }

    #[test]
    fn palette_hexes_map_to_their_first_name() {
        let palette = css_palette();
        for c in palette {
            let first = palette.iter().find(|p| p.hex == c.hex).unwrap();
            assert_eq!(nearest_name(&c.hex, palette).unwrap(), first.name);
            assert_eq!(css_name(&c.hex).unwrap(), first.name);
        }
        assert_eq!(css_name("#4682B4").unwrap(), "steelblue");
    }

    #[test]
    fn nearest_matches_exhaustive_scan() {
        let palette = css_palette();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let hex = format!("#{:06x}", rng.gen_range(0..0x100_0000u32));
            let (l, a, b) = {
                let h = u32::from_str_radix(&hex[1..], 16).unwrap();
                reference_lab((h >> 16) as u8, (h >> 8) as u8, h as u8)
            };
            let dists: Vec<f64> = palette
                .iter()
                .map(|p| {
                    let h = u32::from_str_radix(&p.hex[1..], 16).unwrap();
                    let q = reference_lab((h >> 16) as u8, (h >> 8) as u8, h as u8);
                    ((l - q.0).powi(2) + (a - q.1).powi(2) + (b - q.2).powi(2)).sqrt()
                })
                .collect();
            let got = nearest_name(&hex, palette).unwrap();
            let gi = palette.iter().position(|p| p.name == got).unwrap();
            let min = dists.iter().copied().fold(f64::INFINITY, f64::min);
            assert!(dists[gi] - min < 1e-6, "{hex}: {got}");
            assert_eq!(css_name(&hex).unwrap(), got);
        }
    }

    #[test]
    fn empty_palette_is_an_error() {
        assert_eq!(nearest_name("#ffffff", &[]), Err(ColorError::EmptyPalette));
    }
}
