//! Glitch parameters and the texture-space manipulations behind each class.

use serde::{Deserialize, Serialize};

use super::texture::TextureAsset;
use crate::class::GlitchClass;

pub const DEFAULT_MISSING_COLOR: [u8; 3] = [255, 0, 255];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PlaceholderStyle {
    White,
    #[default]
    Pattern,
}

impl std::str::FromStr for PlaceholderStyle {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "white" => Ok(Self::White),
            "pattern" => Ok(Self::Pattern),
            other => Err(format!("unknown placeholder style `{other}` (expected white|pattern)")),
        }
    }
}

/// Parameters of one injected glitch. Fields that do not belong to `class`
/// are carried along but ignored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlitchSpec {
    pub class: GlitchClass,
    pub stretch_direction: f64,
    pub stretch_factor: f64,
    pub lowres_factor: f64,
    pub missing_color: [u8; 3],
    pub placeholder_style: PlaceholderStyle,
}

impl GlitchSpec {
    pub fn normal() -> Self {
        Self {
            class: GlitchClass::Normal,
            stretch_direction: 0.0,
            stretch_factor: 1.0,
            lowres_factor: 1.0,
            missing_color: DEFAULT_MISSING_COLOR,
            placeholder_style: PlaceholderStyle::default(),
        }
    }

    pub fn stretched(direction: f64, factor: f64) -> Self {
        Self { class: GlitchClass::Stretched, stretch_direction: direction, stretch_factor: factor, ..Self::normal() }
    }

    pub fn low_res(factor: f64) -> Self {
        Self { class: GlitchClass::LowRes, lowres_factor: factor, ..Self::normal() }
    }

    pub fn missing(color: [u8; 3]) -> Self {
        Self { class: GlitchClass::Missing, missing_color: color, ..Self::normal() }
    }

    pub fn placeholder(style: PlaceholderStyle) -> Self {
        Self { class: GlitchClass::Placeholder, placeholder_style: style, ..Self::normal() }
    }
}

/// Linear map scaling texture lookups by `1/factor` along `direction` and
/// leaving the orthogonal axis alone, so features appear `factor` times
/// longer on screen along that direction.
pub fn stretch_matrix(direction: f64, factor: f64) -> [[f64; 2]; 2] {
    let (s, c) = (libm::sin(direction), libm::cos(direction));
    let k = 1.0 / factor;
    // R(d) · diag(k, 1) · R(-d)
    [[c * c * k + s * s, c * s * k - c * s], [s * c * k - s * c, s * s * k + c * c]]
}

/// Box-filters `texture` over `factor`×`factor` blocks and writes each block
/// average back to every texel of the block (nearest-neighbour upsample).
/// The block side is `factor` rounded half-to-even; it is clamped to the
/// smaller texture side, in which case the returned flag is set.
pub fn lowres_surrogate(texture: &TextureAsset, factor: f64) -> (TextureAsset, bool) {
    let (w, h) = (texture.width(), texture.height());
    let mut block = factor.round_ties_even().max(1.0) as usize;
    let limit = w.min(h);
    let clamped = block > limit;
    if clamped {
        block = limit;
    }
    let mut out = texture.pixels().to_vec();
    for by in (0..h).step_by(block) {
        for bx in (0..w).step_by(block) {
            let (ey, ex) = ((by + block).min(h), (bx + block).min(w));
            let mut sum = [0u64; 3];
            for y in by..ey {
                for x in bx..ex {
                    let t = texture.texel(x, y);
                    for k in 0..3 {
                        sum[k] += t[k] as u64;
                    }
                }
            }
            let n = ((ey - by) * (ex - bx)) as f64;
            let avg = sum.map(|s| (s as f64 / n).round_ties_even() as u8);
            for y in by..ey {
                for x in bx..ex {
                    out[(y * w + x) * 3..][..3].copy_from_slice(&avg);
                }
            }
        }
    }
    let id = format!("{}@lowres{}", texture.id(), block);
    let surrogate = TextureAsset::new(id, w, h, out, texture.tileable()).expect("same dimensions as source");
    (surrogate, clamped)
}

const PATTERN_CELL: usize = 8;
const PATTERN_LIGHT: [u8; 3] = [236, 236, 236];
const PATTERN_DARK: [u8; 3] = [112, 112, 112];
const PATTERN_GLYPH: [u8; 3] = [40, 40, 40];

/// Built-in placeholder textures: plain white, or an 8×8-cell two-tone
/// checkerboard with a cross glyph in every light cell.
pub fn placeholder_texture(style: PlaceholderStyle) -> TextureAsset {
    match style {
        PlaceholderStyle::White => super::texture::solid_texture("placeholder_white", [255, 255, 255]),
        PlaceholderStyle::Pattern => {
            let side = PATTERN_CELL * 8;
            TextureAsset::from_fn("placeholder_pattern", side, side, |x, y| {
                let (cx, cy) = (x / PATTERN_CELL, y / PATTERN_CELL);
                let (lx, ly) = (x % PATTERN_CELL, y % PATTERN_CELL);
                if (cx + cy) % 2 == 1 {
                    return PATTERN_DARK;
                }
                let on_bar = |a: usize, b: usize| (a == 3 || a == 4) && (1..=6).contains(&b);
                if on_bar(lx, ly) || on_bar(ly, lx) {
                    PATTERN_GLYPH
                } else {
                    PATTERN_LIGHT
                }
            })
            .expect("pattern texture is valid")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn checker4() -> TextureAsset {
        TextureAsset::from_fn("c", 8, 8, |x, y| if (x + y) % 2 == 0 { [0; 3] } else { [255; 3] }).unwrap()
    }

    #[test]
    fn checkerboard_box_filter_is_mid_gray() {
        // each 2×2 block averages (0 + 255 + 255 + 0) / 4 = 127.5 → 128 (half to even)
        let (s, clamped) = lowres_surrogate(&checker4(), 2.0);
        assert!(!clamped);
        assert!(s.pixels().iter().all(|&v| v == 128));
    }

    #[test]
    fn unit_factor_is_identity() {
        let t = checker4();
        let (s, _) = lowres_surrogate(&t, 1.0);
        assert_eq!(s.pixels(), t.pixels());
    }

    #[test]
    fn oversized_factor_is_clamped_and_flagged() {
        let (s, clamped) = lowres_surrogate(&checker4(), 16.0);
        assert!(clamped);
        assert!(s.pixels().iter().all(|&v| v == 128));
    }

    #[test]
    fn stretch_matrix_axis_aligned() {
        let m = stretch_matrix(0.0, 4.0);
        assert!((m[0][0] - 0.25).abs() < 1e-15);
        assert!(m[0][1].abs() < 1e-15 && m[1][0].abs() < 1e-15);
        assert!((m[1][1] - 1.0).abs() < 1e-15);
        // determinant of a one-axis scaling is 1/factor for any direction
        let m = stretch_matrix(0.7, 5.0);
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        assert!((det - 0.2).abs() < 1e-12);
    }

    #[test]
    fn pattern_has_several_colors() {
        let t = placeholder_texture(PlaceholderStyle::Pattern);
        let mut colors: Vec<[u8; 3]> = t.pixels().chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
        colors.sort();
        colors.dedup();
        assert_eq!(colors.len(), 3);
    }
}
