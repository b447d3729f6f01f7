//! Deterministic scene compositor and glitch injector.
//!
//! Scenes are flat-textured 2-D shapes composited over a tiled background.
//! Each glitch class is produced by changing only how the *target* object is
//! coloured, so every pixel outside the target mask is bit-identical to the
//! Normal render of the same scene.

mod glitch;
mod raster;
mod sample;
mod scene;
mod texture;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::class::GlitchClass;
use raster::{rasterize, Surface};

pub use glitch::{lowres_surrogate, placeholder_texture, stretch_matrix, GlitchSpec, PlaceholderStyle, DEFAULT_MISSING_COLOR};
pub use raster::REFERENCE_SIDE;
pub use sample::{scene_for, synth_sample, GlitchRanges, SynthConfig, TextureSource};
pub use scene::{ObjectShape, ObjectSpec, SceneSpec, UvTransform, MAX_OBJECTS};
pub use texture::{solid_texture, TextureAsset, TextureBank};

pub const MIN_COVERAGE: f64 = 0.01;
pub const MAX_COVERAGE: f64 = 0.90;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("unknown texture id `{0}`")]
    UnknownTexture(String),
    #[error("invalid texture `{id}`: {reason}")]
    InvalidTexture { id: String, reason: String },
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("invalid glitch parameter: {0}")]
    InvalidParameter(String),
    #[error("target mask coverage {coverage:.4} outside [{MIN_COVERAGE}, {MAX_COVERAGE}]; scene must be resampled")]
    Resample { coverage: f64, spec: Box<SceneSpec> },
    #[error("object {object_id} view {view_id}: no acceptable scene after {attempts} attempts")]
    Exhausted { object_id: u32, view_id: u32, attempts: u32 },
    #[error("image encoding: {0}")]
    Encode(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub scene_seed: u64,
    pub glitch: Option<GlitchSpec>,
    /// The low-resolution factor exceeded the texture size and was clamped.
    pub lowres_clamped: bool,
    /// Resampling attempt that produced the accepted scene.
    pub attempt: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedFrame {
    pub width: u32,
    pub height: u32,
    /// Row-major RGB8.
    pub pixels: Vec<u8>,
    pub target_mask: Vec<bool>,
    pub label: GlitchClass,
    pub provenance: Provenance,
}

impl RenderedFrame {
    pub fn coverage(&self) -> f64 {
        self.target_mask.iter().filter(|&&m| m).count() as f64 / self.target_mask.len() as f64
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width as usize + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    /// SHA-256 over pixels then mask bytes, hex encoded.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(&self.pixels);
        h.update(self.target_mask.iter().map(|&m| m as u8).collect::<Vec<_>>());
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// `foo.png` → `foo.mask.png`.
    pub fn mask_path(frame_path: &Path) -> PathBuf {
        let stem = frame_path.file_stem().and_then(|s| s.to_str()).unwrap_or("frame");
        frame_path.with_file_name(format!("{stem}.mask.png"))
    }

    /// Writes the RGB frame and the 1-bit mask next to it.
    pub fn save(&self, frame_path: &Path) -> Result<(), SynthError> {
        image::save_buffer(frame_path, &self.pixels, self.width, self.height, image::ExtendedColorType::Rgb8)
            .map_err(|e| SynthError::Encode(e.to_string()))?;
        write_mask_png(&Self::mask_path(frame_path), self.width, self.height, &self.target_mask)
    }
}

fn write_mask_png(path: &Path, width: u32, height: u32, mask: &[bool]) -> Result<(), SynthError> {
    let file = BufWriter::new(File::create(path)?);
    let mut enc = png::Encoder::new(file, width, height);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::One);
    let mut writer = enc.write_header().map_err(|e| SynthError::Encode(e.to_string()))?;
    let stride = (width as usize).div_ceil(8);
    let mut packed = vec![0u8; stride * height as usize];
    for y in 0..height as usize {
        for x in 0..width as usize {
            if mask[y * width as usize + x] {
                packed[y * stride + x / 8] |= 0x80 >> (x % 8);
            }
        }
    }
    writer.write_image_data(&packed).map_err(|e| SynthError::Encode(e.to_string()))?;
    Ok(())
}

/// Reads a mask written by [`RenderedFrame::save`].
pub fn read_mask_png(path: &Path) -> Result<(u32, u32, Vec<bool>), SynthError> {
    let img = image::open(path).map_err(|e| SynthError::Encode(e.to_string()))?.to_luma8();
    let (w, h) = img.dimensions();
    Ok((w, h, img.into_raw().into_iter().map(|v| v > 127).collect()))
}

fn finish(
    spec: &SceneSpec,
    raster: raster::Raster,
    label: GlitchClass,
    glitch: Option<GlitchSpec>,
    lowres_clamped: bool,
) -> Result<RenderedFrame, SynthError> {
    let frame = RenderedFrame {
        width: spec.image_size.0,
        height: spec.image_size.1,
        pixels: raster.pixels,
        target_mask: raster.target_mask,
        label,
        provenance: Provenance { scene_seed: spec.seed, glitch, lowres_clamped, attempt: 0 },
    };
    let coverage = frame.coverage();
    if !(MIN_COVERAGE..=MAX_COVERAGE).contains(&coverage) {
        return Err(SynthError::Resample { coverage, spec: Box::new(spec.clone()) });
    }
    Ok(frame)
}

/// Renders the scene with every object correctly textured.
pub fn render_scene(spec: &SceneSpec, bank: &TextureBank) -> Result<RenderedFrame, SynthError> {
    let raster = rasterize(spec, bank, None)?;
    finish(spec, raster, GlitchClass::Normal, None, false)
}

fn check_factor(name: &str, f: f64) -> Result<(), SynthError> {
    if f.is_finite() && f > 1.0 {
        Ok(())
    } else {
        Err(SynthError::InvalidParameter(format!("{name} must be > 1, got {f}")))
    }
}

/// Stretches the target's texture along `stretch_direction`; the silhouette
/// is left untouched.
pub fn apply_stretch(spec: &SceneSpec, glitch: &GlitchSpec, bank: &TextureBank) -> Result<RenderedFrame, SynthError> {
    check_factor("stretch_factor", glitch.stretch_factor)?;
    render_stretched(spec, glitch, bank)
}

fn render_stretched(spec: &SceneSpec, glitch: &GlitchSpec, bank: &TextureBank) -> Result<RenderedFrame, SynthError> {
    spec.validate()?;
    let target = spec.target();
    let texture = bank.get(&target.texture_id)?;
    let uv = target.uv_transform.pre_compose(stretch_matrix(glitch.stretch_direction, glitch.stretch_factor));
    let raster = rasterize(spec, bank, Some(Surface::Texture { texture, uv }))?;
    finish(spec, raster, GlitchClass::Stretched, Some(*glitch), false)
}

/// Swaps the target's texture for a box-filtered surrogate, emulating a
/// wrong level-of-detail load.
pub fn apply_lowres(spec: &SceneSpec, glitch: &GlitchSpec, bank: &TextureBank) -> Result<RenderedFrame, SynthError> {
    check_factor("lowres_factor", glitch.lowres_factor)?;
    render_lowres(spec, glitch, bank)
}

fn render_lowres(spec: &SceneSpec, glitch: &GlitchSpec, bank: &TextureBank) -> Result<RenderedFrame, SynthError> {
    spec.validate()?;
    let target = spec.target();
    let (surrogate, clamped) = lowres_surrogate(bank.get(&target.texture_id)?, glitch.lowres_factor);
    if clamped {
        log::warn!("lowres factor {} clamped for texture {}", glitch.lowres_factor, target.texture_id);
    }
    let surface = Surface::Texture { texture: &surrogate, uv: target.uv_transform };
    let raster = rasterize(spec, bank, Some(surface))?;
    finish(spec, raster, GlitchClass::LowRes, Some(*glitch), clamped)
}

/// Fills the target's footprint with a single flat colour.
pub fn apply_missing(spec: &SceneSpec, glitch: &GlitchSpec, bank: &TextureBank) -> Result<RenderedFrame, SynthError> {
    let raster = rasterize(spec, bank, Some(Surface::Solid(glitch.missing_color)))?;
    finish(spec, raster, GlitchClass::Missing, Some(*glitch), false)
}

/// Substitutes the placeholder texture, sampled through the target's own
/// uv transform.
pub fn apply_placeholder(spec: &SceneSpec, glitch: &GlitchSpec, bank: &TextureBank) -> Result<RenderedFrame, SynthError> {
    spec.validate()?;
    let texture = placeholder_texture(glitch.placeholder_style);
    let surface = Surface::Texture { texture: &texture, uv: spec.target().uv_transform };
    let raster = rasterize(spec, bank, Some(surface))?;
    finish(spec, raster, GlitchClass::Placeholder, Some(*glitch), false)
}

/// Dispatches to the injector for `glitch.class`.
pub fn inject(spec: &SceneSpec, glitch: &GlitchSpec, bank: &TextureBank) -> Result<RenderedFrame, SynthError> {
    match glitch.class {
        GlitchClass::Normal => render_scene(spec, bank),
        GlitchClass::Stretched => apply_stretch(spec, glitch, bank),
        GlitchClass::LowRes => apply_lowres(spec, glitch, bank),
        GlitchClass::Missing => apply_missing(spec, glitch, bank),
        GlitchClass::Placeholder => apply_placeholder(spec, glitch, bank),
    }
}

#[cfg(test)]
mod tests;
