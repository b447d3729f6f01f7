//! Per-sample scene generation: object identity fixes the asset, the view
//! moves the "camera".

use std::f64::consts::{PI, TAU};
use std::path::PathBuf;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::glitch::{GlitchSpec, PlaceholderStyle, DEFAULT_MISSING_COLOR};
use super::raster::REFERENCE_SIDE;
use super::scene::{ObjectShape, ObjectSpec, SceneSpec, UvTransform};
use super::texture::TextureBank;
use super::{inject, Provenance, RenderedFrame, SynthError};
use crate::class::GlitchClass;
use crate::seed::{derive_seed, rng_for};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlitchRanges {
    /// Half-open range `[lo, hi)`.
    pub stretch_factor: (f64, f64),
    pub stretch_direction: (f64, f64),
    pub lowres_factors: Vec<f64>,
    pub missing_color: [u8; 3],
}

impl Default for GlitchRanges {
    fn default() -> Self {
        Self {
            stretch_factor: (3.0, 10.0),
            stretch_direction: (0.0, PI),
            lowres_factors: vec![4.0, 8.0, 16.0],
            missing_color: DEFAULT_MISSING_COLOR,
        }
    }
}

/// Where the texture bank comes from; recorded in corpus manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TextureSource {
    Procedural { seed: u64, count: usize },
    Directory { path: PathBuf },
}

impl Default for TextureSource {
    fn default() -> Self {
        TextureSource::Procedural { seed: 0, count: 64 }
    }
}

impl TextureSource {
    pub fn load(&self) -> Result<TextureBank, SynthError> {
        match self {
            TextureSource::Procedural { seed, count } => Ok(TextureBank::procedural(*seed, *count)),
            TextureSource::Directory { path } => TextureBank::load_dir(path),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub bank: Arc<TextureBank>,
    pub image_size: (u32, u32),
    pub ranges: GlitchRanges,
    pub placeholder_style: PlaceholderStyle,
    pub max_attempts: u32,
}

impl SynthConfig {
    pub fn new(bank: TextureBank, image_size: (u32, u32), placeholder_style: PlaceholderStyle) -> Self {
        Self {
            bank: Arc::new(bank),
            image_size,
            ranges: GlitchRanges::default(),
            placeholder_style,
            max_attempts: 16,
        }
    }
}

const REFERENCE_SCALE: f64 = 0.42;

#[derive(Debug, Clone)]
struct Distractor {
    shape: ObjectShape,
    texture_id: String,
    texel_scale: f64,
    aspect: f64,
}

/// Everything about a scene that is fixed by the object id.
#[derive(Debug, Clone)]
struct ObjectProfile {
    shape: ObjectShape,
    texture_id: String,
    background_id: String,
    texel_scale: f64,
    texture_angle: f64,
    texture_offset: [f64; 2],
    aspect: f64,
    distractors: Vec<Distractor>,
}

fn random_shape(rng: &mut ChaCha8Rng) -> ObjectShape {
    match rng.random_range(0..3) {
        0 => ObjectShape::Quad,
        1 => ObjectShape::Ellipse,
        _ => {
            // vertices on the unit circle at sorted, well-separated angles are strictly convex
            let k = rng.random_range(5..=8);
            let slot = TAU / k as f64;
            let phase = rng.random::<f64>() * TAU;
            let verts = (0..k)
                .map(|i| {
                    let a = phase + slot * (i as f64 + rng.random_range(-0.25..0.25));
                    [libm::cos(a), libm::sin(a)]
                })
                .collect();
            ObjectShape::ConvexPolygon(verts)
        }
    }
}

fn object_profile(master_seed: u64, object_id: u32, bank: &TextureBank) -> ObjectProfile {
    let mut rng = rng_for("object", &[master_seed, object_id as u64]);
    let ids: Vec<&str> = bank.ids().collect();
    let pick = |rng: &mut ChaCha8Rng, avoid: &str| -> String {
        if ids.len() == 1 {
            return ids[0].to_string();
        }
        loop {
            let id = ids[rng.random_range(0..ids.len())];
            if id != avoid {
                return id.to_string();
            }
        }
    };
    let texture_id = pick(&mut rng, "");
    let background_id = pick(&mut rng, &texture_id);
    let shape = random_shape(&mut rng);
    let texel_scale = rng.random_range(0.8..1.3);
    let texture_angle = rng.random::<f64>() * TAU;
    let texture_offset = [rng.random::<f64>() * 64.0, rng.random::<f64>() * 64.0];
    let aspect = rng.random_range(0.75..1.33);
    let n_distractors = rng.random_range(0..=3);
    let distractors = (0..n_distractors)
        .map(|_| Distractor {
            shape: random_shape(&mut rng),
            texture_id: pick(&mut rng, &texture_id),
            texel_scale: rng.random_range(0.8..1.3),
            aspect: rng.random_range(0.7..1.4),
        })
        .collect();
    ObjectProfile { shape, texture_id, background_id, texel_scale, texture_angle, texture_offset, aspect, distractors }
}

fn view_scene(
    profile: &ObjectProfile,
    master_seed: u64,
    object_id: u32,
    view_id: u32,
    attempt: u32,
    image_size: (u32, u32),
) -> SceneSpec {
    let seed = derive_seed("view", &[master_seed, object_id as u64, view_id as u64, attempt as u64]);
    let mut rng = rng_for("view-layout", &[seed]);
    let resolution = REFERENCE_SIDE / image_size.0 as f64;

    let size = rng.random_range(0.36..0.6);
    let target = ObjectSpec {
        shape: profile.shape.clone(),
        center: [rng.random_range(0.3..0.7), rng.random_range(0.3..0.7)],
        scale: [size * profile.aspect.sqrt(), size / profile.aspect.sqrt()],
        rotation: rng.random::<f64>() * TAU,
        texture_id: profile.texture_id.clone(),
        uv_transform: UvTransform::similarity(
            profile.texel_scale * REFERENCE_SCALE / size * resolution,
            profile.texture_angle,
            profile.texture_offset,
        ),
    };
    let mut objects: Vec<ObjectSpec> = profile
        .distractors
        .iter()
        .map(|d| {
            let s = rng.random_range(0.14..0.3);
            ObjectSpec {
                shape: d.shape.clone(),
                center: [rng.random::<f64>(), rng.random::<f64>()],
                scale: [s * d.aspect.sqrt(), s / d.aspect.sqrt()],
                rotation: rng.random::<f64>() * TAU,
                texture_id: d.texture_id.clone(),
                uv_transform: UvTransform::similarity(
                    d.texel_scale * resolution,
                    rng.random::<f64>() * TAU,
                    [rng.random::<f64>() * 64.0, rng.random::<f64>() * 64.0],
                ),
            }
        })
        .collect();
    let target_index = if objects.is_empty() || rng.random::<f64>() < 0.6 {
        objects.len()
    } else {
        rng.random_range(0..=objects.len())
    };
    objects.insert(target_index, target);
    SceneSpec {
        background_texture_id: profile.background_id.clone(),
        objects,
        target_index,
        image_size,
        seed,
    }
}

fn glitch_for(class: GlitchClass, master_seed: u64, object_id: u32, view_id: u32, config: &SynthConfig) -> GlitchSpec {
    let mut rng = rng_for("glitch", &[master_seed, object_id as u64, view_id as u64, class.index() as u64]);
    let r = &config.ranges;
    match class {
        GlitchClass::Normal => GlitchSpec::normal(),
        GlitchClass::Stretched => GlitchSpec::stretched(
            rng.random_range(r.stretch_direction.0..r.stretch_direction.1),
            rng.random_range(r.stretch_factor.0..r.stretch_factor.1),
        ),
        GlitchClass::LowRes => GlitchSpec::low_res(r.lowres_factors[rng.random_range(0..r.lowres_factors.len())]),
        GlitchClass::Missing => GlitchSpec::missing(r.missing_color),
        GlitchClass::Placeholder => GlitchSpec::placeholder(config.placeholder_style),
    }
}

/// Scene for `(object_id, view_id)` without rendering, retrying layouts
/// whose target coverage is degenerate. Exposed for tests and tooling.
pub fn scene_for(object_id: u32, view_id: u32, master_seed: u64, config: &SynthConfig) -> SceneSpec {
    let profile = object_profile(master_seed, object_id, &config.bank);
    view_scene(&profile, master_seed, object_id, view_id, 0, config.image_size)
}

/// Renders view `view_id` of object `object_id` carrying glitch `class`.
///
/// The target's shape and texture depend only on `(master_seed, object_id)`;
/// placement, scale, rotation and distractor layout depend on the view; glitch
/// parameters are drawn from `(master_seed, object_id, view_id, class)`. A
/// layout with degenerate target coverage is redrawn with the attempt counter
/// salted into the view seed, up to `config.max_attempts` times.
pub fn synth_sample(
    class: GlitchClass,
    object_id: u32,
    view_id: u32,
    master_seed: u64,
    config: &SynthConfig,
) -> Result<RenderedFrame, SynthError> {
    let profile = object_profile(master_seed, object_id, &config.bank);
    let glitch = glitch_for(class, master_seed, object_id, view_id, config);
    for attempt in 0..config.max_attempts {
        let scene = view_scene(&profile, master_seed, object_id, view_id, attempt, config.image_size);
        match inject(&scene, &glitch, &config.bank) {
            Ok(mut frame) => {
                frame.provenance = Provenance {
                    scene_seed: scene.seed,
                    glitch: Some(glitch),
                    lowres_clamped: frame.provenance.lowres_clamped,
                    attempt,
                };
                return Ok(frame);
            }
            Err(SynthError::Resample { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(SynthError::Exhausted { object_id, view_id, attempts: config.max_attempts })
}
