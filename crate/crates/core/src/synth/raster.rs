//! Flat-textured 2-D compositor.

use super::scene::{ObjectSpec, SceneSpec, UvTransform};
use super::texture::{TextureAsset, TextureBank};
use super::SynthError;

/// Side length at which one background texel covers one pixel.
pub const REFERENCE_SIDE: f64 = 96.0;

/// How the target object is coloured; every other object uses its own
/// texture and uv transform.
pub(crate) enum Surface<'a> {
    Texture { texture: &'a TextureAsset, uv: UvTransform },
    Solid([u8; 3]),
}

pub(crate) struct Raster {
    pub pixels: Vec<u8>,
    pub target_mask: Vec<bool>,
}

#[inline]
fn quantize(c: [f64; 3]) -> [u8; 3] {
    c.map(|v| v.round_ties_even().clamp(0.0, 255.0) as u8)
}

/// Composites background then objects in painter's order. When `target` is
/// `None` the target object is drawn like any other.
pub(crate) fn rasterize(
    spec: &SceneSpec,
    bank: &TextureBank,
    target: Option<Surface<'_>>,
) -> Result<Raster, SynthError> {
    spec.validate()?;
    let (w, h) = (spec.image_size.0 as usize, spec.image_size.1 as usize);
    let background = bank.get(&spec.background_texture_id)?;
    let textures = spec
        .objects
        .iter()
        .map(|o| bank.get(&o.texture_id))
        .collect::<Result<Vec<_>, _>>()?;

    let mut pixels = vec![0u8; w * h * 3];
    let k = REFERENCE_SIDE / w as f64;
    let kv = REFERENCE_SIDE / h as f64;
    for y in 0..h {
        for x in 0..w {
            let c = background.sample_bilinear((x as f64 + 0.5) * k, (y as f64 + 0.5) * kv);
            pixels[(y * w + x) * 3..][..3].copy_from_slice(&quantize(c));
        }
    }

    let mut owner = vec![usize::MAX; w * h];
    for (index, object) in spec.objects.iter().enumerate() {
        let surface = match (&target, index == spec.target_index) {
            (Some(Surface::Texture { texture, uv }), true) => Surface::Texture { texture, uv: *uv },
            (Some(Surface::Solid(c)), true) => Surface::Solid(*c),
            _ => Surface::Texture { texture: textures[index], uv: object.uv_transform },
        };
        draw_object(object, &surface, w, h, index, &mut pixels, &mut owner);
    }
    let target_mask = owner.iter().map(|&o| o == spec.target_index).collect();
    Ok(Raster { pixels, target_mask })
}

fn draw_object(
    object: &ObjectSpec,
    surface: &Surface<'_>,
    w: usize,
    h: usize,
    index: usize,
    pixels: &mut [u8],
    owner: &mut [usize],
) {
    let cx = object.center[0] * w as f64;
    let cy = object.center[1] * h as f64;
    let hx = object.scale[0] * w as f64 * 0.5;
    let hy = object.scale[1] * h as f64 * 0.5;
    let (sin, cos) = (libm::sin(object.rotation), libm::cos(object.rotation));
    let r = hx.hypot(hy) + 1.0;
    let x0 = (cx - r).floor().max(0.0) as usize;
    let y0 = (cy - r).floor().max(0.0) as usize;
    let x1 = ((cx + r).ceil().max(0.0) as usize).min(w);
    let y1 = ((cy + r).ceil().max(0.0) as usize).min(h);
    for y in y0..y1 {
        let dy = y as f64 + 0.5 - cy;
        for x in x0..x1 {
            let dx = x as f64 + 0.5 - cx;
            // rotate the pixel offset into the object frame
            let lx = cos * dx + sin * dy;
            let ly = -sin * dx + cos * dy;
            if !object.shape.contains(lx / hx, ly / hy) {
                continue;
            }
            let color = match surface {
                Surface::Solid(c) => *c,
                Surface::Texture { texture, uv } => {
                    let (u, v) = uv.apply(lx, ly);
                    quantize(texture.sample_bilinear(u, v))
                }
            };
            let p = y * w + x;
            pixels[p * 3..][..3].copy_from_slice(&color);
            owner[p] = index;
        }
    }
}
