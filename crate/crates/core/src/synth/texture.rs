//! Texture assets and the texture bank.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::SynthError;
use crate::seed::rng_for;

pub const MIN_TEXTURE_SIDE: usize = 8;

/// RGB8 image mapped onto object surfaces. Always sampled with wrap-around.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextureAsset {
    id: String,
    width: usize,
    height: usize,
    pixels: Vec<u8>,
    tileable: bool,
}

impl TextureAsset {
    pub fn new(
        id: impl Into<String>,
        width: usize,
        height: usize,
        pixels: Vec<u8>,
        tileable: bool,
    ) -> Result<Self, SynthError> {
        let id = id.into();
        if width < MIN_TEXTURE_SIDE || height < MIN_TEXTURE_SIDE {
            return Err(SynthError::InvalidTexture {
                id,
                reason: format!("{width}x{height} is below the {MIN_TEXTURE_SIDE}x{MIN_TEXTURE_SIDE} minimum"),
            });
        }
        if pixels.len() != width * height * 3 {
            return Err(SynthError::InvalidTexture {
                id,
                reason: format!("expected {} bytes, got {}", width * height * 3, pixels.len()),
            });
        }
        Ok(Self { id, width, height, pixels, tileable })
    }

    pub fn from_fn(
        id: impl Into<String>,
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [u8; 3],
    ) -> Result<Self, SynthError> {
        let mut pixels = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                pixels.extend_from_slice(&f(x, y));
            }
        }
        Self::new(id, width, height, pixels, true)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn tileable(&self) -> bool {
        self.tileable
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn texel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    /// Bilinear sample at texel coordinates `(u, v)`; texel centres sit at
    /// half-integers and addressing wraps in both directions. Channels are
    /// returned unrounded.
    #[inline]
    pub fn sample_bilinear(&self, u: f64, v: f64) -> [f64; 3] {
        let x = u - 0.5;
        let y = v - 0.5;
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let w = self.width as i64;
        let h = self.height as i64;
        let xi0 = (x0 as i64).rem_euclid(w) as usize;
        let yi0 = (y0 as i64).rem_euclid(h) as usize;
        let xi1 = (xi0 + 1) % self.width;
        let yi1 = (yi0 + 1) % self.height;
        let a = self.texel(xi0, yi0);
        let b = self.texel(xi1, yi0);
        let c = self.texel(xi0, yi1);
        let d = self.texel(xi1, yi1);
        let mut out = [0.0; 3];
        for k in 0..3 {
            let top = a[k] as f64 * (1.0 - fx) + b[k] as f64 * fx;
            let bottom = c[k] as f64 * (1.0 - fx) + d[k] as f64 * fx;
            out[k] = top * (1.0 - fy) + bottom * fy;
        }
        out
    }

    pub fn load_png(path: &Path) -> Result<Self, SynthError> {
        let id = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| SynthError::InvalidTexture {
                id: path.display().to_string(),
                reason: "file name is not valid UTF-8".into(),
            })?
            .to_string();
        let img = image::open(path)
            .map_err(|e| SynthError::InvalidTexture { id: id.clone(), reason: e.to_string() })?
            .to_rgb8();
        let (w, h) = img.dimensions();
        Self::new(id, w as usize, h as usize, img.into_raw(), true)
    }

    pub fn save_png(&self, path: &Path) -> Result<(), SynthError> {
        image::save_buffer(
            path,
            &self.pixels,
            self.width as u32,
            self.height as u32,
            image::ExtendedColorType::Rgb8,
        )
        .map_err(|e| SynthError::Io(std::io::Error::other(e)))
    }
}

/// Immutable id → texture map.
#[derive(Debug, Clone, Default)]
pub struct TextureBank {
    textures: BTreeMap<String, Arc<TextureAsset>>,
}

impl TextureBank {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, texture: TextureAsset) {
        self.textures.insert(texture.id.clone(), Arc::new(texture));
    }

    pub fn get(&self, id: &str) -> Result<&TextureAsset, SynthError> {
        self.textures
            .get(id)
            .map(|t| t.as_ref())
            .ok_or_else(|| SynthError::UnknownTexture(id.to_string()))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.textures.keys().map(|s| s.as_str())
    }

    pub fn len(&self) -> usize {
        self.textures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.textures.is_empty()
    }

    /// Loads every `*.png` in `dir`; the id is the file stem.
    pub fn load_dir(dir: &Path) -> Result<Self, SynthError> {
        let mut bank = Self::new();
        let mut paths: Vec<_> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")))
            .collect();
        paths.sort();
        for p in paths {
            bank.insert(TextureAsset::load_png(&p)?);
        }
        if bank.is_empty() {
            return Err(SynthError::InvalidTexture {
                id: dir.display().to_string(),
                reason: "texture directory holds no PNG files".into(),
            });
        }
        Ok(bank)
    }

    pub fn save_dir(&self, dir: &Path) -> Result<(), SynthError> {
        fs::create_dir_all(dir)?;
        for t in self.textures.values() {
            t.save_png(&dir.join(format!("{}.png", t.id)))?;
        }
        Ok(())
    }

    /// Deterministic bank of `count` tileable 64×64 textures. Generators are
    /// rotated through noise, cells, speckle, bricks, and marble.
    pub fn procedural(seed: u64, count: usize) -> Self {
        let mut bank = Self::new();
        for i in 0..count {
            let mut rng = rng_for("texture", &[seed, i as u64]);
            let kind = i % 5;
            let id = format!("{}_{:03}", ["noise", "cells", "speckle", "bricks", "marble"][kind], i);
            let tex = match kind {
                0 => noise_texture(&id, &mut rng),
                1 => cells_texture(&id, &mut rng),
                2 => speckle_texture(&id, &mut rng),
                3 => bricks_texture(&id, &mut rng),
                _ => marble_texture(&id, &mut rng),
            };
            bank.insert(tex);
        }
        bank
    }
}

const PROC_SIDE: usize = 64;

fn random_color(rng: &mut ChaCha8Rng) -> [f64; 3] {
    // Keep clear of the reserved white and magenta fallbacks.
    loop {
        let c = [
            rng.random_range(25.0..215.0),
            rng.random_range(25.0..215.0),
            rng.random_range(25.0..215.0),
        ];
        let magenta = c[0] > 150.0 && c[2] > 150.0 && c[1] < 110.0;
        if !magenta {
            return c;
        }
    }
}

fn mix(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t]
}

fn to_rgb(c: [f64; 3]) -> [u8; 3] {
    c.map(|v| v.round_ties_even().clamp(0.0, 255.0) as u8)
}

/// Periodic value noise on a `cells`×`cells` lattice over the texture.
struct Lattice {
    cells: usize,
    values: Vec<f64>,
}

impl Lattice {
    fn new(cells: usize, rng: &mut ChaCha8Rng) -> Self {
        let values = (0..cells * cells).map(|_| rng.random::<f64>()).collect();
        Self { cells, values }
    }

    fn at(&self, x: usize, y: usize) -> f64 {
        self.values[(y % self.cells) * self.cells + (x % self.cells)]
    }

    /// `u`, `v` in [0, 1); smoothstep interpolation.
    fn sample(&self, u: f64, v: f64) -> f64 {
        let x = u * self.cells as f64;
        let y = v * self.cells as f64;
        let (x0, y0) = (x.floor(), y.floor());
        let (fx, fy) = (x - x0, y - y0);
        let (sx, sy) = (fx * fx * (3.0 - 2.0 * fx), fy * fy * (3.0 - 2.0 * fy));
        let (xi, yi) = (x0 as usize, y0 as usize);
        let a = self.at(xi, yi);
        let b = self.at(xi + 1, yi);
        let c = self.at(xi, yi + 1);
        let d = self.at(xi + 1, yi + 1);
        let top = a + (b - a) * sx;
        let bottom = c + (d - c) * sx;
        top + (bottom - top) * sy
    }
}

fn fractal(octaves: &[Lattice], u: f64, v: f64) -> f64 {
    let mut sum = 0.0;
    let mut norm = 0.0;
    let mut amp = 1.0;
    for o in octaves {
        sum += amp * o.sample(u, v);
        norm += amp;
        amp *= 0.55;
    }
    sum / norm
}

fn octaves(rng: &mut ChaCha8Rng, base: usize, count: usize) -> Vec<Lattice> {
    (0..count).map(|i| Lattice::new(base << i, rng)).collect()
}

fn grain(rng: &mut ChaCha8Rng, amount: f64) -> f64 {
    (rng.random::<f64>() - 0.5) * 2.0 * amount
}

fn add_grain(c: [f64; 3], g: f64) -> [f64; 3] {
    [c[0] + g, c[1] + g, c[2] + g]
}

fn noise_texture(id: &str, rng: &mut ChaCha8Rng) -> TextureAsset {
    let (a, b, c) = (random_color(rng), random_color(rng), random_color(rng));
    let oct = octaves(rng, 4, 4);
    let mut grain_rng = rng.clone();
    TextureAsset::from_fn(id, PROC_SIDE, PROC_SIDE, |x, y| {
        let n = fractal(&oct, x as f64 / PROC_SIDE as f64, y as f64 / PROC_SIDE as f64);
        let base = if n < 0.5 { mix(a, b, n * 2.0) } else { mix(b, c, (n - 0.5) * 2.0) };
        to_rgb(add_grain(base, grain(&mut grain_rng, 22.0)))
    })
    .expect("procedural texture is valid")
}

fn cells_texture(id: &str, rng: &mut ChaCha8Rng) -> TextureAsset {
    let n_points = rng.random_range(10..24);
    let points: Vec<(f64, f64)> = (0..n_points)
        .map(|_| (rng.random::<f64>() * PROC_SIDE as f64, rng.random::<f64>() * PROC_SIDE as f64))
        .collect();
    let base = random_color(rng);
    let border = mix(random_color(rng), [0.0, 0.0, 0.0], 0.6);
    let colors: Vec<[f64; 3]> = (0..n_points).map(|_| mix(base, random_color(rng), 0.45)).collect();
    let mut grain_rng = rng.clone();
    let side = PROC_SIDE as f64;
    TextureAsset::from_fn(id, PROC_SIDE, PROC_SIDE, |x, y| {
        let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
        let mut best = (f64::MAX, f64::MAX, 0usize);
        for (i, &(cx, cy)) in points.iter().enumerate() {
            let dx = (px - cx).abs().min(side - (px - cx).abs());
            let dy = (py - cy).abs().min(side - (py - cy).abs());
            let d = (dx * dx + dy * dy).sqrt();
            if d < best.0 {
                best = (d, best.0, i);
            } else if d < best.1 {
                best.1 = d;
            }
        }
        let edge = best.1 - best.0;
        let c = if edge < 1.2 { border } else { colors[best.2] };
        to_rgb(add_grain(c, grain(&mut grain_rng, 18.0)))
    })
    .expect("procedural texture is valid")
}

fn speckle_texture(id: &str, rng: &mut ChaCha8Rng) -> TextureAsset {
    let base = random_color(rng);
    let dot = random_color(rng);
    let density = rng.random_range(0.08..0.2);
    let oct = octaves(rng, 8, 2);
    let mut px_rng = rng.clone();
    TextureAsset::from_fn(id, PROC_SIDE, PROC_SIDE, |x, y| {
        let n = fractal(&oct, x as f64 / PROC_SIDE as f64, y as f64 / PROC_SIDE as f64);
        let mut c = mix(base, [base[0] * 0.6, base[1] * 0.6, base[2] * 0.6], n);
        if px_rng.random::<f64>() < density {
            c = dot;
        }
        to_rgb(add_grain(c, grain(&mut px_rng, 15.0)))
    })
    .expect("procedural texture is valid")
}

fn bricks_texture(id: &str, rng: &mut ChaCha8Rng) -> TextureAsset {
    let rows = [4usize, 8, 8, 16][rng.random_range(0..4)];
    let cols = rows / 2;
    let brick_h = PROC_SIDE / rows;
    let brick_w = PROC_SIDE / cols;
    let base = random_color(rng);
    let mortar = mix(random_color(rng), [200.0, 200.0, 190.0], 0.4);
    let tints: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(0.7..1.15)).collect();
    let mut grain_rng = rng.clone();
    TextureAsset::from_fn(id, PROC_SIDE, PROC_SIDE, |x, y| {
        let row = y / brick_h;
        let shift = if row % 2 == 1 { brick_w / 2 } else { 0 };
        let xs = (x + shift) % PROC_SIDE;
        let col = xs / brick_w;
        let in_mortar = y % brick_h == 0 || xs % brick_w == 0;
        let c = if in_mortar {
            mortar
        } else {
            let t = tints[row * cols + col];
            [base[0] * t, base[1] * t, base[2] * t]
        };
        to_rgb(add_grain(c, grain(&mut grain_rng, 20.0)))
    })
    .expect("procedural texture is valid")
}

fn marble_texture(id: &str, rng: &mut ChaCha8Rng) -> TextureAsset {
    let (a, b) = (random_color(rng), random_color(rng));
    let oct = octaves(rng, 4, 4);
    // Integer frequencies keep the veins periodic over the tile.
    let fx = rng.random_range(1..4) as f64;
    let fy = rng.random_range(1..4) as f64;
    let mut grain_rng = rng.clone();
    TextureAsset::from_fn(id, PROC_SIDE, PROC_SIDE, |x, y| {
        let u = x as f64 / PROC_SIDE as f64;
        let v = y as f64 / PROC_SIDE as f64;
        let turb = fractal(&oct, u, v);
        let s = (2.0 * PI * (fx * u + fy * v) + 9.0 * turb).sin();
        let c = mix(a, b, 0.5 + 0.5 * s);
        to_rgb(add_grain(c, grain(&mut grain_rng, 20.0)))
    })
    .expect("procedural texture is valid")
}

/// Flat texture of one color.
pub fn solid_texture(id: &str, color: [u8; 3]) -> TextureAsset {
    TextureAsset::from_fn(id, MIN_TEXTURE_SIDE, MIN_TEXTURE_SIDE, |_, _| color)
        .expect("solid texture is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_tiny_textures() {
        let err = TextureAsset::new("t", 4, 8, vec![0; 96], true).unwrap_err();
        assert!(matches!(err, SynthError::InvalidTexture { .. }));
    }

    #[test]
    fn bilinear_hits_texel_centres_exactly() {
        let tex = TextureAsset::from_fn("g", 8, 8, |x, y| [(x * 10) as u8, (y * 10) as u8, 7]).unwrap();
        let c = tex.sample_bilinear(3.5, 5.5);
        assert_eq!(c, [30.0, 50.0, 7.0]);
        // halfway between texels 0 and 7 across the wrap seam
        let c = tex.sample_bilinear(0.0, 0.5);
        assert_eq!(c[0], 35.0);
    }

    #[test]
    fn procedural_bank_is_deterministic() {
        let a = TextureBank::procedural(7, 10);
        let b = TextureBank::procedural(7, 10);
        assert_eq!(a.len(), 10);
        for id in a.ids() {
            assert_eq!(a.get(id).unwrap(), b.get(id).unwrap());
        }
        assert!(matches!(a.get("nope"), Err(SynthError::UnknownTexture(_))));
    }

    #[test]
    fn bank_round_trips_through_png_dir() {
        let dir = tempfile::tempdir().unwrap();
        let bank = TextureBank::procedural(3, 4);
        bank.save_dir(dir.path()).unwrap();
        let loaded = TextureBank::load_dir(dir.path()).unwrap();
        assert_eq!(loaded.len(), 4);
        for id in bank.ids() {
            assert_eq!(bank.get(id).unwrap().pixels(), loaded.get(id).unwrap().pixels());
        }
    }
}
