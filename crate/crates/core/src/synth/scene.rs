//! Scene description types.

use serde::{Deserialize, Serialize};

use super::SynthError;

pub const MAX_OBJECTS: usize = 16;

/// Footprint of a composited object, in unit local coordinates where the
/// object's bounding box spans [-1, 1]².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "vertices")]
pub enum ObjectShape {
    Quad,
    Ellipse,
    /// Counter-clockwise convex polygon with 3 to 8 vertices.
    ConvexPolygon(Vec<[f64; 2]>),
}

impl ObjectShape {
    pub fn family(&self) -> &'static str {
        match self {
            ObjectShape::Quad => "quad",
            ObjectShape::Ellipse => "ellipse",
            ObjectShape::ConvexPolygon(_) => "convex_polygon",
        }
    }

    #[inline]
    pub fn contains(&self, x: f64, y: f64) -> bool {
        match self {
            ObjectShape::Quad => x.abs() <= 1.0 && y.abs() <= 1.0,
            ObjectShape::Ellipse => x * x + y * y <= 1.0,
            ObjectShape::ConvexPolygon(v) => {
                let n = v.len();
                (0..n).all(|i| {
                    let a = v[i];
                    let b = v[(i + 1) % n];
                    (b[0] - a[0]) * (y - a[1]) - (b[1] - a[1]) * (x - a[0]) >= 0.0
                })
            }
        }
    }

    fn validate(&self) -> Result<(), String> {
        if let ObjectShape::ConvexPolygon(v) = self {
            if !(3..=8).contains(&v.len()) {
                return Err(format!("polygon has {} vertices, expected 3..=8", v.len()));
            }
            let n = v.len();
            for i in 0..n {
                let (a, b, c) = (v[i], v[(i + 1) % n], v[(i + 2) % n]);
                let cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0]);
                if cross <= 0.0 {
                    return Err("polygon is not strictly convex and counter-clockwise".into());
                }
            }
        }
        Ok(())
    }
}

/// Affine map from object-local pixel offsets to texel coordinates:
/// `texel = matrix · local + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UvTransform {
    pub matrix: [[f64; 2]; 2],
    pub offset: [f64; 2],
}

impl UvTransform {
    pub const IDENTITY: UvTransform = UvTransform { matrix: [[1.0, 0.0], [0.0, 1.0]], offset: [0.0, 0.0] };

    /// Uniform texel density `scale` (texels per pixel) rotated by `angle`.
    pub fn similarity(scale: f64, angle: f64, offset: [f64; 2]) -> Self {
        let (s, c) = (libm::sin(angle), libm::cos(angle));
        Self { matrix: [[scale * c, -scale * s], [scale * s, scale * c]], offset }
    }

    pub fn det(&self) -> f64 {
        self.matrix[0][0] * self.matrix[1][1] - self.matrix[0][1] * self.matrix[1][0]
    }

    #[inline]
    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let m = &self.matrix;
        (m[0][0] * x + m[0][1] * y + self.offset[0], m[1][0] * x + m[1][1] * y + self.offset[1])
    }

    /// `self ∘ linear`: local coordinates pass through `linear` first.
    pub fn pre_compose(&self, linear: [[f64; 2]; 2]) -> Self {
        let a = &self.matrix;
        let b = &linear;
        let mut m = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                m[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Self { matrix: m, offset: self.offset }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub shape: ObjectShape,
    /// Normalized scene coordinates in [0, 1]².
    pub center: [f64; 2],
    /// Footprint extent as a fraction of the frame width/height.
    pub scale: [f64; 2],
    pub rotation: f64,
    pub texture_id: String,
    pub uv_transform: UvTransform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub background_texture_id: String,
    /// Painter's order: later objects cover earlier ones.
    pub objects: Vec<ObjectSpec>,
    pub target_index: usize,
    pub image_size: (u32, u32),
    pub seed: u64,
}

impl SceneSpec {
    pub fn target(&self) -> &ObjectSpec {
        &self.objects[self.target_index]
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |reason: String| Err(SynthError::InvalidScene(reason));
        if self.objects.is_empty() || self.objects.len() > MAX_OBJECTS {
            return bad(format!("{} objects, expected 1..={MAX_OBJECTS}", self.objects.len()));
        }
        if self.target_index >= self.objects.len() {
            return bad(format!("target_index {} out of range", self.target_index));
        }
        if self.image_size.0 == 0 || self.image_size.1 == 0 {
            return bad("empty image size".into());
        }
        for (i, o) in self.objects.iter().enumerate() {
            if !(o.scale[0] > 0.0 && o.scale[1] > 0.0) {
                return bad(format!("object {i} has non-positive scale"));
            }
            if o.uv_transform.det().abs() <= 1e-9 {
                return bad(format!("object {i} has a singular uv transform"));
            }
            if !o.center.iter().chain(o.scale.iter()).all(|v| v.is_finite()) || !o.rotation.is_finite() {
                return bad(format!("object {i} has non-finite placement"));
            }
            o.shape.validate().map_err(|r| SynthError::InvalidScene(format!("object {i}: {r}")))?;
            // Footprint bounding circle must reach into the frame.
            let r = 0.5 * (o.scale[0].hypot(o.scale[1]));
            if o.center[0] + r < 0.0 || o.center[0] - r > 1.0 || o.center[1] + r < 0.0 || o.center[1] - r > 1.0 {
                return bad(format!("object {i} lies outside the frame"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polygon_containment() {
        let tri = ObjectShape::ConvexPolygon(vec![[-1.0, -1.0], [1.0, -1.0], [0.0, 1.0]]);
        assert!(tri.validate().is_ok());
        assert!(tri.contains(0.0, 0.0));
        assert!(!tri.contains(0.9, 0.9));
        let cw = ObjectShape::ConvexPolygon(vec![[0.0, 1.0], [1.0, -1.0], [-1.0, -1.0]]);
        assert!(cw.validate().is_err());
    }

    #[test]
    fn pre_compose_applies_inner_map_first() {
        let uv = UvTransform { matrix: [[2.0, 0.0], [0.0, 1.0]], offset: [1.0, 0.0] };
        let c = uv.pre_compose([[0.0, 1.0], [1.0, 0.0]]);
        assert_eq!(c.apply(3.0, 5.0), (11.0, 3.0));
    }
}
