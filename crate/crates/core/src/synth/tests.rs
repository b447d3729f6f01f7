use super::*;

fn checker(id: &str, side: usize) -> TextureAsset {
    TextureAsset::from_fn(id, side, side, |x, y| if (x + y) % 2 == 0 { [0, 0, 0] } else { [255, 255, 255] }).unwrap()
}

fn stripes(id: &str, vertical: bool) -> TextureAsset {
    TextureAsset::from_fn(id, 8, 8, |x, y| {
        let t = if vertical { x } else { y };
        if t % 2 == 0 { [20, 40, 60] } else { [220, 200, 180] }
    })
    .unwrap()
}

fn bank() -> TextureBank {
    let mut bank = TextureBank::new();
    bank.insert(checker("checker", 8));
    bank.insert(stripes("vstripes", true));
    bank.insert(stripes("hstripes", false));
    bank.insert(solid_texture("gray", [90, 90, 90]));
    bank.insert(TextureAsset::from_fn("grad", 16, 16, |x, y| [(x * 15) as u8, (y * 15) as u8, 100]).unwrap());
    bank
}

fn quad(texture: &str, center: [f64; 2], scale: [f64; 2], rotation: f64) -> ObjectSpec {
    ObjectSpec {
        shape: ObjectShape::Quad,
        center,
        scale,
        rotation,
        texture_id: texture.into(),
        uv_transform: UvTransform::IDENTITY,
    }
}

fn scene(objects: Vec<ObjectSpec>, target_index: usize, side: u32) -> SceneSpec {
    SceneSpec { background_texture_id: "gray".into(), objects, target_index, image_size: (side, side), seed: 11 }
}

/// Two objects with a partially occluded target.
fn busy_scene() -> SceneSpec {
    let mut distractor = quad("vstripes", [0.7, 0.65], [0.3, 0.25], 0.4);
    distractor.shape = ObjectShape::Ellipse;
    let mut target = quad("grad", [0.45, 0.5], [0.5, 0.4], 0.3);
    target.uv_transform = UvTransform::similarity(0.8, 0.2, [3.0, 1.0]);
    scene(vec![target, distractor], 0, 48)
}

#[test]
fn identity_quad_tiles_texture_and_full_mask_requests_resample() {
    let mut b = TextureBank::new();
    b.insert(solid_texture("gray", [90, 90, 90]));
    // textures have an 8-texel minimum; a 4×4 checkerboard repeated twice is the same image
    let c = TextureAsset::from_fn("c", 8, 8, |x, y| if (x % 4 + y % 4) % 2 == 0 { [0; 3] } else { [255; 3] }).unwrap();
    b.insert(c);
    let spec = scene(vec![quad("c", [0.5, 0.5], [1.0, 1.0], 0.0)], 0, 64);
    let r = raster::rasterize(&spec, &b, None).unwrap();
    for y in 0..64 {
        for x in 0..64 {
            let v = if (x % 4 + y % 4) % 2 == 0 { 0 } else { 255 };
            assert_eq!(r.pixels[(y * 64 + x) * 3], v);
        }
    }
    assert!(r.target_mask.iter().all(|&m| m));
    match render_scene(&spec, &b) {
        Err(SynthError::Resample { coverage, spec: offending }) => {
            assert_eq!(coverage, 1.0);
            assert_eq!(*offending, spec);
        }
        other => panic!("expected resample signal, got {other:?}"),
    }
}

#[test]
fn rendering_is_deterministic() {
    let spec = busy_scene();
    let a = render_scene(&spec, &bank()).unwrap();
    let b = render_scene(&spec, &bank()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn rotated_square_mask_matches_analytic_area() {
    // large enough that pixel-centre discretisation stays well under 2%
    let side = 256u32;
    let spec = scene(vec![quad("checker", [0.5, 0.5], [0.3, 0.3], std::f64::consts::FRAC_PI_4)], 0, side);
    let frame = render_scene(&spec, &bank()).unwrap();
    let count = frame.target_mask.iter().filter(|&&m| m).count() as f64;
    let expected = (side * side) as f64 * 0.09;
    assert!((count - expected).abs() / expected < 0.02, "{count} vs {expected}");
}

#[test]
fn unknown_texture_is_a_resolution_error() {
    let spec = scene(vec![quad("nope", [0.5, 0.5], [0.5, 0.5], 0.0)], 0, 32);
    assert!(matches!(render_scene(&spec, &bank()), Err(SynthError::UnknownTexture(id)) if id == "nope"));
}

#[test]
fn invalid_scenes_are_rejected() {
    let bank = bank();
    let mut spec = busy_scene();
    spec.target_index = 5;
    assert!(matches!(render_scene(&spec, &bank), Err(SynthError::InvalidScene(_))));
    let mut spec = busy_scene();
    spec.objects[0].uv_transform.matrix = [[1.0, 2.0], [0.5, 1.0]];
    assert!(matches!(render_scene(&spec, &bank), Err(SynthError::InvalidScene(_))));
    let mut spec = busy_scene();
    spec.objects[1].center = [3.0, 3.0];
    assert!(matches!(render_scene(&spec, &bank), Err(SynthError::InvalidScene(_))));
}

fn assert_local(glitched: &RenderedFrame, normal: &RenderedFrame) {
    assert_eq!(glitched.target_mask, normal.target_mask);
    for (p, &m) in glitched.target_mask.iter().enumerate() {
        if !m {
            assert_eq!(glitched.pixels[p * 3..p * 3 + 3], normal.pixels[p * 3..p * 3 + 3], "pixel {p}");
        }
    }
}

fn masked_colors(frame: &RenderedFrame) -> Vec<[u8; 3]> {
    let mut c: Vec<[u8; 3]> = frame
        .target_mask
        .iter()
        .enumerate()
        .filter(|(_, &m)| m)
        .map(|(p, _)| [frame.pixels[p * 3], frame.pixels[p * 3 + 1], frame.pixels[p * 3 + 2]])
        .collect();
    c.sort();
    c.dedup();
    c
}

#[test]
fn unit_stretch_is_identity() {
    let spec = busy_scene();
    let bank = bank();
    let normal = render_scene(&spec, &bank).unwrap();
    let stretched = render_stretched(&spec, &GlitchSpec::stretched(0.9, 1.0), &bank).unwrap();
    assert_eq!(stretched.pixels, normal.pixels);
    assert_eq!(stretched.label, GlitchClass::Stretched);
}

#[test]
fn stretch_rejects_non_expanding_factor() {
    let spec = busy_scene();
    for f in [1.0, 0.5, f64::NAN] {
        assert!(matches!(
            apply_stretch(&spec, &GlitchSpec::stretched(0.0, f), &bank()),
            Err(SynthError::InvalidParameter(_))
        ));
    }
}

/// Smallest horizontal shift under which every masked row segment repeats.
fn horizontal_period(frame: &RenderedFrame, y: usize, x0: usize, x1: usize) -> usize {
    (1..(x1 - x0) / 2)
        .find(|&p| (x0..x1 - p).all(|x| frame.pixel(x, y) == frame.pixel(x + p, y)))
        .expect("row is periodic")
}

#[test]
fn axis_aligned_stretch_scales_vertical_stripes_only() {
    let bank = bank();
    let glitch = GlitchSpec::stretched(0.0, 4.0);

    let h = scene(vec![quad("hstripes", [0.5, 0.5], [0.75, 0.75], 0.0)], 0, 32);
    let normal = render_scene(&h, &bank).unwrap();
    let stretched = apply_stretch(&h, &glitch, &bank).unwrap();
    assert_eq!(normal.pixels, stretched.pixels);

    let v = scene(vec![quad("vstripes", [0.5, 0.5], [0.75, 0.75], 0.0)], 0, 32);
    let normal = render_scene(&v, &bank).unwrap();
    let stretched = apply_stretch(&v, &glitch, &bank).unwrap();
    // the quad spans pixels 4..28
    for y in 4..28 {
        assert_eq!(horizontal_period(&normal, y, 4, 28), 2);
        assert_eq!(horizontal_period(&stretched, y, 4, 28), 8);
    }
    assert_local(&stretched, &normal);
}

/// Lag-1 autocorrelation of the masked luminance along x and y.
fn lag_correlations(frame: &RenderedFrame) -> (f64, f64) {
    let (w, h) = (frame.width as usize, frame.height as usize);
    let lum = |x: usize, y: usize| frame.pixel(x, y).iter().map(|&v| v as f64).sum::<f64>() / 3.0;
    let inside = |x: usize, y: usize| frame.target_mask[y * w + x];
    let vals: Vec<f64> = (0..h).flat_map(|y| (0..w).map(move |x| (x, y))).filter(|&(x, y)| inside(x, y)).map(|(x, y)| lum(x, y)).collect();
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
    let corr = |dx: usize, dy: usize| {
        let mut s = 0.0;
        let mut n = 0.0;
        for y in 0..h - dy {
            for x in 0..w - dx {
                if inside(x, y) && inside(x + dx, y + dy) {
                    s += (lum(x, y) - mean) * (lum(x + dx, y + dy) - mean);
                    n += 1.0;
                }
            }
        }
        s / n / var
    };
    (corr(1, 0), corr(0, 1))
}

#[test]
fn stretch_increases_autocorrelation_anisotropy() {
    let bank = bank();
    let spec = scene(vec![quad("checker", [0.5, 0.5], [0.7, 0.7], 0.0)], 0, 40);
    let normal = render_scene(&spec, &bank).unwrap();
    let stretched = apply_stretch(&spec, &GlitchSpec::stretched(0.0, 5.0), &bank).unwrap();
    let (nx, ny) = lag_correlations(&normal);
    let (sx, sy) = lag_correlations(&stretched);
    assert!((sx - sy).abs() > (nx - ny).abs() + 0.5, "normal ({nx},{ny}) stretched ({sx},{sy})");
}

#[test]
fn lowres_unit_factor_is_identity_and_local() {
    let spec = busy_scene();
    let bank = bank();
    let normal = render_scene(&spec, &bank).unwrap();
    let same = render_lowres(&spec, &GlitchSpec::low_res(1.0), &bank).unwrap();
    assert_eq!(same.pixels, normal.pixels);
    let blurred = apply_lowres(&spec, &GlitchSpec::low_res(8.0), &bank).unwrap();
    assert_ne!(blurred.pixels, normal.pixels);
    assert_local(&blurred, &normal);
    assert!(!blurred.provenance.lowres_clamped);
    let clamped = apply_lowres(&spec, &GlitchSpec::low_res(64.0), &bank).unwrap();
    assert!(clamped.provenance.lowres_clamped);
    assert!(matches!(apply_lowres(&spec, &GlitchSpec::low_res(0.9), &bank), Err(SynthError::InvalidParameter(_))));
}

#[test]
fn missing_fills_mask_with_one_color() {
    let spec = busy_scene();
    let bank = bank();
    let normal = render_scene(&spec, &bank).unwrap();
    let missing = apply_missing(&spec, &GlitchSpec::missing(DEFAULT_MISSING_COLOR), &bank).unwrap();
    assert_eq!(masked_colors(&missing), vec![[255, 0, 255]]);
    assert_local(&missing, &normal);
    assert_eq!(missing.label, GlitchClass::Missing);
}

#[test]
fn placeholder_styles() {
    let spec = busy_scene();
    let bank = bank();
    let normal = render_scene(&spec, &bank).unwrap();
    let white = apply_placeholder(&spec, &GlitchSpec::placeholder(PlaceholderStyle::White), &bank).unwrap();
    assert_eq!(masked_colors(&white), vec![[255, 255, 255]]);
    let pattern = apply_placeholder(&spec, &GlitchSpec::placeholder(PlaceholderStyle::Pattern), &bank).unwrap();
    assert!(masked_colors(&pattern).len() >= 2);
    assert_local(&white, &normal);
    assert_local(&pattern, &white);
}

fn synth_config() -> SynthConfig {
    SynthConfig::new(TextureBank::procedural(5, 12), (64, 64), PlaceholderStyle::Pattern)
}

#[test]
fn synth_sample_is_deterministic_and_object_stable() {
    let config = synth_config();
    let a = synth_sample(GlitchClass::LowRes, 3, 7, 42, &config).unwrap();
    let b = synth_sample(GlitchClass::LowRes, 3, 7, 42, &config).unwrap();
    assert_eq!(a, b);
    let s1 = scene_for(3, 7, 42, &config);
    let s2 = scene_for(3, 8, 42, &config);
    assert_eq!(s1.target().texture_id, s2.target().texture_id);
    assert_eq!(s1.target().shape.family(), s2.target().shape.family());
    assert_ne!(s1.target().center, s2.target().center);
}

#[test]
fn normal_sample_is_plain_render() {
    let config = synth_config();
    let frame = synth_sample(GlitchClass::Normal, 2, 4, 9, &config).unwrap();
    let spec = scene_for(2, 4, 9, &config);
    let direct = render_scene(&spec, &config.bank).unwrap();
    assert_eq!(frame.pixels, direct.pixels);
    assert_eq!(frame.label, GlitchClass::Normal);
}

#[test]
fn every_class_is_local_to_the_target() {
    let config = synth_config();
    for object in 0..4 {
        for view in 0..3 {
            let normal = synth_sample(GlitchClass::Normal, object, view, 1, &config).unwrap();
            for class in GlitchClass::ALL {
                let frame = synth_sample(class, object, view, 1, &config).unwrap();
                assert_eq!(frame.label, class);
                assert!((MIN_COVERAGE..=MAX_COVERAGE).contains(&frame.coverage()));
                assert_local(&frame, &normal);
            }
        }
    }
}

#[test]
fn frame_and_mask_png_round_trip() {
    let config = synth_config();
    let frame = synth_sample(GlitchClass::Missing, 1, 1, 1, &config).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.png");
    frame.save(&path).unwrap();
    let img = image::open(&path).unwrap().to_rgb8();
    assert_eq!(img.into_raw(), frame.pixels);
    let (w, h, mask) = read_mask_png(&RenderedFrame::mask_path(&path)).unwrap();
    assert_eq!((w, h), (64, 64));
    assert_eq!(mask, frame.target_mask);
}
