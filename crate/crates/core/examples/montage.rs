//! Writes a grid of synthesized samples (rows: objects, columns: classes).

use texglitch::synth::{synth_sample, PlaceholderStyle, SynthConfig, TextureBank};
use texglitch::GlitchClass;

fn main() {
    let out = std::env::args().nth(1).unwrap_or_else(|| "montage.png".into());
    let side = 96u32;
    let config = SynthConfig::new(TextureBank::procedural(0, 64), (side, side), PlaceholderStyle::Pattern);
    let rows = 6u32;
    let mut canvas = image::RgbImage::new(side * 5, side * rows);
    for object in 0..rows {
        for class in GlitchClass::ALL {
            let f = synth_sample(class, object, 0, 1, &config).expect("sample");
            let img = image::RgbImage::from_raw(side, side, f.pixels).unwrap();
            image::imageops::replace(&mut canvas, &img, (class.index() as u32 * side) as i64, (object * side) as i64);
        }
    }
    canvas.save(&out).expect("write montage");
}
