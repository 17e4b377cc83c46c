//! Procedurally drawn cell images for tests and demos.
//!
//! Normal cells are filled discs with a pale centre, sickle cells are
//! crescents (a disc minus an offset disc) and other deformations are thin
//! rings. Size, position, orientation and pixel noise are randomised from a
//! seed. The segmented variant keeps the cell and blacks out the background.

use std::fs;
use std::io;
use std::path::Path;

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{ClassLabel, Dataset, ImageVariant, LabeledImage};
use crate::features::FeatureMatrix;

pub const SIDE: u32 = 80;

const BACKGROUND: [f64; 3] = [222.0, 206.0, 204.0];
const CELL: [f64; 3] = [176.0, 92.0, 98.0];

/// Returns `(image, cell mask)`.
fn draw(class: ClassLabel, seed: u64) -> (RgbImage, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = SIDE as f64 / 2.0;
    let cx = c + rng.gen_range(-4.0..4.0);
    let cy = c + rng.gen_range(-4.0..4.0);
    let radius = rng.gen_range(22.0..28.0);
    let angle: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let (sin, cos) = angle.sin_cos();
    let offset = radius * rng.gen_range(0.45..0.6);
    let ring_width = rng.gen_range(4.0..6.0);
    let shade = rng.gen_range(0.85..1.1);

    let mut mask = vec![false; (SIDE * SIDE) as usize];
    let mut img = RgbImage::new(SIDE, SIDE);
    for y in 0..SIDE {
        for x in 0..SIDE {
            let dx = x as f64 + 0.5 - cx;
            let dy = y as f64 + 0.5 - cy;
            let d = (dx * dx + dy * dy).sqrt();
            // 1 = full cell pigment, 0 = background
            let density = match class {
                ClassLabel::Normal => {
                    if d <= radius {
                        1.0 - 0.45 * (-(d * d) / (2.0 * (radius * 0.35).powi(2))).exp()
                    } else {
                        0.0
                    }
                }
                ClassLabel::Sickle => {
                    let ox = dx - offset * cos;
                    let oy = dy - offset * sin;
                    let inner = (ox * ox + oy * oy).sqrt();
                    if d <= radius && inner > radius * 0.95 {
                        1.0
                    } else {
                        0.0
                    }
                }
                ClassLabel::OtherDeformation => {
                    if (d - radius * 0.8).abs() <= ring_width {
                        1.0
                    } else {
                        0.0
                    }
                }
            };
            mask[(y * SIDE + x) as usize] = density > 0.0;
            let mut px = [0u8; 3];
            for ch in 0..3 {
                let base = BACKGROUND[ch] + (CELL[ch] * shade - BACKGROUND[ch]) * density;
                let v = base + rng.gen_range(-12.0..12.0);
                px[ch] = v.round().clamp(0.0, 255.0) as u8;
            }
            img.put_pixel(x, y, Rgb(px));
        }
    }
    (img, mask)
}

/// One synthetic cell image of `variant`.
pub fn synthetic_image(class: ClassLabel, variant: ImageVariant, seed: u64) -> RgbImage {
    let (mut img, mask) = draw(class, seed);
    if variant == ImageVariant::Segmented {
        for (i, px) in img.pixels_mut().enumerate() {
            if !mask[i] {
                *px = Rgb([0, 0, 0]);
            }
        }
    }
    img
}

fn image_seed(seed: u64, class: ClassLabel, index: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((class.code() as u64) << 32)
        .wrapping_add(index as u64)
}

fn file_name(class: ClassLabel, index: usize) -> String {
    format!("{}_{index:04}.png", class.dir_name())
}

/// In-memory corpus with `per_class` images of each class.
pub fn synthetic_dataset(per_class: usize, variant: ImageVariant, seed: u64) -> Dataset {
    let records = ClassLabel::ALL
        .iter()
        .flat_map(|&class| {
            (0..per_class).map(move |i| LabeledImage {
                id: format!("{}/{}", class.dir_name(), file_name(class, i)),
                pixels: synthetic_image(class, variant, image_seed(seed, class, i)),
                label: class,
                variant,
            })
        })
        .collect();
    Dataset::from_records(records, None)
}

/// Writes `<root>/{original,segmented}/<class>/*.png` plus a matching `manifest.json`.
pub fn write_synthetic_corpus(root: &Path, per_class: usize, seed: u64) -> io::Result<()> {
    for variant in ImageVariant::ALL {
        for class in ClassLabel::ALL {
            let dir = root.join(variant.dir_name()).join(class.dir_name());
            fs::create_dir_all(&dir)?;
            for i in 0..per_class {
                synthetic_image(class, variant, image_seed(seed, class, i))
                    .save(dir.join(file_name(class, i)))
                    .map_err(io::Error::other)?;
            }
        }
    }
    let manifest = format!(r#"{{"normal": {per_class}, "sickle": {per_class}, "other": {per_class}}}"#);
    fs::write(root.join(crate::dataset::MANIFEST_FILE), manifest)
}

/// Random `rows × dim` matrix with balanced labels, for timing runs. Each
/// class shifts a disjoint third of the columns so the problem is learnable.
pub fn synthetic_features(rows: usize, dim: usize, seed: u64) -> FeatureMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<ClassLabel> = (0..rows).map(|i| ClassLabel::ALL[i % ClassLabel::COUNT]).collect();
    let band = dim.div_ceil(ClassLabel::COUNT).max(1);
    let values = ndarray::Array2::from_shape_fn((rows, dim), |(r, c)| {
        let shift = if c / band == labels[r].index() { 0.5 } else { 0.0 };
        rng.gen::<f64>() + shift
    });
    let ids = (0..rows).map(|i| format!("synthetic/{i:06}")).collect();
    FeatureMatrix::new("synthetic", ids, labels, values).expect("finite synthetic features")
}
