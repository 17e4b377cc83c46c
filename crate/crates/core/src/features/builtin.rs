//! Deterministic hand-crafted descriptor; needs no model file.
//!
//! Layout of the 135 values:
//! * `[0, 64)` grayscale histogram, 64 bins of width 4, normalised to sum 1;
//! * `[64, 128)` 8×8 bilinear thumbnail of the grayscale image, scaled to `[0, 1]`;
//! * `[128, 135)` central moments `μ20 μ11 μ02 μ30 μ21 μ12 μ03` of the
//!   grayscale intensity treated as a mass distribution over the unit square.

use image::RgbImage;
use ndarray::{Array2, Axis};
use rayon::prelude::*;

use super::resize::resize_plane;
use super::FeatureMatrix;
use crate::dataset::Dataset;

pub const HISTOGRAM_BINS: usize = 64;
pub const THUMBNAIL_SIDE: usize = 8;
pub const MOMENT_COUNT: usize = 7;
pub const BUILTIN_DIM: usize = HISTOGRAM_BINS + THUMBNAIL_SIDE * THUMBNAIL_SIDE + MOMENT_COUNT;

pub const BUILTIN_NAME: &str = "builtin";

/// BT.601 luma as a `(height, width)` plane. Integer weights keep `r == g == b`
/// inputs exact.
pub fn grayscale(img: &RgbImage) -> Array2<f64> {
    Array2::from_shape_fn((img.height() as usize, img.width() as usize), |(y, x)| {
        let [r, g, b] = img.get_pixel(x as u32, y as u32).0;
        (299 * r as u32 + 587 * g as u32 + 114 * b as u32) as f64 / 1000.0
    })
}

fn histogram(gray: &Array2<f64>, out: &mut [f64]) {
    let width = 256.0 / HISTOGRAM_BINS as f64;
    for &v in gray {
        let bin = ((v / width) as usize).min(HISTOGRAM_BINS - 1);
        out[bin] += 1.0;
    }
    let n = gray.len() as f64;
    out.iter_mut().for_each(|c| *c /= n);
}

fn moments(gray: &Array2<f64>, out: &mut [f64]) {
    let (h, w) = gray.dim();
    let mass: f64 = gray.sum();
    if mass == 0.0 {
        return;
    }
    let u = |x: usize| (x as f64 + 0.5) / w as f64;
    let v = |y: usize| (y as f64 + 0.5) / h as f64;
    let (mut cx, mut cy) = (0.0, 0.0);
    for ((y, x), &g) in gray.indexed_iter() {
        cx += g * u(x);
        cy += g * v(y);
    }
    cx /= mass;
    cy /= mass;
    const ORDERS: [(i32, i32); MOMENT_COUNT] = [(2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (1, 2), (0, 3)];
    for ((y, x), &g) in gray.indexed_iter() {
        let dx = u(x) - cx;
        let dy = v(y) - cy;
        let p = g / mass;
        for (slot, &(px, py)) in out.iter_mut().zip(ORDERS.iter()) {
            *slot += p * dx.powi(px) * dy.powi(py);
        }
    }
}

/// Builtin descriptor of one image.
pub fn describe(img: &RgbImage) -> Vec<f64> {
    let gray = grayscale(img);
    let mut out = vec![0.0; BUILTIN_DIM];
    let (hist, rest) = out.split_at_mut(HISTOGRAM_BINS);
    let (thumb, moment_slots) = rest.split_at_mut(THUMBNAIL_SIDE * THUMBNAIL_SIDE);
    histogram(&gray, hist);
    let small = resize_plane(&gray, (THUMBNAIL_SIDE, THUMBNAIL_SIDE));
    for (slot, v) in thumb.iter_mut().zip(small.iter()) {
        *slot = v / 255.0;
    }
    moments(&gray, moment_slots);
    out
}

/// Builtin features for every record, in dataset order.
pub fn extract_builtin(ds: &Dataset) -> FeatureMatrix {
    let rows: Vec<Vec<f64>> = ds.records().par_iter().map(|r| describe(&r.pixels)).collect();
    let mut values = Array2::zeros((rows.len(), BUILTIN_DIM));
    for (mut dst, src) in values.axis_iter_mut(Axis(0)).zip(rows) {
        dst.assign(&ndarray::Array1::from(src));
    }
    let ids = ds.records().iter().map(|r| r.id.clone()).collect();
    FeatureMatrix::new(BUILTIN_NAME, ids, ds.labels(), values)
        .expect("builtin descriptor is finite by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{ClassLabel, ImageVariant, LabeledImage};
    use image::Rgb;

    #[test]
    fn dimension_is_fixed() {
        assert_eq!(BUILTIN_DIM, 135);
        let img = RgbImage::from_fn(13, 7, |x, y| Rgb([(x * 19) as u8, (y * 31) as u8, 3]));
        assert_eq!(describe(&img).len(), 135);
        assert_eq!(describe(&RgbImage::new(1, 1)).len(), 135);
    }

    #[test]
    fn uniform_mid_gray() {
        let img = RgbImage::from_pixel(80, 80, Rgb([128, 128, 128]));
        let f = describe(&img);
        // 128 falls in [128, 132), bin 32
        for (i, &h) in f[..64].iter().enumerate() {
            assert_eq!(h, if i == 32 { 1.0 } else { 0.0 }, "bin {i}");
        }
        assert!(f[64..128].iter().all(|&v| v == 128.0 / 255.0));
        // symmetric uniform mass: odd moments and covariance vanish
        assert!(f[129].abs() < 1e-12);
        for &m in &f[131..135] {
            assert!(m.abs() < 1e-12);
        }
        // variance of a uniform grid of 80 cell centres on [0, 1]: (1 - 1/80²) / 12
        let expected = (1.0 - 1.0 / 6400.0) / 12.0;
        assert!((f[128] - expected).abs() < 1e-12);
        assert!((f[130] - expected).abs() < 1e-12);
    }

    #[test]
    fn checkerboard_histogram_splits_extremes() {
        let img = RgbImage::from_fn(4, 4, |x, y| {
            let v = if (x + y) % 2 == 0 { 0 } else { 255 };
            Rgb([v, v, v])
        });
        let f = describe(&img);
        assert_eq!(f[0], 0.5);
        assert_eq!(f[63], 0.5);
        assert_eq!(f[1..63].iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn black_image_has_zero_moments() {
        let f = describe(&RgbImage::new(6, 6));
        assert_eq!(f[0], 1.0);
        assert!(f[128..].iter().all(|&m| m == 0.0));
    }

    #[test]
    fn extraction_is_ordered_and_deterministic() {
        let records = (0..5)
            .map(|i| LabeledImage {
                id: format!("normal/{i}"),
                pixels: RgbImage::from_fn(9, 9, |x, y| Rgb([(x * i) as u8, (y * 20) as u8, i as u8])),
                label: ClassLabel::Normal,
                variant: ImageVariant::Original,
            })
            .collect();
        let ds = Dataset::from_records(records, None);
        let a = extract_builtin(&ds);
        let b = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| extract_builtin(&ds));
        assert_eq!(a, b);
        assert_eq!(a.ids(), ds.records().iter().map(|r| r.id.clone()).collect::<Vec<_>>());
        for i in 0..a.len() {
            let sum: f64 = a.row(i).iter().take(64).sum();
            assert!((sum - 1.0).abs() < 1e-9);
        }
    }
}
