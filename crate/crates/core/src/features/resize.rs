use image::RgbImage;
use ndarray::{Array2, Array3};

/// Source coordinate of each target index under half-pixel-centre mapping:
/// `(lo, hi, frac)` with `hi = min(lo + 1, src - 1)`.
fn axis_taps(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    (0..dst)
        .map(|i| {
            let pos = ((2 * i + 1) as f64 * src as f64 / (2 * dst) as f64 - 0.5)
                .clamp(0.0, (src - 1) as f64);
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(src - 1);
            (lo, hi, pos - lo as f64)
        })
        .collect()
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

/// Bilinear resize of a single-channel plane stored as `(height, width)`.
///
/// Pixel centres are aligned (`src = (dst + 0.5) * scale - 0.5`), so an
/// identity resize reproduces the input exactly.
pub fn resize_plane(plane: &Array2<f64>, target: (usize, usize)) -> Array2<f64> {
    let (sh, sw) = plane.dim();
    let (th, tw) = target;
    assert!(sh >= 1 && sw >= 1, "empty source plane");
    assert!(th >= 1 && tw >= 1, "target dimensions must be >= 1");
    let rows = axis_taps(sh, th);
    let cols = axis_taps(sw, tw);
    Array2::from_shape_fn((th, tw), |(y, x)| {
        let (y0, y1, fy) = rows[y];
        let (x0, x1, fx) = cols[x];
        let top = lerp(plane[[y0, x0]], plane[[y0, x1]], fx);
        let bottom = lerp(plane[[y1, x0]], plane[[y1, x1]], fx);
        lerp(top, bottom, fy)
    })
}

/// Resizes an RGB image to `(height, width)`; output is `(height, width, 3)`
/// with real values in `[0, 255]`.
pub fn resize_bilinear(img: &RgbImage, target: (usize, usize)) -> Array3<f32> {
    let (sw, sh) = (img.width() as usize, img.height() as usize);
    let (th, tw) = target;
    assert!(th >= 1 && tw >= 1, "target dimensions must be >= 1");
    let rows = axis_taps(sh, th);
    let cols = axis_taps(sw, tw);
    let px = |x: usize, y: usize, c: usize| img.get_pixel(x as u32, y as u32)[c] as f64;
    Array3::from_shape_fn((th, tw, 3), |(y, x, c)| {
        let (y0, y1, fy) = rows[y];
        let (x0, x1, fx) = cols[x];
        let top = lerp(px(x0, y0, c), px(x1, y0, c), fx);
        let bottom = lerp(px(x0, y1, c), px(x1, y1, c), fx);
        lerp(top, bottom, fy) as f32
    })
}
