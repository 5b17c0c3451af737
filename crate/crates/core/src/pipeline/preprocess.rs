use image::DynamicImage;

use crate::data::{normalize_image, IMAGE_SIDE};
use crate::detect::Rect;
use crate::error::{invalid, Error, Result};
use crate::tensor::Tensor;

/// Decodes PNG or JPEG bytes.
pub fn decode_image(bytes: &[u8]) -> Result<DynamicImage> {
    let format = image::guess_format(bytes).map_err(|e| Error::Image(e.to_string()))?;
    if !matches!(format, image::ImageFormat::Png | image::ImageFormat::Jpeg) {
        return Err(Error::Image(format!("unsupported format {format:?}, expected PNG or JPEG")));
    }
    image::load_from_memory_with_format(bytes, format).map_err(|e| Error::Image(e.to_string()))
}

/// Rec.601 luma, rounded half up.
pub fn luma(r: u8, g: u8, b: u8) -> u8 {
    (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64 + 0.5).floor().min(255.0) as u8
}

/// 8-bit grayscale copy of `image`. Single-channel images pass through;
/// everything else goes through [`luma`] on its RGB channels.
pub fn to_gray(image: &DynamicImage) -> image::GrayImage {
    match image {
        DynamicImage::ImageLuma8(g) => g.clone(),
        other => {
            let rgb = other.to_rgb8();
            image::GrayImage::from_fn(rgb.width(), rgb.height(), |x, y| {
                let p = rgb.get_pixel(x, y).0;
                image::Luma([luma(p[0], p[1], p[2])])
            })
        }
    }
}

/// Bilinear resampling of row-major 8-bit pixels to `dw×dh` real values,
/// sampling source coordinate `(d + 0.5) * src / dst - 0.5` clamped to the image.
pub fn bilinear_resample(src: &[u8], sw: usize, sh: usize, dw: usize, dh: usize) -> Vec<f64> {
    assert_eq!(src.len(), sw * sh);
    let axis = |d: usize, s: usize, n: usize| {
        let c = ((d as f64 + 0.5) * s as f64 / n as f64 - 0.5).clamp(0.0, (s - 1) as f64);
        let i0 = c.floor() as usize;
        (i0, (i0 + 1).min(s - 1), c - i0 as f64)
    };
    let mut out = Vec::with_capacity(dw * dh);
    for dy in 0..dh {
        let (y0, y1, fy) = axis(dy, sh, dh);
        for dx in 0..dw {
            let (x0, x1, fx) = axis(dx, sw, dw);
            let p = |x: usize, y: usize| src[y * sw + x] as f64;
            let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
            let bottom = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
            out.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    out
}

/// [`bilinear_resample`] rounded half up to 8 bits.
pub fn resize_bilinear(src: &[u8], sw: usize, sh: usize, dw: usize, dh: usize) -> Vec<u8> {
    bilinear_resample(src, sw, sh, dw, dh)
        .into_iter()
        .map(|v| (v + 0.5).floor().clamp(0.0, 255.0) as u8)
        .collect()
}

/// Crops `bbox` (clamped to the image), converts to gray, resizes to 48×48
/// and normalizes to `[0, 1]`.
pub fn preprocess_roi(image: &DynamicImage, bbox: Rect) -> Result<Tensor<f32>> {
    let (w, h) = (image.width() as usize, image.height() as usize);
    let x0 = bbox.x.min(w);
    let y0 = bbox.y.min(h);
    let x1 = (bbox.x + bbox.w).min(w);
    let y1 = (bbox.y + bbox.h).min(h);
    if x1 <= x0 || y1 <= y0 {
        return Err(invalid(format!("box {bbox:?} has no area inside the {w}x{h} image")));
    }
    let crop = image.crop_imm(x0 as u32, y0 as u32, (x1 - x0) as u32, (y1 - y0) as u32);
    let gray = to_gray(&crop);
    let roi = resize_bilinear(gray.as_raw(), x1 - x0, y1 - y0, IMAGE_SIDE, IMAGE_SIDE);
    normalize_image(&roi)
}
