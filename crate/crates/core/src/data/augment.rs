use crate::error::{invalid, Result};
use crate::tensor::{Rng, Tensor};

/// Area fraction range for erased rectangles.
pub const ERASE_AREA: (f64, f64) = (0.02, 0.33);
/// Height/width aspect range for erased rectangles.
pub const ERASE_ASPECT: (f64, f64) = (0.3, 3.33);
/// Rectangle draws attempted before erasing is skipped.
pub const ERASE_TRIES: usize = 10;

/// Rectangle filled by [`random_erase_region`], in pixel units.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EraseRegion {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

impl EraseRegion {
    pub fn area(&self) -> usize {
        self.height * self.width
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        (self.top..self.top + self.height).contains(&row)
            && (self.left..self.left + self.width).contains(&col)
    }
}

/// Mirrors the last axis.
pub fn horizontal_flip(image: &Tensor<f32>) -> Result<Tensor<f32>> {
    let w = *image.shape().last().unwrap();
    let mut out = image.clone();
    for row in out.data_mut().chunks_exact_mut(w) {
        row.reverse();
    }
    Ok(out)
}

/// Random erasing of a `[C, H, W]` image; see [`random_erase_region`].
pub fn random_erase(
    image: &Tensor<f32>,
    rng: &mut Rng,
    p: f64,
    area_range: (f64, f64),
    aspect_range: (f64, f64),
) -> Result<Tensor<f32>> {
    random_erase_region(image, rng, p, area_range, aspect_range).map(|(t, _)| t)
}

/// With probability `p`, fills one rectangle with uniform `[0, 1)` noise and
/// reports where. The rectangle's area fraction and aspect ratio are drawn
/// uniformly from the given ranges; a draw whose rounded size does not fit
/// the image or leaves the area range is redrawn, up to [`ERASE_TRIES`] times.
pub fn random_erase_region(
    image: &Tensor<f32>,
    rng: &mut Rng,
    p: f64,
    area_range: (f64, f64),
    aspect_range: (f64, f64),
) -> Result<(Tensor<f32>, Option<EraseRegion>)> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(format!("erase probability {p} outside [0, 1]")));
    }
    let [c, h, w] = match image.shape() {
        &[c, h, w] => [c, h, w],
        s => return Err(invalid(format!("random_erase expects [C, H, W], got {s:?}"))),
    };
    if !rng.bernoulli(p) {
        return Ok((image.clone(), None));
    }
    let total = (h * w) as f64;
    for _ in 0..ERASE_TRIES {
        let area = rng.uniform_range(area_range.0, area_range.1) * total;
        let aspect = rng.uniform_range(aspect_range.0, aspect_range.1);
        let eh = (area * aspect).sqrt().round() as usize;
        let ew = (area / aspect).sqrt().round() as usize;
        if eh == 0 || ew == 0 || eh > h || ew > w {
            continue;
        }
        let fraction = (eh * ew) as f64 / total;
        if fraction < area_range.0 || fraction > area_range.1 {
            continue;
        }
        let region = EraseRegion {
            top: rng.below((h - eh + 1) as u64) as usize,
            left: rng.below((w - ew + 1) as u64) as usize,
            height: eh,
            width: ew,
        };
        let mut out = image.clone();
        let data = out.data_mut();
        for ch in 0..c {
            for r in region.top..region.top + eh {
                let base = (ch * h + r) * w;
                for v in &mut data[base + region.left..base + region.left + ew] {
                    *v = rng.uniform_f32();
                }
            }
        }
        return Ok((out, Some(region)));
    }
    Ok((image.clone(), None))
}
