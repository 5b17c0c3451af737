use image::GrayImage;
use serde::{Deserialize, Serialize};

use super::cascade::{CascadeModel, ScaledCascade};
use super::integral::integral_image;
use crate::error::{invalid, Result};

/// Axis-aligned rectangle in image pixels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

impl Rect {
    pub fn new(x: usize, y: usize, w: usize, h: usize) -> Self {
        Self { x, y, w, h }
    }

    pub fn area(&self) -> usize {
        self.w * self.h
    }

    pub fn iou(&self, other: &Rect) -> f64 {
        let ix = (self.x + self.w).min(other.x + other.w).saturating_sub(self.x.max(other.x));
        let iy = (self.y + self.h).min(other.y + other.h).saturating_sub(self.y.max(other.y));
        let inter = (ix * iy) as f64;
        let union = (self.area() + other.area()) as f64 - inter;
        if union == 0.0 {
            0.0
        } else {
            inter / union
        }
    }
}

/// A grouped face detection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionBox {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
    /// Raw window hits merged into this box.
    pub neighbor_count: usize,
}

impl DetectionBox {
    pub fn rect(&self) -> Rect {
        Rect::new(self.x, self.y, self.w, self.h)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectParams {
    pub scale_factor: f64,
    pub min_neighbors: usize,
    /// Smallest window side, in pixels.
    pub min_size: usize,
}

impl Default for DetectParams {
    fn default() -> Self {
        Self {
            scale_factor: 1.1,
            min_neighbors: 3,
            min_size: 24,
        }
    }
}

/// Similarity tolerance used when grouping raw hits.
pub const GROUP_EPS: f64 = 0.2;

/// Every accepted window across all scales, before grouping.
pub fn detect_raw(model: &CascadeModel, gray: &GrayImage, params: &DetectParams) -> Result<Vec<Rect>> {
    if !(params.scale_factor.is_finite() && params.scale_factor > 1.0) {
        return Err(invalid(format!("scale factor {} must exceed 1", params.scale_factor)));
    }
    let (iw, ih) = (gray.width() as usize, gray.height() as usize);
    let mut hits = Vec::new();
    if iw == 0 || ih == 0 {
        return Ok(hits);
    }
    let ii = integral_image(gray);
    let mut scale = 1.0f64;
    loop {
        let sc = ScaledCascade::new(model, scale)?;
        let (ww, wh) = sc.window();
        if ww > iw || wh > ih {
            break;
        }
        if ww >= params.min_size && wh >= params.min_size {
            let step = (scale.round() as usize).max(1);
            for y in (0..=ih - wh).step_by(step) {
                for x in (0..=iw - ww).step_by(step) {
                    if sc.rejecting_stage(&ii, x, y).is_none() {
                        hits.push(Rect::new(x, y, ww, wh));
                    }
                }
            }
        }
        scale *= params.scale_factor;
    }
    Ok(hits)
}

/// Multi-scale sliding-window detection followed by [`group_rectangles`].
/// Boxes come back sorted by `(y, x)`.
pub fn detect_multiscale(model: &CascadeModel, gray: &GrayImage, params: &DetectParams) -> Result<Vec<DetectionBox>> {
    let raw = detect_raw(model, gray, params)?;
    Ok(group_rectangles(&raw, params.min_neighbors, GROUP_EPS))
}

fn similar(a: &Rect, b: &Rect, eps: f64) -> bool {
    let delta = eps * (a.w.min(b.w) + a.h.min(b.h)) as f64 * 0.5;
    let close = |p: usize, q: usize| (p as f64 - q as f64).abs() <= delta;
    close(a.x, b.x) && close(a.y, b.y) && close(a.x + a.w, b.x + b.w) && close(a.y + a.h, b.y + b.h)
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Clusters raw hits into faces.
///
/// Hits are joined transitively when their corners lie within
/// `eps * (mean of the smaller width and height)` of each other. Each class
/// becomes its average box, kept when it has more than `min_neighbors`
/// members. A kept box lying inside a stronger one (more than
/// `max(3, own count)` members, `eps` margin) is dropped as a nested hit.
pub fn group_rectangles(raw: &[Rect], min_neighbors: usize, eps: f64) -> Vec<DetectionBox> {
    let n = raw.len();
    let mut parent: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in i + 1..n {
            if similar(&raw[i], &raw[j], eps) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut sums: Vec<([usize; 4], usize)> = Vec::new();
    let mut class_of = vec![usize::MAX; n];
    for i in 0..n {
        let root = find(&mut parent, i);
        if class_of[root] == usize::MAX {
            class_of[root] = sums.len();
            sums.push(([0; 4], 0));
        }
        let (s, count) = &mut sums[class_of[root]];
        let r = raw[i];
        for (acc, v) in s.iter_mut().zip([r.x, r.y, r.w, r.h]) {
            *acc += v;
        }
        *count += 1;
    }
    let avg: Vec<DetectionBox> = sums
        .iter()
        .map(|(s, count)| {
            let m = |v: usize| (v as f64 / *count as f64).round() as usize;
            DetectionBox {
                x: m(s[0]),
                y: m(s[1]),
                w: m(s[2]),
                h: m(s[3]),
                neighbor_count: *count,
            }
        })
        .collect();

    let mut out: Vec<DetectionBox> = avg
        .iter()
        .enumerate()
        .filter(|(_, b)| b.neighbor_count > min_neighbors)
        .filter(|&(i, b)| {
            !avg.iter().enumerate().any(|(j, o)| {
                if j == i || o.neighbor_count <= min_neighbors {
                    return false;
                }
                let dx = (o.w as f64 * eps).round() as i64;
                let dy = (o.h as f64 * eps).round() as i64;
                let (bx, by, bw, bh) = (b.x as i64, b.y as i64, b.w as i64, b.h as i64);
                let (ox, oy, ow, oh) = (o.x as i64, o.y as i64, o.w as i64, o.h as i64);
                bx >= ox - dx
                    && by >= oy - dy
                    && bx + bw <= ox + ow + dx
                    && by + bh <= oy + oh + dy
                    && (o.neighbor_count > b.neighbor_count.max(3) || b.neighbor_count < 3)
            })
        })
        .map(|(_, b)| *b)
        .collect();
    out.sort_by_key(|b| (b.y, b.x, b.w, b.h));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::cascade::tests::minimal_xml;

    #[test]
    fn grouping_basics() {
        assert!(group_rectangles(&[], 3, GROUP_EPS).is_empty());
        let r = Rect::new(10, 10, 30, 30);
        let g = group_rectangles(&[r; 4], 3, GROUP_EPS);
        assert_eq!(
            g,
            vec![DetectionBox {
                x: 10,
                y: 10,
                w: 30,
                h: 30,
                neighbor_count: 4
            }]
        );
        assert!(group_rectangles(&[r; 3], 3, GROUP_EPS).is_empty());
    }

    #[test]
    fn far_clusters_stay_apart_and_sort() {
        let mut raw = Vec::new();
        for d in 0..4 {
            raw.push(Rect::new(200 + d, 5, 40, 40));
            raw.push(Rect::new(5 + d, 100, 40, 40));
        }
        let g = group_rectangles(&raw, 3, GROUP_EPS);
        assert_eq!(g.len(), 2);
        assert_eq!((g[0].x, g[0].y), (202, 5));
        assert_eq!((g[1].x, g[1].y), (7, 100));
    }

    #[test]
    fn nested_weak_box_is_dropped() {
        let mut raw = vec![Rect::new(50, 50, 100, 100); 8];
        raw.extend(vec![Rect::new(80, 80, 30, 30); 4]);
        let g = group_rectangles(&raw, 3, GROUP_EPS);
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].neighbor_count, 8);
    }

    #[test]
    fn iou() {
        let a = Rect::new(0, 0, 10, 10);
        assert_eq!(a.iou(&a), 1.0);
        assert_eq!(a.iou(&Rect::new(5, 0, 10, 10)), 50.0 / 150.0);
        assert_eq!(a.iou(&Rect::new(20, 20, 5, 5)), 0.0);
    }

    #[test]
    fn always_accepting_cascade_covers_every_window() {
        let model = CascadeModel::from_xml(&minimal_xml("-1e30", "0")).unwrap();
        let gray = GrayImage::new(30, 26);
        let params = DetectParams {
            min_neighbors: 0,
            ..DetectParams::default()
        };
        let raw = detect_raw(&model, &gray, &params).unwrap();
        // scale 1: 7x3 positions; scale 1.1 (26x26): 5x1
        assert_eq!(raw.len(), 21 + 5);
        assert!(detect_multiscale(&model, &GrayImage::new(0, 0), &params).unwrap().is_empty());
        assert!(detect_multiscale(&model, &GrayImage::new(20, 20), &params).unwrap().is_empty());
        let bad = DetectParams {
            scale_factor: 1.0,
            ..params
        };
        assert!(detect_raw(&model, &gray, &bad).is_err());
    }
}
