use std::io::Read;
use std::path::Path;

use roxmltree::{Document, Node};

use super::integral::IntegralImage;
use crate::error::{invalid, Error, Result};

/// Subtracted from every stage threshold at evaluation time, matching the
/// reference detector's tolerance for float rounding in stored thresholds.
pub const STAGE_THRESHOLD_EPS: f64 = 1e-5;

/// One weighted rectangle of a Haar feature, in base-window pixels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HaarRect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HaarFeature {
    pub rects: Vec<HaarRect>,
}

/// Internal node of a weak classifier tree. Child values `> 0` index another
/// node; values `<= 0` select leaf `-value`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TreeNode {
    pub left: i32,
    pub right: i32,
    pub feature: usize,
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeakClassifier {
    pub nodes: Vec<TreeNode>,
    pub leaves: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stage {
    pub threshold: f64,
    pub weak: Vec<WeakClassifier>,
}

/// A boosted Haar cascade with its base window size.
#[derive(Clone, Debug, PartialEq)]
pub struct CascadeModel {
    pub window: (usize, usize),
    pub stages: Vec<Stage>,
    pub features: Vec<HaarFeature>,
}

fn cascade_err(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Cascade {
        path: path.into(),
        message: message.into(),
    }
}

fn child<'a, 'i>(node: Node<'a, 'i>, name: &str, path: &str) -> Result<Node<'a, 'i>> {
    node.children()
        .find(|c| c.has_tag_name(name))
        .ok_or_else(|| cascade_err(path, format!("missing <{name}>")))
}

fn items<'a, 'i>(node: Node<'a, 'i>) -> impl Iterator<Item = Node<'a, 'i>> {
    node.children().filter(|c| c.has_tag_name("_"))
}

fn text<'a>(node: Node<'a, '_>) -> &'a str {
    node.text().unwrap_or("").trim()
}

fn number<T: std::str::FromStr>(node: Node, path: &str) -> Result<T> {
    let t = text(node);
    t.parse()
        .map_err(|_| cascade_err(path, format!("{t:?} is not a valid number")))
}

fn numbers(node: Node, path: &str) -> Result<Vec<f64>> {
    node.text()
        .unwrap_or("")
        .split_ascii_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|_| cascade_err(path, format!("{t:?} is not a valid number")))
        })
        .collect()
}

fn as_index(v: f64, path: &str) -> Result<i64> {
    if v.fract() != 0.0 {
        return Err(cascade_err(path, format!("{v} is not an integer")));
    }
    Ok(v as i64)
}

impl CascadeModel {
    /// Parses the standard cascade XML interchange format.
    pub fn from_xml(xml: &str) -> Result<Self> {
        let doc = Document::parse(xml).map_err(|e| cascade_err("document", e.to_string()))?;
        let root = doc.root_element();
        let cascade = if root.has_tag_name("cascade") {
            root
        } else {
            child(root, "cascade", root.tag_name().name())?
        };
        if let Ok(kind) = child(cascade, "featureType", "cascade") {
            if !text(kind).eq_ignore_ascii_case("HAAR") {
                return Err(cascade_err("cascade/featureType", format!("unsupported feature type {:?}", text(kind))));
            }
        }
        let width: usize = number(child(cascade, "width", "cascade")?, "cascade/width")?;
        let height: usize = number(child(cascade, "height", "cascade")?, "cascade/height")?;
        if width == 0 || height == 0 {
            return Err(cascade_err("cascade/width", "window must be non-empty"));
        }

        let mut features = Vec::new();
        for (fi, f) in items(child(cascade, "features", "cascade")?).enumerate() {
            let fpath = format!("features[{fi}]");
            if let Some(t) = f.children().find(|c| c.has_tag_name("tilted")) {
                if text(t) != "0" {
                    return Err(cascade_err(format!("{fpath}/tilted"), "tilted features are not supported"));
                }
            }
            let mut rects = Vec::new();
            for (ri, r) in items(child(f, "rects", &fpath)?).enumerate() {
                let rpath = format!("{fpath}/rects[{ri}]");
                let v = numbers(r, &rpath)?;
                if v.len() != 5 {
                    return Err(cascade_err(&rpath, format!("expected `x y w h weight`, found {} values", v.len())));
                }
                let mut dims = [0usize; 4];
                for (d, &x) in dims.iter_mut().zip(&v[..4]) {
                    let i = as_index(x, &rpath)?;
                    *d = usize::try_from(i).map_err(|_| cascade_err(&rpath, "negative coordinate"))?;
                }
                let [x, y, w, h] = dims;
                if w == 0 || h == 0 || x + w > width || y + h > height {
                    return Err(cascade_err(
                        &rpath,
                        format!("rect ({x}, {y}, {w}, {h}) outside the {width}x{height} window"),
                    ));
                }
                rects.push(HaarRect { x, y, w, h, weight: v[4] });
            }
            if rects.is_empty() || rects.len() > 3 {
                return Err(cascade_err(format!("{fpath}/rects"), format!("expected 1 to 3 rects, found {}", rects.len())));
            }
            features.push(HaarFeature { rects });
        }

        let mut stages = Vec::new();
        for (si, s) in items(child(cascade, "stages", "cascade")?).enumerate() {
            let spath = format!("stages[{si}]");
            let threshold: f64 = number(child(s, "stageThreshold", &spath)?, &format!("{spath}/stageThreshold"))?;
            let mut weak = Vec::new();
            for (wi, w) in items(child(s, "weakClassifiers", &spath)?).enumerate() {
                let wpath = format!("{spath}/weakClassifiers[{wi}]");
                let npath = format!("{wpath}/internalNodes");
                let raw = numbers(child(w, "internalNodes", &wpath)?, &npath)?;
                let leaves = numbers(child(w, "leafValues", &wpath)?, &format!("{wpath}/leafValues"))?;
                if raw.is_empty() || raw.len() % 4 != 0 {
                    return Err(cascade_err(&npath, format!("expected groups of 4 values, found {}", raw.len())));
                }
                let mut nodes = Vec::new();
                for q in raw.chunks_exact(4) {
                    let feature = as_index(q[2], &npath)?;
                    if feature < 0 || feature as usize >= features.len() {
                        return Err(cascade_err(
                            &npath,
                            format!("feature index {feature} out of range ({} features)", features.len()),
                        ));
                    }
                    nodes.push(TreeNode {
                        left: as_index(q[0], &npath)? as i32,
                        right: as_index(q[1], &npath)? as i32,
                        feature: feature as usize,
                        threshold: q[3],
                    });
                }
                for n in &nodes {
                    for c in [n.left, n.right] {
                        let ok = if c > 0 {
                            (c as usize) < nodes.len()
                        } else {
                            ((-c) as usize) < leaves.len()
                        };
                        if !ok {
                            return Err(cascade_err(&npath, format!("child {c} points outside the tree")));
                        }
                    }
                }
                weak.push(WeakClassifier { nodes, leaves });
            }
            if weak.is_empty() {
                return Err(cascade_err(format!("{spath}/weakClassifiers"), "stage has no classifiers"));
            }
            stages.push(Stage { threshold, weak });
        }
        if stages.is_empty() {
            return Err(cascade_err("cascade/stages", "cascade has no stages"));
        }
        if let Ok(n) = child(cascade, "stageNum", "cascade") {
            let declared: usize = number(n, "cascade/stageNum")?;
            if declared != stages.len() {
                return Err(cascade_err(
                    "cascade/stageNum",
                    format!("declares {declared} stages, found {}", stages.len()),
                ));
            }
        }
        Ok(Self {
            window: (width, height),
            stages,
            features,
        })
    }

    pub fn weak_count(&self) -> usize {
        self.stages.iter().map(|s| s.weak.len()).sum()
    }
}

/// Reads a cascade XML document from a stream.
pub fn load_cascade<R: Read>(mut input: R) -> Result<CascadeModel> {
    let mut xml = String::new();
    input.read_to_string(&mut xml)?;
    CascadeModel::from_xml(&xml)
}

pub fn load_cascade_file(path: impl AsRef<Path>) -> Result<CascadeModel> {
    CascadeModel::from_xml(&std::fs::read_to_string(path)?)
}

#[derive(Clone, Debug)]
struct ScaledFeature {
    rects: Vec<(usize, usize, usize, usize, f64)>,
}

/// A cascade with its features resized for one detection scale.
#[derive(Clone, Debug)]
pub struct ScaledCascade<'m> {
    model: &'m CascadeModel,
    scale: f64,
    window: (usize, usize),
    /// Variance window: the base window inset by one pixel.
    norm: (usize, usize, usize, usize),
    features: Vec<ScaledFeature>,
}

fn scaled(v: usize, s: f64) -> usize {
    (v as f64 * s).round() as usize
}

impl<'m> ScaledCascade<'m> {
    pub fn new(model: &'m CascadeModel, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(invalid(format!("scale {scale} must be positive")));
        }
        let (bw, bh) = model.window;
        let (ww, wh) = (scaled(bw, scale).max(1), scaled(bh, scale).max(1));
        // rounding can push a scaled rect one pixel past the scaled window
        let fit = |x: usize, y: usize, w: usize, h: usize| {
            let (x, y) = (x.min(ww - 1), y.min(wh - 1));
            (x, y, w.max(1).min(ww - x), h.max(1).min(wh - y))
        };
        let inset = scaled(1, scale);
        let norm = fit(
            inset,
            inset,
            scaled(bw.saturating_sub(2), scale),
            scaled(bh.saturating_sub(2), scale),
        );
        let features = model
            .features
            .iter()
            .map(|f| {
                let rects = f
                    .rects
                    .iter()
                    .map(|r| {
                        let (x, y, w, h) =
                            fit(scaled(r.x, scale), scaled(r.y, scale), scaled(r.w, scale), scaled(r.h, scale));
                        (x, y, w, h, r.weight)
                    })
                    .collect();
                ScaledFeature { rects }
            })
            .collect();
        Ok(Self {
            model,
            scale,
            window: (ww, wh),
            norm,
            features,
        })
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Window size in image pixels.
    pub fn window(&self) -> (usize, usize) {
        self.window
    }

    fn feature_value(&self, ii: &IntegralImage, x: usize, y: usize, feature: usize) -> f64 {
        self.features[feature]
            .rects
            .iter()
            .map(|&(rx, ry, rw, rh, wt)| wt * ii.rect_sum(x + rx, y + ry, rw, rh) as f64)
            .sum()
    }

    /// Product of the variance window's area and its pixel standard
    /// deviation (floored at 1); node thresholds are scaled by this.
    fn normalizer(&self, ii: &IntegralImage, x: usize, y: usize) -> f64 {
        let (nx, ny, nw, nh) = self.norm;
        let area = (nw * nh) as f64;
        let sum = ii.rect_sum(x + nx, y + ny, nw, nh) as f64;
        let sq = ii.rect_squared_sum(x + nx, y + ny, nw, nh) as f64;
        let mean = sum / area;
        let var = (sq / area - mean * mean).max(0.0);
        area * var.sqrt().max(1.0)
    }

    /// Index of the first rejecting stage, or `None` if every stage passes.
    /// The window must lie inside the image.
    pub fn rejecting_stage(&self, ii: &IntegralImage, x: usize, y: usize) -> Option<usize> {
        let norm = self.normalizer(ii, x, y);
        for (si, stage) in self.model.stages.iter().enumerate() {
            let mut sum = 0.0;
            for weak in &stage.weak {
                let mut idx = 0i32;
                loop {
                    let node = &weak.nodes[idx as usize];
                    let v = self.feature_value(ii, x, y, node.feature);
                    idx = if v < node.threshold * norm { node.left } else { node.right };
                    if idx <= 0 {
                        break;
                    }
                }
                sum += weak.leaves[(-idx) as usize];
            }
            if sum < stage.threshold - STAGE_THRESHOLD_EPS {
                return Some(si);
            }
        }
        None
    }

    pub fn accepts(&self, ii: &IntegralImage, x: usize, y: usize) -> Result<bool> {
        let (w, h) = self.window;
        if x + w > ii.width() || y + h > ii.height() {
            return Err(invalid(format!(
                "{w}x{h} window at ({x}, {y}) extends past the {}x{} image",
                ii.width(),
                ii.height()
            )));
        }
        Ok(self.rejecting_stage(ii, x, y).is_none())
    }
}

/// Runs the cascade on the window at `(x, y)` scaled by `scale`.
pub fn evaluate_window(model: &CascadeModel, ii: &IntegralImage, x: usize, y: usize, scale: f64) -> Result<bool> {
    ScaledCascade::new(model, scale)?.accepts(ii, x, y)
}
