//! Viola-Jones face detection with standard Haar cascade files.

mod cascade;
mod integral;
mod scan;

pub use cascade::{
    evaluate_window, load_cascade, load_cascade_file, CascadeModel, HaarFeature, HaarRect,
    ScaledCascade, Stage, TreeNode, WeakClassifier, STAGE_THRESHOLD_EPS,
};
pub use integral::{integral_image, IntegralImage};
pub use scan::{
    detect_multiscale, detect_raw, group_rectangles, DetectParams, DetectionBox, Rect, GROUP_EPS,
};
