//! Facial expression recognition: a from-scratch tensor engine, a ResNet18
//! classifier trained on FER2013/FER+, Haar cascade face detection, and the
//! prediction pipeline that maps faces to emotions, emojis and engagement.

pub mod data;
pub mod detect;
pub mod error;
pub mod model;
pub mod pipeline;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{Param, Rng, Scalar, Tensor};
