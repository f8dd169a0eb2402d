//! Gaussian-parameterized ellipse detection maths.
//!
//! * [`ellipse`]: conversion between ellipses and 2D Gaussians.
//! * [`metrics`]: KL divergence and 2-Wasserstein distance, with gradients.
//! * [`iou`]: pixel-grid ellipse IoU and detection matching.
//! * [`align`]: column-wise misalignment correction of scanned boards.
//! * [`dataset`]: annotation files, square crops and board-level splits.
//! * [`fit`]: gradient-descent fitting and the composite detection loss.

pub mod align;
pub mod dataset;
pub mod ellipse;
pub mod error;
pub mod fit;
pub mod iou;
pub mod linalg;
pub mod metrics;
pub mod raster;
pub mod synth;

pub use align::{AlignConfig, NormOrder, ShiftProfile};
pub use dataset::{AnnotatedImage, CropPolicy, CropRecord, KnotAnnotation, Split, Surface};
pub use ellipse::{AxisBox, Ellipse, Gaussian2};
pub use error::{Error, Result};
pub use fit::{FitConfig, FitMetric, FitTrace, LossWeights};
pub use iou::{IoUResult, MatchReport, MatchedPair};
pub use linalg::{Mat2, Vec2};
pub use metrics::{Gradient5, MetricKind, MetricValue};
pub use raster::{GrayImage, Rgb, RgbImage};
