//! Video colorization by propagating chroma along optical flow and
//! re-colorizing only the pixels where propagation breaks down.
//!
//! Frames are handled in CIELAB. The luminance of every output frame is the
//! input luminance, bit for bit; only the chroma planes are produced.

pub mod colorizer;
pub mod colorspace;
pub mod config;
pub mod correction;
pub mod error;
pub mod flow;
pub mod frames;
pub mod metrics;
pub mod pipeline;
pub mod plane;
pub mod prompt;
pub mod scene;
pub mod synth;
pub mod warp;

pub use colorizer::{Colorizer, ColorizeRequest, ColorizeResponse};
pub use colorspace::{LabFrame, Rgb8Image};
pub use config::PipelineConfig;
pub use error::{Error, ProviderError, Result};
pub use flow::{FlowField, FlowSource};
pub use pipeline::{propagate, run, PropagationOptions, Propagator, RunManifest};
pub use plane::{LabelMap, LumaPlane, Plane};
