//! Road lane marking detection.
//!
//! The pipeline has three stages, mirroring the classic lane-detection
//! decomposition:
//!
//! 1. **Marking generation** — a small encoder-decoder CNN ([`graph`],
//!    [`ops`], [`tensor`], [`weights`]) classifies every pixel; the lane
//!    class becomes a binary mask.
//! 2. **Grouping** — connected component labeling turns the mask into
//!    supermarkings, which are merged across dashes by a geometric +
//!    directional connection cost ([`grouping`]).
//! 3. **Model fitting** — each lane group is reduced to per-band candidate
//!    points and fitted with a cubic polynomial ([`fitting`]).
//!
//! [`balance`] computes median-frequency class weights, [`metrics`] the
//! confusion-matrix scores used to evaluate segmentations, and [`netpbm`]
//! reads and writes the portable pixmap files the CLI works with.
//!
//! With the default `parallel` feature the heavy loops run on rayon;
//! disabling it yields a dependency-light sequential build. Either way every
//! operator accumulates in a fixed order, so outputs are bit-identical across
//! feature selection and thread counts.

pub mod balance;
pub mod error;
pub mod fitting;
pub mod graph;
pub mod grouping;
pub mod label;
pub mod metrics;
pub mod netpbm;
pub mod ops;
pub mod par;
pub mod tensor;
pub mod weights;

pub use error::{Error, Result};
pub use label::LabelMap;
pub use tensor::Tensor;
