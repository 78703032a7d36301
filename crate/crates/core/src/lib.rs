//! Curation toolkit for metamorphic time-lapse video datasets.
//!
//! * [`media_io`]: frame buffers and the CMRV raw container
//! * [`transition`]: two-stage cut detection and clip segmentation
//! * [`embeddings`]: image/text embedding backends, cosine, CLIPSIM
//! * [`sampler`]: uniform vs. random-window frame extraction
//! * [`curation`]: metadata filtering and staged captioning
//! * [`catalog`]: JSONL manifest and dataset statistics

pub mod catalog;
pub mod curation;
pub mod embeddings;
pub mod media_io;
pub mod sampler;
pub mod stub;
pub mod transition;
pub mod util;

pub use catalog::{Status, VideoRecord};
pub use embeddings::{Embedder, EmbeddingProvider, PixelEmbedder};
pub use media_io::{Fps, Frame, GrayFrame, VideoBuffer};
pub use transition::{DetectorParams, TransitionReport};
