//! Image processing for the dot-grid intensity stream.

pub mod blob;
pub mod blur;
pub mod flow;
pub mod track;

pub use blob::{detect_blobs, Blob, BlobParams};
pub use blur::gaussian_blur;
pub use flow::{lk_flow, lk_flow_pyramids, FlowParams, FlowResult, Pyramid};
pub use track::{assign_grid_ids, flow_sum, write_tracks_csv, DotTrack, DotTracker};
