//! Contact, proximity and object size from fused frames.

pub mod contact;
pub mod measure;
pub mod proximity;

pub use contact::{detect_contact, ContactDetector, ContactReport, ContactState, ContactThresholds};
pub use measure::{measure_object, MeasureParams, ObjectMeasurement};
pub use proximity::{estimate_distance, roi_stats, ProximityEstimator, ProximityParams, ProximityReport, RoiStats};
