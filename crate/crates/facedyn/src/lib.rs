//! facedyn: posed vs. spontaneous smile classification from video.
//!
//! Pipeline: KLT face tracking, geometric normalization, optional
//! Eulerian video magnification, per-frame descriptors (LPQ, HOG, dense
//! optical flow over facial regions, or precomputed CNN vectors),
//! temporal DCT normalization, and a linear SVM evaluated under 10-fold
//! cross-validation.

pub mod classify;
pub mod error;
pub mod eval;
pub mod features;
pub mod filter;
pub mod frame;
pub mod geometry;
pub mod io;
pub mod magnify;
pub mod manifest;
pub mod normalize;
pub mod pipeline;
pub mod synth;
pub mod temporal;
pub mod tracking;

pub use classify::{
    fit, load_model, save_model, standardize_fit, svm_predict, svm_train, svm_train_traced,
    LinearSvmModel, TrainConfig, TrainStats,
};
pub use error::{Error, Result};
pub use eval::{
    make_folds, report_csv, run_cross_validation, weighted_overall, write_report_csv,
    ConfusionMatrix, EvalReport, ReportGrid,
};
pub use features::{
    chi_squared_distance, extract_flow_regions, farneback_flow, hog_descriptor, ingest_external_features,
    lpq_descriptor, DescriptorKind, FeatureMatrix, FlowField, FlowParams, HogParams, LpqParams,
    RegionLayout,
};
pub use frame::{to_grayscale, warp_affine, Frame, RgbFrame, VideoSequence};
pub use geometry::{AffineTransform, BoundingBox};
pub use io::{
    load_frame, load_sequence, read_feature_matrix, save_frame, save_sequence,
    write_feature_matrix,
};
pub use magnify::{build_pyramid, magnify_sequence, reconstruct, temporal_bandpass, MagnifyParams};
pub use manifest::{parse_manifest, write_manifest, Manifest, ManifestRecord, SmileLabel};
pub use normalize::{
    crop_no_normalization, normalize_eye_location, normalize_face_orientation,
    normalize_sequence, CanonicalLayout, NormalizationMode,
};
pub use pipeline::{load_config, run_pipeline, video_feature_vector, PipelineConfig};
pub use synth::generate_benchmark_dataset;
pub use temporal::{dct_time, flatten, idct_time, normalize_length, TemporalConfig};
pub use tracking::{
    detect_features, estimate_affine, lk_track, track_sequence, TrackFrame, TrackResult,
    TrackedPoints,
};
