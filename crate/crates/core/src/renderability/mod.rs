//! Renderability field construction and pseudo-view selection.

pub mod field;
pub mod metrics;
pub mod sampling;
pub mod table;

pub use field::{
    build_field, read_field_jsonl, select_pseudo_views, write_field_jsonl, FieldConfig, FieldContext, FieldRecord,
    PseudoViewCandidate, RenderabilityField, ViewScores, DEFAULT_BAND,
};
pub use metrics::{angular_score, color_consistency, resolution_score, PairSampling, DEFAULT_PAIR_CAP};
pub use sampling::{direction_pose, farthest_point_sampling, sample_viewpoints, six_directions, DIRECTIONS};
pub use table::{build_observation_table, Observation, ObservationTable, Occlusion};
