//! Event decoding and scoring.

mod collar;
mod events;
mod postproc;
mod psds;

pub use collar::{collar_f1, collar_match, ClassCounts, F1Report, DEFAULT_COLLAR, OFFSET_FRACTION};
pub use events::{class_index, format_tsv, parse_tsv, Event, EventList, TSV_HEADER};
pub use postproc::{decode_events, median_filter, DEFAULT_MEDIAN_WINDOW};
pub use psds::{
    intersection_match, psds, psds_from_events, psds_from_operating_points, threshold_grid, DetectionOutcome, IntersectionResult,
    OperatingPoint, PsdsConfig, PsdsResult, ReferenceOutcome, DEFAULT_GRID,
};
