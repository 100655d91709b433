//! File formats and reconstruction quality metrics.
//!
//! * `FPMC` / `FPMR`: little-endian binary complex fields and real images.
//! * Dataset manifests: TOML documents describing optics, grid and LED plan.
//! * Solver traces: CSV with 17 significant digits.

mod binary;
mod manifest;
mod metrics;
mod trace;

pub use binary::{
    decode_field, decode_image, encode_field, encode_image, read_field, read_image,
    read_measurement, write_field, write_image, FileHeader, FORMAT_VERSION, HEADER_LEN,
    MAGIC_FIELD, MAGIC_IMAGE,
};
pub use manifest::{
    manifest_from_str, manifest_to_string, read_manifest, read_manifest_doc, write_manifest,
    ManifestDoc, MeasurementEntry,
};
pub use metrics::relative_error_mod_phase;
pub use trace::{parse_trace_csv, trace_to_csv, write_trace_csv, TraceRow};
