//! Level serialization: canonical JSON and Valve Map Format.

mod json;
mod vmf;
pub mod vmf_reader;

pub use json::{export_level_json, import_level_json, ExportError, SCHEMA_VERSION};
pub use vmf::{export_vmf, export_vmf_with, ClassnameMap, DEFAULT_SCALE};
