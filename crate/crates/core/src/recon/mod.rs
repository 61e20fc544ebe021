//! Run configuration, object ingestion and experiment orchestration.

pub mod config;
pub mod ingest;
pub mod run;
pub mod verify;

pub use config::{Mode, Overrides, RunConfig, parse_config, parse_config_str, parse_config_with};
pub use ingest::{LoadedObject, load_object};
pub use run::{MANIFEST_FILE, RunReport, run};
