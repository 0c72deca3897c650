//! File formats, transports, the SQL backend, the pipeline stages and the
//! command line for the AIS LLM benchmark. The algorithms live in
//! `aisbench-core`.

pub mod archive;
pub mod catalog_file;
pub mod config;
pub mod error;
pub mod ingest;
pub mod labels;
pub mod ledger;
pub mod nlidb;
pub mod pipeline;
pub mod report;
pub mod run;
pub mod scripted;
pub mod study;
pub mod synth;
pub mod transport;
