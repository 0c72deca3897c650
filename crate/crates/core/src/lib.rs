//! Algorithms behind the AIS LLM benchmark.
//!
//! Everything in this crate is a pure transformation over in-memory data:
//! trajectory resampling and subsetting, geodesy, Top-Down Time Ratio
//! compression, zone-transition semantic events, the 27-query catalog, the
//! ground-truth oracle, prompt assembly, answer parsing with self-consistency
//! aggregation, and scoring. File formats, transports, the SQL backend and the
//! command line live in the `aisbench` crate.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod answer;
pub mod catalog;
pub mod compress;
pub mod consistency;
pub mod geo;
mod math;
pub mod model;
pub mod oracle;
pub mod prepare;
pub mod prompt;
pub mod scoring;
pub mod semantics;
pub mod table;

pub use answer::{Answer, AnswerValue};
pub use catalog::{AnswerKind, Catalog, Category, QueryId, QueryInstance, QuerySpec};
pub use geo::{GeoPoint, Zone};
pub use model::{DatasetBundle, Mmsi, Port, ShipStatic, TimeOfDay, TrackPoint, Trajectory};
pub use scoring::Method;
