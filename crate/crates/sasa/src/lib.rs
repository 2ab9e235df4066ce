//! File formats, run manifests, parallel replicate runs and the `sasa`
//! command line, on top of `sasa-core`.

pub mod bench;
pub mod cli;
pub mod harness;
pub mod io;
pub mod manifest;
