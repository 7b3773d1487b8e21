//! File formats, ingestion and the command-line front end for `minpair-core`.

pub mod cli;
pub mod ingest;
pub mod output;
pub mod svg;
pub mod world_io;
