//! File formats, training and evaluation drivers, the annotation store and
//! service, and the `tge` command line, on top of `tge-core`.

pub mod checkpoint;
pub mod cli;
pub mod evaluate;
pub mod io;
pub mod manifest;
pub mod service;
pub mod store;
pub mod training;
