//! Report records and rendering for the `slater-kernels` command line.

pub mod report;
