//! Benchmark generation and file exchange.

pub mod bundle;
pub mod fdm;
pub mod mtx;
pub mod reduced;

pub use bundle::{load_bundle, load_matrix_market, save_bundle, BenchmarkBundle, BundleMetadata, BundleSystem, LoadOptions, SystemKind, SystemPaths};
pub use fdm::{generate_fdm, FdmCoefficients, FdmSpec};
pub use reduced::{load_reduced, save_reduced, ModelKind, ReducedMetadata, SavedModel};
