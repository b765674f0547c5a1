//! Regression-discontinuity-design estimation, diagnostics, and simulation.
//!
//! The crate is organized around three layers: data and design description
//! (`data`, `design`), estimation (`wls`, `estimate`, `bandwidth`), and the
//! validity/robustness machinery (`density`, `balance`, `sweeps`,
//! `localrand`). `sim` provides seeded data-generating processes and a Monte
//! Carlo harness; `plot` and `report` produce binned-scatter data and the
//! machine-readable analysis report consumed by the CLI.

pub mod balance;
pub mod bandwidth;
pub mod data;
pub mod density;
pub mod design;
pub mod error;
pub mod estimate;
pub mod kernel;
pub mod localrand;
pub mod plot;
pub mod report;
pub mod sim;
pub mod stats;
pub mod sweeps;
pub mod wls;

pub use data::{load_dataset, validate_design, ColumnMapping, Observation, RdDataset, ValidationReport};
pub use design::{BandwidthSpec, DesignKind, Kernel, RdDesign, TreatedSide};
pub use error::{Error, Result};
pub use estimate::{estimate_fuzzy, estimate_kink, estimate_main, estimate_sharp, FirstStage, RdEstimate};
pub use kernel::kernel_weight;
pub use wls::{fit_local_wls, FitTarget, PolyFit, Side};
