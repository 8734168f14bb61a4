//! Estimation of total net above-ground biomass change (ΔAGB) over a
//! monitoring period from repeated field plots and optical satellite
//! mosaics.
//!
//! The pipeline: ingest plot tables and BGRID raster stacks, build a
//! candidate predictor pool (raw bands and normalized-difference indices),
//! select a linear ΔAGB model by branch-and-bound best-subset search under
//! BIC with a max-VIF < 5 screen, apply it wall-to-wall under a forest
//! mask, and combine the map with the sample through design-based basic
//! expansion and model-assisted estimators. A seeded synthetic-population
//! Monte Carlo harness validates the statistical claims.

pub mod error;
pub mod estimation;
pub mod features;
pub mod mapping;
pub mod numeric;
pub mod plots;
pub mod raster;
pub mod regression;
pub mod sim;
pub mod spectra;
pub mod subset;

pub use error::{Error, Result};
