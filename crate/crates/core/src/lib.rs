//! Multimarket contact and airline pricing analysis.
//!
//! Ticket extracts are reduced to passenger-weighted market cells
//! ([`ingest`]), carrier overlap is counted per quarter ([`mmc`]), pairwise
//! price differences and price rigidity are assembled ([`panel`]), and
//! fixed-effects regressions are fitted with absorbed dummies ([`hdfe`]).
//! [`events`] builds merger event-window designs and [`synth`] generates
//! data with planted coefficients.

pub mod codes;
pub mod error;
pub mod events;
pub mod frame;
pub mod hdfe;
pub mod ingest;
pub mod markets;
pub mod mmc;
pub mod panel;
pub mod synth;
pub mod time;

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use codes::{Airport, Carrier};
pub use error::{Error, Result};
pub use frame::{Frame, Groups};
pub use hdfe::{fit_hdfe, linear_combination_test, FitResult, RegressionSpec, SeKind};
pub use ingest::{CpiTable, IngestOptions, IngestSummary, MarketCell, TicketRecord};
pub use markets::{CityPairKey, MarketKey};
pub use mmc::{EkMatrix, MmcMatrix, RatioMatrix, Weight};
pub use panel::{PairObservation, RigidityObservation};
pub use time::YearQuarter;
