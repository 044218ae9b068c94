//! Prediction of new outgoing links from time series of crawl snapshots.

pub mod error;
pub mod evaluation;
pub mod features;
pub mod fixtures;
pub mod graph;
pub mod ingest;
pub mod learners;
pub mod pipeline;
pub mod related;
pub mod seed;
pub mod snapshot;
pub mod synthetic;

pub use error::{Error, Result};
pub use snapshot::{CrawlSeries, LinkScope, PageSnapshot};
