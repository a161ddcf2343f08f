//! Zone-indexed maximum-likelihood galaxy cluster finder.
//!
//! Pipeline: ingest a galaxy catalog, bucket it into declination zones,
//! score every galaxy against a redshift lookup table, weight by neighbor
//! counts, keep the local likelihood maxima as cluster centers, and collect
//! their members. The run can be split into independent declination slabs
//! (each with duplicated buffer data) whose merged output is identical to
//! the sequential run.

pub mod bcg;
pub mod catalog;
pub mod csvio;
pub mod oracle;
pub mod partition;
pub mod zone;
