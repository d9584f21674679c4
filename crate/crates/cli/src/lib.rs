//! File formats, chart emission and shared error types for the mortsched
//! command-line surface.

pub mod chart;
pub mod error;
pub mod io;
