//! Forecast-then-schedule toolkit for building energy at 15-minute resolution.
//!
//! Series repair, weekly STL, refined motifs and simple forecasters feed a
//! two-stage scheduler: an LP-relaxed peak bound followed by a capped
//! cost-minimizing MILP, both solved by the in-crate simplex and
//! branch-and-bound.

pub mod clock;
pub mod lp;
pub mod milp;
pub mod decomp;
pub mod series;
pub mod forecast;
pub mod motif;
pub mod instance;
pub mod engine;
