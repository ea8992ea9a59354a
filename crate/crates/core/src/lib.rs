//! Interval maps, their fuzzy-XOR combinations, and numerical and exact
//! diagnostics deciding whether a combination is chaotic.

pub mod branches;
pub mod config;
pub mod diagnostics;
pub mod exec;
pub mod experiments;
pub mod map;
pub mod pa;
pub mod plot;
pub mod report;
