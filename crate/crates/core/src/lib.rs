//! Core model for spot-auction traffic coordination of mobile robots.
//!
//! A workspace is a directed grid of road cells where every intersection is a
//! small roundabout. Robots follow fixed shortest paths; conflicts at
//! roundabouts are resolved each step by a sealed-bid auction whose payments
//! are redistributed to the robots not involved in that intersection.
//!
//! The crate is `no_std` + `alloc`: it contains only the algorithmic model.
//! File formats, experiment drivers, and wall-clock measurement live in the
//! companion `sparcas-cli` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod mechanism;
pub mod money;
pub mod oracle;
pub mod planner;
pub mod simulator;
pub mod workspace;

/// Source of wall-clock timestamps for run reports.
///
/// The core crate never reads a real clock; callers inject one. Timing is
/// observational only and never feeds back into simulation decisions, so a
/// no-op clock keeps runs deterministic.
pub trait Clock {
    /// Monotonic timestamp in microseconds.
    fn now_micros(&mut self) -> u64;
}

/// Clock that always reads zero; timing fields in reports stay zero.
#[derive(Debug, Default, Clone, Copy)]
pub struct NullClock;

impl Clock for NullClock {
    fn now_micros(&mut self) -> u64 {
        0
    }
}
