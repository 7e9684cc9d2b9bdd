//! Game engine, exhaustive solver and toy-scale simulator for bounded-query
//! complexity games.
//!
//! The crate models a two-player increment game refereed by a bounded-depth
//! query program over a complexity oracle, solves the reduced finite game
//! exactly, converts Bob wins into Alice wins by strategy stealing, recovers
//! simple-string counts through a threshold oracle, computes fixed-point
//! targets and price thresholds, and replays the whole construction as a
//! deterministic event-loop simulation over finite decompressor tables.

pub mod bitstr;
pub mod counting;
pub mod fighter;
pub mod game;
pub mod keylemma;
pub mod referee;
pub mod scenario;
pub mod solver;
pub mod toy;
