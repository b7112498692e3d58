//! Brute-force reference implementations used as oracles by the test suites.
//!
//! Everything in here is deliberately naive: nested loops, recursion-free
//! flood fill, f64 (or double-double) accumulation. None of it shares code
//! with `lmd-core`, so a bug would have to be reproduced twice to slip
//! through a comparison test.

pub mod dd;
pub mod floodfill;
pub mod naive;
