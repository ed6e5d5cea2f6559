//! Energy-aware healing of a cell outage with ground stations and drone base
//! stations: user association by LP relaxation and rounding, drone placement by
//! successive convex approximation, and an exact brute-force reference for tiny
//! instances.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Decision variables are indexed by several parallel index sets at once.
#![allow(clippy::needless_range_loop)]

pub mod association;
pub mod geometry;
pub mod oracle;
pub mod orchestrator;
pub mod placement;
pub mod power;
pub mod radio;
pub mod scenario;
