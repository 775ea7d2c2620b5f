//! Numerical monopolist screening in the plane and the free-boundary
//! machinery built on top of its solution.

// guards are written `!(x > 0.0)` so that NaN fails them
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod field;
pub mod freeboundary;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod numeric;
pub mod obstacle;
pub mod pipeline;
pub mod rays;
pub mod regions;
pub mod solver;
