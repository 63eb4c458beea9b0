//! Coordinate-descent toolkit: serial, proximal, accelerated, Kaczmarz, and
//! asynchronous-parallel solvers for quadratic and separable-composite
//! objectives, plus a verification layer that checks measured convergence
//! against the theoretical rate envelopes on generated test problems.
//!
//! The crate is organized along the algorithm families:
//!
//! * [`problem`] — objective families, Lipschitz profiles, shrink operator,
//!   synthetic instance generators;
//! * [`schedule`] — index-selection and steplength rules;
//! * [`serial`] — smooth and proximal CD drivers, Gauss-Seidel/SOR oracle;
//! * [`accel`] — accelerated randomized CD (gamma root recursion);
//! * [`kaczmarz`] — randomized Kaczmarz and its accelerated dense/sparse
//!   implementations;
//! * [`asynchronous`] — the missed-update delay simulator and the lock-free
//!   multithreaded runner;
//! * [`bench`] — rate envelopes, multi-seed verification, the experiment
//!   grid, and reference optima;
//! * [`io`] — MatrixMarket, vector files, JSON problem descriptors, run
//!   manifests.
//!
//! Everything randomized flows through a splittable counter-based generator
//! ([`rng::SplitRng`]), so every run is reproducible from its seed.

pub mod accel;
pub mod asynchronous;
pub mod bench;
pub mod error;
pub mod io;
pub mod kaczmarz;
pub mod matrix;
pub mod problem;
pub mod rng;
pub mod schedule;
pub mod serial;
pub mod trace;

pub use error::{CdError, Result};
