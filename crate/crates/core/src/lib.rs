//! Maximum agreement subtrees of random cladograms and the mass cascades of
//! the Brownian continuum random tree.
//!
//! The crate is split along the objects it simulates:
//!
//! * [`cladogram`]: unrooted leaf-labelled binary trees, uniform sampling,
//!   induced subtrees, regions and Newick I/O.
//! * [`mast`]: exact maximum agreement subtree solvers.
//! * [`randkit`]: seeded streams and Dirichlet/Beta sampling.
//! * [`cascade`]: ternary mass cascades, zoom traces and good scales.
//! * [`excursion`]: discretized Brownian excursions and the gluing coupling.
//! * [`audit`]: mismatch detection, the size-biased martingale, tail bounds
//!   and the explicit constants ledger.
//! * [`harness`]: experiment configuration, replicate scheduling and output.

pub mod audit;
pub mod cascade;
pub mod cladogram;
pub mod error;
pub mod excursion;
pub mod harness;
pub mod mast;
pub mod randkit;

pub use cladogram::{Cladogram, Label, Region};
pub use error::{Error, Result};
pub use mast::MastResult;
