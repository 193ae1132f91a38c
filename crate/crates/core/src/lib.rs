//! Exact, desk-scale toolkit for higher-order Fourier analysis over prime
//! fields `F_p^n`.
//!
//! Everything here is built for small `p` (at most 13) and small `n`: point
//! tables are dense, polynomial families are enumerated exhaustively and every
//! exponential enumeration is guarded by an explicit [`Budget`]. Randomised
//! procedures take a master seed; each trial derives its own stream from the
//! seed and its trial index, so results never depend on scheduling.
//!
//! Module map:
//!
//! * [`algebra`]: field points, torus values `U_k`, affine maps.
//! * [`polynomials`]: non-classical polynomials in canonical form.
//! * [`analysis`]: dense function tables, norms, Gowers norms, restrictions.
//! * [`factors`]: polynomial factors, atoms, rank searches.
//! * [`forms`]: linear forms, dependency sets, consistency, equidistribution.
//! * [`instances`]: regularity-instances, witnesses, perturbations and
//!   restriction distributions.
//! * [`testers`]: query-counted oracles and the testers built on them.

#![allow(clippy::too_many_arguments, clippy::needless_range_loop)]

pub mod algebra;
pub mod analysis;
mod budget;
mod error;
pub mod factors;
pub mod forms;
pub mod instances;
pub mod polynomials;
pub mod rng;
pub mod testers;

pub use budget::Budget;
pub use error::{Error, Result};
