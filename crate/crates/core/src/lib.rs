//! Lattice detection for spatial-multiplexing MIMO.
//!
//! The crate maps a complex MIMO link onto a real lattice ([`lattice`]),
//! searches it with four detectors plus an exhaustive oracle
//! ([`detectors`]) over a square-QAM alphabet ([`constellation`]), and
//! measures error rates and visited-node complexity with a reproducible
//! Monte Carlo harness ([`sim`]). [`cli`] backs the `ulbc-qrdm` binary.
//!
//! ```
//! use nalgebra::{DMatrix, DVector};
//! use ulbc_qrdm::constellation::PamAlphabet;
//! use ulbc_qrdm::detectors::{complexity_bounds, ulbc_qrd_m, MSchedule, TriangularSystem, UlbcMode};
//!
//! let alphabet = PamAlphabet::new(16).unwrap();
//! let schedule = MSchedule::geometric(8, alphabet.q());
//! let bounds = complexity_bounds(&schedule, 8, &alphabet);
//! assert_eq!((bounds.lower, bounds.qrdm, bounds.upper), (12, 1364, 1372));
//!
//! let sys = TriangularSystem::new(DMatrix::identity(8, 8), DVector::from_element(8, 0.3)).unwrap();
//! let result = ulbc_qrd_m(&sys, &alphabet, &schedule, UlbcMode::Paper);
//! assert!(bounds.lower <= result.nodes_visited && result.nodes_visited <= bounds.upper);
//! ```

pub mod cli;
pub mod constellation;
pub mod detectors;
pub mod error;
pub mod lattice;
pub mod sim;

pub use error::{Error, Result};
