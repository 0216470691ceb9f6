//! `pseudorbit`: entropy of finitely generated pseudogroups of local Lipschitz
//! maps on one-dimensional compact metric spaces, estimated from separated
//! orbits and from strongly separated α-pseudo-orbits.
//!
//! The crate is organised bottom-up:
//!
//! - [`space`]: the circle and the unit interval, their metrics and grids.
//! - [`pseudogroup`]: local maps with explicit domains, symmetric generating
//!   sets, words and their evaluation.
//! - [`orbits`]: pseudo-orbits as lazily evaluated maps on the word tree
//!   (exact, seeded-perturbed and adversarial), and the shift maps.
//! - [`ymetric`]: the weighted-sup metric on pseudo-orbit space, its chain
//!   (pool-restricted) relaxation and the shift Lipschitz estimate.
//! - [`separation`]: separated and strongly separated families, counts,
//!   perturbation schedules and slope estimators.
//! - [`gallery`]: identity, rotation, dyadic and the Morse–Smale pair on the
//!   circle together with the adversarial pseudo-orbit construction.
//! - [`bundles`]: the foliated-bundle entropy sandwich and generator rescaling.
//!
//! Every count produced here is a lower bound witnessed by an explicit
//! family; every limit is a finite-range approximation and labelled as such.
//!
//! ```
//! use pseudorbit::gallery::{build_gallery, GalleryName};
//! use pseudorbit::separation::{separated, SeparationParams};
//!
//! let system = build_gallery(&GalleryName::Dyadic).unwrap();
//! let p = system.space.point(0.0).unwrap();
//! let q = system.space.point(0.0009).unwrap();
//! let s = separated(&system.gens, p, q, SeparationParams::new(9, 0.25).unwrap());
//! assert!(s.separated);
//! assert_eq!(s.witness.unwrap().len(), 9);
//! ```

#![forbid(unsafe_code)]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bundles;
pub mod error;
pub mod gallery;
pub mod orbits;
pub mod pseudogroup;
pub mod rng;
pub mod separation;
pub mod space;
pub mod ymetric;

pub use error::{Error, Result};

/// Engine version recorded in run metadata and cache keys.
pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");
