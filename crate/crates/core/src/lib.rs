//! Partially ordered chains on finite windows.
//!
//! The crate covers the full pipeline for oriented random fields indexed by
//! a partially ordered site space:
//!
//! * [`geometry`]: windows of partially ordered site spaces, region
//!   classification, time boxes and their slicing.
//! * [`kernel`]: single-site oriented kernels composed into box kernels,
//!   exact enumeration and the induced unoriented (Gibbs) specification.
//! * [`models`]: POMM-Ising, voter, Stavskaya, PCA embeddings and tabular
//!   kernels loaded from JSON.
//! * [`sampler`]: forward sampling in slicing order and monotone coupled
//!   sampling driven by counter-based random streams.
//! * [`criteria`]: dust-rate matrices, the Dobrushin constant, maximal
//!   percolation parameters and the bounded-uniformity constant.
//! * [`percolation`]: oriented Bernoulli percolation towards the past and
//!   the disagreement coupling.

pub mod color;
pub mod criteria;
pub mod error;
pub mod geometry;
pub mod kernel;
pub mod models;
pub mod percolation;
pub mod rng;
pub mod sampler;
pub mod stats;
pub mod texture;

pub use color::{Color, ColorSpace, Configuration};
pub use error::{Error, Result};
pub use geometry::{Region, SiteId, SiteSpace, TimeBox, WindowDescriptor};
pub use kernel::Kernel;
