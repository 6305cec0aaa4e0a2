//! Multiscale flatness numbers of finite point samples.
//!
//! The extrinsic numbers measure how far a sample is from the best affine
//! n-plane through a point, either two-sided (`alpha`, a Hausdorff distance)
//! or one-sided (`beta`, a sup distance). The intrinsic numbers compare the
//! metric ball of the sample with a Euclidean n-ball: `a` through the
//! Gromov-Hausdorff distance and `b` through the least distortion of a map
//! into the ball. Every estimate is returned as a [`Bracket`].

pub mod datasets;
pub mod error;
pub mod extrinsic;
pub mod geometry;
pub mod intrinsic;
pub mod io;
pub mod profile;
pub mod simplex;
pub mod verification;

pub use error::{FlatnessError, Result};
pub use geometry::{AffinePlane, Bracket, PointCloud};
