//! Self-supervised point cloud upsampling.
//!
//! A patch is split into `r` coarse subsets by farthest point sampling; a
//! reconstruction network maps each subset back to a full-size patch, and
//! the network is trained so the union of reconstructions matches the
//! original patch, spreads evenly and stays on the surface. At inference the
//! same network upsamples whole clouds by `r`.
//!
//! Modules, bottom up: [`geometry`] (neighbors, sampling, patches, meshes),
//! [`autodiff`] (reverse-mode tape), [`network`], [`loss`], [`metrics`],
//! [`training`] and [`io`] (file formats and run configuration).

pub mod autodiff;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod io;
pub mod loss;
pub mod metrics;
pub mod network;
pub mod rng;
pub mod training;

pub use error::{Error, Result};
