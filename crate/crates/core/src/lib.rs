//! Berry-Esseen scale experiments for nonconventional sums
//! `S_N = sum_{n <= N} F(xi_{q_1(n)}, ..., xi_{q_l(n)})` over fast mixing
//! processes.

// `!(x > 0.0)` is used on purpose so that NaN takes the error branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod decoupling;
pub mod error;
pub mod experiment;
pub mod index_family;
pub mod lab;
pub mod neighborhoods;
pub mod normal;
pub mod observables;
pub mod processes;
pub mod rng;

pub use error::{Error, Result};
pub use index_family::{IndexFamily, IndexKind};
pub use neighborhoods::{
    annulus, d_ell, decompose_blocks, neighborhood, set_distance, BlockDecomposition, IntervalSet, NeighborhoodIndex,
    ProfileScratch,
};
pub use observables::{center, centering_constant, truncate, CenteringConstant, Observable};
pub use processes::{PathSample, PhiBound, ProcessKind, ProcessSpec};
