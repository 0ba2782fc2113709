//! Finite computational models for the dynamic asymptotic dimension of
//! group actions: partial dynamical systems with chain-component covers,
//! the cover-producing algorithms (greedy coloring, geometric transport,
//! scheduled unions, polynomial-growth nets, local refinement), doubling
//! decompositions of finite metric spaces, and finite approximations of
//! isometric actions driven end to end by a pipeline experiment.

pub mod action;
pub mod caps;
pub mod coloring;
pub mod cover;
pub mod error;
pub mod files;
pub mod geometry;
pub mod group;
pub mod metric;
pub mod system;

pub use caps::Caps;
pub use error::{Error, Result};
