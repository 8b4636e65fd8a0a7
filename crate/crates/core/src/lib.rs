//! Numerical toolkit for a two-parameter family of equivariant vector
//! fields on the 3-sphere whose organizing center is an attracting
//! heteroclinic (Bykov) network between two saddle-foci.
//!
//! The crate evaluates the model and its symmetry-reduced forms
//! ([`model`]), integrates trajectories with dense output and event
//! detection ([`integrate`]), estimates Lyapunov spectra and classifies
//! attractors ([`lyapunov`]), extracts Poincare sections, rotation numbers
//! and planar limit cycles ([`geometry`]), and classifies the
//! `(tau1, tau2)` parameter plane into the torus-breakdown bifurcation
//! diagram ([`sweep`]).

pub mod config;
pub mod error;
pub mod geometry;
pub mod integrate;
pub mod lyapunov;
pub mod model;
pub mod sweep;

pub use error::{GeometryError, IntegrationError, LyapunovError, ModelError, SweepError};
pub use model::ModelParams;
