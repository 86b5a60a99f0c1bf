//! Frenet apparatus, slant and f-biharmonic tests for curves in the
//! S-manifold model `R^(2m+s)(-3s)`.

pub mod biharmonic;
pub mod cli;
pub mod curve;
pub mod fd;
pub mod jet;
pub mod manifold;
pub mod odesol;
pub mod slant;
pub mod synth;
