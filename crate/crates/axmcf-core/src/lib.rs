//! Core numerics for axisymmetric mean curvature flow.
//!
//! A genus-0 surface of revolution is described by its generating curve in
//! the half plane, parametrised over [0,1] with both endpoints on the axis
//! of rotation. This crate carries the spatial discretisation (difference
//! operators and mesh-dependent norms), the semi-implicit time stepper with
//! its block tridiagonal solver, error and convergence analysis against the
//! exact shrinking sphere, and a shooting method for rotationally symmetric
//! self-shrinker profiles.
//!
//! The crate is `no_std` (with `alloc`); all IO lives in the companion
//! `axmcf` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod analysis;
pub mod curve;
pub mod grid;
pub mod shrinker;
pub mod stepper;
pub mod vec2;

pub use vec2::{Mat2, Vec2};
