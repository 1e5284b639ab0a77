//! Shared test support: independent oracles and synthetic data generators.
#![allow(dead_code)]

pub mod oracles;
pub mod synth;
