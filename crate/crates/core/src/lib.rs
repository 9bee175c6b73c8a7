#![no_std]

extern crate alloc;

pub mod error;
pub mod geometry;
pub mod rng;
pub mod env_grid;
pub mod system;
pub mod contract;
pub mod reach;
pub mod darepc;
pub mod systems;
