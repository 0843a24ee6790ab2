#![no_std]
extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analytic;
pub mod coalition;
pub mod contrast;
pub mod distributions;
pub mod error;
pub mod estimators;
pub mod knn;
pub mod models;
pub mod quadrature;
pub mod rng;
pub mod shapley;
pub mod special;
