//! Seeded generators and brute-force oracles shared by the property tests
//! and the acceptance runner.
#![allow(dead_code)]

pub mod gen;
pub mod naive;
