//! Helpers shared by the integration tests and the acceptance runner.
#![allow(dead_code)]

pub mod checks;
pub mod grad_cases;
pub mod oracles;
pub mod scenes;
