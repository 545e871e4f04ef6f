pub mod cli;
pub mod config;
pub mod energy;
pub mod error;
pub mod fields;
pub mod inequalities;
pub mod io;
pub mod library;
pub mod logkernel;
pub mod phase;
pub mod quad;
pub mod reduce;
pub mod solver;
pub mod symmetry;
