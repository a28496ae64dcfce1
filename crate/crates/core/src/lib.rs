pub mod asymptotic;
pub mod cli;
pub mod conditional;
pub mod data;
pub mod depmeasures;
pub mod error;
pub mod gauss;
pub mod inference;
pub mod margins;
pub mod model;
pub mod quadrature;
pub mod rng;
pub mod special;
pub mod stats;
pub mod subasymptotic;
