//! Synthetic aneurysm growth data and operator-learning surrogates.
//!
//! The crate covers the full batch pipeline:
//!
//! 1. [`insult`] — prescribed mechanobiological insult fields on a
//!    cylindrical vessel grid, analytic bumps or censored periodic Gaussian
//!    random fields with exactly controlled area fraction and boundary
//!    softness;
//! 2. [`growth`] — the mechanobiologically equilibrated wall response per
//!    node (thin-wall closure) and the elastic diastolic/systolic
//!    distensions, yielding dilatation and distensibility maps;
//! 3. [`dataset`] — conversion of field maps into training samples: sensor
//!    lattices or contrast-stretched grayscale images, location encodings,
//!    pressure flags, noise injection and stratified splits;
//! 4. [`nn`] / [`deeponet`] — dense/convolutional kernels with exact
//!    reverse-mode gradients, Adam and L-BFGS, assembled into multi-branch
//!    operator networks that invert the maps back to the insult field;
//! 5. [`cases`] — the six benchmark experiment definitions.

pub mod cases;
pub mod dataset;
pub mod deeponet;
pub mod error;
pub mod grf;
pub mod grid;
pub mod growth;
pub mod insult;
pub mod io;
pub mod kde;
pub mod material;
pub mod nn;
pub mod special;
pub mod wall;

pub use error::{CoreError, Result};
pub use grid::CylindricalGrid;
pub use growth::{simulate, solve_equilibrium, FieldMaps, NodeEquilibriumState};
pub use insult::{
    evaluate_analytic, generate_random_insult, AnalyticInsultParams, InsultKind, InsultProfile,
    RandomInsultParams,
};
pub use material::{MaterialParams, Scenario};
pub use wall::{homeostatic_state, HomeostaticState};
