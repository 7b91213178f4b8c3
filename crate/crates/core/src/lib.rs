//! Numerical laboratory for the frequency function of Δ²u = Vu.
//!
//! A solution u on a base domain in R^n is lifted to ũ(x,t) = u(x)e^{√λ t},
//! split into the second-order pair (ũ, w = Δũ − λũ/2), and measured on balls
//! through the weighted integrals H, I, h and the frequency N = I/H. Every
//! identity and inequality of the frequency argument has a checker that
//! reports both sides and the implied constant.
//!
//! Each capability has a runnable program under `examples/`:
//!
//! ```text
//! cargo run --release --example lift_and_decompose
//! cargo run --release --example frequency_profile
//! cargo run --release --example identity_checks
//! cargo run --release --example doubling_and_interior
//! cargo run --release --example vanishing_order
//! cargo run --release --example frequency_scaling
//! cargo run --release --example biharmonic_solver
//! cargo run --release --example config_runner -- configs/harmonic.toml
//! ```

pub mod decompose;
pub mod error;
pub mod experiment;
pub mod expr;
pub mod fields;
pub mod frequency;
pub mod inequalities;
pub mod lifting;
pub mod quadrature;
pub mod report;
pub mod solutions;
pub mod summation;
pub mod vanishing;

pub use decompose::LiftedSystem;
pub use error::{Error, Result};
pub use expr::Expr;
pub use fields::{GridSpec, PotentialSpec, ScalarField};
pub use frequency::FrequencyProfile;
pub use lifting::LiftParams;
pub use quadrature::{Ball, BallRule, WeightedIntegrals};
pub use report::CheckReport;
