//! Reversible evolutionary Markov chains.
//!
//! Breeding is exchangeable (a product of Polya urns) and selection acts only
//! through fitness-biased discarding, so the stationary law of a population
//! `x = (x_1..x_n)` is `P_ξ(x) Π w(x_i) / Z`. The crate provides the chains,
//! exact small-instance oracles for that law, and solvers for its
//! large-population limits.

pub mod breeding;
pub mod error;
pub mod genotype;
pub mod kernels;
pub mod limits;
pub mod oracle;
pub mod quadrature;

pub use breeding::{effective_alpha, stream_rng, ChainRng, DirichletCategorical, ProductBreeding};
pub use error::{Error, Result};
pub use genotype::{r_map, scaled_weights, AlleleSpace, FitnessSpec, Population, SimplexPoint};
pub use kernels::{wrap_with_luck, Chain, CountLaw, Kernel, KernelConfig, LuckConfig, TournamentRule};
