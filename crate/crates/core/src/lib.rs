//! Traces of the Bessel-3 Dirichlet form `E[u] = int (u')^2 x^2 dx` on
//! discrete and mixed supports: heat kernel, harmonic extensions, trace
//! energies, conservativeness tests, semigroups and trace-chain simulation.

pub mod conservativeness;
pub mod continuum_form;
pub mod error;
pub mod harmonic_extension;
pub mod lattice;
pub mod markov_sim;
pub mod measure;
pub mod quadrature;
pub mod spectral_semigroup;
pub mod special_fn;
pub mod trace_forms;

pub use error::{Error, Result};
pub use lattice::LatticeFunction;
pub use measure::{Family, MeasureSpec, Tail};
pub use quadrature::QuadratureConfig;
