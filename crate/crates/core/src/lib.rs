//! Two photon-hopping-coupled cavities, each holding a qubit ultrastrongly
//! coupled to an oscillator, treated in the adiabatic (Δ ≪ ω) approximation.
//!
//! The crate is layered bottom-up:
//!
//! - [`specfun`]: Laguerre polynomials, terminating ₂F₀ series and overlaps
//!   of displaced number states.
//! - [`model`]: parameters, the delocalized modes Ω₀ = ω+ν, Ω₁ = ω−ν and the
//!   closed-form 4×4 block spectrum for every (N₀, N₁).
//! - [`states`]: projections of localized number states onto the adiabatic
//!   eigenbasis, the N00N-type initial state and truncation control.
//! - [`dynamics`]: closed-form time evolution and the two-qubit reduced
//!   density matrix.
//! - [`entanglement`]: Wootters concurrence, sudden-death intervals and the
//!   Hilbert-Schmidt fit to the generalized Bell basis.
//! - [`oracle`]: exact diagonalization of the full Hamiltonian in a truncated
//!   localized Fock basis, used to validate everything above.
//! - [`cli`]: the `cavity-noon` command-line runner.
//!
//! ```
//! use cavity_noon::{dynamics::{Method, Propagator, Truncation}, entanglement, model::ModelParams, states::InitialNoonState};
//!
//! let params = ModelParams::new(1.0, 0.15, 0.1, 0.5).unwrap();
//! let state = InitialNoonState::new(1, 0.0.into()).unwrap();
//! let prop = Propagator::new(&state, &params, Truncation::Auto { epsilon: 1e-12, cap: 64 }).unwrap();
//! let rho = prop.reduced_density(592.0, Method::FirstPrinciples);
//! let c = entanglement::concurrence(&rho).unwrap();
//! assert!((c - 0.945267).abs() < 1e-3);
//! ```

#![allow(clippy::needless_range_loop)]

pub mod cli;
pub mod dynamics;
pub mod entanglement;
mod error;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod specfun;
pub mod states;

pub use error::{Error, Result};

// The guide under book/ is compiled and run as doc-tests so its snippets
// cannot drift from the API.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/special-functions.md")]
    mod special_functions {}
    #[doc = include_str!("../../../book/src/adiabatic-spectrum.md")]
    mod adiabatic_spectrum {}
    #[doc = include_str!("../../../book/src/state-expansion.md")]
    mod state_expansion {}
    #[doc = include_str!("../../../book/src/reduced-dynamics.md")]
    mod reduced_dynamics {}
    #[doc = include_str!("../../../book/src/entanglement.md")]
    mod entanglement {}
    #[doc = include_str!("../../../book/src/exact-oracle.md")]
    mod exact_oracle {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
