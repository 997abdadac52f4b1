//! Laboratory for monotone probabilistic cellular automata on Z^d x Z.
//!
//! The crate has six building blocks:
//!
//! * [`automaton`] — monotone local maps represented by their minimal
//!   one-sets, rule families with intrinsic randomness, and the built-in
//!   models (NEC majority, triangular-lattice majority trio, cooperative
//!   branching + identity, and the counterexample shrinker).
//! * [`sim`] — bit-packed Monte Carlo for the maximal trajectory on a
//!   torus, plus deterministic half-space interface runs used to check
//!   edge speeds exactly at p = 0.
//! * [`geometry`] — linear forms and polar functions in exact rational
//!   arithmetic: edge speeds, compensated speeds, eroder/shrinker checks,
//!   a Farkas alternative with certificates, and the drift search.
//! * [`contour`] — Toom graphs, contours and cycles, their validation,
//!   presence in dependence realizations, presence-probabilities, the
//!   contour measure of the extending Markov chain, the chain sampler and
//!   its exact exhaustive enumeration, and partial Peierls sums.
//! * [`certify`] — the two abstract stability bounds (cycle mode for
//!   sigma = 2 and general mode), the worked presets reproducing the
//!   published constants, and grid optimization of the noise threshold.
//! * [`diverge`] — exact evaluation of the special-cycle family whose
//!   Peierls sum diverges, with growth-rate analysis and verdicts.

pub mod automaton;
pub mod certify;
pub mod contour;
pub mod diverge;
pub mod geometry;
pub mod model_io;
pub mod rat;
pub mod rng;
pub mod sim;

pub use rat::Rat;
