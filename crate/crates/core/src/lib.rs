//! Episodic reinforcement learning over quantum processes with hidden memory.
//!
//! The crate is organised bottom-up:
//!
//! - [`linalg`]: Hermitian and density operators, channels, POVMs, instruments.
//! - [`env`]: the input-output quantum hidden Markov environment.
//! - [`oom`]: recovery maps and observable-operator likelihoods.
//! - [`planner`]: belief-MDP value iteration for a classical two-state memory.
//! - [`learner`]: maximum likelihood, confidence sets and the optimistic loop.
//! - [`workx`]: state-agnostic work extraction and dissipation accounting.
//! - [`hardness`]: lower-bound instances and their algebra.
//! - [`verify`]: quick invariant suites behind `qhmm verify`.

pub mod error;
pub mod env;
pub mod linalg;
pub mod oom;
pub mod random;
pub mod planner;
pub mod learner;
pub mod workx;
pub mod hardness;
pub mod verify;

pub use error::{QhmmError, Result};
