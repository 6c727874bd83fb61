//! Exact-arithmetic computation and verification of Bayes correlated
//! equilibria (BCE) and their refinements in finite multi-stage games.
//!
//! The crate is organized around a pipeline:
//!
//! - [`game`] represents finite multi-stage base games and enumerates their
//!   terminal histories exactly ([`game::GameTree`]).
//! - [`lp`] is an exact rational simplex solver (Bland's rule) used by every
//!   feasibility and optimization question in the crate.
//! - [`feedback`] enumerates deterministic mediator plans (feedback rules)
//!   and pure deviation strategies, and evaluates play forward exactly.
//! - [`solver`] assembles obedience linear programs over mixtures of
//!   feedback rules: membership tests, support-function optimization, and
//!   two-player payoff polytopes.
//! - [`expansion`] handles information-structure expansions: inducing games,
//!   consistency and factorization tests, and the canonical expansion built
//!   from a BCE.
//! - [`rationalizability`] decides whether an observed single-agent choice
//!   profile is rationalizable, and tests sure and true dominance.
//! - [`refine`] verifies candidate weak perfect and sequential BCEs given
//!   mediation ranges and (possibly limit-of-perturbation) beliefs.
//! - [`scenarios`] ships the worked examples as code-constructed instances
//!   with their expected results wired to claim reports.
//! - [`schema`] defines the JSON file formats used by the CLI.
//!
//! All probabilities and payoffs are arbitrary-precision rationals; there is
//! no floating point anywhere in the computation paths, so every feasibility
//! or strictness answer is exact and reproducible bit-for-bit.

pub mod cps;
pub mod expansion;
pub mod feedback;
pub mod game;
pub mod hull;
pub mod limits;
pub mod lp;
pub mod nash;
pub mod rational;
pub mod rationalizability;
pub mod refine;
pub mod scenarios;
pub mod schema;
pub mod solver;

pub use game::{BaseGame, Caps, GameError, GameTree, OutcomeDistribution, TerminalHistory};
pub use rational::{parse_rat, rat, ratio, Rat};
