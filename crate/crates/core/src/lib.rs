//! Equilibrium computation for interdependent defense games: a directed
//! network of defenders, each choosing whether to invest in security, and
//! one attacker choosing at most one node to target directly.

pub mod brgd;
pub mod error;
pub mod exact;
pub mod experiment;
pub mod gen;
pub mod graph;
pub mod model;
pub mod oracle;
pub mod payoff;

pub use error::{Error, Result};
pub use exact::{solve_all, EquilibriumCase, EquilibriumSet, Selector};
pub use graph::DirectedGraph;
pub use model::{validate, DefenseGame, NodeParams};
pub use payoff::{regret, Attack, Profile, RegretMode, RegretReport};
