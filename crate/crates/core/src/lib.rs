//! Reactive long-horizon task execution over a library of skills.
//!
//! * [`logic`]: objects, predicates, grounded atoms and logical states.
//! * [`domain`]: skill schemas (preconditions and effects) and grounding.
//! * [`planner`]: breadth-first symbolic planner.
//! * [`executor`]: plan execution with precondition backtracking, bounded
//!   retrials and bounded replanning.
//! * [`sim`]: stochastic blocks-world simulator with noisy predicate sensing.
//! * [`expert`]: expert trajectories on a planar arm (ARA*), training losses
//!   and dataset export.
//! * [`experiment`]: Monte-Carlo experiments across execution modes.

pub mod domain;
pub mod executor;
pub mod experiment;
pub mod expert;
pub mod logic;
pub mod planner;
pub mod sim;
