//! Adaptive motion-primitive navigation for differential-drive robots.
//!
//! The library closes the loop `generate primitives -> cluster -> plan ->
//! execute -> vote -> re-plan` against a deterministic 2D simulator that can
//! hide degraded locomotion conditions (wheel-speed caps, per-side radius
//! changes) from the command side of the robot. Motion primitives are
//! harvested from driven logs, compressed to exemplars by affinity
//! propagation, chained by an A* planner with a failure-penalty heuristic,
//! and re-weighted online by consistency checks against localization.
//!
//! Entry points:
//! - [`kinematics`]: pose algebra and the three forward integrators.
//! - [`sim`]: the degradation-aware simulator and occupancy grids.
//! - [`mp`]: primitive generation from logs, features, and library files.
//! - [`clustering`]: affinity propagation and cluster bookkeeping.
//! - [`planner`]: primitive-chaining A* with the penalty grid.
//! - [`adaptive`]: plan execution, consistency checks, voting, navigation.
//! - [`dwa`]: the model-trusting local-planner baseline.
//! - [`bench`]: scenario runner and report rendering.
//!
//! See the crate `examples/` directory for one runnable walkthrough per
//! capability, or the `mpnav` binary for the same flows as subcommands.

pub mod adaptive;
pub mod bench;
pub mod clustering;
pub mod config;
pub mod dwa;
pub mod kinematics;
pub mod mp;
pub mod planner;
pub mod sim;
