//! Closed-loop UAV navigation around moving obstacles: a lifted-operator
//! predictor for obstacle motion fused with a convex model-predictive
//! controller, plus the synthetic sensing, tracking, and simulation harness
//! needed to exercise the pipeline end to end at desk scale.
//!
//! ## Modules
//!
//! - [`dynamics`]: exact discrete velocity-loop UAV model
//! - [`world`]: obstacle motion truth and the world clock
//! - [`sensing`]: synthetic LiDAR sampling, filtering, clustering
//! - [`tracking`]: track association, delay embedding, history smoothing
//! - [`koopman`]: lifting functions, operator estimation, rescaling, rollout
//! - [`qp`]: dense operator-splitting quadratic-program solver
//! - [`mpc`]: condensed receding-horizon problem with avoidance half-spaces
//! - [`scenario`]: declarative scenario files
//! - [`sim`]: closed-loop runner, prediction studies, benchmarks, plots

pub mod dynamics;
pub mod mpc;
pub mod qp;
pub mod koopman;
pub mod sensing;
pub mod tracking;
pub mod world;
