//! Active visual search in a synthetic 2-D grid world.
//!
//! The crate simulates a mobile robot that looks for a colored object in a
//! walled environment.  A rendered camera view feeds an attention front-end
//! (bottom-up self-information saliency plus top-down color backprojection),
//! detections and non-detections update a Bayesian occupancy-style belief
//! over object location, and a receding-horizon planner picks sensing
//! trajectories that maximize the probability of finding the object early.
//!
//! Modules mirror the pipeline: [`scene`] (world + rendering), [`attention`]
//! (saliency), [`sensor`] (detection model), [`belief`] (Bayesian grid),
//! [`planner`] (trajectory optimization), and [`search`] (the closed loop).

pub mod attention;
pub mod belief;
pub mod config;
pub mod error;
pub mod planner;
pub mod pnm;
pub mod raster;
pub mod scene;
pub mod search;
pub mod sensor;

pub use error::AvsError;
