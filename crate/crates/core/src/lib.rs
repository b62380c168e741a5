//! Exploration planning and active scan control for a rotating range sensor.
//!
//! The crate is organised bottom-up:
//!
//! * [`world_model`] – tri-state voxel belief, ray casting, scan integration and frontier cells.
//! * [`frontier`] – frontier clusters, viewpoint sampling, visible regions and dynamic clusters.
//! * [`global_planner`] – topology roadmap, transition costs and the open asymmetric tour.
//! * [`trajectory`] – trapezoidal reference trajectories along roadmap paths.
//! * [`scan_controller`] – scan-state prediction, direction-dependent uncertainty table,
//!   frontier utility and the receding-horizon motor controller.
//! * [`sim`] – procedural scenes, beam simulation and the closed-loop episode runner.

pub mod frontier;
pub mod global_planner;
pub mod scan_controller;
pub mod sim;
pub mod trajectory;
pub mod world_model;

/// World-frame 3-vector in metres.
pub type Vec3 = nalgebra::Vector3<f64>;

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let w = theta.rem_euclid(tau);
    // rem_euclid can round up to exactly tau for tiny negative inputs
    if w >= tau {
        0.0
    } else {
        w
    }
}
