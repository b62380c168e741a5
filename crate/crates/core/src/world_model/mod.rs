//! Tri-state voxel belief shared by every planning layer.

mod clearance;
mod frontiers;
mod grid;
mod io;
mod pose;
mod ray;

pub use clearance::ClearanceMap;
pub use frontiers::detect_frontiers;
pub use grid::{CellState, OccupancyGrid, Voxel, FACE_NEIGHBORS};
pub use pose::{motor_rotation, SensorPoseChain};
pub use ray::{RayHit, RayStep};

use crate::Vec3;

#[derive(Debug, thiserror::Error)]
pub enum GridError {
    #[error("resolution must be positive and finite, got {0}")]
    InvalidResolution(f64),
    #[error("grid dimensions must be >= 1, got {0:?}")]
    InvalidDims([usize; 3]),
    #[error("grid origin must be finite")]
    InvalidOrigin,
    #[error("point {0:?} lies outside the grid")]
    OutOfBounds(Vec3),
    #[error("ray direction {0:?} is not unit length")]
    InvalidDirection(Vec3),
    #[error("ray range must be positive, got {0}")]
    InvalidRange(f64),
    #[error("rotation matrix is not a proper rotation: {0}")]
    InvalidRotation(&'static str),
    #[error("malformed grid file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
