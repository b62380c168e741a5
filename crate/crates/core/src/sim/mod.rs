//! Closed-loop simulation: procedural ground-truth scenes, a rotating-beam range sensor, a
//! pose-noise proxy driven by the localization table, and the episode runner.

mod episode;
mod lidar;
mod scene;
mod surface;

pub use episode::{
    run_episode, ControllerSpec, CycleRecord, EndReason, Episode, EpisodeMetrics, EpisodeSummary,
    SimConfig,
};
pub use lidar::{beam_directions, simulate_lidar, SensorConfig};
pub use scene::{flood_fill, generate_scene, Scene, SceneKind, SceneSpec, MAX_SCENE_VOXELS};
pub use surface::SurfaceNormals;

use crate::world_model::GridError;
use crate::Vec3;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("scene size {0:?} is too small for a {1} scene")]
    SceneTooSmall([f64; 3], &'static str),
    #[error("scene needs {0} voxels, over the memory budget")]
    SceneTooLarge(usize),
    #[error("free space is disconnected: {reachable} of {total} free voxels reachable from spawn")]
    Disconnected { reachable: usize, total: usize },
    #[error("spawn point {0:?} lacks clearance")]
    SpawnBlocked(Vec3),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}
