//! Rotating-beam range sensor simulated against the ground-truth grid.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::world_model::{GridError, OccupancyGrid, SensorPoseChain};
use crate::Vec3;

/// Endpoint offset past the voxel entry face so that a hit lands inside the struck voxel.
const HIT_NUDGE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorConfig {
    /// Elevation strata of the fan.
    pub rows: usize,
    /// Azimuth strata across the horizontal field of view.
    pub cols: usize,
    /// Vertical fan half-angle (rad).
    pub fan_half_angle: f64,
    /// Full horizontal field of view (rad).
    pub h_fov: f64,
    pub max_range: f64,
    /// Range noise standard deviation (m).
    pub sigma_r: f64,
    pub rate_hz: f64,
    /// Randomizes each beam inside its stratum; otherwise beams sit at stratum centers.
    pub jitter: bool,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            rows: 8,
            cols: 8,
            fan_half_angle: 35f64.to_radians(),
            h_fov: 70f64.to_radians(),
            max_range: 20.0,
            sigma_r: 0.01,
            rate_hz: 10.0,
            jitter: true,
        }
    }
}

impl SensorConfig {
    pub fn n_beams(&self) -> usize {
        self.rows * self.cols
    }
}

/// Unit beam directions in the sensor frame (x forward, z up), one per stratum.
pub fn beam_directions<R: Rng + ?Sized>(cfg: &SensorConfig, rng: &mut R) -> Vec<Vec3> {
    let mut out = Vec::with_capacity(cfg.n_beams());
    let d_el = 2.0 * cfg.fan_half_angle / cfg.rows as f64;
    let d_az = cfg.h_fov / cfg.cols as f64;
    let mut offset = || if cfg.jitter { rng.random::<f64>() } else { 0.5 };
    for i in 0..cfg.rows {
        for j in 0..cfg.cols {
            let el = -cfg.fan_half_angle + (i as f64 + offset()) * d_el;
            let az = -0.5 * cfg.h_fov + (j as f64 + offset()) * d_az;
            out.push(Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin()));
        }
    }
    out
}

/// One fire of the sensor: world-frame endpoints with hit flags. Misses end at `max_range`.
pub fn simulate_lidar<R: Rng + ?Sized>(
    truth: &OccupancyGrid,
    pose: &SensorPoseChain,
    cfg: &SensorConfig,
    rng: &mut R,
) -> Result<Vec<(Vec3, bool)>, GridError> {
    let origin = pose.sensor_origin();
    let rot = pose.sensor_to_world_rotation();
    let dirs = beam_directions(cfg, rng);
    let mut out = Vec::with_capacity(dirs.len());
    for d in dirs {
        let w = (rot * d).normalize();
        let noise: f64 = rng.sample(StandardNormal);
        match truth.cast_ray(&origin, &w, cfg.max_range)? {
            Some(hit) => {
                let r = (hit.distance + HIT_NUDGE + cfg.sigma_r * noise).max(0.0);
                out.push((origin + w * r, true));
            }
            None => out.push((origin + w * cfg.max_range, false)),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scan_controller::scan_direction;
    use crate::world_model::CellState;
    use nalgebra::Matrix3;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn noiseless() -> SensorConfig {
        SensorConfig {
            sigma_r: 0.0,
            ..Default::default()
        }
    }

    #[test]
    fn beams_span_the_fan_around_the_scan_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = SensorConfig::default();
        let dirs = beam_directions(&cfg, &mut rng);
        assert_eq!(dirs.len(), 64);
        for d in &dirs {
            assert!((d.norm() - 1.0).abs() < 1e-12);
            assert!(d.z.asin().abs() <= cfg.fan_half_angle + 1e-12);
            assert!(d.y.atan2(d.x).abs() <= 0.5 * cfg.h_fov + 1e-12);
        }
        // mean beam points along the motor direction
        let theta = 1.1;
        let pose = SensorPoseChain::level(Vec3::zeros(), theta);
        let mean: Vec3 = dirs.iter().map(|d| pose.sensor_to_world_rotation() * d).sum::<Vec3>() / 64.0;
        let sd = scan_direction(&Matrix3::identity(), &Matrix3::identity(), theta);
        assert!(mean.normalize().dot(&sd) > 0.99);
    }

    #[test]
    fn sealed_box_hits_within_a_metre() {
        let mut g = OccupancyGrid::filled(Vec3::zeros(), 0.1, [30, 30, 30], CellState::Occupied).unwrap();
        g.fill_box(Vec3::new(1.0, 1.0, 1.0), Vec3::new(2.0, 2.0, 2.0), CellState::Free);
        let cfg = SensorConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = Vec3::new(1.5, 1.5, 1.5);
        for k in 0..8 {
            let pose = SensorPoseChain::level(p, k as f64 * 0.8);
            for (e, hit) in simulate_lidar(&g, &pose, &cfg, &mut rng).unwrap() {
                assert!(hit);
                assert!((e - p).norm() <= 1.0 + 3.0 * cfg.sigma_r);
            }
        }
    }

    #[test]
    fn open_space_misses() {
        let mut g = OccupancyGrid::filled(Vec3::zeros(), 0.5, [100, 100, 40], CellState::Free).unwrap();
        // floor slab only; beams pointing up and sideways see nothing
        g.fill_box(Vec3::zeros(), Vec3::new(50.0, 50.0, 0.5), CellState::Occupied);
        let cfg = SensorConfig {
            fan_half_angle: 10f64.to_radians(),
            ..Default::default()
        };
        let pose = SensorPoseChain::level(Vec3::new(25.0, 25.0, 15.0), 0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let hits = simulate_lidar(&g, &pose, &cfg, &mut rng).unwrap();
        for (e, hit) in hits {
            assert!(!hit);
            assert!(((e - pose.sensor_origin()).norm() - cfg.max_range).abs() < 1e-9);
        }
    }

    #[test]
    fn noiseless_ranges_match_wall_oracle() {
        // wall at x = 6 m facing the sensor
        let mut g = OccupancyGrid::filled(Vec3::zeros(), 0.2, [50, 50, 50], CellState::Free).unwrap();
        g.fill_box(Vec3::new(6.0, 0.0, 0.0), Vec3::new(10.0, 10.0, 10.0), CellState::Occupied);
        let p = Vec3::new(2.05, 5.03, 4.97);
        let pose = SensorPoseChain::level(p, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (e, hit) in simulate_lidar(&g, &pose, &noiseless(), &mut rng).unwrap() {
            assert!(hit);
            let d = (e - p).normalize();
            let oracle = (6.0 - p.x) / d.x;
            assert!(((e - p).norm() - oracle).abs() < 1e-5);
        }
    }
}
