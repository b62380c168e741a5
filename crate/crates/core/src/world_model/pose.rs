use nalgebra::Matrix3;

use crate::{wrap_angle, Vec3};

use super::GridError;

/// Rotation of the motor stage about the motor-base z axis.
pub fn motor_rotation(theta: f64) -> Matrix3<f64> {
    let (s, c) = theta.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

fn check_rotation(r: &Matrix3<f64>, name: &'static str) -> Result<(), GridError> {
    let ortho = (r.transpose() * r - Matrix3::identity()).abs().max();
    if !(ortho <= 1e-9) || (r.determinant() - 1.0).abs() > 1e-9 {
        return Err(GridError::InvalidRotation(name));
    }
    Ok(())
}

/// Body -> motor base -> motor -> sensor kinematic chain.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorPoseChain {
    body_rot: Matrix3<f64>,
    body_pos: Vec3,
    base_rot: Matrix3<f64>,
    base_pos: Vec3,
    sensor_rot: Matrix3<f64>,
    sensor_pos: Vec3,
    theta: f64,
}

impl SensorPoseChain {
    /// `body_*` is the body pose in the world, `base_*` the motor base in the body frame and
    /// `sensor_*` the sensor in the motor frame.
    pub fn new(
        body_rot: Matrix3<f64>,
        body_pos: Vec3,
        base_rot: Matrix3<f64>,
        base_pos: Vec3,
        sensor_rot: Matrix3<f64>,
        sensor_pos: Vec3,
        theta: f64,
    ) -> Result<Self, GridError> {
        check_rotation(&body_rot, "body")?;
        check_rotation(&base_rot, "motor base")?;
        check_rotation(&sensor_rot, "sensor")?;
        Ok(Self {
            body_rot,
            body_pos,
            base_rot,
            base_pos,
            sensor_rot,
            sensor_pos,
            theta: wrap_angle(theta),
        })
    }

    /// Level body at `position` with every extrinsic at identity.
    pub fn level(position: Vec3, theta: f64) -> Self {
        let i = Matrix3::identity();
        Self::new(i, position, i, Vec3::zeros(), i, Vec3::zeros(), theta)
            .expect("identity rotations are valid")
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn body_rot(&self) -> &Matrix3<f64> {
        &self.body_rot
    }

    pub fn body_pos(&self) -> Vec3 {
        self.body_pos
    }

    pub fn base_rot(&self) -> &Matrix3<f64> {
        &self.base_rot
    }

    pub fn with_theta(&self, theta: f64) -> Self {
        Self {
            theta: wrap_angle(theta),
            ..self.clone()
        }
    }

    pub fn with_body_pos(&self, pos: Vec3) -> Self {
        Self {
            body_pos: pos,
            ..self.clone()
        }
    }

    /// Maps a point in the sensor frame to the world frame.
    pub fn compose(&self, p_sensor: &Vec3) -> Vec3 {
        let in_motor = self.sensor_rot * p_sensor + self.sensor_pos;
        let in_base = motor_rotation(self.theta) * in_motor;
        self.body_rot * (self.base_rot * in_base + self.base_pos) + self.body_pos
    }

    /// Rotation from the sensor frame to the world frame.
    pub fn sensor_to_world_rotation(&self) -> Matrix3<f64> {
        self.body_rot * self.base_rot * motor_rotation(self.theta) * self.sensor_rot
    }

    /// Sensor origin in the world frame.
    pub fn sensor_origin(&self) -> Vec3 {
        self.compose(&Vec3::zeros())
    }
}
