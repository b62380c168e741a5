//! Time-parameterized reference along a waypoint polyline.
//!
//! Each segment gets a trapezoidal (or triangular) speed profile. Vertex speeds are limited by
//! the turning angle and then made consistent with `a_max` by a forward and a backward pass.

use std::fmt::Write as _;

use crate::Vec3;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TrajectoryError {
    #[error("path has no vertices")]
    EmptyPath,
    #[error("limits must be positive and finite (v_max {0}, a_max {1})")]
    InvalidLimits(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Segment {
    start: Vec3,
    dir: Vec3,
    length: f64,
    t_start: f64,
    v_in: f64,
    v_peak: f64,
    v_out: f64,
    t_acc: f64,
    t_cruise: f64,
    t_dec: f64,
}

impl Segment {
    fn duration(&self) -> f64 {
        self.t_acc + self.t_cruise + self.t_dec
    }

    /// Arc length and speed `tau` seconds into the segment.
    fn at(&self, tau: f64, a: f64) -> (f64, f64) {
        if tau <= self.t_acc {
            (self.v_in * tau + 0.5 * a * tau * tau, self.v_in + a * tau)
        } else if tau <= self.t_acc + self.t_cruise {
            let d_acc = self.v_in * self.t_acc + 0.5 * a * self.t_acc * self.t_acc;
            (d_acc + self.v_peak * (tau - self.t_acc), self.v_peak)
        } else {
            let r = (self.duration() - tau).max(0.0);
            // mirror of the deceleration phase measured from the segment end
            (self.length - (self.v_out * r + 0.5 * a * r * r), self.v_out + a * r)
        }
    }
}

/// Immutable reference trajectory `p_ref(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTrajectory {
    waypoints: Vec<Vec3>,
    segments: Vec<Segment>,
    v_max: f64,
    a_max: f64,
    t0: f64,
    total_time: f64,
}

/// Speed limit at an interior vertex where the path turns by `angle` (rad).
pub fn corner_speed(v_max: f64, angle: f64) -> f64 {
    v_max * 0.5 * (1.0 + angle.cos())
}

pub fn plan_reference(path: &[Vec3], v_max: f64, a_max: f64, t0: f64) -> Result<ReferenceTrajectory, TrajectoryError> {
    if path.is_empty() {
        return Err(TrajectoryError::EmptyPath);
    }
    if !(v_max > 0.0 && a_max > 0.0 && v_max.is_finite() && a_max.is_finite()) {
        return Err(TrajectoryError::InvalidLimits(v_max, a_max));
    }
    let mut pts = vec![path[0]];
    for p in &path[1..] {
        if (p - pts[pts.len() - 1]).norm() > 1e-9 {
            pts.push(*p);
        }
    }
    let m = pts.len() - 1;
    let mut v = vec![0.0; m + 1];
    for k in 1..m {
        let a = (pts[k] - pts[k - 1]).normalize();
        let b = (pts[k + 1] - pts[k]).normalize();
        v[k] = corner_speed(v_max, a.dot(&b).clamp(-1.0, 1.0).acos());
    }
    let lengths: Vec<f64> = (0..m).map(|k| (pts[k + 1] - pts[k]).norm()).collect();
    for k in 0..m {
        v[k + 1] = v[k + 1].min((v[k] * v[k] + 2.0 * a_max * lengths[k]).sqrt());
    }
    for k in (0..m).rev() {
        v[k] = v[k].min((v[k + 1] * v[k + 1] + 2.0 * a_max * lengths[k]).sqrt());
    }

    let mut segments = Vec::with_capacity(m);
    let mut t = 0.0;
    for k in 0..m {
        let (vi, vo, l) = (v[k], v[k + 1], lengths[k]);
        let peak = ((2.0 * a_max * l + vi * vi + vo * vo) / 2.0).sqrt().min(v_max).max(vi.max(vo));
        let d_acc = (peak * peak - vi * vi) / (2.0 * a_max);
        let d_dec = (peak * peak - vo * vo) / (2.0 * a_max);
        let seg = Segment {
            start: pts[k],
            dir: (pts[k + 1] - pts[k]) / l,
            length: l,
            t_start: t,
            v_in: vi,
            v_peak: peak,
            v_out: vo,
            t_acc: (peak - vi) / a_max,
            t_cruise: ((l - d_acc - d_dec) / peak).max(0.0),
            t_dec: (peak - vo) / a_max,
        };
        t += seg.duration();
        segments.push(seg);
    }
    Ok(ReferenceTrajectory {
        waypoints: pts,
        segments,
        v_max,
        a_max,
        t0,
        total_time: t,
    })
}

impl ReferenceTrajectory {
    /// A trajectory that holds `p` forever.
    pub fn hold(p: Vec3, t0: f64) -> Self {
        plan_reference(&[p], 1.0, 1.0, t0).expect("valid limits")
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn total_time(&self) -> f64 {
        self.total_time
    }

    pub fn end_time(&self) -> f64 {
        self.t0 + self.total_time
    }

    pub fn waypoints(&self) -> &[Vec3] {
        &self.waypoints
    }

    pub fn end_point(&self) -> Vec3 {
        self.waypoints[self.waypoints.len() - 1]
    }

    pub fn length(&self) -> f64 {
        self.segments.iter().map(|s| s.length).sum()
    }

    pub fn v_max(&self) -> f64 {
        self.v_max
    }

    pub fn a_max(&self) -> f64 {
        self.a_max
    }

    /// Position and velocity at absolute time `t`, clamped to the trajectory's time span.
    pub fn sample(&self, t: f64) -> (Vec3, Vec3) {
        let tau = (t - self.t0).clamp(0.0, self.total_time);
        if self.segments.is_empty() || tau >= self.total_time {
            return (self.end_point(), Vec3::zeros());
        }
        let k = self.segments.partition_point(|s| s.t_start <= tau).saturating_sub(1);
        let seg = &self.segments[k];
        let (s, v) = seg.at(tau - seg.t_start, self.a_max);
        let s = s.clamp(0.0, seg.length);
        (seg.start + seg.dir * s, seg.dir * v)
    }

    /// Arc length travelled at absolute time `t`.
    pub fn arc_length(&self, t: f64) -> f64 {
        let tau = (t - self.t0).clamp(0.0, self.total_time);
        let mut acc = 0.0;
        for seg in &self.segments {
            if tau >= seg.t_start + seg.duration() {
                acc += seg.length;
            } else {
                return acc + seg.at(tau - seg.t_start, self.a_max).0.clamp(0.0, seg.length);
            }
        }
        acc
    }

    /// `t,x,y,z,v` rows sampled every `dt` seconds, end point included.
    pub fn to_csv(&self, dt: f64) -> String {
        let mut out = String::from("t,x,y,z,v\n");
        let n = (self.total_time / dt).ceil() as usize;
        for k in 0..=n {
            let t = self.t0 + (k as f64 * dt).min(self.total_time);
            let (p, v) = self.sample(t);
            writeln!(out, "{t},{},{},{},{}", p.x, p.y, p.z, v.norm()).unwrap();
        }
        out
    }
}
