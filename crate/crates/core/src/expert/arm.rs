//! Three-link planar arm and the joint-space / operational-space losses.

use std::f64::consts::PI;

use serde::Serialize;
use thiserror::Error;

pub type Joints = [f64; 3];
pub type Point = [f64; 2];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArmError {
    #[error("link {0} has non-positive length")]
    BadLink(usize),
    #[error("joint {0} has an empty limit interval")]
    BadLimits(usize),
    #[error("joint {joint} = {value} is outside its limits")]
    OutOfLimits { joint: usize, value: f64 },
}

/// Planar pose: position and heading.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Frame {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Frame {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Frame { x, y, theta }
    }

    /// Origin shifted by `d` along the frame's x and y axes.
    pub fn points(&self, d: f64) -> (Point, Point) {
        let (s, c) = self.theta.sin_cos();
        ([self.x + d * c, self.y + d * s], [self.x - d * s, self.y + d * c])
    }
}

pub fn frame_points(frame: &Frame, d: f64) -> (Point, Point) {
    frame.points(d)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ArmModel {
    pub links: [f64; 3],
    pub limits: [(f64, f64); 3],
    pub base: Frame,
}

impl Default for ArmModel {
    /// Unit links, joints in `[-pi, pi]`, base at the origin.
    fn default() -> Self {
        ArmModel {
            links: [1.0; 3],
            limits: [(-PI, PI); 3],
            base: Frame::default(),
        }
    }
}

impl ArmModel {
    pub fn new(links: [f64; 3], limits: [(f64, f64); 3], base: Frame) -> Result<Self, ArmError> {
        for (i, &l) in links.iter().enumerate() {
            if l.is_nan() || l <= 0.0 {
                return Err(ArmError::BadLink(i));
            }
        }
        for (i, &(lo, hi)) in limits.iter().enumerate() {
            if lo.is_nan() || hi.is_nan() || lo >= hi {
                return Err(ArmError::BadLimits(i));
            }
        }
        Ok(ArmModel { links, limits, base })
    }

    pub fn check(&self, q: &Joints) -> Result<(), ArmError> {
        for (j, (&v, &(lo, hi))) in q.iter().zip(&self.limits).enumerate() {
            if !(lo..=hi).contains(&v) {
                return Err(ArmError::OutOfLimits { joint: j, value: v });
            }
        }
        Ok(())
    }

    /// Base, the two elbows and the end effector.
    pub fn joint_positions(&self, q: &Joints) -> [Point; 4] {
        let mut out = [[self.base.x, self.base.y]; 4];
        let mut theta = self.base.theta;
        for j in 0..3 {
            theta += q[j];
            let (s, c) = theta.sin_cos();
            out[j + 1] = [out[j][0] + self.links[j] * c, out[j][1] + self.links[j] * s];
        }
        out
    }

    pub fn forward_kinematics(&self, q: &Joints) -> Result<Frame, ArmError> {
        self.check(q)?;
        Ok(self.fk(q))
    }

    /// Forward kinematics without the limit check.
    pub fn fk(&self, q: &Joints) -> Frame {
        let p = self.joint_positions(q);
        Frame::new(p[3][0], p[3][1], self.base.theta + q.iter().sum::<f64>())
    }

    /// Rows are d(x, y, theta)/dq.
    pub fn jacobian(&self, q: &Joints) -> [[f64; 3]; 3] {
        let p = self.joint_positions(q);
        let ee = p[3];
        let mut j = [[0.0; 3]; 3];
        for k in 0..3 {
            // rotating joint k swings everything beyond p[k]
            j[0][k] = -(ee[1] - p[k][1]);
            j[1][k] = ee[0] - p[k][0];
            j[2][k] = 1.0;
        }
        j
    }
}

pub fn joint_space_loss(q_pred: &Joints, q_expert: &Joints) -> f64 {
    q_pred.iter().zip(q_expert).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / 3.0
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Sum of distances between matching frame points of the two
/// configurations' end effectors.
pub fn op_space_loss(q_pred: &Joints, q_expert: &Joints, arm: &ArmModel, d: f64) -> f64 {
    let (a1, a2) = arm.fk(q_pred).points(d);
    let (b1, b2) = arm.fk(q_expert).points(d);
    dist(a1, b1) + dist(a2, b2)
}

/// Gradient of [`op_space_loss`] with respect to `q_pred`. Terms whose
/// points coincide contribute zero.
pub fn op_space_loss_grad(q_pred: &Joints, q_expert: &Joints, arm: &ArmModel, d: f64) -> Joints {
    let f = arm.fk(q_pred);
    let (a1, a2) = f.points(d);
    let (b1, b2) = arm.fk(q_expert).points(d);
    let jac = arm.jacobian(q_pred);
    let (s, c) = f.theta.sin_cos();
    // d(point)/d(theta) for the x-axis and y-axis points
    let dtheta = [[-d * s, d * c], [-d * c, -d * s]];
    let mut grad = [0.0; 3];
    for (k, (a, b)) in [(a1, b1), (a2, b2)].into_iter().enumerate() {
        let n = dist(a, b);
        if n == 0.0 {
            continue;
        }
        let u = [(a[0] - b[0]) / n, (a[1] - b[1]) / n];
        for j in 0..3 {
            let dx = jac[0][j] + dtheta[k][0] * jac[2][j];
            let dy = jac[1][j] + dtheta[k][1] * jac[2][j];
            grad[j] += u[0] * dx + u[1] * dy;
        }
    }
    grad
}

/// `lambda * joint + (1 - lambda) * op_space`.
pub fn combined_loss(q_pred: &Joints, q_expert: &Joints, arm: &ArmModel, d: f64, lambda: f64) -> f64 {
    lambda * joint_space_loss(q_pred, q_expert) + (1.0 - lambda) * op_space_loss(q_pred, q_expert, arm, d)
}
