use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

/// One term `a·cos(2π(kx·x + ky·y) + phase)` of a stream function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamMode {
    pub kx: i32,
    pub ky: i32,
    pub amplitude: f64,
    pub phase: f64,
}

/// Spatial pattern of the velocity during one interval, before scaling by
/// the amplitude schedule.
#[derive(Clone, Debug, PartialEq)]
pub enum Shape {
    Zero,
    /// `(sin(2πy + phase), 0)`.
    ShearX { phase: f64 },
    /// `(0, sin(2πx + phase))`.
    ShearY { phase: f64 },
    /// `u = (∂yψ, −∂xψ)` for the given stream function.
    Stream(Arc<[StreamMode]>),
}

impl Shape {
    /// Upper bound on `|u|` for unit amplitude.
    pub fn max_speed(&self) -> f64 {
        match self {
            Shape::Zero => 0.0,
            Shape::ShearX { .. } | Shape::ShearY { .. } => 1.0,
            Shape::Stream(modes) => {
                let (mut bx, mut by) = (0.0, 0.0);
                for m in modes.iter() {
                    bx += (m.amplitude * 2.0 * PI * m.ky as f64).abs();
                    by += (m.amplitude * 2.0 * PI * m.kx as f64).abs();
                }
                f64::hypot(bx, by)
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Shape::Zero => true,
            Shape::Stream(modes) => modes
                .iter()
                .all(|m| m.amplitude == 0.0 || (m.kx == 0 && m.ky == 0)),
            _ => false,
        }
    }
}

/// The velocity field frozen at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct InstantVelocity {
    pub shape: Shape,
    pub amplitude: f64,
}

impl InstantVelocity {
    pub fn zero() -> Self {
        InstantVelocity { shape: Shape::Zero, amplitude: 0.0 }
    }

    pub fn with_amplitude(&self, amplitude: f64) -> Self {
        InstantVelocity { shape: self.shape.clone(), amplitude }
    }

    pub fn velocity(&self, x: f64, y: f64) -> [f64; 2] {
        let a = self.amplitude;
        match &self.shape {
            Shape::Zero => [0.0, 0.0],
            Shape::ShearX { phase } => [a * (2.0 * PI * y + phase).sin(), 0.0],
            Shape::ShearY { phase } => [0.0, a * (2.0 * PI * x + phase).sin()],
            Shape::Stream(modes) => {
                let mut u = [0.0, 0.0];
                for m in modes.iter() {
                    let s = (2.0 * PI * (m.kx as f64 * x + m.ky as f64 * y) + m.phase).sin();
                    let c = 2.0 * PI * m.amplitude * s;
                    u[0] -= c * m.ky as f64;
                    u[1] += c * m.kx as f64;
                }
                [a * u[0], a * u[1]]
            }
        }
    }

    /// `[[∂x u₁, ∂y u₁], [∂x u₂, ∂y u₂]]`.
    pub fn gradient(&self, x: f64, y: f64) -> [[f64; 2]; 2] {
        let a = self.amplitude;
        match &self.shape {
            Shape::Zero => [[0.0; 2]; 2],
            Shape::ShearX { phase } => {
                [[0.0, 2.0 * PI * a * (2.0 * PI * y + phase).cos()], [0.0, 0.0]]
            }
            Shape::ShearY { phase } => {
                [[0.0, 0.0], [2.0 * PI * a * (2.0 * PI * x + phase).cos(), 0.0]]
            }
            Shape::Stream(modes) => {
                let mut g = [[0.0; 2]; 2];
                for m in modes.iter() {
                    let (kx, ky) = (m.kx as f64, m.ky as f64);
                    let c = (2.0 * PI * (kx * x + ky * y) + m.phase).cos();
                    let w = 4.0 * PI * PI * m.amplitude * c * a;
                    g[0][0] -= w * kx * ky;
                    g[0][1] -= w * ky * ky;
                    g[1][0] += w * kx * kx;
                    g[1][1] += w * kx * ky;
                }
                g
            }
        }
    }

    pub fn divergence(&self, x: f64, y: f64) -> f64 {
        let g = self.gradient(x, y);
        g[0][0] + g[1][1]
    }

    /// Pointwise Frobenius norm of `∇u`.
    pub fn gradient_magnitude(&self, x: f64, y: f64) -> f64 {
        let g = self.gradient(x, y);
        (g[0][0] * g[0][0] + g[0][1] * g[0][1] + g[1][0] * g[1][0] + g[1][1] * g[1][1]).sqrt()
    }

    pub fn max_speed(&self) -> f64 {
        self.amplitude.abs() * self.shape.max_speed()
    }
}
