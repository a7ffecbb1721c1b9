use serde::{Deserialize, Serialize};

use super::VelocityProtocol;
use crate::{Error, Result};

/// Endpoint of a Lagrangian trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// Position reduced to `[0, 1)²`.
    pub position: [f64; 2],
    /// Number of times each coordinate wrapped around the torus.
    pub winding: [i64; 2],
    /// Position on the universal cover, `position + winding`.
    pub unwrapped: [f64; 2],
}

/// Integrates `Ẋ = u(t, X)` from `X(0) = x0` to time `t` with classical RK4.
///
/// Steps are shortened to land exactly on the protocol's switching times so
/// that each step sees a smooth velocity.
pub fn flow_map(protocol: &VelocityProtocol, x0: [f64; 2], t: f64, dt: f64) -> Result<Trajectory> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::config("flow_map needs dt > 0"));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::config("flow_map needs a finite t >= 0"));
    }
    let mut stops = protocol.switch_times(0.0, t);
    stops.push(t);
    let mut x = x0;
    let mut now = 0.0;
    for stop in stops {
        let steps = ((stop - now) / dt - 1e-9).ceil().max(1.0) as usize;
        let h = (stop - now) / steps as f64;
        if h <= 0.0 {
            continue;
        }
        let shape = protocol.shape_at(0.5 * (now + stop));
        for k in 0..steps {
            let t0 = now + k as f64 * h;
            let u = |tt: f64, p: [f64; 2]| shape_velocity(protocol, &shape, tt, p);
            let k1 = u(t0, x);
            let k2 = u(t0 + 0.5 * h, [x[0] + 0.5 * h * k1[0], x[1] + 0.5 * h * k1[1]]);
            let k3 = u(t0 + 0.5 * h, [x[0] + 0.5 * h * k2[0], x[1] + 0.5 * h * k2[1]]);
            let k4 = u(t0 + h, [x[0] + h * k3[0], x[1] + h * k3[1]]);
            for d in 0..2 {
                x[d] += h / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d]);
            }
        }
        now = stop;
    }
    let winding = [x[0].floor() as i64, x[1].floor() as i64];
    let position = [x[0] - winding[0] as f64, x[1] - winding[1] as f64];
    Ok(Trajectory { position, winding, unwrapped: x })
}

fn shape_velocity(protocol: &VelocityProtocol, shape: &super::Shape, t: f64, p: [f64; 2]) -> [f64; 2] {
    super::InstantVelocity { shape: shape.clone(), amplitude: protocol.amplitude(t) }.velocity(p[0], p[1])
}
