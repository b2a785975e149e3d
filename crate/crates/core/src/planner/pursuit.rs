use super::Trajectory;
use crate::sim::{Control, VehicleParams, VehicleState};
use crate::util::wrap_angle;

/// Pure Pursuit tracker gains with adaptive lookahead
/// L_d = clamp(k_v·v, l_min, l_max) and proportional speed control.
#[derive(Debug, Clone, Copy)]
pub struct PursuitGains {
    pub k_v: f64,
    pub l_min: f64,
    pub l_max: f64,
    pub k_p: f64,
}

impl Default for PursuitGains {
    fn default() -> Self {
        PursuitGains { k_v: 0.5, l_min: 0.8, l_max: 2.2, k_p: 4.0 }
    }
}

/// Geometric path tracking: steer toward the first trajectory point at arc
/// distance ≥ L_d past the point nearest the vehicle (falling back to the
/// last point), accelerate toward that point's reference speed. Measuring
/// from the nearest point keeps the effective lookahead stable while the
/// vehicle advances along a trajectory replanned at a lower rate.
pub fn pure_pursuit(state: &VehicleState, traj: &Trajectory, params: &VehicleParams, gains: &PursuitGains) -> Control {
    let lookahead = (gains.k_v * state.v).clamp(gains.l_min, gains.l_max);
    let s_near = traj
        .points
        .iter()
        .min_by(|a, b| {
            let da = (a.x - state.x).powi(2) + (a.y - state.y).powi(2);
            let db = (b.x - state.x).powi(2) + (b.y - state.y).powi(2);
            da.partial_cmp(&db).unwrap_or(std::cmp::Ordering::Equal)
        })
        .map_or(0.0, |p| p.s);
    let target = traj
        .points
        .iter()
        .find(|p| p.s >= s_near + lookahead)
        .or_else(|| traj.points.last());
    let Some(target) = target else {
        // empty trajectory: brake straight
        return Control { steer_target: 0.0, accel: -params.max_accel };
    };
    let dx = target.x - state.x;
    let dy = target.y - state.y;
    let dist = dx.hypot(dy);
    let steer_target = if dist < 1e-6 {
        0.0
    } else {
        let alpha = wrap_angle(dy.atan2(dx) - state.yaw);
        (params.wheelbase * 2.0 * alpha.sin() / dist).atan()
    };
    let accel = (gains.k_p * (target.v - state.v)).clamp(-params.max_accel, params.max_accel);
    Control { steer_target, accel }
}
