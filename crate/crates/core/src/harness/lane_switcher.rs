//! Reactive baseline driver: follows one of three laterally offset copies of
//! the raceline with Pure Pursuit, hopping to the nearest unoccupied lane when
//! something blocks the current one within a short lookahead, braking when
//! every lane is blocked.

use crate::objectives::Driver;
use crate::planner::{emergency_brake, TrajPoint, Trajectory};
use crate::sim::{vehicle_footprint, Obb, SimWorld, VehicleParams, VehicleState};
use crate::track::Raceline;
use std::sync::Arc;

/// offsets of the three lanes relative to the raceline, in meters
pub const LANE_OFFSETS: [f64; 3] = [-0.4, 0.0, 0.4];
/// how far ahead along the lane the occupancy probe reaches
pub const LANE_LOOKAHEAD_M: f64 = 2.5;
/// oscillation guard: minimum time between lane switches
pub const MIN_SWITCH_INTERVAL_S: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct LaneSwitcher {
    raceline: Arc<Raceline>,
    vehicle: VehicleParams,
    pub offsets: Vec<f64>,
    /// index into `offsets`; starts on the raceline itself
    pub current: usize,
    pub lookahead_m: f64,
    /// replan period in seconds (engine cycle), used to convert the switch
    /// interval into cycles
    cycle_s: f64,
    cooldown_cycles: usize,
    cycles_since_switch: usize,
    cycle: usize,
    /// replan cycle index of every switch, for trace inspection
    pub switch_log: Vec<usize>,
    prev_s: Option<f64>,
    traj_lookahead_m: f64,
    sample_ds: f64,
    clearance_m: f64,
}

impl LaneSwitcher {
    pub fn new(raceline: Arc<Raceline>, vehicle: VehicleParams, cycle_s: f64) -> Self {
        let cooldown_cycles = (MIN_SWITCH_INTERVAL_S / cycle_s).ceil() as usize;
        LaneSwitcher {
            raceline,
            vehicle,
            offsets: LANE_OFFSETS.to_vec(),
            current: 1,
            lookahead_m: LANE_LOOKAHEAD_M,
            cycle_s,
            cooldown_cycles,
            // allow an immediate first switch
            cycles_since_switch: cooldown_cycles,
            cycle: 0,
            switch_log: Vec::new(),
            prev_s: None,
            traj_lookahead_m: 3.0,
            sample_ds: 0.15,
            clearance_m: 0.05,
        }
    }

    pub fn cycle_period_s(&self) -> f64 {
        self.cycle_s
    }

    fn station(&self, s: f64) -> f64 {
        self.raceline.wrap_s(s)
    }

    /// A lane is blocked when any probe point within the lookahead sits too
    /// close to a wall or to the other vehicle's footprint for the car to
    /// occupy it.
    fn lane_blocked(&self, lane: usize, s0: f64, other: &Obb, world: &SimWorld) -> bool {
        let off = self.offsets[lane];
        let radius = self.vehicle.width / 2.0 + self.clearance_m;
        let step = 0.25;
        let n = (self.lookahead_m / step).round() as usize;
        for k in 0..=n {
            let s = self.station(s0 + k as f64 * step);
            let wp = self.raceline.point_at(s);
            let (nx, ny) = self.raceline.normal_at(s);
            let px = wp.x + off * nx;
            let py = wp.y + off * ny;
            if world.grid.distance_at(px, py) < radius {
                return true;
            }
            if point_obb_distance(px, py, other) < radius {
                return true;
            }
        }
        false
    }

    fn lane_trajectory(&self, s0: f64, lane: usize) -> Trajectory {
        let off = self.offsets[lane];
        let n = (self.traj_lookahead_m / self.sample_ds).ceil() as usize;
        let mut points = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let s_rel = k as f64 * self.sample_ds;
            let s = self.station(s0 + s_rel);
            let wp = self.raceline.point_at(s);
            let (nx, ny) = self.raceline.normal_at(s);
            points.push(TrajPoint { x: wp.x + off * nx, y: wp.y + off * ny, theta: wp.theta, kappa: 0.0, v: wp.v, s: s_rel });
        }
        Trajectory { points, arc_length: self.traj_lookahead_m, goal_index: lane, velocity_scale: 1.0 }
    }
}

/// Euclidean distance from a point to an oriented rectangle (0 inside).
pub fn point_obb_distance(px: f64, py: f64, obb: &Obb) -> f64 {
    let (s, c) = obb.yaw.sin_cos();
    let dx = px - obb.cx;
    let dy = py - obb.cy;
    // into box frame
    let lx = c * dx + s * dy;
    let ly = -s * dx + c * dy;
    let ex = (lx.abs() - obb.half_len).max(0.0);
    let ey = (ly.abs() - obb.half_wid).max(0.0);
    ex.hypot(ey)
}

impl Driver for LaneSwitcher {
    fn replan(&mut self, me: &VehicleState, other: &VehicleState, world: &SimWorld) -> Trajectory {
        self.cycle += 1;
        self.cycles_since_switch = self.cycles_since_switch.saturating_add(1);
        let s0 = match self.prev_s {
            Some(prev) => self.raceline.project_near(me.x, me.y, prev, 5.0).s,
            None => self.raceline.project(me.x, me.y).s,
        };
        self.prev_s = Some(s0);
        let other_box = vehicle_footprint(other, &self.vehicle);
        if self.lane_blocked(self.current, s0, &other_box, world) {
            let free: Vec<usize> = (0..self.offsets.len())
                .filter(|&l| l != self.current && !self.lane_blocked(l, s0, &other_box, world))
                .collect();
            if free.is_empty() {
                return emergency_brake(me, &self.vehicle, self.sample_ds);
            }
            if self.cycles_since_switch < self.cooldown_cycles {
                // guard window still open: slow down instead of hopping again
                return emergency_brake(me, &self.vehicle, self.sample_ds);
            }
            let cur_off = self.offsets[self.current];
            let next = free
                .into_iter()
                .min_by(|&a, &b| {
                    let da = (self.offsets[a] - cur_off).abs();
                    let db = (self.offsets[b] - cur_off).abs();
                    da.partial_cmp(&db).unwrap().then(a.cmp(&b))
                })
                .unwrap();
            self.current = next;
            self.cycles_since_switch = 0;
            self.switch_log.push(self.cycle);
        }
        self.lane_trajectory(s0, self.current)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{run_segment, EngineConfig};
    use crate::sim::SimWorld;
    use crate::track::{OccupancyGrid, Track, Waypoint};

    fn corridor(length_m: f64, half_width: f64, v: f64) -> Track {
        let res = 0.05;
        let w = (length_m / res) as usize;
        let h = ((2.0 * half_width + 1.0) / res) as usize;
        let mid = (h as f64) * res / 2.0;
        let mut occ = vec![false; w * h];
        for col in 0..w {
            for row in 0..h {
                let y = (h - 1 - row) as f64 * res + res / 2.0 - mid;
                if y.abs() > half_width {
                    occ[row * w + col] = true;
                }
            }
        }
        let grid = OccupancyGrid::from_occupancy(occ, w, h, res, (0.0, -mid, 0.0)).unwrap();
        let wps = (0..(length_m / 0.1) as usize).map(|i| Waypoint { x: i as f64 * 0.1, y: 0.0, theta: 0.0, v }).collect();
        let raceline = Raceline::from_waypoints(wps, false).unwrap();
        Track { id: "corridor".into(), grid: Arc::new(grid), raceline: Arc::new(raceline) }
    }

    /// an opponent that just holds the brakes
    struct Parked;
    impl Driver for Parked {
        fn replan(&mut self, me: &VehicleState, _other: &VehicleState, _world: &SimWorld) -> Trajectory {
            emergency_brake(me, &VehicleParams::default(), 0.15)
        }
    }

    fn world_with(track: &Track, ego: VehicleState, opp: VehicleState) -> SimWorld {
        SimWorld::new(track.grid.clone(), ego, opp, VehicleParams::default(), 0.01, 0)
    }

    #[test]
    fn empty_track_never_leaves_the_center_lane() {
        let track = corridor(60.0, 1.3, 3.0);
        let mut ls = LaneSwitcher::new(track.raceline.clone(), VehicleParams::default(), 0.1);
        let mut opp = Parked;
        // opponent parked far beyond the drive
        let mut world = world_with(&track, VehicleState::at_pose(2.0, 0.0, 0.0, 2.0), VehicleState::at_pose(55.0, 0.0, 0.0, 0.0));
        let out = run_segment(&mut world, &mut ls, &mut opp, &track.raceline, 6.0, &EngineConfig::default());
        assert!(!out.flags.any());
        assert_eq!(ls.current, 1);
        assert!(ls.switch_log.is_empty());
        assert!(world.ego.y.abs() < 0.1, "stayed on the raceline, y = {}", world.ego.y);
        assert!(out.ego_progress > 10.0);
    }

    #[test]
    fn blocked_lane_triggers_a_switch_in_one_cycle() {
        let track = corridor(60.0, 1.3, 3.0);
        let mut ls = LaneSwitcher::new(track.raceline.clone(), VehicleParams::default(), 0.1);
        let me = VehicleState::at_pose(5.0, 0.0, 0.0, 2.0);
        let other = VehicleState::at_pose(7.0, 0.0, 0.0, 0.0); // dead ahead on lane center
        let world = world_with(&track, me, other);
        let traj = ls.replan(&me, &other, &world);
        assert_ne!(ls.current, 1, "must leave the blocked center lane immediately");
        assert_eq!(ls.switch_log.len(), 1);
        assert!(!traj.is_emergency_brake());
        // the new lane's trajectory is laterally offset
        assert!(traj.points.iter().all(|p| (p.y.abs() - 0.4).abs() < 1e-9));
    }

    #[test]
    fn switch_goes_to_the_nearest_free_lane() {
        let track = corridor(60.0, 2.0, 3.0);
        let mut ls = LaneSwitcher::new(track.raceline.clone(), VehicleParams::default(), 0.1);
        ls.offsets = vec![-0.8, -0.4, 0.0, 0.4];
        ls.current = 2;
        let me = VehicleState::at_pose(5.0, 0.0, 0.0, 2.0);
        let other = VehicleState::at_pose(7.0, 0.0, 0.0, 0.0);
        let world = world_with(&track, me, other);
        ls.replan(&me, &other, &world);
        // -0.4 and +0.4 are equally near; the tie breaks to the lower index
        assert_eq!(ls.current, 1);
    }

    #[test]
    fn all_lanes_blocked_brakes_instead_of_switching() {
        // corridor too narrow for the side lanes: walls at ±0.45 leave the
        // ±0.4 lanes pinned against the boundary
        let track = corridor(60.0, 0.45, 3.0);
        let mut ls = LaneSwitcher::new(track.raceline.clone(), VehicleParams::default(), 0.1);
        let me = VehicleState::at_pose(5.0, 0.0, 0.0, 2.0);
        let other = VehicleState::at_pose(7.0, 0.0, 0.0, 0.0);
        let world = world_with(&track, me, other);
        let traj = ls.replan(&me, &other, &world);
        assert!(traj.is_emergency_brake());
        assert_eq!(ls.current, 1);
        assert!(ls.switch_log.is_empty());
    }

    #[test]
    fn oscillation_guard_limits_switch_rate() {
        // adversarial teleporting obstacle: before every replan the other car
        // sits squarely on whatever lane the switcher is tracking, so it
        // wants to hop every single cycle
        let track = corridor(60.0, 1.3, 3.0);
        let mut ls = LaneSwitcher::new(track.raceline.clone(), VehicleParams::default(), 0.1);
        let me = VehicleState::at_pose(5.0, 0.0, 0.0, 2.0);
        for _ in 0..50 {
            let off = ls.offsets[ls.current];
            let other = VehicleState::at_pose(6.5, off, 0.0, 0.0);
            let world = world_with(&track, me, other);
            ls.replan(&me, &other, &world);
        }
        assert!(ls.switch_log.len() >= 2, "the scenario must actually force repeated switches");
        for w in ls.switch_log.windows(2) {
            assert!(w[1] - w[0] >= 5, "switches {} and {} are closer than 0.5 s", w[0], w[1]);
        }
    }

    #[test]
    fn point_rectangle_distance_cases() {
        let obb = Obb { cx: 0.0, cy: 0.0, yaw: 0.0, half_len: 2.0, half_wid: 1.0 };
        assert_eq!(point_obb_distance(0.5, 0.5, &obb), 0.0);
        assert!((point_obb_distance(3.0, 0.0, &obb) - 1.0).abs() < 1e-12);
        assert!((point_obb_distance(0.0, -2.5, &obb) - 1.5).abs() < 1e-12);
        assert!((point_obb_distance(3.0, 2.0, &obb) - 2.0f64.sqrt()).abs() < 1e-12);
        // rotation: the same corner probe in a rotated frame
        let rot = Obb { cx: 0.0, cy: 0.0, yaw: std::f64::consts::FRAC_PI_2, half_len: 2.0, half_wid: 1.0 };
        assert!((point_obb_distance(0.0, 3.0, &rot) - 1.0).abs() < 1e-12);
    }
}
