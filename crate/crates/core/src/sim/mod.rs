//! Deterministic fixed-step two-vehicle simulation: single-track dynamics
//! with side slip, ray-marched 2D LiDAR that sees the map and the other
//! vehicle, and collision detection with freeze-on-contact semantics.

mod dynamics;
mod geometry;
mod lidar;

pub use dynamics::{measure_steady_radius, step_dynamics, Control, VehicleParams, VehicleState, V_SWITCH};
pub use geometry::{obb_overlap, ray_obb, Obb};
pub use lidar::{ray_march, Scan, ScanConfig};

use crate::track::OccupancyGrid;
use crate::{Error, Result};
use std::sync::Arc;

/// Collision classification for one step. When several contacts coincide the
/// vehicle–vehicle case takes precedence, then ego–map, then opp–map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Collision {
    None,
    EgoMap,
    OppMap,
    EgoOpp,
}

/// Raw per-contact flags (several can be true in the same step).
#[derive(Debug, Clone, Copy, Default)]
pub struct CollisionFlags {
    pub ego_map: bool,
    pub opp_map: bool,
    pub ego_opp: bool,
}

impl CollisionFlags {
    pub fn primary(&self) -> Collision {
        if self.ego_opp {
            Collision::EgoOpp
        } else if self.ego_map {
            Collision::EgoMap
        } else if self.opp_map {
            Collision::OppMap
        } else {
            Collision::None
        }
    }

    pub fn any(&self) -> bool {
        self.ego_map || self.opp_map || self.ego_opp
    }
}

/// Two-vehicle world state. Stepping is a pure function of (state, controls,
/// dt); the grid is shared immutably.
#[derive(Debug, Clone)]
pub struct SimWorld {
    pub grid: Arc<OccupancyGrid>,
    pub ego: VehicleState,
    pub opp: VehicleState,
    pub params: VehicleParams,
    pub t: f64,
    pub dt: f64,
    pub rng_seed: u64,
    pub ego_frozen: bool,
    pub opp_frozen: bool,
}

impl SimWorld {
    pub fn new(grid: Arc<OccupancyGrid>, ego: VehicleState, opp: VehicleState, params: VehicleParams, dt: f64, rng_seed: u64) -> Self {
        SimWorld { grid, ego, opp, params, t: 0.0, dt, rng_seed, ego_frozen: false, opp_frozen: false }
    }

    pub fn ego_footprint(&self) -> Obb {
        vehicle_footprint(&self.ego, &self.params)
    }

    pub fn opp_footprint(&self) -> Obb {
        vehicle_footprint(&self.opp, &self.params)
    }
}

/// Oriented footprint rectangle of a vehicle.
pub fn vehicle_footprint(state: &VehicleState, params: &VehicleParams) -> Obb {
    Obb { cx: state.x, cy: state.y, yaw: state.yaw, half_len: params.length / 2.0, half_wid: params.width / 2.0 }
}

/// Vehicle–map collision: any of the 8 footprint boundary points (corners and
/// edge midpoints) closer to occupied space than width/2, or outside the map.
pub fn vehicle_hits_map(state: &VehicleState, params: &VehicleParams, grid: &OccupancyGrid) -> bool {
    let fp = vehicle_footprint(state, params);
    let safety = params.width / 2.0;
    for (px, py) in fp.boundary_points() {
        if !grid.in_bounds(px, py) || grid.distance_at(px, py) < safety {
            return true;
        }
    }
    false
}

/// Classify the current contact situation of the world.
pub fn check_collision(world: &SimWorld) -> Collision {
    check_collision_flags(world).primary()
}

pub fn check_collision_flags(world: &SimWorld) -> CollisionFlags {
    let ego_map = vehicle_hits_map(&world.ego, &world.params, &world.grid);
    let opp_map = vehicle_hits_map(&world.opp, &world.params, &world.grid);
    let ego_opp = obb_overlap(&world.ego_footprint(), &world.opp_footprint());
    CollisionFlags { ego_map, opp_map, ego_opp }
}

/// Advance both vehicles one `dt`, then resolve collisions. Vehicles involved
/// in a contact are frozen (speed zeroed) for the rest of the rollout.
pub fn step_world(world: &SimWorld, ego_ctrl: Control, opp_ctrl: Control) -> Result<(SimWorld, CollisionFlags)> {
    let mut next = world.clone();
    if !world.ego_frozen {
        next.ego = step_dynamics(&world.ego, ego_ctrl, &world.params, world.dt)?;
    }
    if !world.opp_frozen {
        next.opp = step_dynamics(&world.opp, opp_ctrl, &world.params, world.dt)?;
    }
    next.t = world.t + world.dt;
    let flags = check_collision_flags(&next);
    if flags.ego_map || flags.ego_opp {
        next.ego_frozen = true;
        next.ego.v = 0.0;
        next.ego.yaw_rate = 0.0;
        next.ego.slip = 0.0;
    }
    if flags.opp_map || flags.ego_opp {
        next.opp_frozen = true;
        next.opp.v = 0.0;
        next.opp.yaw_rate = 0.0;
        next.opp.slip = 0.0;
    }
    Ok((next, flags))
}

/// Load vehicle + scan parameters from a `key: value` config file. Missing
/// keys keep the documented defaults.
pub fn load_sim_config(path: &std::path::Path) -> Result<(VehicleParams, ScanConfig)> {
    let map = crate::util::parse_kv(&std::fs::read_to_string(path)?)?;
    let mut vp = VehicleParams::default();
    let mut sc = ScanConfig::default();
    let get = |key: &str, default: f64| -> Result<f64> {
        match map.get(key) {
            Some(_) => crate::util::kv_f64(&map, key),
            None => Ok(default),
        }
    };
    vp.wheelbase = get("wheelbase", vp.wheelbase)?;
    vp.lf = get("lf", vp.lf)?;
    vp.lr = get("lr", vp.lr)?;
    vp.mass = get("mass", vp.mass)?;
    vp.yaw_inertia = get("yaw_inertia", vp.yaw_inertia)?;
    vp.cornering_stiffness_front = get("cornering_stiffness_front", vp.cornering_stiffness_front)?;
    vp.cornering_stiffness_rear = get("cornering_stiffness_rear", vp.cornering_stiffness_rear)?;
    vp.friction_mu = get("friction_mu", vp.friction_mu)?;
    vp.cg_height = get("cg_height", vp.cg_height)?;
    vp.max_steer = get("max_steer", vp.max_steer)?;
    vp.max_steer_rate = get("max_steer_rate", vp.max_steer_rate)?;
    vp.max_accel = get("max_accel", vp.max_accel)?;
    vp.v_max = get("v_max", vp.v_max)?;
    vp.length = get("length", vp.length)?;
    vp.width = get("width", vp.width)?;
    sc.max_range = get("scan_max_range", sc.max_range)?;
    sc.fov = get("scan_fov", sc.fov)?;
    if let Some(_) = map.get("scan_beams") {
        sc.beams = crate::util::kv_f64(&map, "scan_beams")? as usize;
    }
    vp.validate()?;
    if sc.beams < 2 || sc.max_range <= 0.0 || sc.fov <= 0.0 {
        return Err(Error::invalid("scan config: beams ≥ 2, fov > 0, max_range > 0 required"));
    }
    Ok((vp, sc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::track::OccupancyGrid;
    use approx::assert_abs_diff_eq;

    pub(crate) fn open_grid(cells: usize, resolution: f64) -> Arc<OccupancyGrid> {
        // free interior with a one-cell occupied border
        let mut occ = vec![false; cells * cells];
        for i in 0..cells {
            occ[i] = true;
            occ[(cells - 1) * cells + i] = true;
            occ[i * cells] = true;
            occ[i * cells + cells - 1] = true;
        }
        Arc::new(OccupancyGrid::from_occupancy(occ, cells, cells, resolution, (0.0, 0.0, 0.0)).unwrap())
    }

    fn center_state(grid: &OccupancyGrid, v: f64) -> VehicleState {
        let cx = grid.width_cells as f64 * grid.resolution / 2.0;
        let cy = grid.height_cells as f64 * grid.resolution / 2.0;
        VehicleState { x: cx, y: cy, yaw: 0.0, steer: 0.0, v, yaw_rate: 0.0, slip: 0.0 }
    }

    #[test]
    fn far_apart_vehicles_no_collision() {
        let grid = open_grid(400, 0.05); // 20 m square
        let params = VehicleParams::default();
        let mut ego = center_state(&grid, 0.0);
        let mut opp = ego;
        ego.x -= 5.0;
        opp.x += 5.0;
        let world = SimWorld::new(grid, ego, opp, params, 0.01, 0);
        assert_eq!(check_collision(&world), Collision::None);
    }

    #[test]
    fn identical_poses_collide() {
        let grid = open_grid(400, 0.05);
        let params = VehicleParams::default();
        let s = center_state(&grid, 0.0);
        let world = SimWorld::new(grid, s, s, params, 0.01, 0);
        assert_eq!(check_collision(&world), Collision::EgoOpp);
    }

    #[test]
    fn rest_world_only_time_advances() {
        let grid = open_grid(400, 0.05);
        let params = VehicleParams::default();
        let s = center_state(&grid, 0.0);
        let mut opp = s;
        opp.x += 3.0;
        let world = SimWorld::new(grid, s, opp, params, 0.01, 0);
        let (next, flags) = step_world(&world, Control::default(), Control::default()).unwrap();
        assert!(!flags.any());
        assert_abs_diff_eq!(next.t, 0.01);
        assert_eq!(next.ego.x.to_bits(), world.ego.x.to_bits());
        assert_eq!(next.ego.v.to_bits(), world.ego.v.to_bits());
        assert_eq!(next.opp.y.to_bits(), world.opp.y.to_bits());
    }

    #[test]
    fn stepping_is_bit_deterministic() {
        let grid = open_grid(400, 0.05);
        let params = VehicleParams::default();
        let mut ego = center_state(&grid, 2.0);
        ego.x -= 4.0;
        let mut opp = center_state(&grid, 1.5);
        opp.y += 1.0;
        let run = || {
            let mut w = SimWorld::new(grid.clone(), ego, opp, params, 0.01, 7);
            let mut trace = Vec::new();
            for k in 0..100 {
                let c1 = Control { steer_target: 0.05 * ((k % 7) as f64 - 3.0), accel: 0.5 };
                let c2 = Control { steer_target: -0.03, accel: 0.2 };
                let (next, _) = step_world(&w, c1, c2).unwrap();
                w = next;
                trace.push((w.ego.x.to_bits(), w.ego.y.to_bits(), w.opp.yaw.to_bits(), w.ego.v.to_bits()));
            }
            trace
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn driving_into_wall_freezes_ego() {
        let grid = open_grid(200, 0.05); // 10 m square, border walls
        let params = VehicleParams::default();
        let mut ego = center_state(&grid, 2.0); // heading +x at 2 m/s
        ego.y += 0.0;
        let opp = VehicleState { x: 1.0, y: 1.0, yaw: 0.0, steer: 0.0, v: 0.0, yaw_rate: 0.0, slip: 0.0 };
        let mut w = SimWorld::new(grid, ego, opp, params, 0.01, 0);
        // wall at x = 10 minus border cell; distance ≈ 4.6 m to contact
        let mut hit_at = None;
        for _ in 0..4000 {
            let (next, flags) = step_world(&w, Control { steer_target: 0.0, accel: 0.0 }, Control::default()).unwrap();
            w = next;
            if flags.ego_map {
                hit_at = Some(w.t);
                break;
            }
        }
        let t_hit = hit_at.expect("ego should reach the wall");
        // straight-line kinematics bound: distance/speed + 2 dt slack
        let travel = 10.0 - 5.0 - 0.05 /*border*/ - params.length / 2.0 - params.width / 2.0 - 0.05;
        assert!(t_hit <= travel / 2.0 + 0.5, "hit at {t_hit}, expected near {}", travel / 2.0);
        assert!(w.ego_frozen);
        assert_eq!(w.ego.v, 0.0);
        let v_before = w.ego.clone();
        let (after, _) = step_world(&w, Control { steer_target: 0.0, accel: 3.0 }, Control::default()).unwrap();
        assert_eq!(after.ego.x.to_bits(), v_before.x.to_bits(), "frozen vehicle must not move");
    }

    #[test]
    fn sim_config_defaults_and_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sim.txt");
        std::fs::write(&p, "v_max: 6.5\nscan_beams: 54\n").unwrap();
        let (vp, sc) = load_sim_config(&p).unwrap();
        assert_abs_diff_eq!(vp.v_max, 6.5);
        assert_eq!(sc.beams, 54);
        assert_abs_diff_eq!(vp.wheelbase, 0.3302);
        std::fs::write(&p, "wheelbase: -1\n").unwrap();
        assert!(load_sim_config(&p).is_err());
    }
}
