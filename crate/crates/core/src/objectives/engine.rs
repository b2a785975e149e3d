use crate::planner::{pure_pursuit, AgentParams, Planner, PursuitGains, Trajectory};
use crate::sim::{ray_march, step_world, CollisionFlags, Scan, ScanConfig, SimWorld, VehicleState};
use crate::track::{progress_delta, Raceline};
use std::sync::Arc;

/// Anything that can produce a trajectory once per planner cycle.
pub trait Driver {
    fn replan(&mut self, me: &VehicleState, other: &VehicleState, world: &SimWorld) -> Trajectory;
}

/// The standard lattice-planner driver with fixed agent parameters. The
/// parameters may be swapped between segments (objective-space moves).
#[derive(Clone)]
pub struct PlannerDriver {
    pub planner: Planner,
    pub params: AgentParams,
    pub raceline: Arc<Raceline>,
}

impl PlannerDriver {
    pub fn new(planner: Planner, params: AgentParams, raceline: Arc<Raceline>) -> Self {
        PlannerDriver { planner, params, raceline }
    }
}

impl Driver for PlannerDriver {
    fn replan(&mut self, me: &VehicleState, other: &VehicleState, world: &SimWorld) -> Trajectory {
        self.planner.plan(me, &self.params, &self.raceline, Some(other), &world.grid)
    }
}

/// Closed-loop engine settings: 100 Hz physics with replanning every
/// `steps_per_cycle` steps (10 → 10 Hz), iTTC recording per cycle, and the
/// overtake hysteresis band.
#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub steps_per_cycle: usize,
    pub scan: ScanConfig,
    pub ittc_eps: f64,
    pub ittc_cap: f64,
    pub overtake_hysteresis: f64,
    pub gains: PursuitGains,
    pub record_ttc: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            steps_per_cycle: 10,
            scan: ScanConfig::default(),
            ittc_eps: 0.01,
            ittc_cap: 5.0,
            overtake_hysteresis: 0.05,
            gains: PursuitGains::default(),
            record_ttc: true,
        }
    }
}

/// Everything observed over one driven segment, from both vehicles' points of
/// view (progress, stations, lead, overtakes, collisions with fault
/// attribution, and pooled per-beam iTTC samples).
#[derive(Debug, Clone, Default)]
pub struct SegmentOutcome {
    pub ego_progress: f64,
    pub opp_progress: f64,
    pub s_ego_start: f64,
    pub s_ego_end: f64,
    pub s_opp_start: f64,
    pub s_opp_end: f64,
    /// signed gap at segment start, positive = ego ahead
    pub lead_start: f64,
    pub lead_end: f64,
    pub ego_overtook: bool,
    pub opp_overtook: bool,
    pub flags: CollisionFlags,
    /// valid only when flags.ego_opp: true iff the ego contributed more
    /// closing speed at first contact
    pub ego_fault: bool,
    pub opp_fault: bool,
    pub ego_ttc: Vec<f64>,
    pub opp_ttc: Vec<f64>,
    pub steps: usize,
    /// dynamics produced a non-finite state and the segment stopped early
    pub aborted: bool,
}

/// Convert one scan into clamped per-beam iTTC samples and append them.
/// ṙ is the projection of the longitudinal speed onto each beam; beams the
/// vehicle is not closing on (ṙ ≤ ε) contribute the cap.
pub fn ittc_from_scan(scan: &Scan, v: f64, eps: f64, cap: f64, out: &mut Vec<f64>) {
    if !scan.valid {
        return;
    }
    for (angle, range) in scan.angles.iter().zip(scan.ranges.iter()) {
        let rdot = v * angle.cos();
        let ttc = if rdot <= eps { cap } else { (range / rdot).clamp(0.0, cap) };
        out.push(ttc);
    }
}

/// Closing-speed contributions of two vehicles toward each other along the
/// center-to-center axis (course angle = yaw + slip). Used to attribute fault
/// at first contact: the vehicle contributing strictly more closing speed ran
/// into the other.
fn closing_contributions(a: &VehicleState, b: &VehicleState) -> (f64, f64) {
    let ux = b.x - a.x;
    let uy = b.y - a.y;
    let n = ux.hypot(uy);
    if n < 1e-9 {
        return (0.0, 0.0);
    }
    let (ux, uy) = (ux / n, uy / n);
    let (sa, ca) = (a.yaw + a.slip).sin_cos();
    let (sb, cb) = (b.yaw + b.slip).sin_cos();
    let toward_b = a.v * (ca * ux + sa * uy);
    let toward_a = b.v * (cb * -ux + sb * -uy);
    (toward_b, toward_a)
}

/// Run one closed-loop segment of `duration` seconds in-place on `world`.
///
/// Per cycle: both drivers replan, iTTC is sampled from both vehicles'
/// scans, then `steps_per_cycle` physics steps run under Pure Pursuit
/// tracking. Station progress accumulates wrap-safely per cycle and overtakes
/// are detected on the running lead with hysteresis. Collisions freeze the
/// involved vehicles (inside step_world) and the segment keeps running to its
/// full duration.
pub fn run_segment(
    world: &mut SimWorld,
    ego: &mut dyn Driver,
    opp: &mut dyn Driver,
    raceline: &Raceline,
    duration: f64,
    cfg: &EngineConfig,
) -> SegmentOutcome {
    let total_steps = (duration / world.dt).round() as usize;
    let mut out = SegmentOutcome::default();
    let mut s_ego = raceline.project(world.ego.x, world.ego.y).s;
    let mut s_opp = raceline.project(world.opp.x, world.opp.y).s;
    out.s_ego_start = s_ego;
    out.s_opp_start = s_opp;
    out.lead_start = progress_delta(raceline, s_opp, s_ego);

    let window = 5.0;
    'segment: while out.steps < total_steps {
        let ego_traj = ego.replan(&world.ego, &world.opp, world);
        let opp_traj = opp.replan(&world.opp, &world.ego, world);
        if cfg.record_ttc {
            let ego_scan = ray_march((world.ego.x, world.ego.y, world.ego.yaw), &world.grid, Some(&world.opp_footprint()), &cfg.scan);
            ittc_from_scan(&ego_scan, world.ego.v, cfg.ittc_eps, cfg.ittc_cap, &mut out.ego_ttc);
            let opp_scan = ray_march((world.opp.x, world.opp.y, world.opp.yaw), &world.grid, Some(&world.ego_footprint()), &cfg.scan);
            ittc_from_scan(&opp_scan, world.opp.v, cfg.ittc_eps, cfg.ittc_cap, &mut out.opp_ttc);
        }
        let cycle_steps = cfg.steps_per_cycle.min(total_steps - out.steps);
        for _ in 0..cycle_steps {
            let ego_ctrl = pure_pursuit(&world.ego, &ego_traj, &world.params, &cfg.gains);
            let opp_ctrl = pure_pursuit(&world.opp, &opp_traj, &world.params, &cfg.gains);
            match step_world(world, ego_ctrl, opp_ctrl) {
                Ok((next, flags)) => {
                    if flags.ego_opp && !out.flags.ego_opp {
                        // first vehicle-vehicle contact: pre-step speeds decide fault
                        let (ego_closing, opp_closing) = closing_contributions(&world.ego, &world.opp);
                        out.ego_fault = ego_closing > opp_closing + 1e-9;
                        out.opp_fault = opp_closing > ego_closing + 1e-9;
                    }
                    out.flags.ego_map |= flags.ego_map;
                    out.flags.opp_map |= flags.opp_map;
                    out.flags.ego_opp |= flags.ego_opp;
                    *world = next;
                }
                Err(_) => {
                    out.aborted = true;
                    break 'segment;
                }
            }
            out.steps += 1;
        }
        let se = raceline.project_near(world.ego.x, world.ego.y, s_ego, window).s;
        let so = raceline.project_near(world.opp.x, world.opp.y, s_opp, window).s;
        out.ego_progress += progress_delta(raceline, s_ego, se);
        out.opp_progress += progress_delta(raceline, s_opp, so);
        s_ego = se;
        s_opp = so;
        let lead = out.lead_start + out.ego_progress - out.opp_progress;
        if out.lead_start < 0.0 && lead > cfg.overtake_hysteresis {
            out.ego_overtook = true;
        }
        if out.lead_start > 0.0 && lead < -cfg.overtake_hysteresis {
            out.opp_overtook = true;
        }
    }
    out.s_ego_end = s_ego;
    out.s_opp_end = s_opp;
    out.lead_end = out.lead_start + out.ego_progress - out.opp_progress;
    out
}
