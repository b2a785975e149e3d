//! Objective-space coordinates of 8-second rollouts: aggressiveness from
//! relative progress with overtake/crash adjustments, restraint from pooled
//! instantaneous time-to-collision, plus scenario generation and the shared
//! closed-loop segment engine.

mod engine;
mod scenario;

pub use engine::{ittc_from_scan, run_segment, Driver, EngineConfig, PlannerDriver, SegmentOutcome};
pub use scenario::{make_scenario_set, read_scenario_set, write_scenario_set, Scenario, SpawnPose, SPAWN_SPEED_FRACTION};

use crate::planner::{AgentParams, Planner, PlannerConfig};
use crate::sim::{SimWorld, VehicleParams};
use crate::track::Track;
use serde::{Deserialize, Serialize};

/// Restraint scale: o_res = A·(B − mean ttc).
pub const O_RES_A: f64 = 10.0;
/// Restraint offset, also the iTTC cap in seconds.
pub const O_RES_B: f64 = 5.0;
/// Fractional adjustment applied for overtakes (improving) and ego-caused
/// crashes (worsening).
pub const ADJUST_FRACTION: f64 = 0.1;
/// Additive restraint penalty for an ego-caused vehicle crash.
pub const CRASH_RES_PENALTY: f64 = 1.0;
/// Rollout episode length in seconds.
pub const EPISODE_SECONDS: f64 = 8.0;

/// A point in the 2-D objective space (both coordinates minimized: lower agg
/// = more aggressive, lower res = more restrained).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectivePoint {
    pub agg: f64,
    pub res: f64,
}

impl ObjectivePoint {
    pub fn new(agg: f64, res: f64) -> Self {
        ObjectivePoint { agg, res }
    }

    pub fn distance(&self, other: &ObjectivePoint) -> f64 {
        (self.agg - other.agg).hypot(self.res - other.res)
    }

    pub fn is_finite(&self) -> bool {
        self.agg.is_finite() && self.res.is_finite()
    }
}

/// Bookkeeping and final coordinates of one evaluated rollout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutResult {
    pub s_ego_start: f64,
    pub s_ego_end: f64,
    pub s_opp_start: f64,
    pub s_opp_end: f64,
    /// wrap-safe accumulated raceline progress over the episode
    pub ego_progress: f64,
    pub opp_progress: f64,
    pub overtake: bool,
    pub ego_crashed_into_opp: bool,
    pub any_collision: bool,
    /// false when the dynamics aborted; such rollouts count as crashes and
    /// are excluded from game-tree regret sums
    pub dynamics_ok: bool,
    pub steps: usize,
    pub ttc_samples: Vec<f64>,
    pub objectives: ObjectivePoint,
}

/// Aggressiveness coordinate: the negated ego-minus-opponent progress
/// difference, then the overtake adjustment (improves the coordinate by 10%
/// of its magnitude) and the ego-crash adjustment (worsens it by 10%),
/// applied in that order.
pub fn compute_o_agg(result: &RolloutResult) -> f64 {
    let raw = result.ego_progress - result.opp_progress;
    let mut agg = -raw;
    if result.overtake {
        agg -= ADJUST_FRACTION * agg.abs();
    }
    if result.ego_crashed_into_opp {
        agg += ADJUST_FRACTION * agg.abs();
    }
    agg
}

/// Restraint coordinate from pooled, already-clamped iTTC samples:
/// a·(b − mean). Empty sample lists (nothing observed) are fully safe → 0.
pub fn compute_o_res(ttc_samples: &[f64], a: f64, b: f64) -> f64 {
    debug_assert!(a > 0.0 && b > 0.0);
    if ttc_samples.is_empty() {
        return 0.0;
    }
    a * (b - crate::util::mean(ttc_samples))
}

/// Assemble a RolloutResult (objectives included) from a driven segment,
/// seen from the ego's perspective. `swap` reads the same outcome from the
/// opponent's perspective instead.
pub fn assemble_result(out: &SegmentOutcome, swap: bool) -> RolloutResult {
    let (s_me_start, s_me_end, s_ot_start, s_ot_end) = if swap {
        (out.s_opp_start, out.s_opp_end, out.s_ego_start, out.s_ego_end)
    } else {
        (out.s_ego_start, out.s_ego_end, out.s_opp_start, out.s_opp_end)
    };
    let (me_prog, ot_prog) = if swap {
        (out.opp_progress, out.ego_progress)
    } else {
        (out.ego_progress, out.opp_progress)
    };
    let overtake = if swap { out.opp_overtook } else { out.ego_overtook };
    let fault = if swap { out.opp_fault } else { out.ego_fault };
    let ttc = if swap { out.opp_ttc.clone() } else { out.ego_ttc.clone() };
    let crashed_into = out.flags.ego_opp && fault;
    let mut r = RolloutResult {
        s_ego_start: s_me_start,
        s_ego_end: s_me_end,
        s_opp_start: s_ot_start,
        s_opp_end: s_ot_end,
        ego_progress: me_prog,
        opp_progress: ot_prog,
        overtake,
        ego_crashed_into_opp: crashed_into,
        any_collision: out.flags.any() || out.aborted,
        dynamics_ok: !out.aborted,
        steps: out.steps,
        ttc_samples: ttc,
        objectives: ObjectivePoint::new(0.0, 0.0),
    };
    let agg = compute_o_agg(&r);
    let mut res = compute_o_res(&r.ttc_samples, O_RES_A, O_RES_B);
    if r.ego_crashed_into_opp {
        res += CRASH_RES_PENALTY;
    }
    r.objectives = ObjectivePoint::new(agg, res);
    r
}

/// Run one full episode: both agents drive the lattice planner with their own
/// parameters from the scenario spawns; returns the ego-perspective result.
/// Fully deterministic in its inputs (`_seed` is reserved for stochastic
/// extensions; the present dynamics and planner are noise-free).
pub fn evaluate_rollout(
    ego_params: &AgentParams,
    opp_params: &AgentParams,
    scenario: &Scenario,
    track: &Track,
    duration: f64,
    _seed: u64,
) -> RolloutResult {
    let vehicle = VehicleParams::default();
    let mut world = SimWorld::new(track.grid.clone(), scenario.ego.to_state(), scenario.opp.to_state(), vehicle, 0.01, _seed);
    let mut ego = PlannerDriver::new(Planner::new(PlannerConfig::with_vehicle(vehicle)), *ego_params, track.raceline.clone());
    let mut opp = PlannerDriver::new(Planner::new(PlannerConfig::with_vehicle(vehicle)), *opp_params, track.raceline.clone());
    let cfg = EngineConfig::default();
    let out = run_segment(&mut world, &mut ego, &mut opp, &track.raceline, duration, &cfg);
    assemble_result(&out, false)
}
