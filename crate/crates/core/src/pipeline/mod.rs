//! Online objective-space planning: drive 8-second segments, estimate the
//! opponent's objective point from its simulated scans over the last window,
//! query the regret model with each candidate move, take the best move, and
//! snap onto the near-optimal prototype set before the next segment.

use crate::evo::Prototype;
use crate::game::{apply_action, encode_infoset, nearest_prototype, Action, Infoset, ACTION_SLOTS, N_ACTIONS};
use crate::objectives::{
    compute_o_agg, compute_o_res, run_segment, Driver, EngineConfig, ObjectivePoint, PlannerDriver, RolloutResult, Scenario,
    SegmentOutcome, CRASH_RES_PENALTY, EPISODE_SECONDS, O_RES_A, O_RES_B,
};
use crate::planner::{AgentParams, Planner, PlannerConfig};
use crate::regret_model::{forward, MlpParams};
use crate::sim::{SimWorld, VehicleParams, VehicleState};
use crate::track::Track;
use crate::{Error, Result};
use std::path::Path;

/// Everything observed about the opponent over one driven window, as needed
/// to replay the objective formulas from the opponent's perspective.
#[derive(Debug, Clone)]
pub struct OpponentWindow {
    /// the observing (ego) car's raceline progress over the window
    pub ego_progress: f64,
    pub opp_progress: f64,
    pub opp_overtook: bool,
    pub opp_crashed_into_ego: bool,
    pub opp_any_collision: bool,
    /// iTTC samples from the opponent's own simulated scans
    pub ttc_samples: Vec<f64>,
    pub duration_s: f64,
}

impl OpponentWindow {
    pub fn from_outcome(out: &SegmentOutcome, dt: f64) -> OpponentWindow {
        OpponentWindow {
            ego_progress: out.ego_progress,
            opp_progress: out.opp_progress,
            opp_overtook: out.opp_overtook,
            opp_crashed_into_ego: out.flags.ego_opp && out.opp_fault,
            opp_any_collision: out.flags.any() || out.aborted,
            ttc_samples: out.opp_ttc.clone(),
            duration_s: out.steps as f64 * dt,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OpponentEstimate {
    pub point: ObjectivePoint,
    /// set when the observed window is shorter than the full segment
    pub low_confidence: bool,
}

/// Estimate the opponent's objective point by replaying the recorded window
/// through the offline objective formulas from the opponent's perspective.
pub fn estimate_opponent(window: &OpponentWindow, expected_window_s: f64) -> OpponentEstimate {
    // the opponent is the "ego" of its own objective computation
    let mut replay = RolloutResult {
        s_ego_start: 0.0,
        s_ego_end: 0.0,
        s_opp_start: 0.0,
        s_opp_end: 0.0,
        ego_progress: window.opp_progress,
        opp_progress: window.ego_progress,
        overtake: window.opp_overtook,
        ego_crashed_into_opp: window.opp_crashed_into_ego,
        any_collision: window.opp_any_collision,
        dynamics_ok: true,
        steps: 0,
        ttc_samples: window.ttc_samples.clone(),
        objectives: ObjectivePoint::new(0.0, 0.0),
    };
    let agg = compute_o_agg(&replay);
    let mut res = compute_o_res(&replay.ttc_samples, O_RES_A, O_RES_B);
    if replay.ego_crashed_into_opp {
        res += CRASH_RES_PENALTY;
    }
    replay.objectives = ObjectivePoint::new(agg, res);
    OpponentEstimate { point: replay.objectives, low_confidence: window.duration_s + 1e-9 < expected_window_s }
}

/// Predict a regret per candidate action and return the argmax (exact ties
/// resolve to the lowest action id), plus the predictions for tracing.
pub fn choose_action(infoset: &Infoset, model: &MlpParams) -> Result<(Action, [f64; N_ACTIONS])> {
    let mut predictions = [0.0; N_ACTIONS];
    for (id, p) in predictions.iter_mut().enumerate() {
        let features = encode_infoset(infoset, Action::from_id(id)?)?;
        *p = forward(model, &features)?;
    }
    let best = crate::game::best_action(&predictions)?;
    Ok((Action::from_id(best)?, predictions))
}

/// Nearest prototype by Euclidean objective distance (ties → lowest id).
pub fn snap_to_prototype(target: &ObjectivePoint, prototypes: &[Prototype]) -> Result<(usize, Prototype)> {
    if prototypes.is_empty() {
        return Err(Error::invalid("prototype set is empty"));
    }
    let idx = nearest_prototype(target, prototypes);
    Ok((idx, prototypes[idx]))
}

/// The ego's online planning state between segments.
#[derive(Debug, Clone)]
pub struct OnlineState {
    /// infoset in progress: snapped ego objective points, opponent
    /// estimates, and the ego's own action record
    pub ego_history: Infoset,
    pub operating: (AgentParams, ObjectivePoint),
    pub segment_clock: f64,
    pub model: MlpParams,
    pub prototypes: Vec<Prototype>,
    pub start_prototype: usize,
}

impl OnlineState {
    pub fn new(model: MlpParams, prototypes: Vec<Prototype>, start_prototype: usize) -> Result<OnlineState> {
        let start = *prototypes
            .get(start_prototype)
            .ok_or_else(|| Error::invalid(format!("start prototype {start_prototype} out of range")))?;
        Ok(OnlineState {
            ego_history: Infoset { ego_points: vec![start.point], opp_points: vec![], ego_actions: vec![] },
            operating: (start.params, start.point),
            segment_clock: 0.0,
            model,
            prototypes,
            start_prototype,
        })
    }
}

/// Online run settings; the engine always records iTTC (the opponent
/// estimate needs the scans).
#[derive(Debug, Clone)]
pub struct OnlineConfig {
    pub total_moves: usize,
    pub segment_s: f64,
    pub d_move: f64,
    pub engine: EngineConfig,
}

impl Default for OnlineConfig {
    fn default() -> Self {
        OnlineConfig { total_moves: 3, segment_s: EPISODE_SECONDS, d_move: 1.0, engine: EngineConfig::default() }
    }
}

/// One race-trace row, written at the start, at every decision point, and at
/// the finish.
#[derive(Debug, Clone)]
pub struct TraceRow {
    pub t: f64,
    pub ego: VehicleState,
    pub opp: VehicleState,
    pub ego_point: ObjectivePoint,
    pub opp_estimate: Option<ObjectivePoint>,
    pub action: Option<Action>,
}

#[derive(Debug)]
pub struct OnlineOutcome {
    pub trace: Vec<TraceRow>,
    pub outcomes: Vec<SegmentOutcome>,
    /// signed ego lead at the end (positive iff the ego finishes ahead)
    pub final_lead: f64,
    pub aborted: bool,
    pub state: OnlineState,
}

/// Drive the full online race: `total_moves + 1` segments with a decision
/// after each segment but the last (estimate → choose → move → snap → adopt
/// weights). The opponent is any driver. Simulation failures end the race
/// early with the abort flag set; the caller scores that as a crash.
pub fn run_online(
    state: OnlineState,
    opp: &mut dyn Driver,
    scenario: &Scenario,
    track: &Track,
    cfg: &OnlineConfig,
) -> Result<OnlineOutcome> {
    if cfg.total_moves > ACTION_SLOTS {
        return Err(Error::invalid(format!("online games support at most {ACTION_SLOTS} moves")));
    }
    if cfg.segment_s <= 0.0 {
        return Err(Error::invalid("segment duration must be positive"));
    }
    let mut state = state;
    let mut engine = cfg.engine.clone();
    engine.record_ttc = true;
    let vehicle = VehicleParams::default();
    let mut world = SimWorld::new(track.grid.clone(), scenario.ego.to_state(), scenario.opp.to_state(), vehicle, 0.01, 0);
    let mut ego = PlannerDriver::new(Planner::new(PlannerConfig::with_vehicle(vehicle)), state.operating.0, track.raceline.clone());
    let mut trace = vec![TraceRow {
        t: 0.0,
        ego: world.ego,
        opp: world.opp,
        ego_point: state.operating.1,
        opp_estimate: None,
        action: None,
    }];
    let mut outcomes = Vec::with_capacity(cfg.total_moves + 1);
    let mut lead = 0.0;
    let mut aborted = false;
    for seg in 0..=cfg.total_moves {
        let out = run_segment(&mut world, &mut ego, opp, &track.raceline, cfg.segment_s, &engine);
        if seg == 0 {
            lead = out.lead_start;
        }
        lead += out.ego_progress - out.opp_progress;
        let failed = out.aborted;
        let estimate = estimate_opponent(&OpponentWindow::from_outcome(&out, world.dt), cfg.segment_s);
        outcomes.push(out);
        let t = (seg + 1) as f64 * cfg.segment_s;
        if failed {
            aborted = true;
            trace.push(TraceRow { t, ego: world.ego, opp: world.opp, ego_point: state.operating.1, opp_estimate: Some(estimate.point), action: None });
            break;
        }
        let action = if seg < cfg.total_moves {
            state.ego_history.opp_points.push(estimate.point);
            let (action, _) = choose_action(&state.ego_history, &state.model)?;
            let moved = apply_action(&state.operating.1, action, cfg.d_move);
            let (_, proto) = snap_to_prototype(&moved, &state.prototypes)?;
            state.operating = (proto.params, proto.point);
            ego.params = proto.params;
            state.ego_history.ego_points.push(proto.point);
            state.ego_history.ego_actions.push(action);
            state.segment_clock = 0.0;
            Some(action)
        } else {
            None
        };
        trace.push(TraceRow { t, ego: world.ego, opp: world.opp, ego_point: state.operating.1, opp_estimate: Some(estimate.point), action });
    }
    Ok(OnlineOutcome { trace, outcomes, final_lead: lead, aborted, state })
}

/// Race-trace CSV: poses, speeds, objective points, and the action taken at
/// each decision (blank where absent).
pub fn write_trace(path: &Path, trace: &[TraceRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "t", "ego_x", "ego_y", "ego_yaw", "ego_v", "opp_x", "opp_y", "opp_yaw", "opp_v", "ego_agg", "ego_res", "opp_est_agg", "opp_est_res", "action",
    ])?;
    for r in trace {
        w.write_record(&[
            r.t.to_string(),
            r.ego.x.to_string(),
            r.ego.y.to_string(),
            r.ego.yaw.to_string(),
            r.ego.v.to_string(),
            r.opp.x.to_string(),
            r.opp.y.to_string(),
            r.opp.yaw.to_string(),
            r.opp.v.to_string(),
            r.ego_point.agg.to_string(),
            r.ego_point.res.to_string(),
            r.opp_estimate.map(|p| p.agg.to_string()).unwrap_or_default(),
            r.opp_estimate.map(|p| p.res.to_string()).unwrap_or_default(),
            r.action.map(|a| a.id().to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
