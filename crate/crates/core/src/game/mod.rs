//! The extensive-form game in objective space: every segment both cars take a
//! simultaneous axis move on their (agg, res) operating point, snap to the
//! nearest near-optimal prototype, adopt its planner weights, and race on.
//! Exhaustive sequence-vs-sequence play fills a terminal utility table from
//! which exact counterfactual regrets and a regret dataset are computed.

mod cfr;
mod dataset;
mod encode;

pub use cfr::{best_action, exact_cfr, regret_match, CfrRegrets, INVALID_CELL_LIMIT};
pub use dataset::{build_dataset, emit_pair_samples, read_dataset, write_dataset, write_utility_table, DatasetBuild, RegretSample};
pub use encode::{encode_infoset, ACTION_SLOTS, FEATURE_LEN, POINT_SLOTS};

use crate::evo::Prototype;
use crate::objectives::{run_segment, EngineConfig, ObjectivePoint, PlannerDriver, Scenario};
use crate::planner::{AgentParams, Planner, PlannerConfig};
use crate::sim::{SimWorld, VehicleParams};
use crate::track::Track;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Number of discrete objective-space moves available at each turn.
pub const N_ACTIONS: usize = 4;

/// One axis move on the objective point, by a fixed distance per turn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    AggUp,
    AggDown,
    ResUp,
    ResDown,
}

impl Action {
    pub const ALL: [Action; N_ACTIONS] = [Action::AggUp, Action::AggDown, Action::ResUp, Action::ResDown];

    pub fn id(self) -> usize {
        match self {
            Action::AggUp => 0,
            Action::AggDown => 1,
            Action::ResUp => 2,
            Action::ResDown => 3,
        }
    }

    pub fn from_id(id: usize) -> Result<Action> {
        Action::ALL.get(id).copied().ok_or_else(|| Error::invalid(format!("action id {id} out of range 0..{N_ACTIONS}")))
    }

    pub fn inverse(self) -> Action {
        match self {
            Action::AggUp => Action::AggDown,
            Action::AggDown => Action::AggUp,
            Action::ResUp => Action::ResDown,
            Action::ResDown => Action::ResUp,
        }
    }
}

/// Move the objective point one fixed step along one axis.
pub fn apply_action(point: &ObjectivePoint, a: Action, d_move: f64) -> ObjectivePoint {
    debug_assert!(point.is_finite());
    match a {
        Action::AggUp => ObjectivePoint::new(point.agg + d_move, point.res),
        Action::AggDown => ObjectivePoint::new(point.agg - d_move, point.res),
        Action::ResUp => ObjectivePoint::new(point.agg, point.res + d_move),
        Action::ResDown => ObjectivePoint::new(point.agg, point.res - d_move),
    }
}

/// Full record of one game in progress: both players' objective-point
/// trajectories plus both action records.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    pub ego_points: Vec<ObjectivePoint>,
    pub opp_points: Vec<ObjectivePoint>,
    pub ego_actions: Vec<Action>,
    pub opp_actions: Vec<Action>,
}

impl History {
    pub fn validate(&self) -> Result<()> {
        if self.ego_points.len() != self.ego_actions.len() + 1 || self.opp_points.len() != self.opp_actions.len() + 1 {
            return Err(Error::invalid("history must hold one more objective point than actions per player"));
        }
        Ok(())
    }

    /// What the ego can observe: the opponent's actions are hidden.
    pub fn infoset(&self) -> Infoset {
        Infoset {
            ego_points: self.ego_points.clone(),
            opp_points: self.opp_points.clone(),
            ego_actions: self.ego_actions.clone(),
        }
    }
}

/// A history with the opponent's action record dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct Infoset {
    pub ego_points: Vec<ObjectivePoint>,
    pub opp_points: Vec<ObjectivePoint>,
    pub ego_actions: Vec<Action>,
}

/// Game shape and rollout settings.
#[derive(Debug, Clone)]
pub struct GameConfig {
    pub max_moves: usize,
    pub d_move: f64,
    pub segment_s: f64,
    pub engine: EngineConfig,
}

impl Default for GameConfig {
    fn default() -> Self {
        // Terminal utility only needs progress bookkeeping, so the per-cycle
        // iTTC scans are skipped.
        GameConfig { max_moves: 3, d_move: 1.0, segment_s: 8.0, engine: EngineConfig { record_ttc: false, ..EngineConfig::default() } }
    }
}

/// Terminal utilities for every (ego sequence, opponent sequence) pairing,
/// stored from the ego's point of view; the game is zero-sum so the
/// opponent's utility is the negation. Cells from failed rollouts carry a
/// validity flag instead of a fabricated utility.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityTable {
    pub n_actions: usize,
    pub max_moves: usize,
    pub n_opp_seq: usize,
    utilities: Vec<f64>,
    valid: Vec<bool>,
}

impl UtilityTable {
    pub fn new(n_actions: usize, max_moves: usize, n_opp_seq: usize) -> Result<UtilityTable> {
        if n_actions == 0 || max_moves == 0 || n_opp_seq == 0 {
            return Err(Error::invalid("utility table needs at least one action, move, and opponent sequence"));
        }
        let n_ego = n_actions.pow(max_moves as u32);
        Ok(UtilityTable { n_actions, max_moves, n_opp_seq, utilities: vec![0.0; n_ego * n_opp_seq], valid: vec![false; n_ego * n_opp_seq] })
    }

    /// Both players draw from the same action set and move count.
    pub fn square(n_actions: usize, max_moves: usize) -> Result<UtilityTable> {
        UtilityTable::new(n_actions, max_moves, n_actions.pow(max_moves as u32))
    }

    pub fn n_ego_seq(&self) -> usize {
        self.n_actions.pow(self.max_moves as u32)
    }

    fn idx(&self, ego_seq: usize, opp_seq: usize) -> usize {
        debug_assert!(ego_seq < self.n_ego_seq() && opp_seq < self.n_opp_seq);
        ego_seq * self.n_opp_seq + opp_seq
    }

    pub fn set(&mut self, ego_seq: usize, opp_seq: usize, utility: f64, valid: bool) {
        let i = self.idx(ego_seq, opp_seq);
        self.utilities[i] = utility;
        self.valid[i] = valid;
    }

    /// Ego-view utility, `None` for invalid cells.
    pub fn utility(&self, ego_seq: usize, opp_seq: usize) -> Option<f64> {
        let i = self.idx(ego_seq, opp_seq);
        self.valid[i].then_some(self.utilities[i])
    }

    /// Zero-sum bookkeeping: the opponent gets the negation.
    pub fn opp_utility(&self, ego_seq: usize, opp_seq: usize) -> Option<f64> {
        self.utility(ego_seq, opp_seq).map(|u| -u)
    }

    pub fn is_valid(&self, ego_seq: usize, opp_seq: usize) -> bool {
        self.valid[self.idx(ego_seq, opp_seq)]
    }

    pub fn invalid_fraction(&self) -> f64 {
        let bad = self.valid.iter().filter(|&&v| !v).count();
        bad as f64 / self.valid.len() as f64
    }
}

/// Sequence index with the first action as the most significant digit, so all
/// sequences sharing a prefix occupy one contiguous index block.
pub fn seq_to_index(action_ids: &[usize], n_actions: usize) -> usize {
    action_ids.iter().fold(0, |acc, &a| {
        debug_assert!(a < n_actions);
        acc * n_actions + a
    })
}

/// Inverse of [`seq_to_index`] for a fixed sequence length.
pub fn index_to_seq(mut index: usize, n_actions: usize, moves: usize) -> Vec<usize> {
    let mut ids = vec![0; moves];
    for slot in (0..moves).rev() {
        ids[slot] = index % n_actions;
        index /= n_actions;
    }
    debug_assert_eq!(index, 0, "sequence index out of range");
    ids
}

/// Index of the prototype nearest in Euclidean objective distance; exact
/// distance ties resolve to the lowest index.
pub fn nearest_prototype(point: &ObjectivePoint, protos: &[Prototype]) -> usize {
    assert!(!protos.is_empty(), "prototype snap set must be non-empty");
    let mut best = 0;
    let mut best_d = point.distance(&protos[0].point);
    for (i, p) in protos.iter().enumerate().skip(1) {
        let d = point.distance(&p.point);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

/// Objective-point trajectory induced by an action sequence: each move is
/// applied and then snapped onto the prototype set. Returns the point
/// trajectory (one longer than the sequence) and the chosen prototype index
/// per move.
pub fn snapped_trajectory(start: &ObjectivePoint, seq: &[Action], protos: &[Prototype], d_move: f64) -> (Vec<ObjectivePoint>, Vec<usize>) {
    let mut points = Vec::with_capacity(seq.len() + 1);
    let mut chosen = Vec::with_capacity(seq.len());
    points.push(*start);
    for &a in seq {
        let moved = apply_action(points.last().unwrap(), a, d_move);
        let idx = nearest_prototype(&moved, protos);
        points.push(protos[idx].point);
        chosen.push(idx);
    }
    (points, chosen)
}

fn game_world(scenario: &Scenario, track: &Track, ego_params: &AgentParams, opp_params: &AgentParams) -> (SimWorld, PlannerDriver, PlannerDriver) {
    let vehicle = VehicleParams::default();
    let world = SimWorld::new(track.grid.clone(), scenario.ego.to_state(), scenario.opp.to_state(), vehicle, 0.01, 0);
    let ego = PlannerDriver::new(Planner::new(PlannerConfig::with_vehicle(vehicle)), *ego_params, track.raceline.clone());
    let opp = PlannerDriver::new(Planner::new(PlannerConfig::with_vehicle(vehicle)), *opp_params, track.raceline.clone());
    (world, ego, opp)
}

/// Play a single full game: `max_moves + 1` consecutive segments on one
/// persistent world; before each segment after the first, both players apply
/// their next action in objective space, snap onto `protos`, and adopt the
/// snapped prototype's planner weights. Returns the ego's terminal signed
/// curvilinear lead (positive iff the ego finishes ahead); an aborted rollout
/// is an error and the corresponding game is invalid.
pub fn play_out_game(
    ego_start: (&AgentParams, &ObjectivePoint),
    opp_start: (&AgentParams, &ObjectivePoint),
    ego_seq: &[Action],
    opp_seq: &[Action],
    scenario: &Scenario,
    track: &Track,
    protos: &[Prototype],
    cfg: &GameConfig,
) -> Result<f64> {
    if ego_seq.len() != cfg.max_moves || opp_seq.len() != cfg.max_moves {
        return Err(Error::invalid(format!("both action sequences must have exactly {} moves", cfg.max_moves)));
    }
    if protos.is_empty() {
        return Err(Error::invalid("prototype snap set must be non-empty"));
    }
    let (mut world, mut ego, mut opp) = game_world(scenario, track, ego_start.0, opp_start.0);
    let mut ego_pt = *ego_start.1;
    let mut opp_pt = *opp_start.1;
    let mut lead = 0.0;
    for k in 0..=cfg.max_moves {
        if k > 0 {
            let ei = nearest_prototype(&apply_action(&ego_pt, ego_seq[k - 1], cfg.d_move), protos);
            ego_pt = protos[ei].point;
            ego.params = protos[ei].params;
            let oi = nearest_prototype(&apply_action(&opp_pt, opp_seq[k - 1], cfg.d_move), protos);
            opp_pt = protos[oi].point;
            opp.params = protos[oi].params;
        }
        let out = run_segment(&mut world, &mut ego, &mut opp, &track.raceline, cfg.segment_s, &cfg.engine);
        if out.aborted {
            return Err(Error::numerics(format!("game rollout aborted in segment {k}: vehicle dynamics diverged")));
        }
        if k == 0 {
            lead = out.lead_start;
        }
        lead += out.ego_progress - out.opp_progress;
    }
    Ok(lead)
}

/// Fill the whole utility table for one prototype pairing. Equivalent to
/// calling [`play_out_game`] on every sequence combination (bit-identical
/// utilities): games sharing an action prefix share their world evolution up
/// to the divergence point, so the shared segments are simulated once and the
/// world is forked at each decision node.
pub fn fill_utility_table(
    ego_start: (&AgentParams, &ObjectivePoint),
    opp_start: (&AgentParams, &ObjectivePoint),
    scenario: &Scenario,
    track: &Track,
    protos: &[Prototype],
    cfg: &GameConfig,
) -> Result<UtilityTable> {
    if protos.is_empty() {
        return Err(Error::invalid("prototype snap set must be non-empty"));
    }
    let mut table = UtilityTable::square(N_ACTIONS, cfg.max_moves)?;
    let (world, ego, opp) = game_world(scenario, track, ego_start.0, opp_start.0);
    descend(world, ego, opp, *ego_start.1, *opp_start.1, 0.0, 0, 0, 0, track, protos, cfg, &mut table);
    Ok(table)
}

/// Mark every table cell under the given prefix pair invalid.
fn invalidate_subtree(table: &mut UtilityTable, depth: usize, ego_prefix: usize, opp_prefix: usize) {
    let span = table.n_actions.pow((table.max_moves - depth) as u32);
    for e in ego_prefix * span..(ego_prefix + 1) * span {
        for o in opp_prefix * span..(opp_prefix + 1) * span {
            table.set(e, o, 0.0, false);
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn descend(
    mut world: SimWorld,
    mut ego: PlannerDriver,
    mut opp: PlannerDriver,
    ego_pt: ObjectivePoint,
    opp_pt: ObjectivePoint,
    lead_in: f64,
    depth: usize,
    ego_prefix: usize,
    opp_prefix: usize,
    track: &Track,
    protos: &[Prototype],
    cfg: &GameConfig,
    table: &mut UtilityTable,
) {
    let out = run_segment(&mut world, &mut ego, &mut opp, &track.raceline, cfg.segment_s, &cfg.engine);
    let base = if depth == 0 { out.lead_start } else { lead_in };
    let lead = base + out.ego_progress - out.opp_progress;
    if out.aborted {
        invalidate_subtree(table, depth, ego_prefix, opp_prefix);
        return;
    }
    if depth == cfg.max_moves {
        table.set(ego_prefix, opp_prefix, lead, true);
        return;
    }
    for ea in Action::ALL {
        let ei = nearest_prototype(&apply_action(&ego_pt, ea, cfg.d_move), protos);
        for oa in Action::ALL {
            let oi = nearest_prototype(&apply_action(&opp_pt, oa, cfg.d_move), protos);
            let mut ego2 = ego.clone();
            ego2.params = protos[ei].params;
            let mut opp2 = opp.clone();
            opp2.params = protos[oi].params;
            descend(
                world.clone(),
                ego2,
                opp2,
                protos[ei].point,
                protos[oi].point,
                lead,
                depth + 1,
                ego_prefix * N_ACTIONS + ea.id(),
                opp_prefix * N_ACTIONS + oa.id(),
                track,
                protos,
                cfg,
                table,
            );
        }
    }
}
