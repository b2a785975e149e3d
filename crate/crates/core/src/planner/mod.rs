//! Sampling-based hierarchical motion planner: lattice goals around the
//! raceline, cubic-spiral trajectory generation, seven-term weighted cost
//! evaluation, lowest-cost selection, and Pure Pursuit tracking.

mod costs;
mod lattice;
mod pursuit;
mod spiral;

pub use costs::{evaluate_costs, evaluate_costs_hinted, select_index, CostConfig, CostVector};
pub use lattice::{sample_goals, LatticeGoal};
pub use pursuit::{pure_pursuit, PursuitGains};
pub use spiral::{sample_spiral, solve_spiral, SpiralCoeffs};

use crate::sim::{VehicleParams, VehicleState};
use crate::track::{OccupancyGrid, Raceline};
use crate::util::wrap_angle;
use crate::{Error, Result};

pub const GAMMA_MIN: f64 = 0.6;
pub const GAMMA_MAX: f64 = 1.0;
pub const WEIGHT_MIN: f64 = 1.0;
pub const WEIGHT_MAX: f64 = 10.0;

/// The 8-element agent parameter vector: global velocity discount γ plus the
/// seven cost weights.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AgentParams {
    pub gamma: f64,
    pub p_mc: f64,
    pub p_al: f64,
    pub p_hys: f64,
    pub p_do: f64,
    pub p_co: f64,
    pub p_v1: f64,
    pub p_v2: f64,
}

impl AgentParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(gamma: f64, p_mc: f64, p_al: f64, p_hys: f64, p_do: f64, p_co: f64, p_v1: f64, p_v2: f64) -> Result<Self> {
        let p = AgentParams { gamma, p_mc, p_al, p_hys, p_do, p_co, p_v1, p_v2 };
        p.validate()?;
        Ok(p)
    }

    /// Construct without bounds checking (tests and internal scaling only).
    #[allow(clippy::too_many_arguments)]
    pub fn new_unchecked(gamma: f64, p_mc: f64, p_al: f64, p_hys: f64, p_do: f64, p_co: f64, p_v1: f64, p_v2: f64) -> Self {
        AgentParams { gamma, p_mc, p_al, p_hys, p_do, p_co, p_v1, p_v2 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(GAMMA_MIN..=GAMMA_MAX).contains(&self.gamma) {
            return Err(Error::invalid(format!("gamma {} outside [{GAMMA_MIN}, {GAMMA_MAX}]", self.gamma)));
        }
        for (name, w) in self.weights() {
            if !(WEIGHT_MIN..=WEIGHT_MAX).contains(&w) {
                return Err(Error::invalid(format!("{name} = {w} outside [{WEIGHT_MIN}, {WEIGHT_MAX}]")));
            }
        }
        Ok(())
    }

    fn weights(&self) -> [(&'static str, f64); 7] {
        [
            ("p_mc", self.p_mc),
            ("p_al", self.p_al),
            ("p_hys", self.p_hys),
            ("p_do", self.p_do),
            ("p_co", self.p_co),
            ("p_v1", self.p_v1),
            ("p_v2", self.p_v2),
        ]
    }

    /// Canonical order: [gamma, p_mc, p_al, p_hys, p_do, p_co, p_v1, p_v2].
    pub fn to_array(&self) -> [f64; 8] {
        [self.gamma, self.p_mc, self.p_al, self.p_hys, self.p_do, self.p_co, self.p_v1, self.p_v2]
    }

    pub fn from_array(a: &[f64; 8]) -> Result<Self> {
        AgentParams::new(a[0], a[1], a[2], a[3], a[4], a[5], a[6], a[7])
    }

    /// Uniform random parameters within the box.
    pub fn sample_uniform<R: rand::Rng>(rng: &mut R) -> Self {
        let g = rng.random_range(GAMMA_MIN..=GAMMA_MAX);
        let mut w = [0.0; 7];
        for wi in &mut w {
            *wi = rng.random_range(WEIGHT_MIN..=WEIGHT_MAX);
        }
        AgentParams { gamma: g, p_mc: w[0], p_al: w[1], p_hys: w[2], p_do: w[3], p_co: w[4], p_v1: w[5], p_v2: w[6] }
    }
}

/// One sampled trajectory point.
#[derive(Debug, Clone, Copy)]
pub struct TrajPoint {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub kappa: f64,
    pub v: f64,
    pub s: f64,
}

/// A candidate (or selected) trajectory: sampled kinematic states with a
/// constant reference-speed profile.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub points: Vec<TrajPoint>,
    pub arc_length: f64,
    /// lattice cell id; usize::MAX marks the emergency-brake fallback
    pub goal_index: usize,
    pub velocity_scale: f64,
}

impl Trajectory {
    pub fn is_emergency_brake(&self) -> bool {
        self.goal_index == usize::MAX
    }
}

/// Planner tuning knobs; defaults size the lattice to the scaled-vehicle
/// class (n=7 offsets × m=3 speed scales, 3 m lookahead).
#[derive(Debug, Clone)]
pub struct PlannerConfig {
    pub n: usize,
    pub m: usize,
    pub lookahead: f64,
    pub lateral_span: f64,
    pub sample_ds: f64,
    pub spiral_tol: f64,
    pub spiral_iters: usize,
    pub vehicle: VehicleParams,
    pub cost: CostConfig,
}

impl PlannerConfig {
    pub fn with_vehicle(vehicle: VehicleParams) -> Self {
        PlannerConfig {
            n: 7,
            m: 3,
            lookahead: 3.0,
            lateral_span: 0.8,
            sample_ds: 0.15,
            spiral_tol: 1e-4,
            spiral_iters: 40,
            cost: CostConfig::from_vehicle(&vehicle),
            vehicle,
        }
    }
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig::with_vehicle(VehicleParams::default())
    }
}

/// Stateful planner instance for one agent: keeps the previous selection for
/// hysteresis, spiral warm starts per lattice cell, and a raceline station
/// hint for fast projection.
#[derive(Debug, Clone)]
pub struct Planner {
    pub cfg: PlannerConfig,
    prev_selected: Option<Trajectory>,
    warm: Vec<Option<spiral::SpiralKnots>>,
    s_hint: Option<f64>,
}

impl Planner {
    pub fn new(cfg: PlannerConfig) -> Self {
        let cells = cfg.n * cfg.m;
        Planner { cfg, prev_selected: None, warm: vec![None; cells], s_hint: None }
    }

    pub fn reset(&mut self) {
        self.prev_selected = None;
        self.warm.iter_mut().for_each(|w| *w = None);
        self.s_hint = None;
    }

    /// Current raceline station estimate (after the last plan call).
    pub fn station(&self) -> Option<f64> {
        self.s_hint
    }

    /// One planning cycle: sample the lattice, solve spirals, evaluate costs,
    /// select. Falls back to an emergency-brake trajectory when nothing is
    /// feasible.
    pub fn plan(
        &mut self,
        state: &VehicleState,
        agent: &AgentParams,
        raceline: &Raceline,
        opp: Option<&VehicleState>,
        grid: &OccupancyGrid,
    ) -> Trajectory {
        let fr = match self.s_hint {
            Some(h) => raceline.project_near(state.x, state.y, h, 6.0),
            None => raceline.project(state.x, state.y),
        };
        self.s_hint = Some(fr.s);
        let goals = sample_goals(fr.s, raceline, self.cfg.n, self.cfg.m, self.cfg.lookahead, self.cfg.lateral_span);
        let k0 = state.steer.tan() / self.cfg.vehicle.wheelbase;
        let (sin_yaw, cos_yaw) = state.yaw.sin_cos();

        let mut candidates: Vec<Trajectory> = Vec::with_capacity(goals.len());
        let mut costs: Vec<CostVector> = Vec::with_capacity(goals.len());
        for goal in &goals {
            let dx = goal.x - state.x;
            let dy = goal.y - state.y;
            let local = (
                cos_yaw * dx + sin_yaw * dy,
                -sin_yaw * dx + cos_yaw * dy,
                wrap_angle(goal.theta - state.yaw),
            );
            let dist = local.0.hypot(local.1);
            // unreachable or behind: drop the cell
            if local.0 < 0.2 * self.cfg.lookahead || dist < 0.2 * self.cfg.lookahead || dist > 3.0 * self.cfg.lookahead {
                self.warm[goal.index] = None;
                continue;
            }
            match solve_spiral(k0, local, self.cfg.spiral_iters, self.cfg.spiral_tol, self.warm[goal.index]) {
                Some((sp, knots)) => {
                    self.warm[goal.index] = Some(knots);
                    let v_target = (goal.v_ref * goal.velocity_scale * agent.gamma).clamp(0.0, self.cfg.vehicle.v_max);
                    let points: Vec<TrajPoint> = sample_spiral(&sp, (state.x, state.y, state.yaw), self.cfg.sample_ds)
                        .into_iter()
                        .map(|(x, y, theta, kappa, s)| TrajPoint { x, y, theta, kappa, v: v_target, s })
                        .collect();
                    let traj = Trajectory { points, arc_length: sp.length, goal_index: goal.index, velocity_scale: goal.velocity_scale };
                    let cost = evaluate_costs_hinted(&traj, self.prev_selected.as_ref(), raceline, opp, grid, &self.cfg.cost, Some(fr.s));
                    candidates.push(traj);
                    costs.push(cost);
                }
                None => {
                    self.warm[goal.index] = None;
                }
            }
        }

        let chosen = match select_index(agent, &costs) {
            Some(i) => candidates.swap_remove(i),
            None => emergency_brake(state, &self.cfg.vehicle, self.cfg.sample_ds),
        };
        self.prev_selected = if chosen.is_emergency_brake() { None } else { Some(chosen.clone()) };
        chosen
    }
}

/// Straight-line maximal-deceleration fallback trajectory from the current
/// pose.
pub fn emergency_brake(state: &VehicleState, vehicle: &VehicleParams, ds: f64) -> Trajectory {
    let v0 = state.v.max(0.0);
    let stop_dist = (v0 * v0 / (2.0 * vehicle.max_accel)).max(0.5);
    let n = ((stop_dist / ds).ceil() as usize).max(2);
    let (sin_yaw, cos_yaw) = state.yaw.sin_cos();
    let points = (0..=n)
        .map(|i| {
            let s = stop_dist * i as f64 / n as f64;
            let v = (v0 * v0 - 2.0 * vehicle.max_accel * s).max(0.0).sqrt();
            TrajPoint { x: state.x + cos_yaw * s, y: state.y + sin_yaw * s, theta: state.yaw, kappa: 0.0, v, s }
        })
        .collect();
    Trajectory { points, arc_length: stop_dist, goal_index: usize::MAX, velocity_scale: 0.0 }
}
