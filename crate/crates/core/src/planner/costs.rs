use super::{AgentParams, TrajPoint, Trajectory};
use crate::sim::VehicleState;
use crate::track::{OccupancyGrid, Raceline};

/// The seven planner cost terms. Infinite in every component when the
/// trajectory collides with the environment.
#[derive(Debug, Clone, Copy)]
pub struct CostVector {
    pub c_mc: f64,
    pub c_al: f64,
    pub c_hys: f64,
    pub c_do: f64,
    pub c_co: f64,
    pub c_v1: f64,
    pub c_v2: f64,
}

impl CostVector {
    pub fn infinite() -> Self {
        CostVector {
            c_mc: f64::INFINITY,
            c_al: f64::INFINITY,
            c_hys: f64::INFINITY,
            c_do: f64::INFINITY,
            c_co: f64::INFINITY,
            c_v1: f64::INFINITY,
            c_v2: f64::INFINITY,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.c_mc.is_finite()
            && self.c_al.is_finite()
            && self.c_hys.is_finite()
            && self.c_do.is_finite()
            && self.c_co.is_finite()
            && self.c_v1.is_finite()
            && self.c_v2.is_finite()
    }

    /// Weighted sum with an agent's seven cost weights.
    pub fn weighted_total(&self, p: &AgentParams) -> f64 {
        p.p_mc * self.c_mc
            + p.p_al * self.c_al
            + p.p_hys * self.c_hys
            + p.p_do * self.c_do
            + p.p_co * self.c_co
            + p.p_v1 * self.c_v1
            + p.p_v2 * self.c_v2
    }
}

/// Fixed context for cost evaluation (values the cost formulas normalize by).
#[derive(Debug, Clone, Copy)]
pub struct CostConfig {
    /// vehicle top speed (normalizes c_v1, c_v2)
    pub v_max: f64,
    /// vehicle footprint width; clearance threshold is width/2
    pub width: f64,
    /// opponent-proximity decay length in c_co
    pub d_scale: f64,
    /// curvature normalizer in c_v2 (max feasible curvature)
    pub kappa_ref: f64,
    /// floor speed when converting arc spacing to time in c_co
    pub min_speed: f64,
}

impl CostConfig {
    pub fn from_vehicle(p: &crate::sim::VehicleParams) -> Self {
        CostConfig {
            v_max: p.v_max,
            width: p.width,
            d_scale: 1.0,
            kappa_ref: p.max_steer.tan() / p.wheelbase,
            min_speed: 0.1,
        }
    }
}

/// Evaluate the seven cost terms of one candidate trajectory.
///
/// - c_mc: max |κ|
/// - c_al: arc length
/// - c_hys: mean distance to the previously selected trajectory at matched s
/// - c_do: mean |lateral offset| from the raceline
/// - c_co: Σ over time samples of max(0, closing speed) · exp(−dist/d_scale),
///   with the opponent extrapolated at constant velocity
/// - c_v1: (v_max − mean v)/v_max
/// - c_v2: mean(v²·|κ|) / (v_max²·κ_ref)
///
/// Any sample point with map clearance below width/2 makes every component
/// infinite.
pub fn evaluate_costs(
    traj: &Trajectory,
    prev_selected: Option<&Trajectory>,
    raceline: &Raceline,
    opp: Option<&VehicleState>,
    grid: &OccupancyGrid,
    cfg: &CostConfig,
) -> CostVector {
    evaluate_costs_hinted(traj, prev_selected, raceline, opp, grid, cfg, None)
}

/// `evaluate_costs` with an optional raceline station hint near the
/// trajectory start, which turns the per-point raceline projections into a
/// windowed walk instead of full scans.
pub fn evaluate_costs_hinted(
    traj: &Trajectory,
    prev_selected: Option<&Trajectory>,
    raceline: &Raceline,
    opp: Option<&VehicleState>,
    grid: &OccupancyGrid,
    cfg: &CostConfig,
    s_hint: Option<f64>,
) -> CostVector {
    let pts = &traj.points;
    if pts.is_empty() {
        return CostVector::infinite();
    }
    let clearance = cfg.width / 2.0;
    for p in pts {
        if !grid.in_bounds(p.x, p.y) || grid.distance_at(p.x, p.y) < clearance {
            return CostVector::infinite();
        }
    }

    let n = pts.len() as f64;
    let mut c_mc = 0.0f64;
    let mut sum_v = 0.0;
    let mut sum_v2k = 0.0;
    let mut sum_do = 0.0;
    // projection hint: start near the trajectory head and walk forward
    let mut s_hint = match s_hint {
        Some(s) => s,
        None => raceline.project(pts[0].x, pts[0].y).s,
    };
    for p in pts {
        c_mc = c_mc.max(p.kappa.abs());
        sum_v += p.v;
        sum_v2k += p.v * p.v * p.kappa.abs();
        let fr = raceline.project_near(p.x, p.y, s_hint, 5.0);
        sum_do += fr.d.abs();
        s_hint = fr.s;
    }
    let c_al = traj.arc_length;
    let c_do = sum_do / n;
    let c_v1 = (cfg.v_max - sum_v / n) / cfg.v_max;
    let c_v2 = (sum_v2k / n) / (cfg.v_max * cfg.v_max * cfg.kappa_ref);

    // hysteresis: compare to the previous selection at matched arc positions
    let c_hys = match prev_selected {
        None => 0.0,
        Some(prev) if prev.points.is_empty() => 0.0,
        Some(prev) => {
            let mut sum = 0.0;
            for p in pts {
                let q = prev.point_at_arc(p.s.min(prev.arc_length));
                sum += (p.x - q.x).hypot(p.y - q.y);
            }
            sum / n
        }
    };

    // opponent proximity with constant-velocity prediction
    let c_co = match opp {
        None => 0.0,
        Some(o) => {
            let (osin, ocos) = o.yaw.sin_cos();
            let (ovx, ovy) = (o.v * ocos, o.v * osin);
            let mut t = 0.0;
            let mut sum = 0.0;
            for w in pts.windows(2) {
                let (p0, p1) = (&w[0], &w[1]);
                let v_avg = 0.5 * (p0.v + p1.v);
                t += (p1.s - p0.s) / v_avg.max(cfg.min_speed);
                let (px, py) = (o.x + ovx * t, o.y + ovy * t);
                let (dx, dy) = (px - p1.x, py - p1.y);
                let dist = dx.hypot(dy);
                if dist > 1e-9 {
                    let (esin, ecos) = p1.theta.sin_cos();
                    let (evx, evy) = (p1.v * ecos, p1.v * esin);
                    let closing = ((evx - ovx) * dx + (evy - ovy) * dy) / dist;
                    sum += closing.max(0.0) * (-dist / cfg.d_scale).exp();
                } else {
                    // on top of the predicted opponent: max proximity weight
                    sum += p1.v.max(0.0);
                }
            }
            sum
        }
    };

    CostVector { c_mc, c_al, c_hys, c_do, c_co, c_v1, c_v2 }
}

/// Index of the weighted-sum argmin among finite-cost candidates; ties break
/// toward the lower index. None when every candidate is infinite.
pub fn select_index(params: &AgentParams, costs: &[CostVector]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in costs.iter().enumerate() {
        if !c.is_finite() {
            continue;
        }
        let total = c.weighted_total(params);
        match best {
            Some((_, b)) if total >= b => {}
            _ => best = Some((i, total)),
        }
    }
    best.map(|(i, _)| i)
}

impl Trajectory {
    /// Interpolated point at arc position `s` (clamped to the ends).
    pub fn point_at_arc(&self, s: f64) -> TrajPoint {
        let pts = &self.points;
        if s <= pts[0].s {
            return pts[0];
        }
        if s >= pts[pts.len() - 1].s {
            return pts[pts.len() - 1];
        }
        let mut lo = 0;
        let mut hi = pts.len() - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if pts[mid].s <= s {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (a, b) = (&pts[lo], &pts[hi]);
        let t = (s - a.s) / (b.s - a.s);
        TrajPoint {
            x: a.x + (b.x - a.x) * t,
            y: a.y + (b.y - a.y) * t,
            theta: a.theta + crate::util::wrap_angle(b.theta - a.theta) * t,
            kappa: a.kappa + (b.kappa - a.kappa) * t,
            v: a.v + (b.v - a.v) * t,
            s,
        }
    }
}
