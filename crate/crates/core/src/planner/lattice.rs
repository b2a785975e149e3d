use crate::track::Raceline;
use crate::util::linspace;

/// One lattice goal: a pose on/around the raceline ahead of the vehicle, the
/// raceline reference speed there, and the velocity scale of its column.
#[derive(Debug, Clone, Copy)]
pub struct LatticeGoal {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    /// raceline reference speed at the goal station
    pub v_ref: f64,
    /// velocity scaling factor of this goal (multiplied by gamma later)
    pub velocity_scale: f64,
    /// flat goal id: offset-major, scale-minor
    pub index: usize,
}

/// Sample the n×m goal lattice: n lateral offsets spanning
/// [-lateral_span, +lateral_span] at the raceline point `lookahead` meters
/// ahead of station `s_ego`, crossed with m velocity scales in [0.5, 1.0].
/// With n=1 the single offset is 0; with m=1 the single scale is 1.
pub fn sample_goals(s_ego: f64, raceline: &Raceline, n: usize, m: usize, lookahead: f64, lateral_span: f64) -> Vec<LatticeGoal> {
    assert!(n >= 1 && m >= 1, "lattice needs n, m >= 1");
    let s_goal = raceline.wrap_s(s_ego + lookahead);
    let base = raceline.point_at(s_goal);
    let (nx, ny) = raceline.normal_at(s_goal);
    let offsets = if n == 1 { vec![0.0] } else { linspace(-lateral_span, lateral_span, n) };
    let scales = if m == 1 { vec![1.0] } else { linspace(0.5, 1.0, m) };
    let mut goals = Vec::with_capacity(n * m);
    for (i, off) in offsets.iter().enumerate() {
        for (j, sc) in scales.iter().enumerate() {
            goals.push(LatticeGoal {
                x: base.x + off * nx,
                y: base.y + off * ny,
                theta: base.theta,
                v_ref: base.v,
                velocity_scale: *sc,
                index: i * m + j,
            });
        }
    }
    goals
}
