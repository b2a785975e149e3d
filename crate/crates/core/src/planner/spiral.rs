use crate::util::wrap_angle;
use nalgebra::{Matrix4, Vector4};

/// Cubic curvature spiral: κ(s) = a0 + a1·s + a2·s² + a3·s³ over s ∈ [0, length].
#[derive(Debug, Clone, Copy)]
pub struct SpiralCoeffs {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub length: f64,
}

/// Shooting unknowns: interior curvature knots at L/3, 2L/3, L plus the
/// length. Kept public to the module for warm starting.
pub(crate) type SpiralKnots = [f64; 4];

const SIMPSON_INTERVALS: usize = 32;
/// Bound on knot curvatures during iteration (well above the vehicle's
/// physical curvature limit, loose enough not to constrain real solutions).
const KNOT_LIMIT: f64 = 8.0;

impl SpiralCoeffs {
    /// Coefficients of the cubic through (0, k0), (L/3, p1), (2L/3, p2), (L, p3).
    fn from_knots(k0: f64, knots: &SpiralKnots) -> Self {
        let [p1, p2, p3, length] = *knots;
        let l = length;
        SpiralCoeffs {
            a0: k0,
            a1: -(11.0 * k0 - 18.0 * p1 + 9.0 * p2 - 2.0 * p3) / (2.0 * l),
            a2: (18.0 * k0 - 45.0 * p1 + 36.0 * p2 - 9.0 * p3) / (2.0 * l * l),
            a3: -(9.0 * k0 - 27.0 * p1 + 27.0 * p2 - 9.0 * p3) / (2.0 * l * l * l),
            length,
        }
    }

    #[inline]
    pub fn kappa(&self, s: f64) -> f64 {
        self.a0 + s * (self.a1 + s * (self.a2 + s * self.a3))
    }

    /// Heading change from 0 at arc position s (closed form integral of κ).
    #[inline]
    pub fn theta(&self, s: f64) -> f64 {
        s * (self.a0 + s * (self.a1 / 2.0 + s * (self.a2 / 3.0 + s * self.a3 / 4.0)))
    }

    /// Endpoint (x, y, θ) in the start frame, by composite Simpson quadrature.
    pub fn endpoint(&self) -> (f64, f64, f64) {
        let n = SIMPSON_INTERVALS;
        let h = self.length / n as f64;
        let mut sx = 0.0;
        let mut sy = 0.0;
        for i in 0..=n {
            let s = h * i as f64;
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            let (sin_t, cos_t) = self.theta(s).sin_cos();
            sx += w * cos_t;
            sy += w * sin_t;
        }
        (sx * h / 3.0, sy * h / 3.0, self.theta(self.length))
    }
}

/// Solve the two-point boundary-value problem: find a cubic spiral from the
/// origin (heading 0, curvature `k0`) to `goal` = (x, y, θ) with terminal
/// curvature 0. Newton shooting on (knots, length) with a central
/// finite-difference Jacobian. Returns None when it fails to converge —
/// callers drop the candidate.
pub fn solve_spiral(k0: f64, goal: (f64, f64, f64), max_iters: usize, tol: f64, warm: Option<SpiralKnots>) -> Option<(SpiralCoeffs, SpiralKnots)> {
    let d = (goal.0 * goal.0 + goal.1 * goal.1).sqrt();
    if d < 1e-6 {
        return None;
    }
    let bearing = goal.1.atan2(goal.0);
    let mut u: SpiralKnots = warm.unwrap_or([
        k0 * 2.0 / 3.0,
        k0 / 3.0,
        0.0,
        d * (1.0 + 0.25 * (goal.2 * goal.2 + 2.0 * bearing * bearing)),
    ]);
    u[3] = u[3].clamp(0.25 * d, 5.0 * d);

    let residual = |u: &SpiralKnots| -> Vector4<f64> {
        let sp = SpiralCoeffs::from_knots(k0, u);
        let (x, y, th) = sp.endpoint();
        Vector4::new(x - goal.0, y - goal.1, wrap_angle(th - goal.2), u[2])
    };

    let mut r = residual(&u);
    for _ in 0..max_iters {
        if r[0].hypot(r[1]) < tol && r[2].abs() < tol && r[3].abs() < tol {
            let sp = SpiralCoeffs::from_knots(k0, &u);
            if sp.length.is_finite() && sp.length > 0.0 {
                return Some((sp, u));
            }
            return None;
        }
        // central-difference Jacobian
        let mut j = Matrix4::<f64>::zeros();
        for col in 0..4 {
            let h = if col == 3 { 1e-6 * u[3].abs().max(1.0) } else { 1e-6 };
            let mut up = u;
            let mut um = u;
            up[col] += h;
            um[col] -= h;
            if col == 3 {
                up[3] = up[3].max(0.2 * d);
                um[3] = um[3].max(0.2 * d);
            }
            let rp = residual(&up);
            let rm = residual(&um);
            let denom = up[col] - um[col];
            for row in 0..4 {
                j[(row, col)] = (rp[row] - rm[row]) / denom;
            }
        }
        let step = j.lu().solve(&(-r))?;
        // damped update: halve until the residual shrinks (or give up damping)
        let norm0 = r.norm();
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..5 {
            let mut cand = u;
            for i in 0..4 {
                cand[i] += lambda * step[i];
            }
            cand[0] = cand[0].clamp(-KNOT_LIMIT, KNOT_LIMIT);
            cand[1] = cand[1].clamp(-KNOT_LIMIT, KNOT_LIMIT);
            cand[2] = cand[2].clamp(-KNOT_LIMIT, KNOT_LIMIT);
            cand[3] = cand[3].clamp(0.25 * d, 5.0 * d);
            let rc = residual(&cand);
            if rc.norm() < norm0 || lambda < 0.2 {
                accepted = Some((cand, rc));
                break;
            }
            lambda /= 2.0;
        }
        let (cand, rc) = accepted?;
        u = cand;
        r = rc;
        if !r.iter().all(|v| v.is_finite()) {
            return None;
        }
    }
    // final convergence check after the loop
    if r[0].hypot(r[1]) < tol && r[2].abs() < tol && r[3].abs() < tol {
        let sp = SpiralCoeffs::from_knots(k0, &u);
        return Some((sp, u));
    }
    None
}

/// Sample a solved spiral into world-frame points at spacing `ds` (the final
/// point lands exactly on the arc end). Returns (x, y, theta, kappa, s).
pub fn sample_spiral(sp: &SpiralCoeffs, start: (f64, f64, f64), ds: f64) -> Vec<(f64, f64, f64, f64, f64)> {
    let n = ((sp.length / ds).ceil() as usize).max(2);
    let h = sp.length / n as f64;
    let (sin0, cos0) = start.2.sin_cos();
    let mut out = Vec::with_capacity(n + 1);
    let mut x = 0.0;
    let mut y = 0.0;
    out.push((start.0, start.1, wrap_angle(start.2 + sp.theta(0.0)), sp.kappa(0.0), 0.0));
    for i in 0..n {
        let s0 = h * i as f64;
        let s1 = s0 + h;
        let sm = 0.5 * (s0 + s1);
        // per-interval Simpson increment
        let (f0s, f0c) = sp.theta(s0).sin_cos();
        let (fms, fmc) = sp.theta(sm).sin_cos();
        let (f1s, f1c) = sp.theta(s1).sin_cos();
        x += h / 6.0 * (f0c + 4.0 * fmc + f1c);
        y += h / 6.0 * (f0s + 4.0 * fms + f1s);
        let th = sp.theta(s1);
        out.push((
            start.0 + cos0 * x - sin0 * y,
            start.1 + sin0 * x + cos0 * y,
            wrap_angle(start.2 + th),
            sp.kappa(s1),
            s1,
        ));
    }
    out
}
