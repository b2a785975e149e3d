use crate::util::{hypot2, wrap_angle};
use crate::{Error, Result};

/// One raceline sample: position, tangent heading, and reference speed.
#[derive(Debug, Clone, Copy)]
pub struct Waypoint {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
}

/// Curvilinear pose relative to the raceline: arc position `s` and signed
/// lateral offset `d` (positive on the left of the local tangent).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrenetPose {
    pub s: f64,
    pub d: f64,
}

/// Piecewise-linear global raceline with cumulative arc length.
#[derive(Debug, Clone)]
pub struct Raceline {
    pub waypoints: Vec<Waypoint>,
    pub cum_s: Vec<f64>,
    pub total_length: f64,
    pub closed: bool,
}

impl Raceline {
    pub fn from_waypoints(waypoints: Vec<Waypoint>, closed: bool) -> Result<Self> {
        if waypoints.len() < 2 {
            return Err(Error::invalid("raceline needs at least 2 waypoints"));
        }
        for (i, w) in waypoints.iter().enumerate() {
            if !(w.x.is_finite() && w.y.is_finite() && w.theta.is_finite() && w.v.is_finite()) {
                return Err(Error::parse(format!("waypoint {i}: non-finite value")));
            }
            if w.v < 0.0 {
                return Err(Error::parse(format!("waypoint {i}: negative speed")));
            }
        }
        let mut cum_s = Vec::with_capacity(waypoints.len());
        cum_s.push(0.0);
        for i in 1..waypoints.len() {
            let seg = hypot2(waypoints[i].x - waypoints[i - 1].x, waypoints[i].y - waypoints[i - 1].y);
            if seg <= 0.0 {
                return Err(Error::invalid(format!("zero-length segment before waypoint {i}")));
            }
            cum_s.push(cum_s[i - 1] + seg);
        }
        let mut total_length = *cum_s.last().unwrap();
        if closed {
            let first = waypoints[0];
            let last = *waypoints.last().unwrap();
            let closing = hypot2(first.x - last.x, first.y - last.y);
            if closing <= 0.0 {
                return Err(Error::invalid("closed raceline repeats its first waypoint at the end"));
            }
            total_length += closing;
        }
        Ok(Raceline { waypoints, cum_s, total_length, closed })
    }

    /// Number of line segments (includes the closing segment when closed).
    pub fn segment_count(&self) -> usize {
        if self.closed {
            self.waypoints.len()
        } else {
            self.waypoints.len() - 1
        }
    }

    /// Endpoints of segment `i`.
    #[inline]
    fn segment(&self, i: usize) -> (&Waypoint, &Waypoint) {
        let n = self.waypoints.len();
        if i + 1 < n {
            (&self.waypoints[i], &self.waypoints[i + 1])
        } else {
            (&self.waypoints[n - 1], &self.waypoints[0])
        }
    }

    #[inline]
    fn segment_length(&self, i: usize) -> f64 {
        if i + 1 < self.waypoints.len() {
            self.cum_s[i + 1] - self.cum_s[i]
        } else {
            self.total_length - self.cum_s[i]
        }
    }

    /// Fold an arc position into [0, total_length) on closed tracks; clamp on
    /// open ones.
    #[inline]
    pub fn wrap_s(&self, s: f64) -> f64 {
        if self.closed {
            s.rem_euclid(self.total_length)
        } else {
            s.clamp(0.0, self.total_length)
        }
    }

    /// Index of the segment containing arc position `s` (wrapped), plus the
    /// offset into it.
    fn locate(&self, s: f64) -> (usize, f64) {
        let s = self.wrap_s(s);
        // binary search over cum_s for the last waypoint at or before s
        let i = match self.cum_s.binary_search_by(|c| c.partial_cmp(&s).unwrap()) {
            Ok(i) => i,
            Err(ins) => ins.saturating_sub(1),
        };
        let i = i.min(self.segment_count() - 1);
        (i, s - self.cum_s[i])
    }

    /// Interpolated pose + reference speed at arc position `s`. Heading is
    /// the segment direction (consistent with the projection geometry).
    pub fn point_at(&self, s: f64) -> Waypoint {
        let (i, ds) = self.locate(s);
        let (a, b) = self.segment(i);
        let len = self.segment_length(i);
        let t = (ds / len).clamp(0.0, 1.0);
        let theta = (b.y - a.y).atan2(b.x - a.x);
        Waypoint {
            x: a.x + (b.x - a.x) * t,
            y: a.y + (b.y - a.y) * t,
            theta,
            v: a.v + (b.v - a.v) * t,
        }
    }

    /// Left normal (unit) at arc position `s`.
    pub fn normal_at(&self, s: f64) -> (f64, f64) {
        let theta = self.point_at(s).theta;
        (-theta.sin(), theta.cos())
    }

    /// Project a world point onto the raceline: arc position of the closest
    /// point and signed lateral offset (positive left). Ties broken toward
    /// the smaller s (first segment encountered).
    pub fn project(&self, x: f64, y: f64) -> FrenetPose {
        self.project_segments(x, y, 0..self.segment_count())
    }

    /// Projection restricted to segments within ±`half_window` meters of arc
    /// position `s_center` — a wrap-aware fast path for tracking a moving
    /// vehicle whose station changes by well under the window per call.
    pub fn project_near(&self, x: f64, y: f64, s_center: f64, half_window: f64) -> FrenetPose {
        let n = self.segment_count();
        if 2.0 * half_window >= self.total_length {
            return self.project(x, y);
        }
        let (center_idx, _) = self.locate(s_center);
        // walk outward until the window is covered in both directions
        let mut back = 0usize;
        let mut acc = 0.0;
        while acc < half_window && back + 1 < n {
            back += 1;
            let idx = (center_idx + n - back) % n;
            acc += self.segment_length(idx);
            if !self.closed && center_idx < back {
                back -= 1;
                break;
            }
        }
        let mut fwd = 0usize;
        acc = 0.0;
        while acc < half_window && fwd + 1 < n {
            let idx = (center_idx + fwd) % n;
            acc += self.segment_length(idx);
            fwd += 1;
            if !self.closed && center_idx + fwd >= n {
                break;
            }
        }
        let first = (center_idx + n - back) % n;
        let count = (back + fwd + 1).min(n);
        self.project_segments(x, y, (0..count).map(move |k| (first + k) % n))
    }

    fn project_segments<I: IntoIterator<Item = usize>>(&self, x: f64, y: f64, segs: I) -> FrenetPose {
        let mut best_d2 = f64::INFINITY;
        let mut best = FrenetPose { s: 0.0, d: 0.0 };
        for i in segs {
            let (a, b) = self.segment(i);
            let (ex, ey) = (b.x - a.x, b.y - a.y);
            let len = self.segment_length(i);
            let t = (((x - a.x) * ex + (y - a.y) * ey) / (len * len)).clamp(0.0, 1.0);
            let (px, py) = (a.x + ex * t, a.y + ey * t);
            let (dx, dy) = (x - px, y - py);
            let d2 = dx * dx + dy * dy;
            if d2 < best_d2 {
                best_d2 = d2;
                // signed offset: cross(tangent, point - projection)
                let cross = (ex * dy - ey * dx) / len;
                let s = self.wrap_s(self.cum_s[i] + t * len);
                best = FrenetPose { s, d: cross };
            }
        }
        best
    }
}

/// Load a raceline CSV with header `x,y,theta,v`.
pub fn load_raceline(csv_path: &std::path::Path, closed: bool) -> Result<Raceline> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(csv_path)?;
    {
        let headers = rdr.headers()?;
        let expect = ["x", "y", "theta", "v"];
        let got: Vec<&str> = headers.iter().collect();
        if got != expect {
            return Err(Error::parse(format!("raceline header must be x,y,theta,v, got {got:?}")));
        }
    }
    let mut waypoints = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != 4 {
            return Err(Error::parse(format!("raceline row {}: expected 4 fields", i + 1)));
        }
        let f = |j: usize| -> Result<f64> {
            rec[j]
                .parse::<f64>()
                .map_err(|e| Error::parse(format!("raceline row {}, col {}: {}", i + 1, j, e)))
        };
        waypoints.push(Waypoint { x: f(0)?, y: f(1)?, theta: wrap_angle(f(2)?), v: f(3)? });
    }
    Raceline::from_waypoints(waypoints, closed)
}
