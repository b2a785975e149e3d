/// Oriented bounding box (rectangle) in the world plane.
#[derive(Debug, Clone, Copy)]
pub struct Obb {
    pub cx: f64,
    pub cy: f64,
    pub yaw: f64,
    pub half_len: f64,
    pub half_wid: f64,
}

impl Obb {
    /// Corner coordinates in counterclockwise order.
    pub fn corners(&self) -> [(f64, f64); 4] {
        let (s, c) = self.yaw.sin_cos();
        let mut out = [(0.0, 0.0); 4];
        for (i, (u, w)) in [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)].iter().enumerate() {
            let lx = u * self.half_len;
            let ly = w * self.half_wid;
            out[i] = (self.cx + c * lx - s * ly, self.cy + s * lx + c * ly);
        }
        out
    }

    /// The 4 corners plus the 4 edge midpoints (8 boundary samples).
    pub fn boundary_points(&self) -> [(f64, f64); 8] {
        let c = self.corners();
        [
            c[0],
            c[1],
            c[2],
            c[3],
            mid(c[0], c[1]),
            mid(c[1], c[2]),
            mid(c[2], c[3]),
            mid(c[3], c[0]),
        ]
    }
}

fn mid(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    ((a.0 + b.0) / 2.0, (a.1 + b.1) / 2.0)
}

/// Separating-axis overlap test between two oriented rectangles. Touching
/// exactly at the boundary counts as overlap only if the projections strictly
/// intersect (gap 1e-6 → no overlap; penetration 1e-6 → overlap).
pub fn obb_overlap(a: &Obb, b: &Obb) -> bool {
    let axes = [
        (a.yaw.cos(), a.yaw.sin()),
        (-a.yaw.sin(), a.yaw.cos()),
        (b.yaw.cos(), b.yaw.sin()),
        (-b.yaw.sin(), b.yaw.cos()),
    ];
    let ca = a.corners();
    let cb = b.corners();
    for (ax, ay) in axes {
        let pa = project(&ca, ax, ay);
        let pb = project(&cb, ax, ay);
        if pa.1 < pb.0 || pb.1 < pa.0 {
            return false; // separating axis found
        }
    }
    true
}

fn project(corners: &[(f64, f64); 4], ax: f64, ay: f64) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &(x, y) in corners {
        let p = x * ax + y * ay;
        lo = lo.min(p);
        hi = hi.max(p);
    }
    (lo, hi)
}

/// First intersection parameter t ≥ 0 of the ray `origin + t*dir` with an
/// oriented rectangle (slab method in the rectangle's frame). `dir` must be
/// a unit vector. Returns None when the ray misses.
pub fn ray_obb(origin: (f64, f64), dir: (f64, f64), obb: &Obb) -> Option<f64> {
    let (s, c) = (-obb.yaw).sin_cos();
    let ox = origin.0 - obb.cx;
    let oy = origin.1 - obb.cy;
    let lo = (c * ox - s * oy, s * ox + c * oy);
    let ld = (c * dir.0 - s * dir.1, s * dir.0 + c * dir.1);
    let mut t_min = 0.0f64;
    let mut t_max = f64::INFINITY;
    for (o, d, half) in [(lo.0, ld.0, obb.half_len), (lo.1, ld.1, obb.half_wid)] {
        if d.abs() < 1e-15 {
            if o.abs() > half {
                return None;
            }
        } else {
            let t1 = (-half - o) / d;
            let t2 = (half - o) / d;
            let (t1, t2) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            t_min = t_min.max(t1);
            t_max = t_max.min(t2);
            if t_min > t_max {
                return None;
            }
        }
    }
    Some(t_min)
}
