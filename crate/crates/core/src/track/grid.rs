use crate::util::{kv_f64, parse_kv};
use crate::{Error, Result};

/// Sidecar metadata for a map image: `key: value` lines with keys
/// `resolution`, `origin_x`, `origin_y`, `origin_theta`, `occupied_thresh`.
#[derive(Debug, Clone, Copy)]
pub struct GridMeta {
    pub resolution: f64,
    pub origin_x: f64,
    pub origin_y: f64,
    pub origin_theta: f64,
    pub occupied_thresh: f64,
}

impl GridMeta {
    pub fn parse(text: &str) -> Result<Self> {
        let map = parse_kv(text)?;
        let meta = GridMeta {
            resolution: kv_f64(&map, "resolution")?,
            origin_x: map.get("origin_x").map_or(Ok(0.0), |_| kv_f64(&map, "origin_x"))?,
            origin_y: map.get("origin_y").map_or(Ok(0.0), |_| kv_f64(&map, "origin_y"))?,
            origin_theta: map.get("origin_theta").map_or(Ok(0.0), |_| kv_f64(&map, "origin_theta"))?,
            occupied_thresh: map.get("occupied_thresh").map_or(Ok(0.5), |_| kv_f64(&map, "occupied_thresh"))?,
        };
        if meta.resolution <= 0.0 {
            return Err(Error::invalid("map resolution must be > 0"));
        }
        if !(0.0..=1.0).contains(&meta.occupied_thresh) {
            return Err(Error::invalid("occupied_thresh must be in [0, 1]"));
        }
        Ok(meta)
    }
}

/// 2D occupancy grid with a precomputed exact Euclidean distance field
/// (meters to the nearest occupied cell center).
///
/// World convention: the origin is the *lower-left* corner of the map; image
/// row 0 is the top of the map. Cell `(col, row)` is stored row-major.
#[derive(Debug, Clone)]
pub struct OccupancyGrid {
    pub width_cells: usize,
    pub height_cells: usize,
    pub resolution: f64,
    pub origin_x: f64,
    pub origin_y: f64,
    pub origin_theta: f64,
    pub occupied: Vec<bool>,
    pub distance_field: Vec<f64>,
}

impl OccupancyGrid {
    /// Build a grid from an occupancy mask, computing the distance field.
    pub fn from_occupancy(
        occupied: Vec<bool>,
        width_cells: usize,
        height_cells: usize,
        resolution: f64,
        origin: (f64, f64, f64),
    ) -> Result<Self> {
        if width_cells == 0 || height_cells == 0 {
            return Err(Error::invalid("zero-size grid"));
        }
        if occupied.len() != width_cells * height_cells {
            return Err(Error::invalid("occupancy length does not match dimensions"));
        }
        if resolution <= 0.0 {
            return Err(Error::invalid("map resolution must be > 0"));
        }
        let distance_field = distance_transform(&occupied, width_cells, height_cells, resolution);
        Ok(OccupancyGrid {
            width_cells,
            height_cells,
            resolution,
            origin_x: origin.0,
            origin_y: origin.1,
            origin_theta: origin.2,
            occupied,
            distance_field,
        })
    }

    #[inline]
    pub fn idx(&self, col: usize, row: usize) -> usize {
        row * self.width_cells + col
    }

    /// World point -> continuous cell coordinates (u, j) where u counts
    /// columns and j counts rows *from the bottom* of the map.
    #[inline]
    fn world_to_frac(&self, x: f64, y: f64) -> (f64, f64) {
        let dx = x - self.origin_x;
        let dy = y - self.origin_y;
        let (s, c) = (-self.origin_theta).sin_cos();
        let rx = c * dx - s * dy;
        let ry = s * dx + c * dy;
        (rx / self.resolution, ry / self.resolution)
    }

    /// Center of cell (col, row) in world coordinates.
    pub fn cell_center(&self, col: usize, row: usize) -> (f64, f64) {
        let rx = (col as f64 + 0.5) * self.resolution;
        let ry = (self.height_cells - 1 - row) as f64 * self.resolution + 0.5 * self.resolution;
        let (s, c) = self.origin_theta.sin_cos();
        (self.origin_x + c * rx - s * ry, self.origin_y + s * rx + c * ry)
    }

    /// Discrete cell containing a world point, if inside the map.
    pub fn world_to_cell(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let (u, j) = self.world_to_frac(x, y);
        if u < 0.0 || j < 0.0 {
            return None;
        }
        let col = u.floor() as usize;
        let row_from_bottom = j.floor() as usize;
        if col >= self.width_cells || row_from_bottom >= self.height_cells {
            return None;
        }
        Some((col, self.height_cells - 1 - row_from_bottom))
    }

    #[inline]
    pub fn in_bounds(&self, x: f64, y: f64) -> bool {
        let (u, j) = self.world_to_frac(x, y);
        u >= 0.0 && j >= 0.0 && u < self.width_cells as f64 && j < self.height_cells as f64
    }

    /// Distance-field value at a world point, bilinearly interpolated between
    /// cell centers. Indices are clamped at the map border, so points outside
    /// the map read the border cells (our maps are wall-enclosed, making
    /// out-of-bounds effectively occupied).
    #[inline]
    pub fn distance_at(&self, x: f64, y: f64) -> f64 {
        let (u, j) = self.world_to_frac(x, y);
        // shift to cell-center coordinates
        let uc = u - 0.5;
        let jc = j - 0.5;
        let i0f = uc.floor();
        let j0f = jc.floor();
        let fu = uc - i0f;
        let fj = jc - j0f;
        let w = self.width_cells as isize;
        let h = self.height_cells as isize;
        let clamp = |v: isize, hi: isize| v.clamp(0, hi - 1) as usize;
        let i0 = clamp(i0f as isize, w);
        let i1 = clamp(i0f as isize + 1, w);
        let jb0 = clamp(j0f as isize, h);
        let jb1 = clamp(j0f as isize + 1, h);
        // rows from bottom -> stored row index
        let r0 = self.height_cells - 1 - jb0;
        let r1 = self.height_cells - 1 - jb1;
        let d00 = self.distance_field[self.idx(i0, r0)];
        let d10 = self.distance_field[self.idx(i1, r0)];
        let d01 = self.distance_field[self.idx(i0, r1)];
        let d11 = self.distance_field[self.idx(i1, r1)];
        let a = d00 + (d10 - d00) * fu;
        let b = d01 + (d11 - d01) * fu;
        a + (b - a) * fj
    }
}

/// Load a grayscale map image plus metadata. Cells whose normalized darkness
/// (1 - gray/255) is at or above `occupied_thresh` are occupied.
pub fn load_grid(image_path: &std::path::Path, meta_path: &std::path::Path) -> Result<OccupancyGrid> {
    let meta = GridMeta::parse(&std::fs::read_to_string(meta_path)?)?;
    let img = image::open(image_path)?.into_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    if w == 0 || h == 0 {
        return Err(Error::invalid("zero-size map image"));
    }
    let mut occupied = vec![false; w * h];
    for (row, pixels) in img.rows().enumerate() {
        for (col, px) in pixels.enumerate() {
            let darkness = 1.0 - f64::from(px.0[0]) / 255.0;
            occupied[row * w + col] = darkness >= meta.occupied_thresh;
        }
    }
    OccupancyGrid::from_occupancy(
        occupied,
        w,
        h,
        meta.resolution,
        (meta.origin_x, meta.origin_y, meta.origin_theta),
    )
}

const DT_INF: f64 = 1e20;

/// Exact two-pass squared Euclidean distance transform (per-dimension
/// lower-envelope-of-parabolas), returning distances in meters.
fn distance_transform(occupied: &[bool], w: usize, h: usize, resolution: f64) -> Vec<f64> {
    // pass 1: per column over rows
    let mut stage = vec![0.0f64; w * h];
    let mut f = vec![0.0f64; h.max(w)];
    let mut d = vec![0.0f64; h.max(w)];
    let mut v = vec![0usize; h.max(w)];
    let mut z = vec![0.0f64; h.max(w) + 1];
    for col in 0..w {
        for row in 0..h {
            f[row] = if occupied[row * w + col] { 0.0 } else { DT_INF };
        }
        dt_1d(&f[..h], &mut d, &mut v, &mut z);
        for row in 0..h {
            stage[row * w + col] = d[row];
        }
    }
    // pass 2: per row over columns
    let mut out = vec![0.0f64; w * h];
    for row in 0..h {
        f[..w].copy_from_slice(&stage[row * w..(row + 1) * w]);
        dt_1d(&f[..w], &mut d, &mut v, &mut z);
        for col in 0..w {
            out[row * w + col] = d[col].sqrt() * resolution;
        }
    }
    out
}

/// 1D squared distance transform of sampled function `f` onto `d`.
fn dt_1d(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = -DT_INF;
    z[1] = DT_INF;
    for q in 1..n {
        let qf = q as f64;
        loop {
            let p = v[k] as f64;
            let s = ((f[q] + qf * qf) - (f[v[k]] + p * p)) / (2.0 * qf - 2.0 * p);
            if s <= z[k] {
                // parabola q dominates the one at v[k]; pop
                if k == 0 {
                    // degenerate: replace the first parabola
                    v[0] = q;
                    z[0] = -DT_INF;
                    z[1] = DT_INF;
                    break;
                }
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = DT_INF;
                break;
            }
        }
    }
    k = 0;
    for q in 0..n {
        let qf = q as f64;
        while z[k + 1] < qf {
            k += 1;
        }
        let p = v[k] as f64;
        d[q] = (qf - p) * (qf - p) + f[v[k]];
    }
}
