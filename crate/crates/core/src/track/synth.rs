//! Deterministic synthetic circuits: closed centerlines rendered into
//! occupancy grids, with curvature-limited reference speeds. Two standard
//! shapes ship: a stadium oval (`a`) and a three-lobed wavy circle (`b`),
//! used as the seen and unseen maps.

use super::{OccupancyGrid, Raceline, Track, Waypoint};
use crate::Result;
use std::path::Path;
use std::sync::Arc;

/// corridor half-width of the standard maps (≈ 4 car widths of passing room)
pub const HALF_WIDTH_M: f64 = 1.3;
/// grid resolution of the standard maps
pub const RESOLUTION_M: f64 = 0.05;
/// lateral-acceleration budget that caps cornering speed
pub const LAT_ACCEL: f64 = 3.0;
/// reference speed band
pub const V_CAP: f64 = 5.0;
pub const V_FLOOR: f64 = 1.5;

/// A fully synthesized map: occupancy mask plus centerline waypoints,
/// buildable in memory or writable as a track directory.
#[derive(Debug, Clone)]
pub struct SynthMap {
    pub id: String,
    pub occupied: Vec<bool>,
    pub width_cells: usize,
    pub height_cells: usize,
    pub resolution: f64,
    pub origin_x: f64,
    pub origin_y: f64,
    pub waypoints: Vec<Waypoint>,
}

impl SynthMap {
    pub fn build_track(&self) -> Result<Track> {
        let grid = OccupancyGrid::from_occupancy(
            self.occupied.clone(),
            self.width_cells,
            self.height_cells,
            self.resolution,
            (self.origin_x, self.origin_y, 0.0),
        )?;
        let raceline = Raceline::from_waypoints(self.waypoints.clone(), true)?;
        Ok(Track { id: self.id.clone(), grid: Arc::new(grid), raceline: Arc::new(raceline) })
    }

    /// Write `map.png`, `map.txt`, and `raceline.csv` so the directory loads
    /// through the standard track loader. Fully deterministic output.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut img = image::GrayImage::new(self.width_cells as u32, self.height_cells as u32);
        for row in 0..self.height_cells {
            for col in 0..self.width_cells {
                let px = if self.occupied[row * self.width_cells + col] { 0u8 } else { 255u8 };
                img.put_pixel(col as u32, row as u32, image::Luma([px]));
            }
        }
        img.save(dir.join("map.png"))?;
        let meta = format!(
            "resolution: {}\norigin_x: {}\norigin_y: {}\norigin_theta: 0\noccupied_thresh: 0.5\n",
            self.resolution, self.origin_x, self.origin_y
        );
        std::fs::write(dir.join("map.txt"), meta)?;
        let mut w = csv::Writer::from_path(dir.join("raceline.csv"))?;
        w.write_record(["x", "y", "theta", "v"])?;
        for wp in &self.waypoints {
            w.write_record(&[wp.x.to_string(), wp.y.to_string(), wp.theta.to_string(), wp.v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// One centerline sample before rendering: pose plus curvature.
struct CenterPoint {
    x: f64,
    y: f64,
    theta: f64,
    kappa: f64,
}

/// Stadium oval: two straights of `straight_m` joined by semicircular caps of
/// `radius_m`, traversed counterclockwise starting at the bottom-left.
pub fn stadium_map(id: &str, straight_m: f64, radius_m: f64, half_width: f64, resolution: f64) -> SynthMap {
    let perimeter = 2.0 * straight_m + 2.0 * std::f64::consts::PI * radius_m;
    let n = (perimeter / 0.1).round() as usize;
    let mut pts = Vec::with_capacity(n);
    for k in 0..n {
        let s = perimeter * k as f64 / n as f64;
        let p = stadium_point(s, straight_m, radius_m);
        pts.push(p);
    }
    finish_map(id, pts, half_width, resolution)
}

fn stadium_point(s: f64, l: f64, r: f64) -> CenterPoint {
    use std::f64::consts::PI;
    let cap = PI * r;
    if s < l {
        // bottom straight, heading +x
        CenterPoint { x: s, y: 0.0, theta: 0.0, kappa: 0.0 }
    } else if s < l + cap {
        // right cap around (l, r)
        let a = (s - l) / r - PI / 2.0;
        CenterPoint { x: l + r * a.cos(), y: r + r * a.sin(), theta: a + PI / 2.0, kappa: 1.0 / r }
    } else if s < 2.0 * l + cap {
        // top straight, heading -x
        let d = s - l - cap;
        CenterPoint { x: l - d, y: 2.0 * r, theta: PI, kappa: 0.0 }
    } else {
        // left cap around (0, r)
        let a = (s - 2.0 * l - cap) / r + PI / 2.0;
        CenterPoint { x: r * a.cos(), y: r + r * a.sin(), theta: a + PI / 2.0, kappa: 1.0 / r }
    }
}

/// Wavy circle r(φ) = R0 + A·sin(lobes·φ), counterclockwise; curvature from
/// the polar-curve formula.
pub fn wavy_map(id: &str, base_radius: f64, amplitude: f64, lobes: u32, half_width: f64, resolution: f64) -> SynthMap {
    use std::f64::consts::TAU;
    let m = lobes as f64;
    // estimate perimeter, then sample roughly every 0.1 m of arc
    let probe = 4096;
    let mut perimeter = 0.0;
    let mut prev = polar_xy(0.0, base_radius, amplitude, m);
    for k in 1..=probe {
        let phi = TAU * k as f64 / probe as f64;
        let cur = polar_xy(phi, base_radius, amplitude, m);
        perimeter += (cur.0 - prev.0).hypot(cur.1 - prev.1);
        prev = cur;
    }
    let n = (perimeter / 0.1).round() as usize;
    let mut pts = Vec::with_capacity(n);
    for k in 0..n {
        let phi = TAU * k as f64 / n as f64;
        let r = base_radius + amplitude * (m * phi).sin();
        let dr = amplitude * m * (m * phi).cos();
        let ddr = -amplitude * m * m * (m * phi).sin();
        let (x, y) = polar_xy(phi, base_radius, amplitude, m);
        let dx = dr * phi.cos() - r * phi.sin();
        let dy = dr * phi.sin() + r * phi.cos();
        let theta = dy.atan2(dx);
        let kappa = (r * r + 2.0 * dr * dr - r * ddr) / (r * r + dr * dr).powf(1.5);
        pts.push(CenterPoint { x, y, theta, kappa });
    }
    finish_map(id, pts, half_width, resolution)
}

fn polar_xy(phi: f64, r0: f64, a: f64, m: f64) -> (f64, f64) {
    let r = r0 + a * (m * phi).sin();
    (r * phi.cos(), r * phi.sin())
}

/// Shared tail: curvature-limited smoothed speeds, grid bounds, disk-stamped
/// free space.
fn finish_map(id: &str, pts: Vec<CenterPoint>, half_width: f64, resolution: f64) -> SynthMap {
    let n = pts.len();
    // v = min(cap, sqrt(a_lat/|κ|)), then a circular moving average so speed
    // ramps rather than steps at curvature changes
    let raw: Vec<f64> = pts
        .iter()
        .map(|p| (LAT_ACCEL / p.kappa.abs().max(1e-6)).sqrt().clamp(V_FLOOR, V_CAP))
        .collect();
    let mut speeds = raw;
    let half_window = 10;
    for _ in 0..2 {
        let prev = speeds.clone();
        for i in 0..n {
            let mut acc = 0.0;
            for o in -(half_window as isize)..=(half_window as isize) {
                acc += prev[(i as isize + o).rem_euclid(n as isize) as usize];
            }
            speeds[i] = acc / (2 * half_window + 1) as f64;
        }
    }

    let margin = half_width + 0.7;
    let (mut min_x, mut max_x) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut min_y, mut max_y) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in &pts {
        min_x = min_x.min(p.x);
        max_x = max_x.max(p.x);
        min_y = min_y.min(p.y);
        max_y = max_y.max(p.y);
    }
    let origin_x = min_x - margin;
    let origin_y = min_y - margin;
    let width_cells = ((max_x + margin - origin_x) / resolution).ceil() as usize;
    let height_cells = ((max_y + margin - origin_y) / resolution).ceil() as usize;

    // everything occupied, then stamp free disks along the centerline
    let mut occupied = vec![true; width_cells * height_cells];
    let reach = (half_width / resolution).ceil() as isize;
    for p in &pts {
        let cc = ((p.x - origin_x) / resolution).floor() as isize;
        let cr = ((p.y - origin_y) / resolution).floor() as isize;
        for dr in -reach..=reach {
            for dc in -reach..=reach {
                let col = cc + dc;
                let row_b = cr + dr; // row counted from the bottom
                if col < 0 || row_b < 0 || col >= width_cells as isize || row_b >= height_cells as isize {
                    continue;
                }
                let cx = origin_x + (col as f64 + 0.5) * resolution;
                let cy = origin_y + (row_b as f64 + 0.5) * resolution;
                if (cx - p.x).hypot(cy - p.y) <= half_width {
                    let row = height_cells - 1 - row_b as usize;
                    occupied[row * width_cells + col as usize] = false;
                }
            }
        }
    }

    let waypoints = pts
        .iter()
        .zip(&speeds)
        .map(|(p, &v)| Waypoint { x: p.x, y: p.y, theta: crate::util::wrap_angle(p.theta), v })
        .collect();
    SynthMap {
        id: id.to_string(),
        occupied,
        width_cells,
        height_cells,
        resolution,
        origin_x,
        origin_y,
        waypoints,
    }
}

/// The standard map pair: `a` (stadium, used for all offline stages) and `b`
/// (wavy circle, held out as the unseen map).
pub fn standard_pair() -> (SynthMap, SynthMap) {
    let a = stadium_map("a", 18.0, 4.5, HALF_WIDTH_M, RESOLUTION_M);
    let b = wavy_map("b", 6.0, 1.2, 3, HALF_WIDTH_M, RESOLUTION_M);
    (a, b)
}
