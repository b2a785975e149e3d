use super::geometry::{ray_obb, Obb};
use crate::track::OccupancyGrid;
use crate::util::linspace;

/// LiDAR configuration: beam count, field of view, and range clamp.
#[derive(Debug, Clone, Copy)]
pub struct ScanConfig {
    pub beams: usize,
    pub fov: f64,
    pub max_range: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig { beams: 108, fov: 270.0f64.to_radians(), max_range: 10.0 }
    }
}

/// One simulated scan. `angles` are vehicle-frame beam directions spanning
/// the fov symmetrically; `valid` is false when the sensor pose was outside
/// the map (all ranges forced to 0).
#[derive(Debug, Clone)]
pub struct Scan {
    pub angles: Vec<f64>,
    pub ranges: Vec<f64>,
    pub valid: bool,
}

/// Floor for reported ranges so that valid scans satisfy range > 0 even when
/// the sensor starts in contact with an obstacle.
const MIN_RANGE: f64 = 1e-3;

/// Sphere-trace every beam against the map distance field and analytically
/// against the other vehicle's rectangle; the reported range is the nearer of
/// the two, clamped to max_range.
pub fn ray_march(pose: (f64, f64, f64), grid: &OccupancyGrid, other: Option<&Obb>, cfg: &ScanConfig) -> Scan {
    let (x, y, yaw) = pose;
    let angles = linspace(-cfg.fov / 2.0, cfg.fov / 2.0, cfg.beams);
    if !grid.in_bounds(x, y) {
        return Scan { ranges: vec![0.0; angles.len()], angles, valid: false };
    }
    let hit_band = grid.resolution / 2.0;
    let ranges = angles
        .iter()
        .map(|&a| {
            let dir = (yaw + a).sin_cos();
            let dir = (dir.1, dir.0); // (cos, sin)
            let vehicle_t = other.and_then(|o| ray_obb((x, y), dir, o)).unwrap_or(f64::INFINITY);
            let limit = cfg.max_range.min(vehicle_t);
            let mut t = 0.0;
            let mut range = limit;
            while t < limit {
                let d = grid.distance_at(x + t * dir.0, y + t * dir.1);
                if d < hit_band {
                    range = t;
                    break;
                }
                t += d.max(hit_band);
            }
            range.min(limit).max(MIN_RANGE)
        })
        .collect();
    Scan { angles, ranges, valid: true }
}
