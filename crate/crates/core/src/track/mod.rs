//! Maps and racelines: occupancy grids with an exact Euclidean distance
//! transform, raceline loading, curvilinear (Frenet) projection, and
//! wrap-aware progress arithmetic.

mod grid;
mod raceline;
pub mod synth;

pub use grid::{load_grid, GridMeta, OccupancyGrid};
pub use raceline::{load_raceline, FrenetPose, Raceline, Waypoint};

use crate::Result;
use std::path::Path;
use std::sync::Arc;

/// A loaded track: occupancy grid (with distance field) plus raceline,
/// shareable across worlds and planners.
#[derive(Debug, Clone)]
pub struct Track {
    pub id: String,
    pub grid: Arc<OccupancyGrid>,
    pub raceline: Arc<Raceline>,
}

/// Load a track directory containing `map.png`, `map.txt` (grid metadata) and
/// `raceline.csv`. The directory name becomes the track id.
pub fn load_track(dir: &Path) -> Result<Track> {
    let grid = load_grid(&dir.join("map.png"), &dir.join("map.txt"))?;
    let raceline = load_raceline(&dir.join("raceline.csv"), true)?;
    let id = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "track".to_string());
    Ok(Track { id, grid: Arc::new(grid), raceline: Arc::new(raceline) })
}

/// Signed shortest forward-biased progress difference between two stations.
///
/// `raw = s_to - s_from`; on closed tracks the result is folded into
/// `(-L/2, L/2]` so that crossing the start/finish line does not produce a
/// spurious full-lap jump.
pub fn progress_delta(raceline: &Raceline, s_from: f64, s_to: f64) -> f64 {
    let mut raw = s_to - s_from;
    if raceline.closed {
        let l = raceline.total_length;
        if raw < -l / 2.0 {
            raw += l;
        } else if raw > l / 2.0 {
            raw -= l;
        }
    }
    raw
}
