use crate::planner::AgentParams;
use crate::sim::{check_collision, Collision, SimWorld, VehicleParams, VehicleState};
use crate::track::Track;
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// One spawn: pose plus initial speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpawnPose {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub v: f64,
}

impl SpawnPose {
    pub fn to_state(self) -> VehicleState {
        VehicleState::at_pose(self.x, self.y, self.yaw, self.v)
    }
}

/// A race start configuration: two collision-free spawns on a named map and a
/// human-readable relative-position descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub map_id: String,
    pub ego: SpawnPose,
    pub opp: SpawnPose,
    pub descriptor: String,
}

/// Fraction of the local raceline reference speed used as the spawn speed,
/// so cars start already rolling but below their own planning targets.
pub const SPAWN_SPEED_FRACTION: f64 = 0.8;
const MAX_LATERAL_OFFSET: f64 = 0.3;
const MAX_ATTEMPTS: usize = 1000;

/// Generate `count` scenarios at uniformly random raceline stations with
/// random longitudinal gaps in [0.5, 3] m, random side ordering and lateral
/// offsets, each paired with uniformly random opponent agent parameters.
/// Spawns are rejection-sampled until collision-free.
pub fn make_scenario_set(track: &Track, vehicle: &VehicleParams, count: usize, seed: u64) -> Result<(Vec<Scenario>, Vec<AgentParams>)> {
    if count == 0 {
        return Err(Error::invalid("scenario count must be at least 1"));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let rl = &track.raceline;
    let mut scenarios = Vec::with_capacity(count);
    let mut opponents = Vec::with_capacity(count);
    for _ in 0..count {
        let mut placed = None;
        for _attempt in 0..MAX_ATTEMPTS {
            let s_ego = rng.random_range(0.0..rl.total_length);
            let gap = rng.random_range(0.5..=3.0);
            let opp_ahead = rng.random_bool(0.5);
            let s_opp = rl.wrap_s(if opp_ahead { s_ego + gap } else { s_ego - gap });
            let d_ego = rng.random_range(-MAX_LATERAL_OFFSET..=MAX_LATERAL_OFFSET);
            let d_opp = rng.random_range(-MAX_LATERAL_OFFSET..=MAX_LATERAL_OFFSET);
            let ego = spawn_at(track, s_ego, d_ego);
            let opp = spawn_at(track, s_opp, d_opp);
            let world = SimWorld::new(track.grid.clone(), ego.to_state(), opp.to_state(), *vehicle, 0.01, 0);
            if check_collision(&world) == Collision::None {
                let descriptor = format!(
                    "{}_gap_{:.2}_off_{:.2}_{:.2}",
                    if opp_ahead { "opp_ahead" } else { "ego_ahead" },
                    gap,
                    d_ego,
                    d_opp
                );
                placed = Some(Scenario { map_id: track.id.clone(), ego, opp, descriptor });
                break;
            }
        }
        let sc = placed.ok_or_else(|| Error::invalid(format!("could not place a collision-free scenario in {MAX_ATTEMPTS} attempts")))?;
        scenarios.push(sc);
        opponents.push(AgentParams::sample_uniform(&mut rng));
    }
    Ok((scenarios, opponents))
}

fn spawn_at(track: &Track, s: f64, d: f64) -> SpawnPose {
    let rl = &track.raceline;
    let wp = rl.point_at(s);
    let (nx, ny) = rl.normal_at(s);
    SpawnPose { x: wp.x + d * nx, y: wp.y + d * ny, yaw: wp.theta, v: SPAWN_SPEED_FRACTION * wp.v }
}

/// Write a scenario/opponent set to CSV (one row per pair).
pub fn write_scenario_set(path: &Path, scenarios: &[Scenario], opponents: &[AgentParams]) -> Result<()> {
    if scenarios.len() != opponents.len() {
        return Err(Error::invalid("scenario and opponent lists must have equal length"));
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "index", "map_id", "ego_x", "ego_y", "ego_yaw", "ego_v", "opp_x", "opp_y", "opp_yaw", "opp_v", "descriptor", "gamma", "p_mc",
        "p_al", "p_hys", "p_do", "p_co", "p_v1", "p_v2",
    ])?;
    for (i, (sc, op)) in scenarios.iter().zip(opponents).enumerate() {
        let p = op.to_array();
        let mut rec: Vec<String> = vec![
            i.to_string(),
            sc.map_id.clone(),
            sc.ego.x.to_string(),
            sc.ego.y.to_string(),
            sc.ego.yaw.to_string(),
            sc.ego.v.to_string(),
            sc.opp.x.to_string(),
            sc.opp.y.to_string(),
            sc.opp.yaw.to_string(),
            sc.opp.v.to_string(),
            sc.descriptor.clone(),
        ];
        rec.extend(p.iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Read back a scenario/opponent CSV written by `write_scenario_set`.
pub fn read_scenario_set(path: &Path) -> Result<(Vec<Scenario>, Vec<AgentParams>)> {
    let mut r = csv::Reader::from_path(path)?;
    let mut scenarios = Vec::new();
    let mut opponents = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != 19 {
            return Err(Error::parse(format!("scenario row has {} fields, expected 19", rec.len())));
        }
        let f = |i: usize| -> Result<f64> {
            rec[i].parse::<f64>().map_err(|e| Error::parse(format!("field {i}: {e}")))
        };
        scenarios.push(Scenario {
            map_id: rec[1].to_string(),
            ego: SpawnPose { x: f(2)?, y: f(3)?, yaw: f(4)?, v: f(5)? },
            opp: SpawnPose { x: f(6)?, y: f(7)?, yaw: f(8)?, v: f(9)? },
            descriptor: rec[10].to_string(),
        });
        opponents.push(AgentParams::from_array(&[f(11)?, f(12)?, f(13)?, f(14)?, f(15)?, f(16)?, f(17)?, f(18)?])?);
    }
    Ok((scenarios, opponents))
}
