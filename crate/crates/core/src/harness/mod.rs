//! Head-to-head experiment runner: race grids over prototype pairings with
//! alternating randomized starts, per-race win/crash records, pairing-level
//! win rates, and a paired-t-test report comparing two arms.

mod lane_switcher;
pub mod stats;

pub use lane_switcher::{point_obb_distance, LaneSwitcher, LANE_LOOKAHEAD_M, LANE_OFFSETS, MIN_SWITCH_INTERVAL_S};
pub use stats::{betainc_reg, ln_gamma, paired_t_test, t_two_sided_p, TTest};

use crate::evo::{ArchiveEntry, Prototype};
use crate::game::ACTION_SLOTS;
use crate::objectives::{run_segment, Driver, EngineConfig, PlannerDriver, Scenario, SegmentOutcome};
use crate::pipeline::{run_online, OnlineConfig, OnlineState};
use crate::planner::{AgentParams, Planner, PlannerConfig};
use crate::regret_model::MlpParams;
use crate::sim::{SimWorld, VehicleParams};
use crate::track::Track;
use crate::util::sub_seed;
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

/// How the ego side plays: online objective-space planning with the regret
/// model, or the starting prototype's weights held fixed for the whole race.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EgoKind {
    GameTheoretic,
    FixedWeights,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OpponentKind {
    /// fixed planner weights from the second diversity subset, one pairing
    /// column per prototype
    FixedDpp2,
    /// fixed planner weights drawn uniformly from the exploration log, one
    /// draw per pairing column
    RandomExplored,
    /// the reactive lane-switching baseline (single pairing column)
    LaneSwitcher,
}

/// One head-to-head condition: every ego start prototype races every opponent
/// column, from `starts` randomized start lines, on both sides when
/// `alternation` is set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatchConfig {
    pub ego: EgoKind,
    pub opponent: OpponentKind,
    pub starts: usize,
    pub alternation: bool,
    /// objective-space moves per race; total race time = (moves+1) segments
    pub moves: usize,
    pub segment_s: f64,
    pub d_move: f64,
    pub seed: u64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            ego: EgoKind::GameTheoretic,
            opponent: OpponentKind::FixedDpp2,
            starts: 5,
            alternation: true,
            moves: 2,
            segment_s: 8.0,
            d_move: 1.0,
            seed: 0,
        }
    }
}

/// Everything a match needs beyond its config: the map, the snap set with the
/// ego/opponent prototype indices, the trained model (game-theoretic ego
/// only), and the exploration log (random opponents only).
pub struct MatchAssets<'a> {
    pub track: &'a Track,
    pub snap_set: &'a [Prototype],
    pub ego_start_idx: &'a [usize],
    pub opp_idx: &'a [usize],
    pub model: Option<&'a MlpParams>,
    pub explored: &'a [ArchiveEntry],
}

/// One finished race. `win` is the ego's credit: 1 win, 0 loss, 0.5 draw.
/// `margin_m` is the ego-minus-opponent raceline progress over the race.
#[derive(Debug, Clone, PartialEq)]
pub struct RaceRecord {
    pub pairing: usize,
    pub start: usize,
    pub side: usize,
    pub win: f64,
    pub margin_m: f64,
    pub ego_crashed: bool,
    pub opp_crashed: bool,
}

/// Crash attribution over a race: a side "crashed" if it hit a wall, was at
/// fault in (or tied an unattributable) vehicle contact, in any segment. A
/// dynamics abort counts against both (no side to blame).
fn crash_events(outcomes: &[SegmentOutcome], aborted: bool) -> (bool, bool) {
    let mut ego = aborted;
    let mut opp = aborted;
    for o in outcomes {
        ego |= o.flags.ego_map || (o.flags.ego_opp && (o.ego_fault || !o.opp_fault));
        opp |= o.flags.opp_map || (o.flags.ego_opp && (o.opp_fault || !o.ego_fault));
    }
    (ego, opp)
}

/// Crash beats progress: a cleanly driving car never loses to one that
/// crashed; mutual crashes (or an unattributable failure) split the credit.
fn score(ego_crashed: bool, opp_crashed: bool, margin: f64) -> f64 {
    match (ego_crashed, opp_crashed) {
        (true, true) => 0.5,
        (true, false) => 0.0,
        (false, true) => 1.0,
        (false, false) => {
            if margin > 0.0 {
                1.0
            } else if margin < 0.0 {
                0.0
            } else {
                0.5
            }
        }
    }
}

enum OppSpec {
    Params(AgentParams),
    Switcher,
}

fn make_opp_driver(spec: &OppSpec, track: &Track, vehicle: VehicleParams, cycle_s: f64) -> Box<dyn Driver> {
    match spec {
        OppSpec::Params(p) => Box::new(PlannerDriver::new(Planner::new(PlannerConfig::with_vehicle(vehicle)), *p, track.raceline.clone())),
        OppSpec::Switcher => Box::new(LaneSwitcher::new(track.raceline.clone(), vehicle, cycle_s)),
    }
}

/// Run the full race grid for one condition. Races run in parallel; the
/// returned records are in deterministic pairing-major order (pairing, start,
/// side) regardless of scheduling.
pub fn run_match(cfg: &MatchConfig, assets: &MatchAssets) -> Result<Vec<RaceRecord>> {
    if cfg.starts == 0 {
        return Err(Error::invalid("a match needs at least one start line"));
    }
    if cfg.moves > ACTION_SLOTS {
        return Err(Error::invalid(format!("races support at most {ACTION_SLOTS} moves")));
    }
    if assets.ego_start_idx.is_empty() {
        return Err(Error::invalid("no ego start prototypes"));
    }
    for &i in assets.ego_start_idx.iter().chain(assets.opp_idx) {
        if i >= assets.snap_set.len() {
            return Err(Error::invalid(format!("prototype index {i} out of range ({} prototypes)", assets.snap_set.len())));
        }
    }
    let model = match (cfg.ego, assets.model) {
        (EgoKind::GameTheoretic, Some(m)) => Some(m),
        (EgoKind::GameTheoretic, None) => return Err(Error::invalid("game-theoretic ego needs a trained model")),
        (EgoKind::FixedWeights, _) => None,
    };
    let vehicle = VehicleParams::default();
    let engine = EngineConfig { record_ttc: false, ..EngineConfig::default() };
    let cycle_s = engine.steps_per_cycle as f64 * 0.01;

    // opponent pairing columns
    let opp_specs: Vec<OppSpec> = match cfg.opponent {
        OpponentKind::FixedDpp2 => {
            if assets.opp_idx.is_empty() {
                return Err(Error::invalid("fixed-prototype opponents need at least one prototype index"));
            }
            assets.opp_idx.iter().map(|&i| OppSpec::Params(assets.snap_set[i].params)).collect()
        }
        OpponentKind::RandomExplored => {
            let pool: Vec<&ArchiveEntry> = assets.explored.iter().filter(|e| e.point.is_finite()).collect();
            if pool.is_empty() {
                return Err(Error::invalid("random opponents need a non-empty exploration log"));
            }
            let mut rng = ChaCha12Rng::seed_from_u64(sub_seed(cfg.seed, 2));
            (0..assets.ego_start_idx.len()).map(|_| OppSpec::Params(pool[rng.random_range(0..pool.len())].params)).collect()
        }
        OpponentKind::LaneSwitcher => vec![OppSpec::Switcher],
    };

    // shared start lines: both arms of a comparison must race from the same
    // spawns, so these depend only on the seed
    let (start_lines, _) = crate::objectives::make_scenario_set(assets.track, &vehicle, cfg.starts, sub_seed(cfg.seed, 1))?;

    let sides: &[usize] = if cfg.alternation { &[0, 1] } else { &[0] };
    let mut jobs = Vec::new();
    for (row, &ego_idx) in assets.ego_start_idx.iter().enumerate() {
        for (col, spec) in opp_specs.iter().enumerate() {
            let pairing = row * opp_specs.len() + col;
            for (start, line) in start_lines.iter().enumerate() {
                for &side in sides {
                    jobs.push((pairing, ego_idx, spec, start, line, side));
                }
            }
        }
    }

    let duration = (cfg.moves + 1) as f64 * cfg.segment_s;
    let records: Result<Vec<RaceRecord>> = jobs
        .par_iter()
        .map(|&(pairing, ego_idx, spec, start, line, side)| {
            let scenario = if side == 0 {
                line.clone()
            } else {
                Scenario { map_id: line.map_id.clone(), ego: line.opp, opp: line.ego, descriptor: format!("{}_swapped", line.descriptor) }
            };
            let mut opp = make_opp_driver(spec, assets.track, vehicle, cycle_s);
            let (outcomes, aborted, margin) = match model {
                Some(m) => {
                    let state = OnlineState::new(m.clone(), assets.snap_set.to_vec(), ego_idx)?;
                    let ocfg = OnlineConfig { total_moves: cfg.moves, segment_s: cfg.segment_s, d_move: cfg.d_move, engine: engine.clone() };
                    let out = run_online(state, opp.as_mut(), &scenario, assets.track, &ocfg)?;
                    let margin: f64 = out.outcomes.iter().map(|o| o.ego_progress - o.opp_progress).sum();
                    (out.outcomes, out.aborted, margin)
                }
                None => {
                    let mut world = SimWorld::new(assets.track.grid.clone(), scenario.ego.to_state(), scenario.opp.to_state(), vehicle, 0.01, 0);
                    let mut ego = PlannerDriver::new(
                        Planner::new(PlannerConfig::with_vehicle(vehicle)),
                        assets.snap_set[ego_idx].params,
                        assets.track.raceline.clone(),
                    );
                    let out = run_segment(&mut world, &mut ego, opp.as_mut(), &assets.track.raceline, duration, &engine);
                    let aborted = out.aborted;
                    let margin = out.ego_progress - out.opp_progress;
                    (vec![out], aborted, margin)
                }
            };
            let (ego_crashed, opp_crashed) = crash_events(&outcomes, aborted);
            Ok(RaceRecord { pairing, start, side, win: score(ego_crashed, opp_crashed, margin), margin_m: margin, ego_crashed, opp_crashed })
        })
        .collect();
    records
}

/// Per-arm aggregate: pairing-level win rates (pairing id order) plus counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub label: String,
    pub race_count: usize,
    pub pairing_win_rates: Vec<f64>,
    pub win_rate_mean: f64,
    pub win_rate_std: f64,
    pub wins: usize,
    pub losses: usize,
    pub draws: usize,
    pub ego_crashes: usize,
    pub opp_crashes: usize,
}

pub fn summarize_arm(label: &str, records: &[RaceRecord]) -> Result<ArmSummary> {
    if records.is_empty() {
        return Err(Error::invalid("cannot summarize an empty race log"));
    }
    let mut by_pairing: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    let mut wins = 0;
    let mut losses = 0;
    let mut draws = 0;
    let mut ego_crashes = 0;
    let mut opp_crashes = 0;
    for r in records {
        let e = by_pairing.entry(r.pairing).or_insert((0.0, 0));
        e.0 += r.win;
        e.1 += 1;
        if r.win == 1.0 {
            wins += 1;
        } else if r.win == 0.0 {
            losses += 1;
        } else {
            draws += 1;
        }
        ego_crashes += r.ego_crashed as usize;
        opp_crashes += r.opp_crashed as usize;
    }
    let rates: Vec<f64> = by_pairing.values().map(|(credit, n)| credit / *n as f64).collect();
    let mean = rates.iter().sum::<f64>() / rates.len() as f64;
    let std = if rates.len() > 1 {
        (rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (rates.len() as f64 - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(ArmSummary {
        label: label.to_string(),
        race_count: records.len(),
        pairing_win_rates: rates,
        win_rate_mean: mean,
        win_rate_std: std,
        wins,
        losses,
        draws,
        ego_crashes,
        opp_crashes,
    })
}

/// Two-arm comparison: pairing-level win rates of each arm and the paired
/// t-test between them (pairs matched by pairing id). `t` is `None` on the
/// zero-variance path where the statistic is infinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaceReport {
    pub arm_a: ArmSummary,
    pub arm_b: ArmSummary,
    pub t: Option<f64>,
    pub p: f64,
    pub dof: usize,
    pub zero_variance: bool,
}

pub fn build_report(label_a: &str, records_a: &[RaceRecord], label_b: &str, records_b: &[RaceRecord]) -> Result<RaceReport> {
    let arm_a = summarize_arm(label_a, records_a)?;
    let arm_b = summarize_arm(label_b, records_b)?;
    if arm_a.pairing_win_rates.len() != arm_b.pairing_win_rates.len() {
        return Err(Error::invalid(format!(
            "arms have different pairing grids: {} vs {}",
            arm_a.pairing_win_rates.len(),
            arm_b.pairing_win_rates.len()
        )));
    }
    let test = paired_t_test(&arm_a.pairing_win_rates, &arm_b.pairing_win_rates)?;
    Ok(RaceReport {
        arm_a,
        arm_b,
        t: test.t.is_finite().then_some(test.t),
        p: test.p,
        dof: test.dof,
        zero_variance: test.zero_variance,
    })
}

/// Pretty JSON with a trailing newline; field order is fixed by the structs,
/// so regeneration from the same logs is byte-identical.
pub fn write_report(path: &Path, report: &RaceReport) -> Result<()> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_report(path: &Path) -> Result<RaceReport> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Race log CSV: one row per race, exact float round-trip.
pub fn write_race_log(path: &Path, records: &[RaceRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["pairing", "start", "side", "win", "margin_m", "ego_crashed", "opp_crashed"])?;
    for r in records {
        w.write_record(&[
            r.pairing.to_string(),
            r.start.to_string(),
            r.side.to_string(),
            r.win.to_string(),
            r.margin_m.to_string(),
            (r.ego_crashed as u8).to_string(),
            (r.opp_crashed as u8).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_race_log(path: &Path) -> Result<Vec<RaceRecord>> {
    let mut rd = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        if rec.len() != 7 {
            return Err(Error::parse(format!("race log row has {} fields, expected 7", rec.len())));
        }
        out.push(RaceRecord {
            pairing: rec[0].parse().map_err(|e| Error::parse(format!("pairing: {e}")))?,
            start: rec[1].parse().map_err(|e| Error::parse(format!("start: {e}")))?,
            side: rec[2].parse().map_err(|e| Error::parse(format!("side: {e}")))?,
            win: rec[3].parse().map_err(|e| Error::parse(format!("win: {e}")))?,
            margin_m: rec[4].parse().map_err(|e| Error::parse(format!("margin: {e}")))?,
            ego_crashed: &rec[5] == "1",
            opp_crashed: &rec[6] == "1",
        });
    }
    Ok(out)
}
