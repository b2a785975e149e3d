//! Regret dataset construction: for every prototype pairing, fill the
//! utility table by exhaustive self-play, compute exact counterfactual
//! regrets, and emit one training sample per reachable (infoset, candidate
//! action) pair — one row per observable opponent objective-history variant,
//! since the regret is shared across them but the features differ.

use super::{encode_infoset, exact_cfr, fill_utility_table, index_to_seq, snapped_trajectory, Action, CfrRegrets, GameConfig, Infoset, UtilityTable, FEATURE_LEN, N_ACTIONS};
use crate::evo::Prototype;
use crate::objectives::{ObjectivePoint, Scenario};
use crate::track::Track;
use crate::{Error, Result};
use std::path::Path;

/// One supervised sample: encoded (infoset, candidate action) plus its
/// accumulated counterfactual regret in meters of lead.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretSample {
    pub features: [f64; FEATURE_LEN],
    pub target: f64,
}

/// Everything the self-play stage produces.
#[derive(Debug)]
pub struct DatasetBuild {
    pub samples: Vec<RegretSample>,
    /// (dpp1 index, dpp2 index, filled table) per pairing, for audit.
    pub tables: Vec<(usize, usize, UtilityTable)>,
}

/// Expand one pairing's regrets into dataset rows. Rows are emitted in
/// (depth, ego prefix, action, opponent variant) order; opponent objective
/// histories are deduplicated exactly (snapping can merge action sequences).
pub fn emit_pair_samples(
    cfr: &CfrRegrets,
    ego_start: &ObjectivePoint,
    opp_start: &ObjectivePoint,
    protos: &[Prototype],
    d_move: f64,
) -> Result<Vec<RegretSample>> {
    if cfr.n_actions != N_ACTIONS {
        return Err(Error::invalid(format!("expected {N_ACTIONS}-action regrets, got {}", cfr.n_actions)));
    }
    let mut samples = vec![];
    for depth in 0..cfr.max_moves {
        let n_prefix = N_ACTIONS.pow(depth as u32);
        let mut opp_variants: Vec<Vec<ObjectivePoint>> = vec![];
        for q in 0..n_prefix {
            let opp_seq = actions_from_index(q, depth)?;
            let (opp_points, _) = snapped_trajectory(opp_start, &opp_seq, protos, d_move);
            if !opp_variants.contains(&opp_points) {
                opp_variants.push(opp_points);
            }
        }
        for p in 0..n_prefix {
            let ego_seq = actions_from_index(p, depth)?;
            let (ego_points, _) = snapped_trajectory(ego_start, &ego_seq, protos, d_move);
            let node = cfr.node(depth, p);
            for (a, &target) in node.iter().enumerate() {
                for opp_points in &opp_variants {
                    let infoset = Infoset { ego_points: ego_points.clone(), opp_points: opp_points.clone(), ego_actions: ego_seq.clone() };
                    let features = encode_infoset(&infoset, Action::from_id(a)?)?;
                    samples.push(RegretSample { features, target });
                }
            }
        }
    }
    Ok(samples)
}

fn actions_from_index(index: usize, len: usize) -> Result<Vec<Action>> {
    index_to_seq(index, N_ACTIONS, len).into_iter().map(Action::from_id).collect()
}

/// Run the full self-play stage over the Cartesian product of the two
/// prototype sets. Pairings cycle through the provided scenarios; both
/// players snap onto `protos` (the whole near-optimal set).
pub fn build_dataset(
    dpp1: &[Prototype],
    dpp2: &[Prototype],
    protos: &[Prototype],
    scenarios: &[Scenario],
    track: &Track,
    cfg: &GameConfig,
) -> Result<DatasetBuild> {
    if dpp1.is_empty() || dpp2.is_empty() || protos.is_empty() || scenarios.is_empty() {
        return Err(Error::invalid("self-play needs non-empty prototype sets and at least one scenario"));
    }
    let mut samples = vec![];
    let mut tables = vec![];
    for (i, ego) in dpp1.iter().enumerate() {
        for (j, opp) in dpp2.iter().enumerate() {
            let scenario = &scenarios[(i * dpp2.len() + j) % scenarios.len()];
            let table = fill_utility_table((&ego.params, &ego.point), (&opp.params, &opp.point), scenario, track, protos, cfg)?;
            let invalid = table.invalid_fraction();
            if invalid > 0.0 {
                log::warn!("pair ({i},{j}): {:.1}% of rollouts invalid", invalid * 100.0);
            }
            let cfr = exact_cfr(&table)?;
            let rows = emit_pair_samples(&cfr, &ego.point, &opp.point, protos, cfg.d_move)?;
            log::info!("pair ({i},{j}): {} games, {} dataset rows", table.n_ego_seq() * table.n_opp_seq, rows.len());
            samples.extend(rows);
            tables.push((i, j, table));
        }
    }
    Ok(DatasetBuild { samples, tables })
}

/// Dataset CSV: header then one row per sample, 40 feature columns plus the
/// regret target.
pub fn write_dataset(path: &Path, samples: &[RegretSample]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (0..FEATURE_LEN).map(|i| format!("f{i}")).collect();
    header.push("regret".to_string());
    w.write_record(&header)?;
    for s in samples {
        let mut rec: Vec<String> = s.features.iter().map(|v| v.to_string()).collect();
        rec.push(s.target.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Vec<RegretSample>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut samples = vec![];
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != FEATURE_LEN + 1 {
            return Err(Error::parse(format!("dataset row has {} fields, expected {}", rec.len(), FEATURE_LEN + 1)));
        }
        let mut features = [0.0; FEATURE_LEN];
        for (i, f) in features.iter_mut().enumerate() {
            *f = rec[i].parse().map_err(|e| Error::parse(format!("feature {i}: {e}")))?;
        }
        let target = rec[FEATURE_LEN].parse().map_err(|e| Error::parse(format!("target: {e}")))?;
        samples.push(RegretSample { features, target });
    }
    Ok(samples)
}

/// Audit CSV for one pairing's utility table: one row per ego sequence, one
/// column per opponent sequence; invalid cells are written as `invalid`.
pub fn write_utility_table(path: &Path, table: &UtilityTable) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["ego_seq".to_string()];
    header.extend((0..table.n_opp_seq).map(|o| format!("opp_{o}")));
    w.write_record(&header)?;
    for e in 0..table.n_ego_seq() {
        let mut rec = vec![e.to_string()];
        for o in 0..table.n_opp_seq {
            rec.push(match table.utility(e, o) {
                Some(u) => u.to_string(),
                None => "invalid".to_string(),
            });
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{apply_action, nearest_prototype};
    use crate::objectives::SpawnPose;
    use crate::planner::AgentParams;
    use crate::track::{OccupancyGrid, Raceline, Waypoint};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;
    use std::collections::HashSet;
    use std::sync::Arc;

    fn proto_at(agg: f64, res: f64, seed: u64) -> Prototype {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        Prototype { params: AgentParams::sample_uniform(&mut rng), point: ObjectivePoint::new(agg, res) }
    }

    fn random_cfr(max_moves: usize, seed: u64) -> CfrRegrets {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut t = UtilityTable::square(N_ACTIONS, max_moves).unwrap();
        for e in 0..t.n_ego_seq() {
            for o in 0..t.n_opp_seq {
                t.set(e, o, rng.random_range(-5.0..5.0), true);
            }
        }
        exact_cfr(&t).unwrap()
    }

    /// Independent row-count oracle: distinct opponent histories per depth
    /// counted with a hash set over snapped-point bit patterns.
    fn expected_rows(ego0: &ObjectivePoint, opp0: &ObjectivePoint, protos: &[Prototype], max_moves: usize, d_move: f64) -> usize {
        let mut total = 0;
        for depth in 0..max_moves {
            let n_prefix = N_ACTIONS.pow(depth as u32);
            let mut distinct = HashSet::new();
            for q in 0..n_prefix {
                let mut pt = *opp0;
                let mut key = vec![pt.agg.to_bits(), pt.res.to_bits()];
                for a in actions_from_index(q, depth).unwrap() {
                    let moved = apply_action(&pt, a, d_move);
                    pt = protos[nearest_prototype(&moved, protos)].point;
                    key.push(pt.agg.to_bits());
                    key.push(pt.res.to_bits());
                }
                distinct.insert(key);
            }
            let _ = ego0;
            total += n_prefix * N_ACTIONS * distinct.len();
        }
        total
    }

    #[test]
    fn three_move_row_count_matches_tree_enumeration() {
        // single prototype: every move snaps back to it, so all opponent
        // histories merge and the row count hits the floor of 84
        let lone = vec![proto_at(0.0, 0.0, 1)];
        let cfr = random_cfr(3, 2);
        let start = lone[0].point;
        let rows = emit_pair_samples(&cfr, &start, &start, &lone, 1.0).unwrap();
        assert_eq!(rows.len(), 84);
        assert_eq!(rows.len(), expected_rows(&start, &start, &lone, 3, 1.0));

        // rich integer grid: unit moves land exactly on distinct prototypes,
        // so every opponent prefix stays distinguishable
        let mut grid = vec![];
        for agg in -3..=3 {
            for res in -3..=3 {
                grid.push(proto_at(agg as f64, res as f64, ((agg + 3) * 10 + res + 3) as u64 + 100));
            }
        }
        let start = ObjectivePoint::new(0.0, 0.0);
        let rows = emit_pair_samples(&cfr, &start, &start, &grid, 1.0).unwrap();
        assert_eq!(rows.len(), 4 * (1 + 16 + 256));
        assert_eq!(rows.len(), expected_rows(&start, &start, &grid, 3, 1.0));
        assert!(rows.len() >= 84);
    }

    #[test]
    fn emitted_targets_match_node_regrets() {
        let lone = vec![proto_at(0.0, 0.0, 3)];
        let cfr = random_cfr(2, 4);
        let rows = emit_pair_samples(&cfr, &lone[0].point, &lone[0].point, &lone, 1.0).unwrap();
        // single prototype → exactly one opponent variant: rows are in
        // (depth, prefix, action) order
        let mut k = 0;
        for depth in 0..2 {
            for p in 0..N_ACTIONS.pow(depth as u32) {
                for a in 0..N_ACTIONS {
                    assert_eq!(rows[k].target, cfr.node(depth, p)[a]);
                    // candidate one-hot sits in the last 4 features
                    assert_eq!(rows[k].features[36 + a], 1.0);
                    k += 1;
                }
            }
        }
        assert_eq!(k, rows.len());
    }

    #[test]
    fn dataset_csv_roundtrip_is_exact() {
        let lone = vec![proto_at(0.25, -1.5, 5)];
        let cfr = random_cfr(2, 6);
        let rows = emit_pair_samples(&cfr, &lone[0].point, &lone[0].point, &lone, 1.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dataset.csv");
        write_dataset(&path, &rows).unwrap();
        let back = read_dataset(&path).unwrap();
        assert_eq!(rows, back);
        let header = std::fs::read_to_string(&path).unwrap().lines().next().unwrap().to_string();
        assert_eq!(header.split(',').count(), 41);
    }

    fn corridor_track(length_m: f64) -> Track {
        let res = 0.05;
        let w = (length_m / res) as usize;
        let h = 120;
        let mut occ = vec![false; w * h];
        for col in 0..w {
            for row in 0..h {
                let y = (h - 1 - row) as f64 * res + res / 2.0 - 3.0;
                if y.abs() > 2.6 {
                    occ[row * w + col] = true;
                }
            }
        }
        let grid = OccupancyGrid::from_occupancy(occ, w, h, res, (0.0, -3.0, 0.0)).unwrap();
        let wps = (0..(length_m / 0.1) as usize).map(|i| Waypoint { x: i as f64 * 0.1, y: 0.0, theta: 0.0, v: 4.0 }).collect();
        let raceline = Raceline::from_waypoints(wps, false).unwrap();
        Track { id: "corridor".into(), grid: Arc::new(grid), raceline: Arc::new(raceline) }
    }

    #[test]
    fn build_dataset_end_to_end_smoke() {
        let track = corridor_track(50.0);
        let scenario = Scenario {
            map_id: "corridor".into(),
            ego: SpawnPose { x: 3.0, y: -0.45, yaw: 0.0, v: 3.0 },
            opp: SpawnPose { x: 3.0, y: 0.45, yaw: 0.0, v: 3.0 },
            descriptor: "side_by_side".into(),
        };
        let protos = vec![proto_at(-1.0, 1.0, 11), proto_at(1.0, 2.0, 12)];
        let cfg = GameConfig { max_moves: 1, segment_s: 2.0, ..GameConfig::default() };
        let build = build_dataset(&protos[..1], &protos[1..], &protos, &[scenario], &track, &cfg).unwrap();
        assert_eq!(build.tables.len(), 1);
        // depth 0 only: 1 prefix × 4 actions × 1 variant
        assert_eq!(build.samples.len(), 4);
        for s in &build.samples {
            assert!(s.target.is_finite());
        }
        let dir = tempfile::tempdir().unwrap();
        let tpath = dir.path().join("table_0_0.csv");
        write_utility_table(&tpath, &build.tables[0].2).unwrap();
        let text = std::fs::read_to_string(&tpath).unwrap();
        assert_eq!(text.lines().count(), 5); // header + 4 ego sequences
        assert!(build_dataset(&[], &protos, &protos, &[], &track, &cfg).is_err());
    }
}
