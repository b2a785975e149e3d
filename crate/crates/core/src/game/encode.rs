//! Fixed-length feature encoding of an infoset and a candidate action for the
//! regret prediction model.

use super::{Action, Infoset, N_ACTIONS};
use crate::{Error, Result};

/// Objective-point slots per player (initial point + up to 3 moves).
pub const POINT_SLOTS: usize = 4;
/// Recorded ego actions (one fewer than point slots).
pub const ACTION_SLOTS: usize = 3;
/// Total feature length: 2·(4 points × 2 coords) + 2·(4 mask bits)
/// + 3 action slots × 4 one-hot + 4 candidate one-hot = 40.
pub const FEATURE_LEN: usize = 2 * POINT_SLOTS * 2 + 2 * POINT_SLOTS + ACTION_SLOTS * N_ACTIONS + N_ACTIONS;

/// Encode an infoset plus a candidate action into the fixed 40-vector.
///
/// Layout: ego points (8) | opp points (8) | ego slot mask (4) | opp slot
/// mask (4) | ego action one-hots (12) | candidate one-hot (4). Unfilled
/// slots are zero with mask zero.
pub fn encode_infoset(infoset: &Infoset, candidate: Action) -> Result<[f64; FEATURE_LEN]> {
    if infoset.ego_points.len() > POINT_SLOTS || infoset.opp_points.len() > POINT_SLOTS {
        return Err(Error::invalid(format!("objective history exceeds {POINT_SLOTS} slots")));
    }
    if infoset.ego_actions.len() > ACTION_SLOTS {
        return Err(Error::invalid(format!("action history exceeds {ACTION_SLOTS} slots")));
    }
    let mut f = [0.0; FEATURE_LEN];
    for (i, p) in infoset.ego_points.iter().enumerate() {
        f[2 * i] = p.agg;
        f[2 * i + 1] = p.res;
        f[4 * POINT_SLOTS + i] = 1.0;
    }
    for (i, p) in infoset.opp_points.iter().enumerate() {
        f[2 * POINT_SLOTS + 2 * i] = p.agg;
        f[2 * POINT_SLOTS + 2 * i + 1] = p.res;
        f[5 * POINT_SLOTS + i] = 1.0;
    }
    let actions_base = 6 * POINT_SLOTS;
    for (i, a) in infoset.ego_actions.iter().enumerate() {
        f[actions_base + N_ACTIONS * i + a.id()] = 1.0;
    }
    f[actions_base + N_ACTIONS * ACTION_SLOTS + candidate.id()] = 1.0;
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::apply_action;
    use crate::objectives::ObjectivePoint;
    use std::collections::HashSet;

    #[test]
    fn root_infoset_layout() {
        let root = Infoset {
            ego_points: vec![ObjectivePoint::new(0.5, 2.0)],
            opp_points: vec![ObjectivePoint::new(-1.0, 3.0)],
            ego_actions: vec![],
        };
        let f = encode_infoset(&root, Action::AggUp).unwrap();
        assert_eq!(f.len(), 40);
        assert_eq!(&f[0..2], &[0.5, 2.0]);
        assert_eq!(&f[2..8], &[0.0; 6]);
        assert_eq!(&f[8..10], &[-1.0, 3.0]);
        assert_eq!(&f[16..20], &[1.0, 0.0, 0.0, 0.0]); // ego mask
        assert_eq!(&f[20..24], &[1.0, 0.0, 0.0, 0.0]); // opp mask
        assert_eq!(&f[24..36], &[0.0; 12]); // no actions yet
        assert_eq!(&f[36..40], &[1.0, 0.0, 0.0, 0.0]); // candidate
    }

    #[test]
    fn candidate_block_is_never_all_zero() {
        let root = Infoset { ego_points: vec![ObjectivePoint::new(0.0, 0.0)], opp_points: vec![ObjectivePoint::new(0.0, 0.0)], ego_actions: vec![] };
        for a in Action::ALL {
            let f = encode_infoset(&root, a).unwrap();
            assert_eq!(f[36..40].iter().sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn overlong_histories_are_rejected() {
        let p = ObjectivePoint::new(0.0, 0.0);
        let too_many_points = Infoset { ego_points: vec![p; 5], opp_points: vec![p], ego_actions: vec![] };
        assert!(encode_infoset(&too_many_points, Action::AggUp).is_err());
        let too_many_actions = Infoset { ego_points: vec![p; 4], opp_points: vec![p], ego_actions: vec![Action::AggUp; 4] };
        assert!(encode_infoset(&too_many_actions, Action::AggUp).is_err());
    }

    /// Exhaustive 2-move reachability: every (infoset, candidate) pair the
    /// model can be queried with must encode to a distinct vector.
    #[test]
    fn encoding_is_injective_over_two_move_reachable_set() {
        let d = 1.0;
        let ego0 = ObjectivePoint::new(0.0, 0.0);
        let opp0 = ObjectivePoint::new(0.5, 1.5);
        let mut seen = HashSet::new();
        let mut count = 0usize;
        for depth in 0..2usize {
            let prefixes = sequences(depth);
            for ego_seq in &prefixes {
                let ego_points = walk(ego0, ego_seq, d);
                for opp_seq in &prefixes {
                    let opp_points = walk(opp0, opp_seq, d);
                    let infoset = Infoset { ego_points: ego_points.clone(), opp_points, ego_actions: ego_seq.clone() };
                    for candidate in Action::ALL {
                        let f = encode_infoset(&infoset, candidate).unwrap();
                        let key: Vec<u64> = f.iter().map(|v| v.to_bits()).collect();
                        assert!(seen.insert(key), "encoding collision at depth {depth}");
                        count += 1;
                    }
                }
            }
        }
        assert_eq!(count, 4 * (1 + 16));
    }

    fn sequences(len: usize) -> Vec<Vec<Action>> {
        if len == 0 {
            return vec![vec![]];
        }
        let mut out = vec![];
        for head in Action::ALL {
            for tail in sequences(len - 1) {
                let mut s = vec![head];
                s.extend(tail);
                out.push(s);
            }
        }
        out
    }

    fn walk(start: ObjectivePoint, seq: &[Action], d: f64) -> Vec<ObjectivePoint> {
        let mut pts = vec![start];
        for &a in seq {
            pts.push(apply_action(pts.last().unwrap(), a, d));
        }
        pts
    }
}
