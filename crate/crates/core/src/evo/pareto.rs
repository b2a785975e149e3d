use crate::objectives::ObjectivePoint;
use crate::planner::AgentParams;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// One evaluated agent: parameters, batch-mean objective point, and where it
/// came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArchiveEntry {
    pub params: AgentParams,
    pub point: ObjectivePoint,
    pub generation: usize,
    pub genome_id: usize,
}

/// Nondominated archive (minimization in both coordinates) plus the
/// append-only log of everything ever evaluated.
#[derive(Debug, Clone, Default)]
pub struct ParetoArchive {
    pub entries: Vec<ArchiveEntry>,
    pub all_explored: Vec<ArchiveEntry>,
}

/// a dominates b: no worse in both coordinates, strictly better in one.
pub fn dominates(a: &ObjectivePoint, b: &ObjectivePoint) -> bool {
    a.agg <= b.agg && a.res <= b.res && (a.agg < b.agg || a.res < b.res)
}

/// Append the candidate to the exploration log and insert it into the front
/// iff no incumbent dominates it, evicting anything it dominates.
pub fn pareto_update(archive: &mut ParetoArchive, candidate: ArchiveEntry) {
    archive.all_explored.push(candidate);
    if !candidate.point.is_finite() {
        return;
    }
    if archive.entries.iter().any(|e| dominates(&e.point, &candidate.point)) {
        return;
    }
    archive.entries.retain(|e| !dominates(&candidate.point, &e.point));
    archive.entries.push(candidate);
}

/// All explored points within `d_near` (Euclidean, objective space) of some
/// front entry. Always a superset of the front itself.
pub fn near_optimal_set(archive: &ParetoArchive, d_near: f64) -> Vec<ArchiveEntry> {
    archive
        .all_explored
        .iter()
        .filter(|e| {
            e.point.is_finite()
                && archive
                    .entries
                    .iter()
                    .any(|f| f.point.distance(&e.point) <= d_near)
        })
        .copied()
        .collect()
}

/// Persist the full exploration log (front membership is reconstructed on
/// load by replaying dominance).
pub fn write_archive(path: &Path, archive: &ParetoArchive) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "gamma", "p_mc", "p_al", "p_hys", "p_do", "p_co", "p_v1", "p_v2", "agg", "res", "generation", "genome_id",
    ])?;
    for e in &archive.all_explored {
        let p = e.params.to_array();
        let mut rec: Vec<String> = p.iter().map(|v| v.to_string()).collect();
        rec.push(e.point.agg.to_string());
        rec.push(e.point.res.to_string());
        rec.push(e.generation.to_string());
        rec.push(e.genome_id.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_archive(path: &Path) -> Result<ParetoArchive> {
    let mut r = csv::Reader::from_path(path)?;
    let mut archive = ParetoArchive::default();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != 12 {
            return Err(Error::parse(format!("archive row has {} fields, expected 12", rec.len())));
        }
        let f = |i: usize| -> Result<f64> { rec[i].parse().map_err(|e| Error::parse(format!("field {i}: {e}"))) };
        let params = AgentParams::from_array(&[f(0)?, f(1)?, f(2)?, f(3)?, f(4)?, f(5)?, f(6)?, f(7)?])?;
        let point = ObjectivePoint::new(f(8)?, f(9)?);
        let generation = rec[10].parse().map_err(|e| Error::parse(format!("generation: {e}")))?;
        let genome_id = rec[11].parse().map_err(|e| Error::parse(format!("genome_id: {e}")))?;
        pareto_update(&mut archive, ArchiveEntry { params, point, generation, genome_id });
    }
    Ok(archive)
}
