//! Offline agent optimization: CMA-ES over the 8-dim parameter box (via a
//! sigmoid reparameterization), batch rollout evaluation, Pareto archive
//! maintenance, near-optimal set extraction, and k-DPP prototype sampling.

mod cma;
mod dpp;
mod genome;
mod pareto;

pub use cma::{cma_ask, cma_tell, CmaState};
pub use dpp::{dpp_sample, mean_pairwise_distance, rbf_kernel};
pub use genome::{decode_genome, encode_genome, BOX_HI, BOX_LO};
pub use pareto::{dominates, near_optimal_set, pareto_update, read_archive, write_archive, ArchiveEntry, ParetoArchive};

use crate::objectives::{evaluate_rollout, make_scenario_set, ObjectivePoint, Scenario};
use crate::planner::AgentParams;
use crate::sim::VehicleParams;
use crate::track::Track;
use crate::util::sub_seed;
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::path::Path;

/// Equal-weight scalar fitness consumed by the (single-objective) CMA-ES;
/// multi-objective structure lives in the archive.
pub fn scalarize(obj: &ObjectivePoint) -> f64 {
    obj.agg + obj.res
}

/// Total order for scalarized comparison: by fitness sum, ties by agg.
pub fn scalarized_order(a: &ObjectivePoint, b: &ObjectivePoint) -> Ordering {
    scalarize(a)
        .partial_cmp(&scalarize(b))
        .unwrap_or(Ordering::Equal)
        .then(a.agg.partial_cmp(&b.agg).unwrap_or(Ordering::Equal))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizeConfig {
    pub generations: usize,
    pub lambda: usize,
    pub scenario_count: usize,
    pub sigma0: f64,
    pub episode_s: f64,
    pub seed: u64,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        OptimizeConfig { generations: 30, lambda: 20, scenario_count: 24, sigma0: 1.0, episode_s: 8.0, seed: 0 }
    }
}

/// Per-generation progress row (the data behind optimization-progress plots).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerationStat {
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_agg: f64,
    pub mean_res: f64,
    pub crash_rate: f64,
    pub overtake_rate: f64,
    pub sigma: f64,
}

#[derive(Debug)]
pub struct OptimizeOutput {
    pub archive: ParetoArchive,
    pub history: Vec<GenerationStat>,
    pub scenarios: Vec<Scenario>,
    pub opponents: Vec<AgentParams>,
}

/// Evaluate one genome against the whole opponent–scenario batch; returns
/// (mean adjusted objective point, crash rate, overtake rate).
pub fn evaluate_genome_batch(
    params: &AgentParams,
    scenarios: &[Scenario],
    opponents: &[AgentParams],
    track: &Track,
    episode_s: f64,
    seed: u64,
) -> (ObjectivePoint, f64, f64) {
    let mut agg_sum = 0.0;
    let mut res_sum = 0.0;
    let mut crashes = 0usize;
    let mut overtakes = 0usize;
    for (i, (sc, opp)) in scenarios.iter().zip(opponents).enumerate() {
        let r = evaluate_rollout(params, opp, sc, track, episode_s, sub_seed(seed, i as u64));
        agg_sum += r.objectives.agg;
        res_sum += r.objectives.res;
        if r.any_collision {
            crashes += 1;
        }
        if r.overtake {
            overtakes += 1;
        }
    }
    let n = scenarios.len().max(1) as f64;
    (ObjectivePoint::new(agg_sum / n, res_sum / n), crashes as f64 / n, overtakes as f64 / n)
}

/// The offline optimization stage: CMA-ES generations of batch-evaluated
/// genomes feeding the Pareto archive. Deterministic in the config seed.
pub fn optimize(track: &Track, cfg: &OptimizeConfig) -> Result<OptimizeOutput> {
    if cfg.generations == 0 || cfg.lambda < 2 || cfg.scenario_count == 0 {
        return Err(Error::invalid("optimize needs generations >= 1, lambda >= 2, scenarios >= 1"));
    }
    let vehicle = VehicleParams::default();
    let (scenarios, opponents) = make_scenario_set(track, &vehicle, cfg.scenario_count, sub_seed(cfg.seed, 0))?;
    let mut state = CmaState::new(8, &[0.0; 8], cfg.sigma0, cfg.lambda)?;
    let mut archive = ParetoArchive::default();
    let mut history = Vec::with_capacity(cfg.generations);
    for generation in 0..cfg.generations {
        let zs = cma_ask(&state, sub_seed(cfg.seed, 1 + generation as u64));
        let decoded: Vec<AgentParams> = zs.iter().map(|z| decode_genome(z)).collect();
        let evals: Vec<(ObjectivePoint, f64, f64)> = decoded
            .par_iter()
            .enumerate()
            .map(|(i, p)| {
                evaluate_genome_batch(p, &scenarios, &opponents, track, cfg.episode_s, sub_seed(cfg.seed, (generation * cfg.lambda + i) as u64))
            })
            .collect();
        let fitnesses: Vec<f64> = evals.iter().map(|(o, _, _)| scalarize(o)).collect();
        for (i, (p, (o, _, _))) in decoded.iter().zip(&evals).enumerate() {
            pareto_update(
                &mut archive,
                ArchiveEntry { params: *p, point: *o, generation, genome_id: generation * cfg.lambda + i },
            );
        }
        let lam = cfg.lambda as f64;
        let stat = GenerationStat {
            generation,
            best_fitness: fitnesses.iter().copied().fold(f64::INFINITY, f64::min),
            mean_agg: evals.iter().map(|(o, _, _)| o.agg).sum::<f64>() / lam,
            mean_res: evals.iter().map(|(o, _, _)| o.res).sum::<f64>() / lam,
            crash_rate: evals.iter().map(|(_, c, _)| c).sum::<f64>() / lam,
            overtake_rate: evals.iter().map(|(_, _, o)| o).sum::<f64>() / lam,
            sigma: state.sigma,
        };
        log::info!(
            "generation {}: best fitness {:.3}, mean (agg {:.3}, res {:.3}), crash {:.2}, overtake {:.2}, front {}",
            stat.generation,
            stat.best_fitness,
            stat.mean_agg,
            stat.mean_res,
            stat.crash_rate,
            stat.overtake_rate,
            archive.entries.len()
        );
        history.push(stat);
        state = cma_tell(&state, &zs, &fitnesses)?;
    }
    Ok(OptimizeOutput { archive, history, scenarios, opponents })
}

/// One snappable optimized agent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prototype {
    pub params: AgentParams,
    pub point: ObjectivePoint,
}

/// The prototype extraction product: the near-optimal set with front
/// membership flags and two disjoint k-DPP subsets (indices into
/// `near_optimal`).
#[derive(Debug, Clone)]
pub struct PrototypeSets {
    pub near_optimal: Vec<Prototype>,
    pub on_front: Vec<bool>,
    pub dpp1: Vec<usize>,
    pub dpp2: Vec<usize>,
}

impl PrototypeSets {
    pub fn dpp1_prototypes(&self) -> Vec<Prototype> {
        self.dpp1.iter().map(|&i| self.near_optimal[i]).collect()
    }

    pub fn dpp2_prototypes(&self) -> Vec<Prototype> {
        self.dpp2.iter().map(|&i| self.near_optimal[i]).collect()
    }
}

/// Extract the near-optimal set and sample the two disjoint diverse subsets:
/// dpp1 from P_no, dpp2 from P_no minus dpp1.
pub fn select_prototypes(archive: &ParetoArchive, d_near: f64, n_dpp: usize, bandwidth: f64, seed: u64) -> Result<PrototypeSets> {
    if archive.entries.is_empty() {
        return Err(Error::invalid("empty Pareto front"));
    }
    let no = near_optimal_set(archive, d_near);
    if no.len() < 2 * n_dpp {
        return Err(Error::invalid(format!(
            "near-optimal set has {} members; need at least {} for two disjoint size-{n_dpp} subsets",
            no.len(),
            2 * n_dpp
        )));
    }
    let points: Vec<ObjectivePoint> = no.iter().map(|e| e.point).collect();
    let dpp1 = dpp_sample(&points, n_dpp, bandwidth, sub_seed(seed, 1))?;
    let remaining: Vec<usize> = (0..no.len()).filter(|i| !dpp1.contains(i)).collect();
    let rem_points: Vec<ObjectivePoint> = remaining.iter().map(|&i| points[i]).collect();
    let dpp2: Vec<usize> = dpp_sample(&rem_points, n_dpp, bandwidth, sub_seed(seed, 2))?
        .into_iter()
        .map(|i| remaining[i])
        .collect();
    let front_ids: Vec<usize> = archive.entries.iter().map(|e| e.genome_id).collect();
    let on_front = no.iter().map(|e| front_ids.contains(&e.genome_id)).collect();
    let near_optimal = no.iter().map(|e| Prototype { params: e.params, point: e.point }).collect();
    Ok(PrototypeSets { near_optimal, on_front, dpp1, dpp2 })
}

/// Persist prototype sets: one row per near-optimal member with set labels.
pub fn write_prototypes(path: &Path, sets: &PrototypeSets) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "index", "gamma", "p_mc", "p_al", "p_hys", "p_do", "p_co", "p_v1", "p_v2", "agg", "res", "on_front", "in_dpp1", "in_dpp2",
    ])?;
    for (i, p) in sets.near_optimal.iter().enumerate() {
        let arr = p.params.to_array();
        let mut rec = vec![i.to_string()];
        rec.extend(arr.iter().map(|v| v.to_string()));
        rec.push(p.point.agg.to_string());
        rec.push(p.point.res.to_string());
        rec.push((sets.on_front[i] as u8).to_string());
        rec.push((sets.dpp1.contains(&i) as u8).to_string());
        rec.push((sets.dpp2.contains(&i) as u8).to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_prototypes(path: &Path) -> Result<PrototypeSets> {
    let mut r = csv::Reader::from_path(path)?;
    let mut sets = PrototypeSets { near_optimal: vec![], on_front: vec![], dpp1: vec![], dpp2: vec![] };
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != 14 {
            return Err(Error::parse(format!("prototype row has {} fields, expected 14", rec.len())));
        }
        let f = |i: usize| -> Result<f64> { rec[i].parse().map_err(|e| Error::parse(format!("field {i}: {e}"))) };
        let params = AgentParams::from_array(&[f(1)?, f(2)?, f(3)?, f(4)?, f(5)?, f(6)?, f(7)?, f(8)?])?;
        let point = ObjectivePoint::new(f(9)?, f(10)?);
        sets.near_optimal.push(Prototype { params, point });
        sets.on_front.push(rec[11].trim() == "1");
        if rec[12].trim() == "1" {
            sets.dpp1.push(row);
        }
        if rec[13].trim() == "1" {
            sets.dpp2.push(row);
        }
    }
    Ok(sets)
}

/// Persist the per-generation progress table.
pub fn write_history(path: &Path, history: &[GenerationStat]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["generation", "best_fitness", "mean_agg", "mean_res", "crash_rate", "overtake_rate", "sigma"])?;
    for h in history {
        w.write_record(&[
            h.generation.to_string(),
            h.best_fitness.to_string(),
            h.mean_agg.to_string(),
            h.mean_res.to_string(),
            h.crash_rate.to_string(),
            h.overtake_rate.to_string(),
            h.sigma.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
