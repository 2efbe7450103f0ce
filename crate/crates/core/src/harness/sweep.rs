use std::io::Write;

use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{prepare_scene, run_episode, EpisodeRecord, ExperimentConfig};
use crate::error::Result;
use crate::planner::PlannerKind;

pub const RESULTS_HEADER: &str = "scene,rotation,planner,seed,action,pco,n_clusters,n_fp,gain,distance,utility";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResults {
    pub a_max: usize,
    pub planners: Vec<PlannerKind>,
    /// Ordered by scene, rotation, then planner list order.
    pub episodes: Vec<EpisodeRecord>,
}

/// Runs every scene x rotation x planner episode. Episodes run in parallel;
/// the result order does not depend on scheduling.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepResults> {
    config.validate()?;
    let a_max = config.planner.a_max;
    if config.planners.is_empty() {
        return Ok(SweepResults {
            a_max,
            planners: Vec::new(),
            episodes: Vec::new(),
        });
    }
    let pairs: Vec<(usize, usize)> = (0..config.n_scenes)
        .flat_map(|s| (0..config.n_rotations).map(move |r| (s, r)))
        .collect();
    let scenes = pairs
        .par_iter()
        .map(|&(s, r)| prepare_scene(config, s, r))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, PlannerKind)> = (0..scenes.len())
        .flat_map(|i| config.planners.iter().map(move |&k| (i, k)))
        .collect();
    let episodes = jobs
        .par_iter()
        .map(|&(i, k)| run_episode(&scenes[i], config, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResults {
        a_max,
        planners: config.planners.clone(),
        episodes,
    })
}

/// PCO after `action` views. Episodes that stopped early keep their final
/// value.
pub fn pco_at(episode: &EpisodeRecord, action: usize) -> f64 {
    episode
        .actions
        .iter()
        .take_while(|a| a.action <= action)
        .last()
        .map_or(0.0, |a| a.pco())
}

fn fp_at(episode: &EpisodeRecord, action: usize) -> usize {
    episode
        .actions
        .iter()
        .take_while(|a| a.action <= action)
        .last()
        .map_or(0, |a| a.n_fp)
}

/// Mean and half-width of the 95% Student-t confidence interval.
pub fn mean_ci(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);
    (mean, t * (var / n as f64).sqrt())
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionSummary {
    pub planner: PlannerKind,
    pub action: usize,
    pub n: usize,
    pub mean_pco: f64,
    pub ci_half_width: f64,
    pub median_pco: f64,
    pub mean_fp: f64,
}

/// Per planner and action: mean PCO with its confidence interval, median
/// PCO and mean false-positive count.
pub fn summarize(results: &SweepResults) -> Vec<ActionSummary> {
    let mut out = Vec::new();
    for &planner in &results.planners {
        let eps: Vec<&EpisodeRecord> = results.episodes.iter().filter(|e| e.planner == planner).collect();
        for action in 1..=results.a_max {
            let mut pcos: Vec<f64> = eps.iter().map(|e| pco_at(e, action)).collect();
            let fps: Vec<f64> = eps.iter().map(|e| fp_at(e, action) as f64).collect();
            let (mean_pco, ci_half_width) = mean_ci(&pcos);
            out.push(ActionSummary {
                planner,
                action,
                n: eps.len(),
                mean_pco,
                ci_half_width,
                median_pco: median(&mut pcos),
                mean_fp: mean_ci(&fps).0,
            });
        }
    }
    out
}

/// One row per episode and action `1..=a_max`. Rows after an early stop
/// repeat the final state with zero gain, distance and utility.
pub fn write_results_csv<W: Write>(results: &SweepResults, mut out: W) -> Result<()> {
    writeln!(out, "{RESULTS_HEADER}")?;
    for e in &results.episodes {
        let Some(last) = e.actions.last() else {
            continue;
        };
        for action in 1..=results.a_max.max(last.action) {
            let (rec, moved) = match e.actions.get(action - 1) {
                Some(r) => (r, true),
                None => (last, false),
            };
            let (gain, distance, utility) = if moved {
                (rec.gain, rec.distance, rec.utility)
            } else {
                (0.0, 0.0, 0.0)
            };
            writeln!(
                out,
                "{},{},{},{},{},{:.6},{},{},{:.6},{:.6},{:.6}",
                e.scene,
                e.rotation,
                e.planner.name(),
                e.seed,
                action,
                rec.pco(),
                rec.n_clusters,
                rec.n_fp,
                gain,
                distance,
                utility
            )?;
        }
    }
    Ok(())
}

pub fn write_plot_csv<W: Write>(summary: &[ActionSummary], mut out: W) -> Result<()> {
    writeln!(out, "planner,action,n,mean_pco,ci_low,ci_high,median_pco,mean_fp")?;
    for s in summary {
        writeln!(
            out,
            "{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6}",
            s.planner.name(),
            s.action,
            s.n,
            s.mean_pco,
            s.mean_pco - s.ci_half_width,
            s.mean_pco + s.ci_half_width,
            s.median_pco,
            s.mean_fp
        )?;
    }
    Ok(())
}
