//! Viewpoint selection: candidate sampling, ray-cast information gain,
//! distance-discounted utility, and the comparison planners.

mod gain;
mod sampling;

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::attention::AttentionState;
use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, Vec3, Viewpoint};
use crate::semantic_map::SemanticVoxelMap;

pub use gain::{expected_gain, visible_voxels, GainEvaluator, GainMode};
pub use sampling::{sample_candidates, SamplingConstraint};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PlannerKind {
    SemanticNbv,
    VolumetricNbv,
    PredefinedNarrow,
    PredefinedWide,
    Random,
}

impl PlannerKind {
    pub const ALL: [PlannerKind; 5] = [
        PlannerKind::SemanticNbv,
        PlannerKind::VolumetricNbv,
        PlannerKind::PredefinedWide,
        PlannerKind::PredefinedNarrow,
        PlannerKind::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PlannerKind::SemanticNbv => "semantic",
            PlannerKind::VolumetricNbv => "volumetric",
            PlannerKind::PredefinedNarrow => "predefined-narrow",
            PlannerKind::PredefinedWide => "predefined-wide",
            PlannerKind::Random => "random",
        }
    }

    pub fn gain_mode(self) -> Option<GainMode> {
        match self {
            PlannerKind::SemanticNbv => Some(GainMode::Semantic),
            PlannerKind::VolumetricNbv => Some(GainMode::Volumetric),
            _ => None,
        }
    }

    pub fn predefined(self) -> Option<ScanWidth> {
        match self {
            PlannerKind::PredefinedNarrow => Some(ScanWidth::Narrow),
            PlannerKind::PredefinedWide => Some(ScanWidth::Wide),
            _ => None,
        }
    }
}

impl fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PlannerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PlannerKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown planner `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScanWidth {
    /// 18 degrees wide as seen from the plant.
    Narrow,
    /// 54 degrees wide as seen from the plant.
    Wide,
}

impl ScanWidth {
    pub fn half_angle(self) -> f64 {
        match self {
            ScanWidth::Narrow => 9f64.to_radians(),
            ScanWidth::Wide => 27f64.to_radians(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannerConfig {
    pub kind: PlannerKind,
    pub n_candidates: usize,
    pub a_max: usize,
    pub initial_viewpoint: Viewpoint,
    pub attention_enabled: bool,
    pub ray_stride: usize,
    pub sampling: SamplingConstraint,
    /// Distance from the sampling plane to the plant, for predefined scans.
    pub plant_distance: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            kind: PlannerKind::SemanticNbv,
            n_candidates: 27,
            a_max: 10,
            initial_viewpoint: default_initial_viewpoint(),
            attention_enabled: true,
            ray_stride: 8,
            sampling: SamplingConstraint::default_planar(),
            plant_distance: 0.35,
        }
    }
}

/// Start pose: `(0.35, 0.22, 0.90)` yawed 30 degrees toward `-y`.
pub fn default_initial_viewpoint() -> Viewpoint {
    Viewpoint::from_pan_tilt(Vec3::new(0.35, 0.22, 0.90), -30f64.to_radians(), 0.0)
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_candidates == 0 {
            return Err(Error::invalid("n_candidates", "must be at least 1"));
        }
        if self.a_max == 0 {
            return Err(Error::invalid("a_max", "must be at least 1"));
        }
        if self.ray_stride == 0 {
            return Err(Error::invalid("ray_stride", "must be at least 1"));
        }
        if !(self.plant_distance > 0.0) {
            return Err(Error::invalid("plant_distance", "must be positive"));
        }
        self.sampling.validate()
    }
}

/// Score of one candidate viewpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainReport {
    pub viewpoint: Viewpoint,
    pub gain: f64,
    pub distance: f64,
    pub utility: f64,
}

impl GainReport {
    pub fn new(viewpoint: Viewpoint, gain: f64, current: &Viewpoint) -> Self {
        let distance = current.distance_to(&viewpoint);
        Self {
            viewpoint,
            gain,
            distance,
            utility: utility(gain, current, &viewpoint),
        }
    }
}

/// Gain discounted by the straight-line travel distance: `gain * exp(-d)`.
pub fn utility(gain: f64, current: &Viewpoint, candidate: &Viewpoint) -> f64 {
    gain * (-current.distance_to(candidate)).exp()
}

/// Index of the highest-utility report; ties go to the lowest index.
pub fn select_best(reports: &[GainReport]) -> Result<usize> {
    let mut best: Option<usize> = None;
    for (i, r) in reports.iter().enumerate() {
        if best.is_none_or(|b| r.utility > reports[b].utility) {
            best = Some(i);
        }
    }
    best.ok_or(Error::NoCandidates)
}

/// Ten-view open-loop scan on the plane `x = plane_center.x`: five rows
/// from bottom to top, two columns visited in serpentine order, all with
/// the identity orientation.
///
/// The columns sit at `plane_center.y +- plant_distance * tan(half_angle)`
/// so that they subtend the scan angle at the plant.
pub fn predefined_sequence(
    kind: ScanWidth,
    plane_center: Vec3,
    plant_distance: f64,
    plane_height: f64,
) -> Result<Vec<Viewpoint>> {
    if !(plant_distance > 0.0) {
        return Err(Error::invalid("plant_distance", "must be positive"));
    }
    if !(plane_height >= 0.0) {
        return Err(Error::invalid("plane_height", "must be non-negative"));
    }
    let half = plant_distance * kind.half_angle().tan();
    let bottom = plane_center.z - 0.5 * plane_height;
    let mut out = Vec::with_capacity(10);
    for row in 0..5 {
        let z = bottom + plane_height * row as f64 / 4.0;
        let cols = if row % 2 == 0 { [-half, half] } else { [half, -half] };
        for dy in cols {
            out.push(Viewpoint::at(Vec3::new(plane_center.x, plane_center.y + dy, z)));
        }
    }
    Ok(out)
}

/// Outcome of one planning step.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanStep {
    pub chosen: GainReport,
    pub chosen_index: usize,
    pub n_candidates: usize,
}

/// A planner with its per-episode state (the position in a predefined scan).
#[derive(Debug, Clone)]
pub struct Planner {
    config: PlannerConfig,
    intr: CameraIntrinsics,
    sequence: Vec<Viewpoint>,
    cursor: usize,
}

impl Planner {
    pub fn new(config: PlannerConfig, intr: CameraIntrinsics) -> Result<Self> {
        config.validate()?;
        intr.validate()?;
        let sequence = match (config.kind.predefined(), &config.sampling) {
            (Some(width), SamplingConstraint::Planar { center, height, .. }) => {
                predefined_sequence(width, *center, config.plant_distance, *height)?
            }
            (Some(_), _) => {
                return Err(Error::Config("predefined scans need planar sampling".into()));
            }
            (None, _) => Vec::new(),
        };
        Ok(Self {
            config,
            intr,
            sequence,
            cursor: 0,
        })
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.config
    }

    /// First pose of an episode. Predefined scans start at their own first
    /// view; every other planner starts at the configured initial viewpoint.
    pub fn first_view(&self) -> Viewpoint {
        self.config.initial_viewpoint
    }

    /// Chooses the next viewpoint.
    ///
    /// `candidate_rng` drives candidate sampling and `choice_rng` the random
    /// planner's pick, so that planners sharing a candidate stream see the
    /// same candidate sets.
    pub fn plan_next<R: Rng + ?Sized, S: Rng + ?Sized>(
        &mut self,
        map: &SemanticVoxelMap,
        attention: &AttentionState,
        current: &Viewpoint,
        candidate_rng: &mut R,
        choice_rng: &mut S,
    ) -> Result<PlanStep> {
        let cfg = &self.config;
        let attention = if cfg.attention_enabled {
            attention.clone()
        } else {
            AttentionState::unrestricted()
        };
        if cfg.kind.predefined().is_some() {
            let Some(&next) = self.sequence.get(self.cursor) else {
                return Err(Error::SequenceExhausted {
                    len: self.sequence.len(),
                });
            };
            self.cursor += 1;
            let gain = expected_gain(map, &next, &attention, &self.intr, cfg.ray_stride, GainMode::Semantic);
            return Ok(PlanStep {
                chosen: GainReport::new(next, gain, current),
                chosen_index: 0,
                n_candidates: 1,
            });
        }

        let candidates = sample_candidates(&cfg.sampling, cfg.n_candidates, candidate_rng)?;
        let (index, report) = match cfg.kind.gain_mode() {
            Some(mode) => {
                let mut eval = GainEvaluator::new(map, &attention, &self.intr, cfg.ray_stride, mode);
                let reports: Vec<GainReport> = candidates
                    .iter()
                    .map(|c| GainReport::new(*c, eval.gain(c), current))
                    .collect();
                let i = select_best(&reports)?;
                (i, reports[i])
            }
            None => {
                let i = choice_rng.gen_range(0..candidates.len());
                let c = candidates[i];
                let gain = expected_gain(map, &c, &attention, &self.intr, cfg.ray_stride, GainMode::Semantic);
                (i, GainReport::new(c, gain, current))
            }
        };
        Ok(PlanStep {
            chosen: report,
            chosen_index: index,
            n_candidates: candidates.len(),
        })
    }
}
