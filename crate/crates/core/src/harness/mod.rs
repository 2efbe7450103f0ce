//! Experiment driver: seeded sense-map-plan episodes over procedural plants,
//! sweeps over planners and ablations, and CSV output.

mod config;
mod sweep;

use std::path::PathBuf;
use std::time::{Duration, Instant};

use nalgebra::UnitQuaternion;
use rand::Rng;

use crate::attention::{update_attention, AttentionParams, AttentionState};
use crate::clustering::{extract_clusters, Cluster, ClusteringParams};
use crate::error::{Error, Result};
use crate::evaluation::{EpisodeScore, EvalParams, GroundTruth};
use crate::geometry::{CameraIntrinsics, RandomStream, Vec3, Viewpoint, WorkspaceBounds};
use crate::planner::{GainReport, Planner, PlannerConfig, PlannerKind, SamplingConstraint};
use crate::scene_sim::{add_depth_noise, detect, generate_plant, render_view, to_semantic_cloud, DetectionNoise};
use crate::scene_sim::{LabeledScene, PlantParams};
use crate::semantic_map::{OccupancyModel, SemanticVoxelMap, DEFAULT_RESOLUTION};

pub use config::{parse_config, write_config};
pub use sweep::{
    mean_ci, pco_at, run_sweep, summarize, write_plot_csv, write_results_csv, ActionSummary, SweepResults,
    RESULTS_HEADER,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingKind {
    Planar,
    Cylindrical,
}

impl SamplingKind {
    pub fn name(self) -> &'static str {
        match self {
            SamplingKind::Planar => "planar",
            SamplingKind::Cylindrical => "cylindrical",
        }
    }
}

/// Ranges the per-scene plant parameters are drawn from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantRanges {
    pub height: (f64, f64),
    pub nodes: (usize, usize),
    pub leaflets: (usize, usize),
    pub trusses: (usize, usize),
    pub leaflet_removal: f64,
}

impl Default for PlantRanges {
    fn default() -> Self {
        Self {
            height: (0.6, 0.75),
            nodes: (6, 8),
            leaflets: (5, 7),
            trusses: (2, 3),
            leaflet_removal: 0.0,
        }
    }
}

impl PlantRanges {
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> PlantParams {
        PlantParams {
            stem_height: if self.height.0 < self.height.1 {
                rng.gen_range(self.height.0..self.height.1)
            } else {
                self.height.0
            },
            n_nodes: rng.gen_range(self.nodes.0..=self.nodes.1),
            leaflets_per_petiole: rng.gen_range(self.leaflets.0..=self.leaflets.1),
            n_trusses: rng.gen_range(self.trusses.0..=self.trusses.1),
            leaflet_removal: self.leaflet_removal,
        }
    }

    fn validate(&self) -> Result<()> {
        let ordered = self.height.0 <= self.height.1
            && self.nodes.0 <= self.nodes.1
            && self.leaflets.0 <= self.leaflets.1
            && self.trusses.0 <= self.trusses.1;
        if !ordered {
            return Err(Error::invalid("plant", "range bounds out of order"));
        }
        for p in [
            PlantParams {
                stem_height: self.height.0,
                n_nodes: self.nodes.0,
                leaflets_per_petiole: self.leaflets.0,
                n_trusses: self.trusses.0,
                leaflet_removal: self.leaflet_removal,
            },
            PlantParams {
                stem_height: self.height.1,
                n_nodes: self.nodes.1,
                leaflets_per_petiole: self.leaflets.1,
                n_trusses: self.trusses.1.min(self.nodes.1),
                leaflet_removal: self.leaflet_removal,
            },
        ] {
            p.validate()?;
        }
        if self.trusses.1 > self.nodes.0 {
            return Err(Error::invalid("plant", "more trusses than nodes"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub n_scenes: usize,
    pub n_rotations: usize,
    pub planners: Vec<PlannerKind>,
    pub plant: PlantRanges,
    /// Nominal plant base; the workspace bounds and attention assume it.
    pub base: Vec3,
    /// Half-widths of the uniform x/y offset of the true base.
    pub base_uncertainty: (f64, f64),
    pub known_position: bool,
    pub known_ooi: bool,
    pub bounds_min: Vec3,
    pub bounds_max: Vec3,
    /// `kind` is overridden by each entry of `planners`.
    pub planner: PlannerConfig,
    pub sampling: SamplingKind,
    pub eval: EvalParams,
    pub noise: DetectionNoise,
    /// Standard deviation of depth noise in meters; 0 disables it.
    pub depth_noise: f64,
    pub camera: CameraIntrinsics,
    pub cloud_stride: usize,
    pub map_resolution: f64,
    pub occupancy: OccupancyModel,
    pub clustering: ClusteringParams,
    pub attention: AttentionParams,
    /// Stop an episode once every object is detected.
    pub early_stop: bool,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            n_scenes: 8,
            n_rotations: 12,
            planners: PlannerKind::ALL.to_vec(),
            plant: PlantRanges::default(),
            base: Vec3::new(0.7, 0.0, 0.8),
            base_uncertainty: (0.1, 0.3),
            known_position: false,
            known_ooi: false,
            bounds_min: Vec3::new(0.4, -0.55, 0.75),
            bounds_max: Vec3::new(1.0, 0.55, 1.7),
            planner: PlannerConfig::default(),
            sampling: SamplingKind::Planar,
            eval: EvalParams::default(),
            noise: DetectionNoise::default(),
            depth_noise: 0.0,
            camera: CameraIntrinsics::default(),
            cloud_stride: 2,
            map_resolution: DEFAULT_RESOLUTION,
            occupancy: OccupancyModel::default(),
            clustering: ClusteringParams::default(),
            attention: AttentionParams::default(),
            early_stop: true,
            output: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_scenes == 0 {
            return Err(Error::invalid("scenes", "need at least one scene"));
        }
        if self.n_rotations == 0 || 360 % self.n_rotations != 0 {
            return Err(Error::invalid("rotations", "must divide 360"));
        }
        if self.cloud_stride == 0 {
            return Err(Error::invalid("camera.cloud_stride", "must be at least 1"));
        }
        if !(self.map_resolution > 0.0) {
            return Err(Error::invalid("map.resolution", "must be positive"));
        }
        if !(self.depth_noise >= 0.0) {
            return Err(Error::invalid("noise.depth_sigma", "must be non-negative"));
        }
        if !(self.base_uncertainty.0 >= 0.0 && self.base_uncertainty.1 >= 0.0) {
            return Err(Error::invalid("plant.uncertainty", "must be non-negative"));
        }
        self.plant.validate()?;
        self.bounds()?;
        self.planner_config(PlannerKind::SemanticNbv).validate()?;
        self.eval.validate()?;
        self.noise.validate()?;
        self.camera.validate()?;
        self.occupancy.validate()?;
        self.clustering.validate()?;
        self.attention.validate()
    }

    pub fn bounds(&self) -> Result<WorkspaceBounds> {
        WorkspaceBounds::new(self.bounds_min, self.bounds_max, self.base)
    }

    /// Planner settings for one planner kind.
    pub fn planner_config(&self, kind: PlannerKind) -> PlannerConfig {
        let sampling = match self.sampling {
            SamplingKind::Planar => self.planner.sampling.clone(),
            SamplingKind::Cylindrical => {
                SamplingConstraint::default_cylindrical(self.base + Vec3::new(0.0, 0.0, 0.35))
            }
        };
        PlannerConfig {
            kind,
            sampling,
            ..self.planner.clone()
        }
    }

    fn effective_uncertainty(&self) -> (f64, f64) {
        if self.known_position {
            (0.0, 0.0)
        } else {
            self.base_uncertainty
        }
    }
}

// Stream tags.
const SCENE: u64 = 1;
const PLACEMENT: u64 = 2;
const EPISODE: u64 = 3;
const DETECTION: u64 = 4;
const CANDIDATES: u64 = 5;
const CHOICE: u64 = 6;
const DEPTH: u64 = 7;

fn planner_tag(kind: PlannerKind) -> u64 {
    kind as u64 + 100
}

/// One plant at one rotation, placed in the workspace, with its ground
/// truth.
#[derive(Debug, Clone)]
pub struct PreparedScene {
    pub scene_index: usize,
    pub rotation_index: usize,
    pub params: PlantParams,
    pub scene: LabeledScene,
    pub truth: GroundTruth,
    /// Seed of the episode streams shared by every planner on this scene.
    pub episode_seed: u64,
}

impl PreparedScene {
    /// Wraps a hand-built scene already placed in the workspace.
    pub fn from_scene(scene: LabeledScene, config: &ExperimentConfig, episode_seed: u64) -> Result<Self> {
        Ok(Self {
            scene_index: 0,
            rotation_index: 0,
            params: PlantParams::default(),
            truth: GroundTruth::new(&scene, &config.eval)?,
            scene,
            episode_seed,
        })
    }
}

/// Generates scene `scene_index` and places it at rotation
/// `rotation_index` with a random offset of its base.
pub fn prepare_scene(config: &ExperimentConfig, scene_index: usize, rotation_index: usize) -> Result<PreparedScene> {
    let master = RandomStream::new(config.seed);
    let mut scene_rng = master.derive_path(&[SCENE, scene_index as u64]);
    let params = config.plant.draw(&mut scene_rng);
    let plant = generate_plant(scene_rng.gen(), &params)?;

    let mut place = master.derive_path(&[PLACEMENT, scene_index as u64, rotation_index as u64]);
    let (ux, uy) = config.effective_uncertainty();
    let dx = if ux > 0.0 { place.gen_range(-ux..=ux) } else { 0.0 };
    let dy = if uy > 0.0 { place.gen_range(-uy..=uy) } else { 0.0 };
    let angle = (rotation_index as f64 * 360.0 / config.n_rotations as f64).to_radians();
    let pose = Viewpoint::from_rotation(
        config.base + Vec3::new(dx, dy, 0.0),
        UnitQuaternion::from_axis_angle(&Vec3::z_axis(), angle),
    );
    let scene = plant.placed(&pose);
    let truth = GroundTruth::new(&scene, &config.eval)?;
    let episode_seed = master
        .derive_path(&[EPISODE, scene_index as u64, rotation_index as u64])
        .seed();
    Ok(PreparedScene {
        scene_index,
        rotation_index,
        params,
        scene,
        truth,
        episode_seed,
    })
}

/// Clusters farther than `tolerance` from every object of their class.
pub fn false_positive_count(clusters: &[Cluster], scene: &LabeledScene, tolerance: f64) -> usize {
    clusters
        .iter()
        .filter(|c| {
            !scene
                .ooi()
                .iter()
                .any(|o| o.class == c.class && (o.center - c.center).norm() <= tolerance)
        })
        .count()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionRecord {
    /// 1-based.
    pub action: usize,
    pub viewpoint: Viewpoint,
    pub score: EpisodeScore,
    pub n_clusters: usize,
    pub n_fp: usize,
    /// Gain, travel distance and utility of the step that chose this view;
    /// zero for the first view.
    pub gain: f64,
    pub distance: f64,
    pub utility: f64,
}

impl ActionRecord {
    pub fn pco(&self) -> f64 {
        self.score.pco
    }
}

#[derive(Debug, Clone)]
pub struct EpisodeRecord {
    pub scene: usize,
    pub rotation: usize,
    pub planner: PlannerKind,
    pub seed: u64,
    pub actions: Vec<ActionRecord>,
    /// Per action, sensing through planning.
    pub wall_times: Vec<Duration>,
}

/// Equality ignores wall times.
impl PartialEq for EpisodeRecord {
    fn eq(&self, other: &Self) -> bool {
        self.scene == other.scene
            && self.rotation == other.rotation
            && self.planner == other.planner
            && self.seed == other.seed
            && self.actions == other.actions
    }
}

impl EpisodeRecord {
    pub fn final_pco(&self) -> f64 {
        self.actions.last().map_or(0.0, ActionRecord::pco)
    }

    pub fn travel_distance(&self) -> f64 {
        self.actions.iter().map(|a| a.distance).sum()
    }
}

/// Final state of an episode, for dumping.
#[derive(Debug, Clone)]
pub struct EpisodeOutcome {
    pub record: EpisodeRecord,
    pub map: SemanticVoxelMap,
    pub clusters: Vec<Cluster>,
    pub attention: AttentionState,
}

pub fn run_episode(prepared: &PreparedScene, config: &ExperimentConfig, kind: PlannerKind) -> Result<EpisodeRecord> {
    run_episode_full(prepared, config, kind).map(|o| o.record)
}

/// Runs one episode: sense, integrate, cluster, attend, score and plan
/// until `a_max` views are taken or, with early stopping, all objects are
/// detected.
pub fn run_episode_full(
    prepared: &PreparedScene,
    config: &ExperimentConfig,
    kind: PlannerKind,
) -> Result<EpisodeOutcome> {
    let context = |e: Error| Error::Episode {
        scene: prepared.scene_index,
        rotation: prepared.rotation_index,
        planner: kind.name().to_string(),
        source: Box::new(e),
    };
    run_inner(prepared, config, kind).map_err(context)
}

fn run_inner(prepared: &PreparedScene, config: &ExperimentConfig, kind: PlannerKind) -> Result<EpisodeOutcome> {
    config.validate()?;
    let bounds = config.bounds()?;
    let scene = &prepared.scene;
    let camera = config.camera;
    let mut map = SemanticVoxelMap::with_model(config.map_resolution, bounds.clone(), config.occupancy)?;
    let mut planner = Planner::new(config.planner_config(kind), camera)?;
    let a_max = planner.config().a_max;
    let streams = RandomStream::new(prepared.episode_seed);
    let tag = planner_tag(kind);
    let known: Vec<Vec3> = scene.ooi().iter().map(|o| o.center).collect();

    let mut pose = planner.first_view();
    let mut chosen: Option<GainReport> = None;
    let mut attention: Option<AttentionState> = None;
    let mut clusters = Vec::new();
    let mut actions = Vec::with_capacity(a_max);
    let mut wall_times = Vec::with_capacity(a_max);

    for action in 1..=a_max {
        let start = Instant::now();
        let a = action as u64;
        let mut view = render_view(scene, &pose, &camera);
        if config.depth_noise > 0.0 {
            add_depth_noise(&mut view, config.depth_noise, &mut streams.derive_path(&[DEPTH, tag, a]))?;
        }
        let seg = detect(&view, &config.noise, &mut streams.derive_path(&[DETECTION, tag, a]));
        let cloud = to_semantic_cloud(&view, &seg, &camera, config.cloud_stride)?;
        map.integrate_cloud(&cloud, &pose.position());
        clusters = extract_clusters(&map, &config.clustering);
        let att = update_attention(attention.as_ref(), &map, &clusters, &bounds, &config.attention);
        let score = prepared.truth.score(&map, &clusters);
        let done = score.pco >= 100.0;
        actions.push(ActionRecord {
            action,
            viewpoint: pose,
            n_clusters: clusters.len(),
            n_fp: false_positive_count(&clusters, scene, config.eval.ooi_box_size),
            gain: chosen.map_or(0.0, |c| c.gain),
            distance: chosen.map_or(0.0, |c| c.distance),
            utility: chosen.map_or(0.0, |c| c.utility),
            score,
        });

        if action < a_max && !(config.early_stop && done) {
            let guided = if config.known_ooi {
                att.clone().with_ooi_cubes(&known, config.attention.ooi_box_size)?
            } else {
                att.clone()
            };
            let step = planner.plan_next(
                &map,
                &guided,
                &pose,
                &mut streams.derive_path(&[CANDIDATES, a]),
                &mut streams.derive_path(&[CHOICE, tag, a]),
            )?;
            chosen = Some(step.chosen);
            pose = step.chosen.viewpoint;
        }
        attention = Some(att);
        wall_times.push(start.elapsed());
        if config.early_stop && done {
            break;
        }
    }

    Ok(EpisodeOutcome {
        record: EpisodeRecord {
            scene: prepared.scene_index,
            rotation: prepared.rotation_index,
            planner: kind,
            seed: prepared.episode_seed,
            actions,
            wall_times,
        },
        map,
        clusters,
        attention: attention.unwrap_or_default(),
    })
}
