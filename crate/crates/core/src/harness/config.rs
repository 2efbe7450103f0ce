//! Flat `key = value` experiment files. `#` starts a comment; unknown keys
//! are errors.

use std::fmt::Write as _;
use std::io::BufRead;
use std::path::PathBuf;
use std::str::FromStr;

use super::{ExperimentConfig, SamplingKind};
use crate::error::{Error, Result};
use crate::geometry::{Vec3, Viewpoint};
use crate::planner::SamplingConstraint;

fn num<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::parse(line, format!("`{key}`: cannot parse `{v}`")))
}

fn flag(line: usize, key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::parse(line, format!("`{key}`: expected a boolean, got `{v}`"))),
    }
}

fn list<T: FromStr>(line: usize, key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| num(line, key, s))
        .collect()
}

fn vec3(line: usize, key: &str, v: &str) -> Result<Vec3> {
    let xs: Vec<f64> = list(line, key, v)?;
    match xs[..] {
        [x, y, z] => Ok(Vec3::new(x, y, z)),
        _ => Err(Error::parse(line, format!("`{key}`: expected x,y,z"))),
    }
}

fn pair<T: FromStr + Copy>(line: usize, key: &str, v: &str) -> Result<(T, T)> {
    let xs: Vec<T> = list(line, key, v)?;
    match xs[..] {
        [a, b] => Ok((a, b)),
        _ => Err(Error::parse(line, format!("`{key}`: expected lo,hi"))),
    }
}

fn planar_mut(c: &mut ExperimentConfig) -> (&mut Vec3, &mut f64, &mut f64, &mut f64, &mut f64) {
    if !matches!(c.planner.sampling, SamplingConstraint::Planar { .. }) {
        c.planner.sampling = SamplingConstraint::default_planar();
    }
    match &mut c.planner.sampling {
        SamplingConstraint::Planar {
            center,
            width,
            height,
            max_pan,
            max_tilt,
        } => (center, width, height, max_pan, max_tilt),
        _ => unreachable!(),
    }
}

fn start_parts(v: &Viewpoint) -> (Vec3, f64, f64) {
    let f = v.forward();
    (v.position(), f.y.atan2(f.x), (-f.z).atan2(f.xy().norm()))
}

fn apply(c: &mut ExperimentConfig, line: usize, key: &str, v: &str) -> Result<()> {
    let mut camera = c.camera;
    match key {
        "seed" => c.seed = num(line, key, v)?,
        "scenes" => c.n_scenes = num(line, key, v)?,
        "rotations" => c.n_rotations = num(line, key, v)?,
        "planners" => c.planners = list(line, key, v)?,
        "planner.kind" => c.planners = vec![num(line, key, v)?],
        "planner.n_candidates" => c.planner.n_candidates = num(line, key, v)?,
        "planner.a_max" => c.planner.a_max = num(line, key, v)?,
        "planner.ray_stride" => c.planner.ray_stride = num(line, key, v)?,
        "planner.attention" => c.planner.attention_enabled = flag(line, key, v)?,
        "planner.plant_distance" => c.planner.plant_distance = num(line, key, v)?,
        "planner.start" => {
            let (_, yaw, pitch) = start_parts(&c.planner.initial_viewpoint);
            c.planner.initial_viewpoint = Viewpoint::from_pan_tilt(vec3(line, key, v)?, yaw, pitch);
        }
        "planner.start_yaw_deg" => {
            let (p, _, pitch) = start_parts(&c.planner.initial_viewpoint);
            let yaw: f64 = num(line, key, v)?;
            c.planner.initial_viewpoint = Viewpoint::from_pan_tilt(p, yaw.to_radians(), pitch);
        }
        "sampling.kind" => {
            c.sampling = match v {
                "planar" => SamplingKind::Planar,
                "cylindrical" => SamplingKind::Cylindrical,
                _ => return Err(Error::parse(line, format!("unknown sampling kind `{v}`"))),
            }
        }
        "sampling.center" => *planar_mut(c).0 = vec3(line, key, v)?,
        "sampling.width" => *planar_mut(c).1 = num(line, key, v)?,
        "sampling.height" => *planar_mut(c).2 = num(line, key, v)?,
        "sampling.max_pan_deg" => *planar_mut(c).3 = num::<f64>(line, key, v)?.to_radians(),
        "sampling.max_tilt_deg" => *planar_mut(c).4 = num::<f64>(line, key, v)?.to_radians(),
        "plant.height" => c.plant.height = pair(line, key, v)?,
        "plant.nodes" => c.plant.nodes = pair(line, key, v)?,
        "plant.leaflets" => c.plant.leaflets = pair(line, key, v)?,
        "plant.trusses" => c.plant.trusses = pair(line, key, v)?,
        "plant.leaflet_removal" => c.plant.leaflet_removal = num(line, key, v)?,
        "plant.base" => c.base = vec3(line, key, v)?,
        "plant.uncertainty" => c.base_uncertainty = pair(line, key, v)?,
        "ablation.known_position" => c.known_position = flag(line, key, v)?,
        "ablation.known_ooi" => c.known_ooi = flag(line, key, v)?,
        "bounds.min" => c.bounds_min = vec3(line, key, v)?,
        "bounds.max" => c.bounds_max = vec3(line, key, v)?,
        "noise.fn_rate" => c.noise.fn_rate = num(line, key, v)?,
        "noise.fp_rate" => c.noise.fp_rate = num(line, key, v)?,
        "noise.confidence_true" => c.noise.confidence_true = pair(line, key, v)?,
        "noise.confidence_false" => c.noise.confidence_false = pair(line, key, v)?,
        "noise.min_pixels" => c.noise.min_pixels = num(line, key, v)?,
        "noise.depth_sigma" => c.depth_noise = num(line, key, v)?,
        "eval.f1_threshold" => c.eval.f1_threshold = num(line, key, v)?,
        "eval.match_tolerance" => c.eval.match_tolerance = num(line, key, v)?,
        "eval.box_size" => c.eval.ooi_box_size = num(line, key, v)?,
        "eval.downsample_resolution" => c.eval.downsample_resolution = num(line, key, v)?,
        "camera.width" => camera.width = num(line, key, v)?,
        "camera.height" => camera.height = num(line, key, v)?,
        "camera.fx" => camera.fx = num(line, key, v)?,
        "camera.fy" => camera.fy = num(line, key, v)?,
        "camera.cx" => camera.cx = num(line, key, v)?,
        "camera.cy" => camera.cy = num(line, key, v)?,
        "camera.max_range" => camera.max_range = num(line, key, v)?,
        "camera.cloud_stride" => c.cloud_stride = num(line, key, v)?,
        "map.resolution" => c.map_resolution = num(line, key, v)?,
        "map.p_hit" => c.occupancy.hit = num(line, key, v)?,
        "map.p_miss" => c.occupancy.miss = num(line, key, v)?,
        "map.clamp_min" => c.occupancy.clamp_min = num(line, key, v)?,
        "map.clamp_max" => c.occupancy.clamp_max = num(line, key, v)?,
        "cluster.min_size" => c.clustering.min_cluster_size = num(line, key, v)?,
        "cluster.max_distance" => c.clustering.max_intra_distance = num(line, key, v)?,
        "cluster.min_pts" => c.clustering.min_pts = num(line, key, v)?,
        "attention.stem_box_height" => c.attention.stem_box_height = num(line, key, v)?,
        "attention.stem_box_breadth" => c.attention.stem_box_breadth = num(line, key, v)?,
        "attention.ooi_box_size" => c.attention.ooi_box_size = num(line, key, v)?,
        "early_stop" => c.early_stop = flag(line, key, v)?,
        "output" => c.output = Some(PathBuf::from(v)),
        _ => return Err(Error::parse(line, format!("unknown key `{key}`"))),
    }
    c.camera = camera;
    Ok(())
}

/// Reads a config on top of the defaults and validates it.
pub fn parse_config<R: BufRead>(input: R) -> Result<ExperimentConfig> {
    let mut c = ExperimentConfig::default();
    for (i, line) in input.lines().enumerate() {
        let n = i + 1;
        let line = line?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let Some((k, v)) = body.split_once('=') else {
            return Err(Error::parse(n, "expected `key = value`"));
        };
        apply(&mut c, n, k.trim(), v.trim())?;
    }
    c.validate()?;
    Ok(c)
}

/// Writes every key, so that `parse_config` reproduces `config`.
pub fn write_config(config: &ExperimentConfig) -> String {
    let c = config;
    let v3 = |v: &Vec3| format!("{},{},{}", v.x, v.y, v.z);
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k} = {v}");
    };
    kv("seed", c.seed.to_string());
    kv("scenes", c.n_scenes.to_string());
    kv("rotations", c.n_rotations.to_string());
    kv(
        "planners",
        c.planners.iter().map(|k| k.name()).collect::<Vec<_>>().join(","),
    );
    let p = &c.planner;
    kv("planner.n_candidates", p.n_candidates.to_string());
    kv("planner.a_max", p.a_max.to_string());
    kv("planner.ray_stride", p.ray_stride.to_string());
    kv("planner.attention", p.attention_enabled.to_string());
    kv("planner.plant_distance", p.plant_distance.to_string());
    let (pos, yaw, _) = start_parts(&p.initial_viewpoint);
    kv("planner.start", v3(&pos));
    kv("planner.start_yaw_deg", yaw.to_degrees().to_string());
    kv("sampling.kind", c.sampling.name().to_string());
    if let SamplingConstraint::Planar {
        center,
        width,
        height,
        max_pan,
        max_tilt,
    } = &p.sampling
    {
        kv("sampling.center", v3(center));
        kv("sampling.width", width.to_string());
        kv("sampling.height", height.to_string());
        kv("sampling.max_pan_deg", max_pan.to_degrees().to_string());
        kv("sampling.max_tilt_deg", max_tilt.to_degrees().to_string());
    }
    let pl = &c.plant;
    kv("plant.height", format!("{},{}", pl.height.0, pl.height.1));
    kv("plant.nodes", format!("{},{}", pl.nodes.0, pl.nodes.1));
    kv("plant.leaflets", format!("{},{}", pl.leaflets.0, pl.leaflets.1));
    kv("plant.trusses", format!("{},{}", pl.trusses.0, pl.trusses.1));
    kv("plant.leaflet_removal", pl.leaflet_removal.to_string());
    kv("plant.base", v3(&c.base));
    kv(
        "plant.uncertainty",
        format!("{},{}", c.base_uncertainty.0, c.base_uncertainty.1),
    );
    kv("ablation.known_position", c.known_position.to_string());
    kv("ablation.known_ooi", c.known_ooi.to_string());
    kv("bounds.min", v3(&c.bounds_min));
    kv("bounds.max", v3(&c.bounds_max));
    let n = &c.noise;
    kv("noise.fn_rate", n.fn_rate.to_string());
    kv("noise.fp_rate", n.fp_rate.to_string());
    kv(
        "noise.confidence_true",
        format!("{},{}", n.confidence_true.0, n.confidence_true.1),
    );
    kv(
        "noise.confidence_false",
        format!("{},{}", n.confidence_false.0, n.confidence_false.1),
    );
    kv("noise.min_pixels", n.min_pixels.to_string());
    kv("noise.depth_sigma", c.depth_noise.to_string());
    kv("eval.f1_threshold", c.eval.f1_threshold.to_string());
    kv("eval.match_tolerance", c.eval.match_tolerance.to_string());
    kv("eval.box_size", c.eval.ooi_box_size.to_string());
    kv("eval.downsample_resolution", c.eval.downsample_resolution.to_string());
    let cam = &c.camera;
    kv("camera.width", cam.width.to_string());
    kv("camera.height", cam.height.to_string());
    kv("camera.fx", cam.fx.to_string());
    kv("camera.fy", cam.fy.to_string());
    kv("camera.cx", cam.cx.to_string());
    kv("camera.cy", cam.cy.to_string());
    kv("camera.max_range", cam.max_range.to_string());
    kv("camera.cloud_stride", c.cloud_stride.to_string());
    kv("map.resolution", c.map_resolution.to_string());
    kv("map.p_hit", c.occupancy.hit.to_string());
    kv("map.p_miss", c.occupancy.miss.to_string());
    kv("map.clamp_min", c.occupancy.clamp_min.to_string());
    kv("map.clamp_max", c.occupancy.clamp_max.to_string());
    kv("cluster.min_size", c.clustering.min_cluster_size.to_string());
    kv("cluster.max_distance", c.clustering.max_intra_distance.to_string());
    kv("cluster.min_pts", c.clustering.min_pts.to_string());
    kv("attention.stem_box_height", c.attention.stem_box_height.to_string());
    kv("attention.stem_box_breadth", c.attention.stem_box_breadth.to_string());
    kv("attention.ooi_box_size", c.attention.ooi_box_size.to_string());
    kv("early_stop", c.early_stop.to_string());
    if let Some(o) = &c.output {
        kv("output", o.display().to_string());
    }
    s
}

impl FromStr for ExperimentConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_config(s.as_bytes())
    }
}
