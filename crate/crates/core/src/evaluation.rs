//! Reconstruction scoring: per-object surface F1 against ground truth and
//! the percentage of correctly detected objects.

use std::io::Write;

use rustc_hash::FxHashMap;

use crate::clustering::Cluster;
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::scene_sim::LabeledScene;
use crate::semantic_map::{SemanticClass, SemanticVoxelMap};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalParams {
    pub f1_threshold: f64,
    /// Meters.
    pub match_tolerance: f64,
    /// Side of the cube around each object, meters.
    pub ooi_box_size: f64,
    pub downsample_resolution: f64,
}

impl Default for EvalParams {
    fn default() -> Self {
        Self::simulation()
    }
}

impl EvalParams {
    pub fn simulation() -> Self {
        Self {
            f1_threshold: 0.5,
            match_tolerance: 0.003,
            ooi_box_size: 0.03,
            downsample_resolution: 0.003,
        }
    }

    /// Looser protocol for coarser, noisier maps.
    pub fn real() -> Self {
        Self {
            f1_threshold: 0.625,
            match_tolerance: 0.006,
            ooi_box_size: 0.04,
            downsample_resolution: 0.006,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f1_threshold > 0.0 && self.f1_threshold <= 1.0) {
            return Err(Error::invalid("f1_threshold", "must lie in (0, 1]"));
        }
        for (name, v) in [
            ("match_tolerance", self.match_tolerance),
            ("ooi_box_size", self.ooi_box_size),
            ("downsample_resolution", self.downsample_resolution),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, "must be positive"));
            }
        }
        Ok(())
    }
}

fn cell(p: &Vec3, size: f64) -> [i64; 3] {
    [0, 1, 2].map(|a| (p[a] / size).floor() as i64)
}

/// Voxel-grid filter: one centroid per occupied cell, in cell order.
pub fn voxel_downsample(points: &[Vec3], resolution: f64) -> Vec<Vec3> {
    let mut cells: FxHashMap<[i64; 3], (Vec3, usize)> = FxHashMap::default();
    for p in points {
        let e = cells.entry(cell(p, resolution)).or_insert((Vec3::zeros(), 0));
        e.0 += p;
        e.1 += 1;
    }
    let mut out: Vec<([i64; 3], Vec3)> = cells.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect();
    out.sort_unstable_by_key(|(k, _)| *k);
    out.into_iter().map(|(_, p)| p).collect()
}

/// Points inside the axis-aligned cube of side `box_size` around `center`,
/// faces included.
pub fn extract_ooi_points(points: &[Vec3], center: &Vec3, box_size: f64) -> Vec<Vec3> {
    let h = 0.5 * box_size;
    points
        .iter()
        .filter(|p| (*p - center).amax() <= h)
        .copied()
        .collect()
}

/// Uniform hash of points for radius queries with radius up to `cell`.
struct PointHash<'a> {
    points: &'a [Vec3],
    cell: f64,
    buckets: FxHashMap<[i64; 3], Vec<u32>>,
}

impl<'a> PointHash<'a> {
    fn new(points: &'a [Vec3], cell_size: f64) -> Self {
        let mut buckets: FxHashMap<[i64; 3], Vec<u32>> = FxHashMap::default();
        for (i, p) in points.iter().enumerate() {
            buckets.entry(cell(p, cell_size)).or_default().push(i as u32);
        }
        Self {
            points,
            cell: cell_size,
            buckets,
        }
    }

    fn any_within(&self, q: &Vec3, tol_sq: f64) -> bool {
        let c = cell(q, self.cell);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(b) = self.buckets.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) {
                        if b.iter().any(|&i| (self.points[i as usize] - q).norm_squared() <= tol_sq) {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }
}

fn matched(from: &[Vec3], to: &[Vec3], tolerance: f64) -> usize {
    let hash = PointHash::new(to, tolerance);
    let tol_sq = tolerance * tolerance;
    from.iter().filter(|p| hash.any_within(p, tol_sq)).count()
}

/// Harmonic mean of precision and recall, where a point counts as correct
/// when some point of the other set lies within `tolerance`. Zero when
/// either set is empty.
pub fn f1_score(reconstructed: &[Vec3], ground_truth: &[Vec3], tolerance: f64) -> f64 {
    if reconstructed.is_empty() || ground_truth.is_empty() || !(tolerance > 0.0) {
        return 0.0;
    }
    let precision = matched(reconstructed, ground_truth, tolerance) as f64 / reconstructed.len() as f64;
    let recall = matched(ground_truth, reconstructed, tolerance) as f64 / ground_truth.len() as f64;
    f1_from(precision, recall)
}

pub(crate) fn f1_from(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

/// Percentage of detected objects.
pub fn pco(detected: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * detected as f64 / total as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OoiScore {
    pub instance: u32,
    pub class: SemanticClass,
    pub gt_center: Vec3,
    pub f1: f64,
    pub detected: bool,
    pub class_confirmed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeScore {
    pub scores: Vec<OoiScore>,
    pub pco: f64,
}

impl EpisodeScore {
    pub fn detected(&self) -> usize {
        self.scores.iter().filter(|s| s.detected).count()
    }
}

#[derive(Debug, Clone)]
struct OoiTarget {
    instance: u32,
    class: SemanticClass,
    center: Vec3,
    points: Vec<Vec3>,
}

/// Per-object ground-truth point sets of one scene, computed once and
/// reused for every action of an episode.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    params: EvalParams,
    targets: Vec<OoiTarget>,
}

impl GroundTruth {
    /// Samples the scene surface at half the evaluation resolution and
    /// voxel-filters it to that resolution.
    pub fn new(scene: &LabeledScene, params: &EvalParams) -> Result<Self> {
        params.validate()?;
        if scene.ooi().is_empty() {
            return Err(Error::NoObjectsOfInterest);
        }
        let res = params.downsample_resolution;
        let surface = voxel_downsample(&scene.surface_points(0.5 * res), res);
        let targets = scene
            .ooi()
            .iter()
            .map(|o| OoiTarget {
                instance: o.instance,
                class: o.class,
                center: o.center,
                points: extract_ooi_points(&surface, &o.center, params.ooi_box_size),
            })
            .collect();
        Ok(Self {
            params: *params,
            targets,
        })
    }

    pub fn params(&self) -> &EvalParams {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// Ground-truth points of the `i`-th object.
    pub fn points(&self, i: usize) -> &[Vec3] {
        &self.targets[i].points
    }

    pub fn score(&self, map: &SemanticVoxelMap, clusters: &[Cluster]) -> EpisodeScore {
        let p = &self.params;
        let occupied: Vec<Vec3> = map.export_occupied().into_iter().map(|s| s.position).collect();
        let recon = voxel_downsample(&occupied, p.downsample_resolution);
        let scores: Vec<OoiScore> = self
            .targets
            .iter()
            .map(|t| {
                let local = extract_ooi_points(&recon, &t.center, p.ooi_box_size);
                let f1 = f1_score(&local, &t.points, p.match_tolerance);
                let class_confirmed = clusters
                    .iter()
                    .any(|c| c.class == t.class && (c.center - t.center).norm() <= p.ooi_box_size);
                OoiScore {
                    instance: t.instance,
                    class: t.class,
                    gt_center: t.center,
                    f1,
                    detected: class_confirmed && f1 >= p.f1_threshold,
                    class_confirmed,
                }
            })
            .collect();
        let detected = scores.iter().filter(|s| s.detected).count();
        EpisodeScore {
            pco: pco(detected, scores.len()),
            scores,
        }
    }
}

/// Scores every object of `scene` against the current map and clusters.
pub fn score_episode(
    map: &SemanticVoxelMap,
    scene: &LabeledScene,
    clusters: &[Cluster],
    params: &EvalParams,
) -> Result<EpisodeScore> {
    Ok(GroundTruth::new(scene, params)?.score(map, clusters))
}

/// Writes the `action,ooi_id,class,f1,detected,pco` header.
pub fn write_score_header<W: Write>(mut out: W) -> Result<()> {
    writeln!(out, "action,ooi_id,class,f1,detected,pco")?;
    Ok(())
}

/// Appends one row per object for `action`.
pub fn write_score_rows<W: Write>(action: usize, score: &EpisodeScore, mut out: W) -> Result<()> {
    for s in &score.scores {
        writeln!(
            out,
            "{},{},{},{:.6},{},{:.6}",
            action,
            s.instance,
            s.class.name(),
            s.f1,
            u8::from(s.detected),
            score.pco
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::WorkspaceBounds;
    use crate::scene_sim::{LabeledPrimitive, Shape};
    use crate::semantic_map::{SemanticVoxel, VoxelKey};
    use proptest::prelude::*;

    fn brute_f1(r: &[Vec3], g: &[Vec3], tol: f64) -> f64 {
        if r.is_empty() || g.is_empty() {
            return 0.0;
        }
        let t2 = tol * tol;
        let hit = |a: &Vec3, set: &[Vec3]| set.iter().any(|b| (b - a).norm_squared() <= t2);
        let p = r.iter().filter(|a| hit(a, g)).count() as f64 / r.len() as f64;
        let rc = g.iter().filter(|a| hit(a, r)).count() as f64 / g.len() as f64;
        f1_from(p, rc)
    }

    #[test]
    fn downsample_examples() {
        let two = [Vec3::new(0.1, 0.1, 0.1), Vec3::new(0.3, 0.5, 0.1)];
        let d = voxel_downsample(&two, 1.0);
        assert_eq!(d.len(), 1);
        assert!((d[0] - Vec3::new(0.2, 0.3, 0.1)).norm() < 1e-15);

        let sparse: Vec<Vec3> = (0..20).map(|i| Vec3::new(f64::from(i) * 0.01 + 0.0005, 0.0005, 0.0005)).collect();
        assert_eq!(voxel_downsample(&sparse, 0.003).len(), 20);

        let mut rng = crate::geometry::RandomStream::new(5);
        use rand::Rng;
        let cloud: Vec<Vec3> = (0..1000).map(|_| Vec3::new(rng.gen(), rng.gen(), rng.gen())).collect();
        assert_eq!(voxel_downsample(&cloud, 1.0).len(), 1);
    }

    #[test]
    fn box_extraction_examples() {
        let c = Vec3::new(0.5, 0.5, 0.5);
        assert!(extract_ooi_points(&[], &c, 0.03).is_empty());
        assert_eq!(extract_ooi_points(&[c], &c, 0.03), vec![c]);
        assert!(extract_ooi_points(&[c + Vec3::new(0.016, 0.0, 0.0)], &c, 0.03).is_empty());
    }

    #[test]
    fn f1_examples() {
        let a = [Vec3::zeros(), Vec3::new(0.0, 0.0, 0.01)];
        assert_eq!(f1_score(&a, &a, 0.003), 1.0);
        assert_eq!(f1_score(&[], &a, 0.003), 0.0);
        let f = f1_score(&[Vec3::zeros()], &a, 0.003);
        assert!((f - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn pco_examples() {
        assert!((pco(9, 11) - 81.818_181_818_181_82).abs() < 1e-12);
        assert_eq!(pco(0, 7), 0.0);
        assert_eq!(pco(7, 7), 100.0);
    }

    fn sphere_scene() -> LabeledScene {
        let prims = vec![
            LabeledPrimitive {
                shape: Shape::Sphere {
                    center: Vec3::new(0.1, 0.0, 0.0),
                    radius: 0.011,
                },
                class: SemanticClass::Tomato,
                instance: 1,
            },
            LabeledPrimitive {
                shape: Shape::Sphere {
                    center: Vec3::new(-0.1, 0.0, 0.0),
                    radius: 0.011,
                },
                class: SemanticClass::Tomato,
                instance: 2,
            },
        ];
        LabeledScene::new(prims, Vec3::new(0.0, 0.0, -0.2)).unwrap()
    }

    fn carve(map: &mut SemanticVoxelMap, center: Vec3, radius: f64) {
        let res = map.resolution();
        let n = (radius / res).ceil() as i32 + 1;
        let c = map.world_to_key(&center);
        for dx in -n..=n {
            for dy in -n..=n {
                for dz in -n..=n {
                    let k = VoxelKey::new(c.x + dx, c.y + dy, c.z + dz);
                    let d = (map.key_center(k) - center).norm();
                    if (d - radius).abs() <= 0.5 * res * 3f64.sqrt() {
                        let v = SemanticVoxel {
                            p_o: 0.9,
                            c_s: SemanticClass::Tomato,
                            p_s: 0.9,
                        };
                        map.set_voxel(k, v).unwrap();
                    }
                }
            }
        }
    }

    #[test]
    fn scoring_needs_shape_and_class() {
        let scene = sphere_scene();
        let bounds = WorkspaceBounds::new(Vec3::repeat(-0.3), Vec3::repeat(0.3), scene.plant_base()).unwrap();
        let mut map = SemanticVoxelMap::new(0.003, bounds).unwrap();
        carve(&mut map, Vec3::new(0.1, 0.0, 0.0), 0.011);
        let params = EvalParams::default();
        let cluster = |c: Vec3| Cluster {
            class: SemanticClass::Tomato,
            members: vec![VoxelKey::new(0, 0, 0)],
            center: c,
        };
        let gt = GroundTruth::new(&scene, &params).unwrap();
        assert!(!gt.points(0).is_empty());

        let none = gt.score(&map, &[]);
        assert!(none.scores[0].f1 > 0.9, "{}", none.scores[0].f1);
        assert!(!none.scores[0].class_confirmed);
        assert_eq!(none.pco, 0.0);

        let one = gt.score(&map, &[cluster(Vec3::new(0.1, 0.0, 0.0)), cluster(Vec3::new(-0.1, 0.0, 0.0))]);
        assert!(one.scores[0].detected);
        assert!(one.scores[1].class_confirmed && !one.scores[1].detected);
        assert_eq!(one.pco, 50.0);

        carve(&mut map, Vec3::new(-0.1, 0.0, 0.0), 0.011);
        let both = score_episode(
            &map,
            &scene,
            &[cluster(Vec3::new(0.1, 0.0, 0.0)), cluster(Vec3::new(-0.1, 0.0, 0.0))],
            &params,
        )
        .unwrap();
        assert_eq!(both.pco, 100.0);
        for s in &both.scores {
            assert_eq!(s.detected, s.class_confirmed && s.f1 >= params.f1_threshold);
        }
    }

    #[test]
    fn score_requires_objects() {
        let prims = vec![LabeledPrimitive {
            shape: Shape::Sphere {
                center: Vec3::zeros(),
                radius: 0.01,
            },
            class: SemanticClass::Background,
            instance: 1,
        }];
        let scene = LabeledScene::new(prims, Vec3::zeros()).unwrap();
        assert!(matches!(
            GroundTruth::new(&scene, &EvalParams::default()),
            Err(Error::NoObjectsOfInterest)
        ));
    }

    #[test]
    fn score_csv() {
        let s = EpisodeScore {
            scores: vec![OoiScore {
                instance: 4,
                class: SemanticClass::Peduncle,
                gt_center: Vec3::zeros(),
                f1: 0.5,
                detected: true,
                class_confirmed: true,
            }],
            pco: 100.0,
        };
        let mut buf = Vec::new();
        write_score_header(&mut buf).unwrap();
        write_score_rows(3, &s, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "action,ooi_id,class,f1,detected,pco\n3,4,peduncle,0.500000,1,100.000000\n"
        );
    }

    fn arb_points() -> impl Strategy<Value = Vec<Vec3>> {
        prop::collection::vec((0.0f64..0.03, 0.0f64..0.03, 0.0f64..0.03), 0..100)
            .prop_map(|v| v.into_iter().map(|(x, y, z)| Vec3::new(x, y, z)).collect())
    }

    proptest! {
        #[test]
        fn f1_matches_brute_force(a in arb_points(), b in arb_points(), tol in 0.001f64..0.01) {
            prop_assert_eq!(f1_score(&a, &b, tol), brute_f1(&a, &b, tol));
        }

        #[test]
        fn f1_is_symmetric(a in arb_points(), b in arb_points(), tol in 0.001f64..0.01) {
            prop_assert_eq!(f1_score(&a, &b, tol), f1_score(&b, &a, tol));
        }

        #[test]
        fn f1_grows_with_tolerance(a in arb_points(), b in arb_points(), tol in 0.001f64..0.01, k in 1.0f64..3.0) {
            let f = f1_score(&a, &b, tol);
            prop_assert!((0.0..=1.0).contains(&f));
            prop_assert!(f1_score(&a, &b, tol * k) >= f);
        }
    }
}
