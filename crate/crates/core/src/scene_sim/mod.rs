//! Procedural labeled plant scenes, an analytic depth/label renderer, a
//! configurable detection oracle and semantic point-cloud assembly.

mod bvh;
mod cloud;
mod detect;
mod io;
mod plant;
mod primitive;

use rustc_hash::FxHashSet;

use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, Ray, Vec3, Viewpoint};
use crate::semantic_map::SemanticClass;

use bvh::Bvh;

pub use cloud::{add_depth_noise, to_semantic_cloud};
pub use detect::{detect, Detection, DetectionNoise, Segmentation};
pub use io::{read_ground_truth, read_scene, write_ground_truth, write_scene};
pub use plant::{generate_plant, PlantParams};
pub use primitive::{LabeledPrimitive, Shape};

/// Instance id marking pixels that hit nothing.
pub const NO_INSTANCE: u32 = 0;

/// Ground truth for one object of interest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OoiTruth {
    pub instance: u32,
    pub class: SemanticClass,
    pub center: Vec3,
}

/// An immutable scene of labeled primitives.
#[derive(Debug, Clone)]
pub struct LabeledScene {
    primitives: Vec<LabeledPrimitive>,
    shapes: Vec<Shape>,
    ooi: Vec<OoiTruth>,
    plant_base: Vec3,
    bvh: Bvh,
}

impl PartialEq for LabeledScene {
    fn eq(&self, other: &Self) -> bool {
        self.primitives == other.primitives && self.plant_base == other.plant_base
    }
}

impl LabeledScene {
    /// Instance ids must be unique and non-zero; every object-of-interest
    /// primitive becomes a ground-truth entry centered on its shape.
    pub fn new(primitives: Vec<LabeledPrimitive>, plant_base: Vec3) -> Result<Self> {
        let mut seen = FxHashSet::default();
        for p in &primitives {
            if p.instance == NO_INSTANCE || !seen.insert(p.instance) {
                return Err(Error::invalid("instance", format!("id {} is zero or repeated", p.instance)));
            }
            let r = p.shape.radius();
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::invalid("radius", "must be positive"));
            }
            match p.shape {
                Shape::Cylinder { a, b, .. } if (b - a).norm() <= 0.0 => {
                    return Err(Error::invalid("cylinder", "endpoints coincide"));
                }
                Shape::Disc { normal, .. } if (normal.norm() - 1.0).abs() > 1e-9 => {
                    return Err(Error::invalid("disc", "normal must be unit length"));
                }
                _ => {}
            }
        }
        let ooi = primitives
            .iter()
            .filter(|p| p.class.is_object_of_interest())
            .map(|p| OoiTruth {
                instance: p.instance,
                class: p.class,
                center: p.shape.center(),
            })
            .collect();
        let shapes: Vec<Shape> = primitives.iter().map(|p| p.shape).collect();
        let bvh = Bvh::build(&shapes);
        Ok(Self {
            primitives,
            shapes,
            ooi,
            plant_base,
            bvh,
        })
    }

    pub fn primitives(&self) -> &[LabeledPrimitive] {
        &self.primitives
    }

    pub fn ooi(&self) -> &[OoiTruth] {
        &self.ooi
    }

    pub fn plant_base(&self) -> Vec3 {
        self.plant_base
    }

    /// The scene moved rigidly by `pose`.
    pub fn placed(&self, pose: &Viewpoint) -> LabeledScene {
        let prims = self
            .primitives
            .iter()
            .map(|p| LabeledPrimitive {
                shape: p.shape.transformed(pose),
                ..*p
            })
            .collect();
        LabeledScene::new(prims, pose.transform_point(&self.plant_base)).expect("rigid motion keeps a valid scene")
    }

    /// Nearest primitive hit within `max_range`, as (primitive index, distance).
    pub fn cast(&self, ray: &Ray, max_range: f64) -> Option<(usize, f64)> {
        self.bvh.nearest(&self.shapes, ray, max_range)
    }

    /// Surface samples of every primitive, spaced about `spacing` apart,
    /// skipping samples buried inside another solid.
    pub fn surface_points(&self, spacing: f64) -> Vec<Vec3> {
        let boxes: Vec<(Vec3, Vec3)> = self.shapes.iter().map(Shape::aabb).collect();
        let mut out = Vec::new();
        for (i, s) in self.shapes.iter().enumerate() {
            let (lo, hi) = boxes[i];
            let near: Vec<usize> = (0..self.shapes.len())
                .filter(|&j| j != i && (0..3).all(|a| boxes[j].0[a] <= hi[a] && boxes[j].1[a] >= lo[a]))
                .collect();
            out.extend(
                s.sample_surface(spacing)
                    .into_iter()
                    .filter(|p| !near.iter().any(|&j| self.shapes[j].contains_strict(p, 1e-9))),
            );
        }
        out
    }
}

/// Depth, class and instance images of one view. Misses carry infinite
/// depth, no class and [`NO_INSTANCE`].
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedView {
    pub width: u32,
    pub height: u32,
    pub depth: Vec<f64>,
    pub labels: Vec<Option<SemanticClass>>,
    pub instances: Vec<u32>,
    pub pose: Viewpoint,
}

impl RenderedView {
    #[inline]
    pub fn index(&self, u: u32, v: u32) -> usize {
        v as usize * self.width as usize + u as usize
    }

    pub fn hit_count(&self) -> usize {
        self.instances.iter().filter(|&&i| i != NO_INSTANCE).count()
    }
}

/// Ray-casts one ray through each pixel center.
pub fn render_view(scene: &LabeledScene, pose: &Viewpoint, intr: &CameraIntrinsics) -> RenderedView {
    let n = intr.pixel_count();
    let mut view = RenderedView {
        width: intr.width,
        height: intr.height,
        depth: vec![f64::INFINITY; n],
        labels: vec![None; n],
        instances: vec![NO_INSTANCE; n],
        pose: *pose,
    };
    let rot = pose.orientation();
    let origin = pose.position();
    for v in 0..intr.height {
        for u in 0..intr.width {
            let dir = rot * intr.camera_direction(f64::from(u) + 0.5, f64::from(v) + 0.5);
            let ray = Ray { origin, direction: dir };
            if let Some((i, t)) = scene.cast(&ray, intr.max_range) {
                let k = view.index(u, v);
                let p = &scene.primitives[i];
                view.depth[k] = t;
                view.labels[k] = Some(p.class);
                view.instances[k] = p.instance;
            }
        }
    }
    view
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prim(shape: Shape, class: SemanticClass, instance: u32) -> LabeledPrimitive {
        LabeledPrimitive { shape, class, instance }
    }

    fn intr() -> CameraIntrinsics {
        CameraIntrinsics::new(64, 48, 55.0, 55.0, 32.0, 24.0, 1.5).unwrap()
    }

    #[test]
    fn sphere_on_axis_depth() {
        let (d, r) = (0.6, 0.05);
        let scene = LabeledScene::new(
            vec![prim(
                Shape::Sphere {
                    center: Vec3::new(d, 0.0, 0.0),
                    radius: r,
                },
                SemanticClass::Tomato,
                1,
            )],
            Vec3::zeros(),
        )
        .unwrap();
        // odd-sized image so a pixel center sits on the optical axis
        let intr = CameraIntrinsics::new(65, 49, 55.0, 55.0, 32.5, 24.5, 1.5).unwrap();
        let view = render_view(&scene, &Viewpoint::identity(), &intr);
        let c = view.index(32, 24);
        assert!((view.depth[c] - (d - r)).abs() < 1e-12);
        assert_eq!(view.labels[c], Some(SemanticClass::Tomato));
        assert_eq!(view.instances[c], 1);
    }

    #[test]
    fn looking_away_sees_nothing() {
        let scene = crate::scene_sim::generate_plant(0, &PlantParams::default()).unwrap();
        let pose = Viewpoint::looking_at(Vec3::new(-0.3, 0.0, 0.4), Vec3::new(-1.0, 0.0, 0.4));
        let view = render_view(&scene, &pose, &intr());
        assert_eq!(view.hit_count(), 0);
        assert!(view.depth.iter().all(|d| d.is_infinite()));
    }

    #[test]
    fn occluding_disc_wins() {
        let scene = LabeledScene::new(
            vec![
                prim(
                    Shape::Sphere {
                        center: Vec3::new(0.8, 0.0, 0.0),
                        radius: 0.02,
                    },
                    SemanticClass::Tomato,
                    1,
                ),
                prim(
                    Shape::Disc {
                        center: Vec3::new(0.5, 0.0, 0.0),
                        normal: Vec3::x(),
                        radius: 0.1,
                    },
                    SemanticClass::Background,
                    2,
                ),
            ],
            Vec3::zeros(),
        )
        .unwrap();
        let view = render_view(&scene, &Viewpoint::identity(), &intr());
        let c = view.index(32, 24);
        assert_eq!(view.instances[c], 2);
        assert_eq!(view.labels[c], Some(SemanticClass::Background));
    }

    #[test]
    fn rendering_is_deterministic() {
        let scene = crate::scene_sim::generate_plant(5, &PlantParams::default()).unwrap();
        let pose = Viewpoint::looking_at(Vec3::new(-0.35, 0.0, 0.4), Vec3::new(0.0, 0.0, 0.4));
        assert_eq!(render_view(&scene, &pose, &intr()), render_view(&scene, &pose, &intr()));
    }

    #[test]
    fn ground_truth_centers_are_analytic() {
        let scene = crate::scene_sim::generate_plant(2, &PlantParams::default()).unwrap();
        for t in scene.ooi() {
            let p = scene.primitives().iter().find(|p| p.instance == t.instance).unwrap();
            assert_eq!(p.class, t.class);
            assert_eq!(p.shape.center(), t.center);
        }
    }

    #[test]
    fn rejects_duplicate_or_zero_ids() {
        let s = Shape::Sphere {
            center: Vec3::zeros(),
            radius: 0.1,
        };
        assert!(LabeledScene::new(vec![prim(s, SemanticClass::Tomato, 0)], Vec3::zeros()).is_err());
        assert!(LabeledScene::new(
            vec![prim(s, SemanticClass::Tomato, 3), prim(s, SemanticClass::Tomato, 3)],
            Vec3::zeros()
        )
        .is_err());
    }

    #[test]
    fn surface_points_skip_buried_samples() {
        let scene = LabeledScene::new(
            vec![
                prim(
                    Shape::Sphere {
                        center: Vec3::zeros(),
                        radius: 0.05,
                    },
                    SemanticClass::Background,
                    1,
                ),
                prim(
                    Shape::Sphere {
                        center: Vec3::zeros(),
                        radius: 0.01,
                    },
                    SemanticClass::Tomato,
                    2,
                ),
            ],
            Vec3::zeros(),
        )
        .unwrap();
        let pts = scene.surface_points(0.002);
        assert!(pts.iter().all(|p| (p.norm() - 0.05).abs() < 1e-9));
    }
}
