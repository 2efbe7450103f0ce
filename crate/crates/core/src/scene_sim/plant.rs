use std::f64::consts::PI;

use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{RandomStream, Vec3};
use crate::semantic_map::SemanticClass;

use super::primitive::{LabeledPrimitive, Shape};
use super::LabeledScene;

const STEM_SEGMENTS: usize = 10;
const STEM_RADIUS_BASE: f64 = 0.006;
const STEM_RADIUS_TOP: f64 = 0.004;
const PETIOLE_RADIUS: f64 = 0.004;
const PEDUNCLE_RADIUS: f64 = 0.0035;
const RACHIS_RADIUS: f64 = 0.0025;
const TOMATO_RADIUS: (f64, f64) = (0.010, 0.0125);
/// Clearance between neighbouring tomatoes of one truss.
const TOMATO_GAP: f64 = 0.038;
const PHYLLOTAXIS: f64 = 137.5 * PI / 180.0;

const REMOVAL_STREAM: u64 = 0x6c65_6166;

/// Growth-stage knobs of a procedural plant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantParams {
    /// Meters, 0.6 to 1.2.
    pub stem_height: f64,
    /// 4 to 10.
    pub n_nodes: usize,
    /// 4 to 8.
    pub leaflets_per_petiole: usize,
    /// 0 to 4, at most `n_nodes`.
    pub n_trusses: usize,
    /// Fraction of leaflets removed from every leaf, in `[0, 1]`.
    pub leaflet_removal: f64,
}

impl Default for PlantParams {
    fn default() -> Self {
        Self {
            stem_height: 0.7,
            n_nodes: 7,
            leaflets_per_petiole: 6,
            n_trusses: 3,
            leaflet_removal: 0.0,
        }
    }
}

impl PlantParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.6..=1.2).contains(&self.stem_height) {
            return Err(Error::invalid("stem_height", "must lie in [0.6, 1.2] m"));
        }
        if !(4..=10).contains(&self.n_nodes) {
            return Err(Error::invalid("n_nodes", "must lie in 4..=10"));
        }
        if !(4..=8).contains(&self.leaflets_per_petiole) {
            return Err(Error::invalid("leaflets_per_petiole", "must lie in 4..=8"));
        }
        if self.n_trusses > 4 || self.n_trusses > self.n_nodes {
            return Err(Error::invalid("n_trusses", "must lie in 0..=4 and not exceed n_nodes"));
        }
        if !(0.0..=1.0).contains(&self.leaflet_removal) {
            return Err(Error::invalid("leaflet_removal", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

struct Builder {
    prims: Vec<LabeledPrimitive>,
    next_id: u32,
}

impl Builder {
    fn push(&mut self, shape: Shape, class: SemanticClass) {
        self.next_id += 1;
        self.prims.push(LabeledPrimitive {
            shape,
            class,
            instance: self.next_id,
        });
    }

    /// Reserves an id without emitting a primitive, so that removing parts
    /// leaves the ids of everything else unchanged.
    fn skip(&mut self) {
        self.next_id += 1;
    }
}

fn direction(azimuth: f64, elevation: f64) -> Vec3 {
    Vec3::new(
        azimuth.cos() * elevation.cos(),
        azimuth.sin() * elevation.cos(),
        elevation.sin(),
    )
}

fn deg(d: f64) -> f64 {
    d * PI / 180.0
}

/// Generates a plant standing at the origin and growing along `+z`.
///
/// The main stem is background, as are leaf and truss rachises and leaflets.
/// Petioles, peduncles and tomatoes are the objects of interest. Geometry
/// depends only on `seed` and the structural knobs; the leaflet-removal
/// choice draws from its own stream so removing leaflets leaves every other
/// primitive in place.
pub fn generate_plant(seed: u64, params: &PlantParams) -> Result<LabeledScene> {
    params.validate()?;
    let mut rng = RandomStream::new(seed);
    let removal = rng.derive(REMOVAL_STREAM);
    let h = params.stem_height;
    let mut b = Builder {
        prims: Vec::new(),
        next_id: 0,
    };

    let bend_dir = rng.gen_range(0.0..2.0 * PI);
    let bend = rng.gen_range(0.005..0.02);
    let stem_at = |z: f64| {
        let off = bend * (PI * z / h).sin();
        Vec3::new(off * bend_dir.cos(), off * bend_dir.sin(), z)
    };
    let stem_radius = |z: f64| STEM_RADIUS_BASE + (STEM_RADIUS_TOP - STEM_RADIUS_BASE) * z / h;
    for k in 0..STEM_SEGMENTS {
        let z0 = h * k as f64 / STEM_SEGMENTS as f64;
        let z1 = h * (k + 1) as f64 / STEM_SEGMENTS as f64;
        b.push(
            Shape::Cylinder {
                a: stem_at(z0),
                b: stem_at(z1),
                radius: stem_radius(0.5 * (z0 + z1)),
            },
            SemanticClass::Background,
        );
    }

    let n = params.n_nodes;
    let truss_nodes: Vec<usize> = (0..params.n_trusses)
        .map(|k| ((k as f64 + 0.5) * n as f64 / params.n_trusses as f64) as usize)
        .collect();
    let phase = rng.gen_range(0.0..2.0 * PI);
    let mut petiole_index = 0u64;
    for i in 0..n {
        let z = h * (0.22 + 0.7 * i as f64 / (n - 1) as f64) + rng.gen_range(-0.01..0.01);
        let azimuth = phase + PHYLLOTAXIS * i as f64 + deg(rng.gen_range(-10.0..10.0));
        let root = stem_at(z) + direction(azimuth, 0.0) * (0.5 * stem_radius(z));
        if truss_nodes.contains(&i) {
            add_truss(&mut b, &mut rng, root, azimuth);
        } else {
            let mut leaf_rng = removal.derive(petiole_index);
            petiole_index += 1;
            add_leaf(&mut b, &mut rng, &mut leaf_rng, root, azimuth, params);
        }
    }

    LabeledScene::new(b.prims, Vec3::zeros())
}

fn add_leaf(
    b: &mut Builder,
    rng: &mut RandomStream,
    removal: &mut RandomStream,
    root: Vec3,
    azimuth: f64,
    params: &PlantParams,
) {
    let elevation = deg(rng.gen_range(30.0..50.0));
    let length = rng.gen_range(0.05..0.07);
    let tip = root + direction(azimuth, elevation) * length;
    b.push(
        Shape::Cylinder {
            a: root,
            b: tip,
            radius: PETIOLE_RADIUS,
        },
        SemanticClass::Petiole,
    );

    // drooping rachis in two segments
    let yaw = azimuth + deg(rng.gen_range(-15.0..15.0));
    let d1 = direction(yaw, elevation - deg(25.0));
    let d2 = direction(yaw, elevation - deg(65.0));
    let l1 = rng.gen_range(0.08..0.11);
    let l2 = rng.gen_range(0.08..0.11);
    let mid = tip + d1 * l1;
    let end = mid + d2 * l2;
    b.push(
        Shape::Cylinder {
            a: tip,
            b: mid,
            radius: RACHIS_RADIUS,
        },
        SemanticClass::Background,
    );
    b.push(
        Shape::Cylinder {
            a: mid,
            b: end,
            radius: RACHIS_RADIUS,
        },
        SemanticClass::Background,
    );

    let nl = params.leaflets_per_petiole;
    let n_removed = ((params.leaflet_removal * nl as f64) + 0.5).floor() as usize;
    let removed = sample(removal, nl, n_removed.min(nl)).into_vec();
    let total = l1 + l2;
    for k in 0..nl {
        let radius = rng.gen_range(0.025..0.04);
        let tilt = deg(rng.gen_range(20.0..60.0));
        let tilt_dir = rng.gen_range(0.0..2.0 * PI);
        let terminal = k + 1 == nl;
        let (anchor, along) = if terminal {
            (end, d2)
        } else {
            let s = total * (0.2 + 0.75 * (k / 2) as f64 / ((nl - 1) / 2).max(1) as f64);
            if s <= l1 {
                (tip + d1 * s, d1)
            } else {
                (mid + d2 * (s - l1), d2)
            }
        };
        let side = if terminal {
            along
        } else {
            let lateral = along.cross(&Vec3::z()).normalize();
            if k % 2 == 0 {
                lateral
            } else {
                -lateral
            }
        };
        let center = anchor + side * (0.9 * radius);
        let normal = (Vec3::z() * tilt.cos() + direction(tilt_dir, 0.0) * tilt.sin()).normalize();
        if removed.contains(&k) {
            b.skip();
        } else {
            b.push(
                Shape::Disc {
                    center,
                    normal,
                    radius,
                },
                SemanticClass::Background,
            );
        }
    }
}

fn add_truss(b: &mut Builder, rng: &mut RandomStream, root: Vec3, azimuth: f64) {
    let elevation = deg(rng.gen_range(-10.0..15.0));
    let length = rng.gen_range(0.04..0.06);
    let tip = root + direction(azimuth, elevation) * length;
    b.push(
        Shape::Cylinder {
            a: root,
            b: tip,
            radius: PEDUNCLE_RADIUS,
        },
        SemanticClass::Peduncle,
    );

    let n_tomatoes: usize = rng.gen_range(2..=5);
    let spacing = 2.0 * TOMATO_RADIUS.1 + TOMATO_GAP;
    let dir = direction(azimuth + deg(rng.gen_range(-25.0..25.0)), deg(rng.gen_range(-40.0..-25.0)));
    let first = 0.015;
    let rachis_len = first + (n_tomatoes - 1) as f64 * spacing + 0.01;
    b.push(
        Shape::Cylinder {
            a: tip,
            b: tip + dir * rachis_len,
            radius: RACHIS_RADIUS,
        },
        SemanticClass::Background,
    );
    for k in 0..n_tomatoes {
        let r = rng.gen_range(TOMATO_RADIUS.0..TOMATO_RADIUS.1);
        let hang = tip + dir * (first + k as f64 * spacing);
        b.push(
            Shape::Sphere {
                center: hang - Vec3::z() * (r + 0.004),
                radius: r,
            },
            SemanticClass::Tomato,
        );
    }
}
