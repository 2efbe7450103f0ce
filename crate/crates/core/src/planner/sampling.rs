use std::f64::consts::PI;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{Vec3, Viewpoint};

/// Where candidate viewpoints may be placed.
#[derive(Debug, Clone, PartialEq)]
pub enum SamplingConstraint {
    /// Vertical plane `x = center.x` facing `+x`, with random pan and tilt.
    Planar {
        center: Vec3,
        width: f64,
        height: f64,
        /// Radians.
        max_pan: f64,
        /// Radians.
        max_tilt: f64,
    },
    /// Sector of a vertical cylinder around the plant, cameras facing the
    /// axis horizontally.
    CylindricalSector {
        /// Axis point at mid-height.
        center: Vec3,
        radius: f64,
        height: f64,
        /// Angular width, radians.
        sector: f64,
        /// Azimuth of the sector middle as seen from the axis, radians.
        facing: f64,
    },
    Discrete(Vec<Viewpoint>),
}

impl SamplingConstraint {
    /// The default planar region: 0.7 m square at `x = 0.35`, pan and tilt
    /// within 15 degrees.
    pub fn default_planar() -> Self {
        SamplingConstraint::Planar {
            center: Vec3::new(0.35, 0.0, 0.8),
            width: 0.7,
            height: 0.7,
            max_pan: 15f64.to_radians(),
            max_tilt: 15f64.to_radians(),
        }
    }

    /// 90 degree sector of radius 0.4 m and height 0.7 m facing a robot on
    /// the `-x` side of the plant at `axis`.
    pub fn default_cylindrical(axis: Vec3) -> Self {
        SamplingConstraint::CylindricalSector {
            center: axis,
            radius: 0.4,
            height: 0.7,
            sector: PI / 2.0,
            facing: PI,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SamplingConstraint::Planar {
                width,
                height,
                max_pan,
                max_tilt,
                ..
            } => {
                if !(*width > 0.0 && *height > 0.0) {
                    return Err(Error::invalid("sampling", "plane extents must be positive"));
                }
                if !(*max_pan >= 0.0 && *max_tilt >= 0.0) {
                    return Err(Error::invalid("sampling", "angle limits must be non-negative"));
                }
            }
            SamplingConstraint::CylindricalSector {
                radius, height, sector, ..
            } => {
                if !(*radius > 0.0 && *height > 0.0 && *sector > 0.0) {
                    return Err(Error::invalid("sampling", "cylinder extents must be positive"));
                }
            }
            SamplingConstraint::Discrete(v) => {
                if v.is_empty() {
                    return Err(Error::invalid("sampling", "discrete set is empty"));
                }
            }
        }
        Ok(())
    }
}

/// `n` cells of a `m x m` grid, `m = ceil(sqrt(n))`, in random order, each
/// with a jittered position in `[0, 1)^2`.
fn stratified<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<(f64, f64)> {
    let m = (n as f64).sqrt().ceil() as usize;
    let mut cells: Vec<usize> = (0..m * m).collect();
    cells.shuffle(rng);
    cells.truncate(n);
    cells
        .into_iter()
        .map(|c| {
            let (i, j) = (c % m, c / m);
            let a = (i as f64 + rng.gen::<f64>()) / m as f64;
            let b = (j as f64 + rng.gen::<f64>()) / m as f64;
            (a, b)
        })
        .collect()
}

fn symmetric<R: Rng + ?Sized>(rng: &mut R, limit: f64) -> f64 {
    if limit > 0.0 {
        rng.gen_range(-limit..=limit)
    } else {
        0.0
    }
}

/// Draws `n` candidate viewpoints spread evenly over the constraint.
pub fn sample_candidates<R: Rng + ?Sized>(
    constraint: &SamplingConstraint,
    n: usize,
    rng: &mut R,
) -> Result<Vec<Viewpoint>> {
    if n == 0 {
        return Err(Error::invalid("n_candidates", "must be at least 1"));
    }
    constraint.validate()?;
    match constraint {
        SamplingConstraint::Planar {
            center,
            width,
            height,
            max_pan,
            max_tilt,
        } => Ok(stratified(n, rng)
            .into_iter()
            .map(|(a, b)| {
                let pos = Vec3::new(center.x, center.y + (a - 0.5) * width, center.z + (b - 0.5) * height);
                let pan = symmetric(rng, *max_pan);
                let tilt = symmetric(rng, *max_tilt);
                Viewpoint::from_pan_tilt(pos, pan, tilt)
            })
            .collect()),
        SamplingConstraint::CylindricalSector {
            center,
            radius,
            height,
            sector,
            facing,
        } => Ok(stratified(n, rng)
            .into_iter()
            .map(|(a, b)| {
                let az = facing + (a - 0.5) * sector;
                let z = center.z + (b - 0.5) * height;
                let pos = Vec3::new(center.x + radius * az.cos(), center.y + radius * az.sin(), z);
                Viewpoint::looking_at(pos, Vec3::new(center.x, center.y, z))
            })
            .collect()),
        SamplingConstraint::Discrete(set) => {
            if n > set.len() {
                return Err(Error::NotEnoughCandidates {
                    requested: n,
                    available: set.len(),
                });
            }
            Ok(sample(rng, set.len(), n).into_iter().map(|i| set[i]).collect())
        }
    }
}
