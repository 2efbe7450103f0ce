//! Attention regions: boxes around the estimated main stem and around
//! detected plant parts. Only voxels inside them earn information gain.

use std::io::Write;

use crate::clustering::Cluster;
use crate::error::{Error, Result};
use crate::geometry::{rotation_z_to, OrientedBox, Vec3, WorkspaceBounds};
use crate::semantic_map::{SemanticClass, SemanticVoxelMap};

/// How much is known about the plant, in increasing order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    NoInfo,
    VisibleRegion,
    TomatoCentered,
    OoiSegmented,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegionTag {
    MainStem,
    Ooi,
}

impl RegionTag {
    pub fn name(self) -> &'static str {
        match self {
            RegionTag::MainStem => "stem",
            RegionTag::Ooi => "ooi",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub tag: RegionTag,
    pub bbox: OrientedBox,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttentionParams {
    pub stem_box_height: f64,
    pub stem_box_breadth: f64,
    pub ooi_box_size: f64,
}

impl Default for AttentionParams {
    fn default() -> Self {
        Self {
            stem_box_height: 0.7,
            stem_box_breadth: 0.05,
            ooi_box_size: 0.03,
        }
    }
}

impl AttentionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.stem_box_height > 0.0 && self.stem_box_breadth > 0.0 && self.ooi_box_size > 0.0) {
            return Err(Error::invalid("attention", "box dimensions must be positive"));
        }
        Ok(())
    }
}

/// The attention set: a phase and the union of its regions.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionState {
    pub phase: Phase,
    pub regions: Vec<Region>,
}

impl Default for AttentionState {
    fn default() -> Self {
        Self::unrestricted()
    }
}

impl AttentionState {
    /// No regions: every point is attended.
    pub fn unrestricted() -> Self {
        Self {
            phase: Phase::NoInfo,
            regions: Vec::new(),
        }
    }

    pub fn is_unrestricted(&self) -> bool {
        self.regions.is_empty()
    }

    /// True when the state has no regions or `p` lies in any of them.
    pub fn in_attention(&self, p: &Vec3) -> bool {
        self.regions.is_empty() || self.regions.iter().any(|r| r.bbox.contains(p))
    }

    pub fn stem_regions(&self) -> impl Iterator<Item = &Region> {
        self.regions.iter().filter(|r| r.tag == RegionTag::MainStem)
    }

    pub fn ooi_regions(&self) -> impl Iterator<Item = &Region> {
        self.regions.iter().filter(|r| r.tag == RegionTag::Ooi)
    }

    /// Adds a cube around every `center`, e.g. from known object positions.
    pub fn with_ooi_cubes(mut self, centers: &[Vec3], side: f64) -> Result<Self> {
        for c in centers {
            self.regions.push(Region {
                tag: RegionTag::Ooi,
                bbox: OrientedBox::cube(*c, side)?,
            });
        }
        Ok(self)
    }

    /// Keeps only main-stem regions.
    pub fn stem_only(&self) -> Self {
        Self {
            phase: self.phase,
            regions: self.stem_regions().copied().collect(),
        }
    }

    /// Writes `tag cx cy cz hx hy hz qx qy qz qw` per region.
    pub fn write_regions<W: Write>(&self, mut out: W) -> Result<()> {
        for r in &self.regions {
            let b = &r.bbox;
            let q = b.orientation.coords;
            writeln!(
                out,
                "{} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6} {:.6}",
                r.tag.name(),
                b.center.x,
                b.center.y,
                b.center.z,
                b.half_extents.x,
                b.half_extents.y,
                b.half_extents.z,
                q.x,
                q.y,
                q.z,
                q.w
            )?;
        }
        Ok(())
    }
}

fn stem_box(center: Vec3, half_len: f64, axis: &Vec3, breadth: f64) -> OrientedBox {
    let half_b = 0.5 * breadth;
    OrientedBox::new(
        center,
        Vec3::new(half_b, half_b, half_len.max(half_b)),
        rotation_z_to(axis),
    )
    .expect("positive extents")
}

fn vertical_column(x: f64, y: f64, z0: f64, z1: f64, breadth: f64) -> OrientedBox {
    let (lo, hi) = (z0.min(z1), z0.max(z1));
    stem_box(Vec3::new(x, y, 0.5 * (lo + hi)), 0.5 * (hi - lo), &Vec3::z(), breadth)
}

/// Rebuilds the attention set after a map update.
///
/// The phase never regresses: when the current data cannot support the
/// previous phase, the previous main-stem boxes are kept. Object cubes are
/// always rebuilt from the current clusters, so undetected objects lose
/// theirs.
pub fn update_attention(
    prev: Option<&AttentionState>,
    map: &SemanticVoxelMap,
    clusters: &[Cluster],
    bounds: &WorkspaceBounds,
    params: &AttentionParams,
) -> AttentionState {
    let prev_phase = prev.map_or(Phase::NoInfo, |p| p.phase);
    let b = params.stem_box_breadth;
    let base = bounds.plant_base();
    let mid_z = base.z + 0.5 * params.stem_box_height;

    let mut stem_attached: Vec<&Cluster> = clusters.iter().filter(|c| c.class.is_stem_attached()).collect();
    let tomatoes: Vec<&Cluster> = clusters.iter().filter(|c| c.class == SemanticClass::Tomato).collect();

    let (phase, stem): (Phase, Option<Vec<OrientedBox>>) = if !stem_attached.is_empty() {
        stem_attached.sort_by(|a, b| a.center.z.total_cmp(&b.center.z).then(a.members[0].cmp(&b.members[0])));
        let mut boxes = Vec::with_capacity(stem_attached.len() + 1);
        for pair in stem_attached.windows(2) {
            let (lo, hi) = (pair[0].center, pair[1].center);
            let axis = hi - lo;
            boxes.push(stem_box((lo + hi) * 0.5, 0.5 * axis.norm(), &axis, b));
        }
        let (bot, top) = (stem_attached[0].center, stem_attached[stem_attached.len() - 1].center);
        boxes.push(vertical_column(top.x, top.y, top.z, bounds.max().z, b));
        boxes.push(vertical_column(bot.x, bot.y, bounds.min().z, bot.z, b));
        (Phase::OoiSegmented, Some(boxes))
    } else if !tomatoes.is_empty() {
        let c = tomatoes.iter().fold(Vec3::zeros(), |acc, t| acc + t.center) / tomatoes.len() as f64;
        let h = params.stem_box_height;
        (
            Phase::TomatoCentered,
            Some(vec![stem_box(Vec3::new(c.x, c.y, mid_z), 0.5 * h, &Vec3::z(), b)]),
        )
    } else {
        let (sum, n) = map
            .occupied_voxels()
            .iter()
            .map(|(k, _)| map.key_center(*k))
            .filter(|p| bounds.contains(p))
            .fold((Vec3::zeros(), 0usize), |(s, n), p| (s + p, n + 1));
        if n > 0 {
            let c = sum / n as f64;
            let h = params.stem_box_height;
            (
                Phase::VisibleRegion,
                Some(vec![stem_box(Vec3::new(c.x, c.y, mid_z), 0.5 * h, &Vec3::z(), b)]),
            )
        } else {
            (Phase::NoInfo, None)
        }
    };

    let (phase, stem_boxes) = match (prev, phase >= prev_phase) {
        (Some(p), false) => (p.phase, p.stem_regions().map(|r| r.bbox).collect()),
        _ => (phase, stem.unwrap_or_default()),
    };

    let mut regions: Vec<Region> = stem_boxes
        .into_iter()
        .map(|bbox| Region {
            tag: RegionTag::MainStem,
            bbox,
        })
        .collect();
    if phase > Phase::NoInfo {
        for c in clusters {
            regions.push(Region {
                tag: RegionTag::Ooi,
                bbox: OrientedBox::cube(c.center, params.ooi_box_size).expect("positive side"),
            });
        }
    }
    AttentionState { phase, regions }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantic_map::{SemanticVoxel, VoxelKey};
    use proptest::prelude::*;

    fn bounds() -> WorkspaceBounds {
        WorkspaceBounds::new(Vec3::new(0.4, -0.5, 0.4), Vec3::new(1.0, 0.5, 1.3), Vec3::new(0.7, 0.0, 0.45)).unwrap()
    }

    fn map() -> SemanticVoxelMap {
        SemanticVoxelMap::new(0.003, bounds()).unwrap()
    }

    fn cluster(class: SemanticClass, c: Vec3) -> Cluster {
        Cluster {
            class,
            members: vec![VoxelKey::new((c.z * 1000.0) as i32, 0, 0)],
            center: c,
        }
    }

    fn occupied(m: &mut SemanticVoxelMap, p: Vec3) {
        let k = m.world_to_key(&p);
        m.set_voxel(
            k,
            SemanticVoxel {
                p_o: 0.9,
                c_s: SemanticClass::Background,
                p_s: 0.5,
            },
        )
        .unwrap();
    }

    #[test]
    fn empty_map_is_unrestricted() {
        let s = update_attention(None, &map(), &[], &bounds(), &AttentionParams::default());
        assert_eq!(s.phase, Phase::NoInfo);
        assert!(s.regions.is_empty());
        assert!(s.in_attention(&Vec3::new(5.0, 5.0, 5.0)));
    }

    #[test]
    fn visible_region_centering() {
        let mut m = map();
        for p in [Vec3::new(0.65, 0.05, 0.8), Vec3::new(0.75, 0.15, 0.9)] {
            occupied(&mut m, p);
        }
        let s = update_attention(None, &m, &[], &bounds(), &AttentionParams::default());
        assert_eq!(s.phase, Phase::VisibleRegion);
        assert_eq!(s.regions.len(), 1);
        let c = s.regions[0].bbox.center;
        // voxel centers of the two points average to about (0.7, 0.1)
        assert!((c.x - 0.7).abs() < 0.003 && (c.y - 0.1).abs() < 0.003);
        assert!((c.z - 0.8).abs() < 1e-12);
        assert_eq!(s.regions[0].bbox.half_extents, Vec3::new(0.025, 0.025, 0.35));
    }

    #[test]
    fn tomato_centering() {
        let mut m = map();
        occupied(&mut m, Vec3::new(0.5, -0.3, 0.6));
        let clusters = [
            cluster(SemanticClass::Tomato, Vec3::new(0.7, 0.0, 0.8)),
            cluster(SemanticClass::Tomato, Vec3::new(0.8, 0.1, 0.9)),
        ];
        let s = update_attention(None, &m, &clusters, &bounds(), &AttentionParams::default());
        assert_eq!(s.phase, Phase::TomatoCentered);
        assert_eq!(s.stem_regions().count(), 1);
        let c = s.regions[0].bbox.center;
        assert!((c - Vec3::new(0.75, 0.05, 0.8)).norm() < 1e-12);
        assert_eq!(s.ooi_regions().count(), 2);
    }

    #[test]
    fn two_petioles_give_three_stem_boxes_and_two_cubes() {
        let clusters = [
            cluster(SemanticClass::Petiole, Vec3::new(0.7, 0.0, 1.0)),
            cluster(SemanticClass::Petiole, Vec3::new(0.72, 0.02, 0.8)),
        ];
        let s = update_attention(None, &map(), &clusters, &bounds(), &AttentionParams::default());
        assert_eq!(s.phase, Phase::OoiSegmented);
        assert_eq!(s.stem_regions().count(), 3);
        assert_eq!(s.ooi_regions().count(), 2);
        // the between-pair box spans both centers along its long axis
        let pair = s.regions[0].bbox;
        assert!(pair.contains(&Vec3::new(0.71, 0.01, 0.9)));
        assert!(pair.contains(&Vec3::new(0.7, 0.0, 1.0)));
        assert!(pair.contains(&Vec3::new(0.72, 0.02, 0.8)));
        // caps reach the bounds
        assert!(s.in_attention(&Vec3::new(0.7, 0.0, 1.29)));
        assert!(s.in_attention(&Vec3::new(0.72, 0.02, 0.41)));
        assert!(!s.in_attention(&Vec3::new(0.9, 0.3, 0.9)));
    }

    #[test]
    fn phase_never_regresses() {
        let params = AttentionParams::default();
        let clusters = [
            cluster(SemanticClass::Peduncle, Vec3::new(0.7, 0.0, 0.9)),
            cluster(SemanticClass::Tomato, Vec3::new(0.75, 0.0, 0.85)),
        ];
        let first = update_attention(None, &map(), &clusters, &bounds(), &params);
        assert_eq!(first.phase, Phase::OoiSegmented);
        let only_tomato = [clusters[1].clone()];
        let second = update_attention(Some(&first), &map(), &only_tomato, &bounds(), &params);
        assert_eq!(second.phase, Phase::OoiSegmented);
        let stems = |s: &AttentionState| s.stem_regions().copied().collect::<Vec<_>>();
        assert_eq!(stems(&first), stems(&second));
        // the lost peduncle also lost its cube
        assert_eq!(second.ooi_regions().count(), 1);
    }

    #[test]
    fn membership_examples() {
        let s = AttentionState::unrestricted()
            .with_ooi_cubes(&[Vec3::zeros(), Vec3::new(0.01, 0.0, 0.0)], 0.03)
            .unwrap();
        assert!(!s.in_attention(&Vec3::new(0.0, 0.0, 0.02)));
        assert!(s.in_attention(&Vec3::new(0.005, 0.0, 0.0)));
    }

    #[test]
    fn region_dump_format() {
        let s = AttentionState::unrestricted().with_ooi_cubes(&[Vec3::new(0.7, 0.0, 1.0)], 0.03).unwrap();
        let mut buf = Vec::new();
        s.write_regions(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "ooi 0.700000 0.000000 1.000000 0.015000 0.015000 0.015000 0.000000 0.000000 0.000000 1.000000\n"
        );
    }

    proptest! {
        #[test]
        fn stem_boxes_touch_bounds_and_count_matches(
            zs in proptest::collection::vec(0.45..1.25f64, 1..8),
            tomatoes in 0usize..4,
        ) {
            let mut clusters: Vec<Cluster> = zs
                .iter()
                .enumerate()
                .map(|(i, z)| {
                    let class = if i % 2 == 0 { SemanticClass::Petiole } else { SemanticClass::Peduncle };
                    cluster(class, Vec3::new(0.7 + 0.01 * i as f64, 0.0, *z))
                })
                .collect();
            for t in 0..tomatoes {
                clusters.push(cluster(SemanticClass::Tomato, Vec3::new(0.75, 0.05, 0.6 + 0.1 * t as f64)));
            }
            let s = update_attention(None, &map(), &clusters, &bounds(), &AttentionParams::default());
            prop_assert_eq!(s.stem_regions().count(), zs.len() - 1 + 2);
            prop_assert_eq!(s.ooi_regions().count(), clusters.len());
            let (blo, bhi) = (bounds().min(), bounds().max());
            for r in s.stem_regions() {
                let (lo, hi) = r.bbox.aabb();
                prop_assert!((0..3).all(|a| lo[a] <= bhi[a] && hi[a] >= blo[a]));
            }
        }
    }
}
