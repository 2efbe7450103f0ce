//! Probabilistic voxel map carrying occupancy plus a class label and
//! confidence per voxel.
//!
//! Occupancy follows the usual log-odds sensor model. Semantics are only
//! ever written at ray endpoints and merged with [`max_fusion`]; free-space
//! carving touches occupancy alone.

mod grid;
mod store;

use std::fmt;
use std::io::{BufRead, Write};

use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::geometry::{Ray, Vec3, WorkspaceBounds};

pub(crate) use grid::GridWalk;
pub(crate) use store::{split, ChunkCursor, ChunkStore};

pub const DEFAULT_RESOLUTION: f64 = 0.003;

/// Semantic class of a point or voxel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(i8)]
pub enum SemanticClass {
    Background = -1,
    Peduncle = 0,
    Petiole = 1,
    Tomato = 2,
}

impl SemanticClass {
    pub const OBJECTS_OF_INTEREST: [SemanticClass; 3] = [
        SemanticClass::Peduncle,
        SemanticClass::Petiole,
        SemanticClass::Tomato,
    ];

    pub fn from_i8(v: i8) -> Option<Self> {
        match v {
            -1 => Some(Self::Background),
            0 => Some(Self::Peduncle),
            1 => Some(Self::Petiole),
            2 => Some(Self::Tomato),
            _ => None,
        }
    }

    pub fn as_i8(self) -> i8 {
        self as i8
    }

    pub fn is_object_of_interest(self) -> bool {
        self != Self::Background
    }

    /// Peduncles and petioles attach to the main stem.
    pub fn is_stem_attached(self) -> bool {
        matches!(self, Self::Peduncle | Self::Petiole)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Background => "background",
            Self::Peduncle => "peduncle",
            Self::Petiole => "petiole",
            Self::Tomato => "tomato",
        }
    }
}

impl fmt::Display for SemanticClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Class label with the confidence that it is correct.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Semantics {
    pub class: SemanticClass,
    pub confidence: f64,
}

impl Semantics {
    pub const UNKNOWN: Semantics = Semantics {
        class: SemanticClass::Background,
        confidence: 0.5,
    };

    pub fn new(class: SemanticClass, confidence: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::invalid("confidence", format!("{confidence} not in [0, 1]")));
        }
        Ok(Self { class, confidence })
    }
}

/// Merges stored semantics `prev` with a new observation `new`.
///
/// Matching labels average their confidences. Conflicting labels keep the
/// more confident one at 90% of its confidence; on an exact tie the stored
/// label wins.
pub fn max_fusion(prev: Semantics, new: Semantics) -> Semantics {
    if prev.class == new.class {
        Semantics {
            class: new.class,
            confidence: (prev.confidence + new.confidence) / 2.0,
        }
    } else {
        let winner = if new.confidence > prev.confidence {
            new
        } else {
            prev
        };
        Semantics {
            class: winner.class,
            confidence: 0.9 * winner.confidence,
        }
    }
}

/// Binary entropy in bits, with `0 log 0 = 0`.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    // Both terms come from the larger probability, whose complement is exact,
    // so that I(p) == I(1 - p) bit for bit.
    let big = if p >= 0.5 { p } else { 1.0 - p };
    let small = 1.0 - big;
    -small * small.log2() - big * big.log2()
}

pub fn semantic_entropy(voxel: &SemanticVoxel) -> f64 {
    binary_entropy(voxel.p_s)
}

pub fn occupancy_entropy(voxel: &SemanticVoxel) -> f64 {
    binary_entropy(voxel.p_o)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemanticPoint {
    pub position: Vec3,
    pub class: SemanticClass,
    pub confidence: f64,
}

impl SemanticPoint {
    pub fn new(position: Vec3, class: SemanticClass, confidence: f64) -> Self {
        Self {
            position,
            class,
            confidence,
        }
    }

    /// A point without detection information.
    pub fn background(position: Vec3) -> Self {
        Self::new(position, SemanticClass::Background, 0.5)
    }

    pub fn semantics(&self) -> Semantics {
        Semantics {
            class: self.class,
            confidence: self.confidence,
        }
    }
}

/// One cell of the map. Never-observed cells read as
/// `p_o = 0.5, c_s = background, p_s = 0.5`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemanticVoxel {
    pub p_o: f64,
    pub c_s: SemanticClass,
    pub p_s: f64,
}

impl SemanticVoxel {
    pub const UNKNOWN: SemanticVoxel = SemanticVoxel {
        p_o: 0.5,
        c_s: SemanticClass::Background,
        p_s: 0.5,
    };

    pub fn is_occupied(&self) -> bool {
        self.p_o > 0.5
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VoxelKey {
    pub x: i32,
    pub y: i32,
    pub z: i32,
}

impl VoxelKey {
    pub const fn new(x: i32, y: i32, z: i32) -> Self {
        Self { x, y, z }
    }

    pub(crate) fn as_array(self) -> [i32; 3] {
        [self.x, self.y, self.z]
    }

    pub(crate) fn from_array(a: [i32; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }
}

/// Hit/miss sensor model in probability space, applied as log-odds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OccupancyModel {
    pub hit: f64,
    pub miss: f64,
    pub clamp_min: f64,
    pub clamp_max: f64,
}

impl Default for OccupancyModel {
    fn default() -> Self {
        Self {
            hit: 0.7,
            miss: 0.4,
            clamp_min: 0.12,
            clamp_max: 0.97,
        }
    }
}

impl OccupancyModel {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |p: f64| p > 0.0 && p < 1.0;
        if !(in_unit(self.hit) && in_unit(self.miss) && in_unit(self.clamp_min) && in_unit(self.clamp_max)) {
            return Err(Error::invalid("occupancy", "probabilities must lie in (0, 1)"));
        }
        if !(self.hit > 0.5 && self.miss < 0.5 && self.clamp_min < 0.5 && self.clamp_max > 0.5) {
            return Err(Error::invalid(
                "occupancy",
                "need hit > 0.5 > miss and clamp_min < 0.5 < clamp_max",
            ));
        }
        Ok(())
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn sigmoid(l: f64) -> f64 {
    1.0 / (1.0 + (-l).exp())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IntegrationSummary {
    pub points: usize,
    /// Points whose endpoint fell outside the map bounds.
    pub out_of_bounds: usize,
    pub occupied_updates: usize,
    pub free_updates: usize,
    pub semantic_updates: usize,
}

impl IntegrationSummary {
    pub fn voxels_touched(&self) -> usize {
        self.occupied_updates + self.free_updates
    }
}

#[derive(Clone, Copy)]
struct LogOddsModel {
    hit: f32,
    miss: f32,
    min: f32,
    max: f32,
}

impl From<OccupancyModel> for LogOddsModel {
    fn from(m: OccupancyModel) -> Self {
        Self {
            hit: logit(m.hit) as f32,
            miss: logit(m.miss) as f32,
            min: logit(m.clamp_min) as f32,
            max: logit(m.clamp_max) as f32,
        }
    }
}

/// Sparse semantic occupancy map restricted to the workspace bounds.
///
/// Voxel `k` covers `[k * res, (k + 1) * res)` on every axis, so a point on a
/// face belongs to the higher-index voxel. Only voxels whose center lies in
/// the bounds are stored; updates outside are dropped.
#[derive(Clone)]
pub struct SemanticVoxelMap {
    resolution: f64,
    bounds: WorkspaceBounds,
    model: OccupancyModel,
    log_odds: LogOddsModel,
    key_min: [i32; 3],
    key_max: [i32; 3],
    pub(crate) store: ChunkStore,
    semantics: FxHashMap<VoxelKey, Semantics>,
    clouds: u32,
}

impl fmt::Debug for SemanticVoxelMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SemanticVoxelMap")
            .field("resolution", &self.resolution)
            .field("bounds", &self.bounds)
            .field("semantic_voxels", &self.semantics.len())
            .field("clouds", &self.clouds)
            .finish()
    }
}

impl SemanticVoxelMap {
    pub fn new(resolution: f64, bounds: WorkspaceBounds) -> Result<Self> {
        Self::with_model(resolution, bounds, OccupancyModel::default())
    }

    pub fn with_model(resolution: f64, bounds: WorkspaceBounds, model: OccupancyModel) -> Result<Self> {
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(Error::invalid("resolution", "must be positive"));
        }
        model.validate()?;
        let (lo, hi) = (bounds.min(), bounds.max());
        let mut key_min = [0; 3];
        let mut key_max = [0; 3];
        for a in 0..3 {
            key_min[a] = (lo[a] / resolution - 0.5).ceil() as i32;
            key_max[a] = (hi[a] / resolution - 0.5).floor() as i32;
        }
        Ok(Self {
            resolution,
            bounds,
            model,
            log_odds: model.into(),
            key_min,
            key_max,
            store: ChunkStore::default(),
            semantics: FxHashMap::default(),
            clouds: 0,
        })
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn bounds(&self) -> &WorkspaceBounds {
        &self.bounds
    }

    pub fn model(&self) -> &OccupancyModel {
        &self.model
    }

    pub fn world_to_key(&self, p: &Vec3) -> VoxelKey {
        VoxelKey::new(
            (p.x / self.resolution).floor() as i32,
            (p.y / self.resolution).floor() as i32,
            (p.z / self.resolution).floor() as i32,
        )
    }

    pub fn key_center(&self, key: VoxelKey) -> Vec3 {
        let r = self.resolution;
        Vec3::new(
            (f64::from(key.x) + 0.5) * r,
            (f64::from(key.y) + 0.5) * r,
            (f64::from(key.z) + 0.5) * r,
        )
    }

    /// True when the voxel center lies inside the bounds.
    #[inline]
    pub fn contains_key(&self, key: VoxelKey) -> bool {
        self.contains_key_array(key.as_array())
    }

    #[inline]
    pub(crate) fn contains_key_array(&self, k: [i32; 3]) -> bool {
        (0..3).all(|a| k[a] >= self.key_min[a] && k[a] <= self.key_max[a])
    }

    /// Stored state of a voxel, or `None` if it was never observed.
    pub fn get(&self, key: VoxelKey) -> Option<SemanticVoxel> {
        let l = self.store.log_odds(key.as_array())?;
        let sem = self.semantics.get(&key).copied().unwrap_or(Semantics::UNKNOWN);
        Some(SemanticVoxel {
            p_o: sigmoid(f64::from(l)),
            c_s: sem.class,
            p_s: sem.confidence,
        })
    }

    /// Like [`get`](Self::get) but unknown voxels read as
    /// [`SemanticVoxel::UNKNOWN`].
    pub fn voxel(&self, key: VoxelKey) -> SemanticVoxel {
        self.get(key).unwrap_or(SemanticVoxel::UNKNOWN)
    }

    pub(crate) fn semantics_of(&self, key: VoxelKey) -> Option<Semantics> {
        self.semantics.get(&key).copied()
    }

    /// Number of voxels that have been observed at least once.
    pub fn observed_count(&self) -> usize {
        self.store.observed().count()
    }

    pub fn clouds_integrated(&self) -> u32 {
        self.clouds
    }

    /// Overwrites one voxel. Used to restore exported maps and to build
    /// synthetic maps.
    pub fn set_voxel(&mut self, key: VoxelKey, voxel: SemanticVoxel) -> Result<()> {
        if !self.contains_key(key) {
            return Err(Error::invalid("key", format!("{key:?} lies outside the map bounds")));
        }
        if !(voxel.p_o > 0.0 && voxel.p_o < 1.0) {
            return Err(Error::invalid("p_o", "must lie in (0, 1)"));
        }
        let (ck, idx) = split(key.as_array());
        let ci = self.store.find_or_insert(ck);
        self.store.chunk_mut(ci).log_odds[idx] = logit(voxel.p_o) as f32;
        // occupied voxels are enumerated through their semantics entry
        self.semantics.insert(key, Semantics::new(voxel.c_s, voxel.p_s)?);
        Ok(())
    }

    /// Inserts one semantic point cloud observed from `sensor_origin`.
    ///
    /// Each point casts a ray from the origin: traversed voxels receive one
    /// miss update, the endpoint voxel one hit update, at most once per voxel
    /// per cloud, with hits taking precedence. Endpoint semantics are assigned
    /// directly to voxels without prior semantics and max-fused otherwise,
    /// folding multiple points of one voxel in point order.
    pub fn integrate_cloud(&mut self, cloud: &[SemanticPoint], sensor_origin: &Vec3) -> IntegrationSummary {
        let mut summary = IntegrationSummary {
            points: cloud.len(),
            ..Default::default()
        };
        if cloud.is_empty() {
            return summary;
        }
        self.clouds = self.clouds.wrapping_add(1);
        let occupied_tag = self.clouds.wrapping_mul(2).wrapping_add(1);
        let free_tag = self.clouds.wrapping_mul(2);
        let lo = self.log_odds;

        let mut cursor = ChunkCursor::new();
        for point in cloud {
            let key = self.world_to_key(&point.position);
            if !self.contains_key(key) {
                summary.out_of_bounds += 1;
                continue;
            }
            let (ck, idx) = split(key.as_array());
            let ci = cursor.find_or_insert(&mut self.store, ck);
            let chunk = self.store.chunk_mut(ci);
            if chunk.stamp[idx] != occupied_tag {
                chunk.stamp[idx] = occupied_tag;
                let l = chunk.log_odds[idx];
                let l = if l.is_nan() { 0.0 } else { l };
                chunk.log_odds[idx] = (l + lo.hit).clamp(lo.min, lo.max);
                summary.occupied_updates += 1;
            }
            let obs = point.semantics();
            self.semantics
                .entry(key)
                .and_modify(|s| *s = max_fusion(*s, obs))
                .or_insert(obs);
            summary.semantic_updates += 1;
        }

        let (bmin, bmax) = (self.bounds.min(), self.bounds.max());
        for point in cloud {
            let end = self.world_to_key(&point.position).as_array();
            let delta = point.position - sensor_origin;
            let length = delta.norm();
            if length <= 0.0 {
                continue;
            }
            let ray = Ray {
                origin: *sensor_origin,
                direction: delta / length,
            };
            let Some((t0, t1)) = ray.clip_aabb(&bmin, &bmax) else {
                continue;
            };
            if t0 > length {
                continue;
            }
            let t_stop = t1.min(length);
            let mut walk = GridWalk::new(sensor_origin, &ray.direction, self.resolution, t0);
            // the extra half voxel absorbs rounding at the endpoint cell
            let limit = t_stop + self.resolution;
            while walk.t_enter() <= limit {
                let key = walk.key();
                if key == end {
                    break;
                }
                if self.contains_key_array(key) {
                    let (ck, idx) = split(key);
                    let ci = cursor.find_or_insert(&mut self.store, ck);
                    let chunk = self.store.chunk_mut(ci);
                    let stamp = chunk.stamp[idx];
                    if stamp != occupied_tag && stamp != free_tag {
                        chunk.stamp[idx] = free_tag;
                        let l = chunk.log_odds[idx];
                        let l = if l.is_nan() { 0.0 } else { l };
                        chunk.log_odds[idx] = (l + lo.miss).clamp(lo.min, lo.max);
                        summary.free_updates += 1;
                    }
                }
                if walk.t_enter() > t_stop {
                    break;
                }
                walk.advance();
            }
        }
        summary
    }

    /// Occupied voxels (`p_o > 0.5`) sorted by key.
    pub fn occupied_voxels(&self) -> Vec<(VoxelKey, SemanticVoxel)> {
        // a voxel can only become occupied through a hit or set_voxel, both of
        // which record semantics
        let mut out: Vec<(VoxelKey, SemanticVoxel)> = self
            .semantics
            .iter()
            .filter_map(|(&key, sem)| {
                let l = self.store.log_odds(key.as_array())?;
                (l > 0.0).then(|| {
                    (
                        key,
                        SemanticVoxel {
                            p_o: sigmoid(f64::from(l)),
                            c_s: sem.class,
                            p_s: sem.confidence,
                        },
                    )
                })
            })
            .collect();
        out.sort_unstable_by_key(|(k, _)| *k);
        out
    }

    /// Occupied voxels as points at their voxel centers.
    pub fn export_occupied(&self) -> Vec<SemanticPoint> {
        self.occupied_voxels()
            .into_iter()
            .map(|(k, v)| SemanticPoint::new(self.key_center(k), v.c_s, v.p_s))
            .collect()
    }

    /// Writes occupied voxels as `x y z p_o c_s p_s` lines.
    pub fn write_export<W: Write>(&self, mut out: W) -> Result<()> {
        for (key, v) in self.occupied_voxels() {
            let c = self.key_center(key);
            writeln!(
                out,
                "{:.6} {:.6} {:.6} {:.6} {} {:.6}",
                c.x,
                c.y,
                c.z,
                v.p_o,
                v.c_s.as_i8(),
                v.p_s
            )?;
        }
        Ok(())
    }

    /// Rebuilds a map from [`write_export`](Self::write_export) output.
    pub fn read_export<R: BufRead>(input: R, resolution: f64, bounds: WorkspaceBounds) -> Result<Self> {
        let mut map = Self::new(resolution, bounds)?;
        for (n, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 6 {
                return Err(Error::parse(n + 1, "expected `x y z p_o c_s p_s`"));
            }
            let num = |i: usize| -> Result<f64> {
                fields[i]
                    .parse::<f64>()
                    .map_err(|e| Error::parse(n + 1, format!("field {}: {e}", i + 1)))
            };
            let p = Vec3::new(num(0)?, num(1)?, num(2)?);
            let class = fields[4]
                .parse::<i8>()
                .ok()
                .and_then(SemanticClass::from_i8)
                .ok_or_else(|| Error::parse(n + 1, "unknown class label"))?;
            let voxel = SemanticVoxel {
                p_o: num(3)?,
                c_s: class,
                p_s: num(5)?,
            };
            map.set_voxel(map.world_to_key(&p), voxel)
                .map_err(|e| Error::parse(n + 1, e.to_string()))?;
        }
        Ok(map)
    }
}
