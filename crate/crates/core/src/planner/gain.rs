use std::collections::BTreeSet;

use crate::attention::AttentionState;
use crate::geometry::{CameraIntrinsics, Ray, Vec3, Viewpoint};
use crate::semantic_map::{binary_entropy, sigmoid, split, ChunkCursor, GridWalk, SemanticVoxelMap, VoxelKey};

/// Which entropy a viewpoint is scored by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GainMode {
    /// Label-confidence entropy over attended voxels that are not
    /// confidently free.
    Semantic,
    /// Occupancy entropy over the main-stem regions only.
    Volumetric,
}

/// Casts one ray per `stride`-th pixel (at the center of each block) and
/// calls `visit` for every traversed in-bounds voxel, stopping each ray after
/// the first occupied voxel or at `max_range`.
///
/// Rays that miss the `clip` box are skipped and the rest end where they
/// leave it. Occluders between the camera and `clip` still stop a ray.
pub(crate) fn cast_frustum(
    map: &SemanticVoxelMap,
    pose: &Viewpoint,
    intr: &CameraIntrinsics,
    stride: usize,
    clip: (&Vec3, &Vec3),
    mut visit: impl FnMut([i32; 3], f32),
) {
    let stride = stride.max(1);
    let (bmin, bmax) = (map.bounds().min(), map.bounds().max());
    let rot = pose.orientation();
    let origin = pose.position();
    let res = map.resolution();
    let mut cursor = ChunkCursor::new();
    let s = stride as f64;
    let cols = (intr.width as usize).div_ceil(stride);
    let rows = (intr.height as usize).div_ceil(stride);
    for j in 0..rows {
        let v = ((j as f64 + 0.5) * s).min(f64::from(intr.height));
        for i in 0..cols {
            let u = ((i as f64 + 0.5) * s).min(f64::from(intr.width));
            let ray = Ray {
                origin,
                direction: rot * intr.camera_direction(u, v),
            };
            let Some((c0, c1)) = ray.clip_aabb(clip.0, clip.1) else {
                continue;
            };
            let Some((t0, t1)) = ray.clip_aabb(&bmin, &bmax) else {
                continue;
            };
            if c0 >= intr.max_range {
                continue;
            }
            let t_end = t1.min(c1).min(intr.max_range);
            let mut walk = GridWalk::new(&origin, &ray.direction, res, t0);
            while walk.t_enter() < t_end {
                let key = walk.key();
                if map.contains_key_array(key) {
                    let (ck, idx) = split(key);
                    let l = cursor
                        .find(&map.store, ck)
                        .map_or(f32::NAN, |ci| map.store.chunk(ci).log_odds[idx]);
                    visit(key, l);
                    if l > 0.0 {
                        break;
                    }
                }
                walk.advance();
            }
        }
    }
}

/// Voxels seen from `pose`: every in-bounds voxel traversed by the sampled
/// rays up to and including the first occupied one.
pub fn visible_voxels(
    map: &SemanticVoxelMap,
    pose: &Viewpoint,
    intr: &CameraIntrinsics,
    ray_stride: usize,
) -> BTreeSet<VoxelKey> {
    let (lo, hi) = (map.bounds().min(), map.bounds().max());
    let mut out = BTreeSet::new();
    cast_frustum(map, pose, intr, ray_stride, (&lo, &hi), |k, _| {
        out.insert(VoxelKey::from_array(k));
    });
    out
}

const CHUNK: i32 = 8;

/// Dense per-chunk tables over the attended part of the bounds: which
/// voxels belong to the attention set, and which have already been counted
/// for the current candidate.
struct Attended {
    unrestricted: bool,
    clip_min: Vec3,
    clip_max: Vec3,
    origin: [i32; 3],
    dims: [i32; 3],
    /// Slot + 1 per dense chunk, 0 when the chunk holds no attended voxel.
    slots: Vec<u32>,
    masks: Vec<[u64; 8]>,
    stamps: Vec<Option<Box<[u16; 512]>>>,
}

impl Attended {
    fn new(map: &SemanticVoxelMap, attention: &AttentionState) -> Self {
        let (bmin, bmax) = (map.bounds().min(), map.bounds().max());
        let (clip_min, clip_max, unrestricted) = if attention.is_unrestricted() {
            (bmin, bmax, true)
        } else {
            let mut lo = Vec3::repeat(f64::INFINITY);
            let mut hi = Vec3::repeat(f64::NEG_INFINITY);
            for r in &attention.regions {
                let (a, b) = r.bbox.aabb();
                lo = lo.inf(&a);
                hi = hi.sup(&b);
            }
            (lo.sup(&bmin), hi.inf(&bmax), false)
        };
        let res = map.resolution();
        let key_of = |p: &Vec3| p.map(|c| (c / res).floor() as i32);
        let (klo, khi) = (key_of(&clip_min), key_of(&clip_max));
        let origin = [0, 1, 2].map(|a| klo[a].div_euclid(CHUNK));
        let dims = [0, 1, 2].map(|a| (khi[a].div_euclid(CHUNK) - origin[a] + 1).max(0));
        let n = if (0..3).any(|a| clip_max[a] < clip_min[a]) {
            0
        } else {
            dims.iter().map(|&d| d as usize).product()
        };
        let mut att = Attended {
            unrestricted,
            clip_min,
            clip_max,
            origin,
            dims,
            slots: vec![0; n],
            masks: Vec::new(),
            stamps: Vec::new(),
        };
        if n == 0 {
            return att;
        }
        if unrestricted {
            att.stamps = (0..n).map(|_| None).collect();
            return att;
        }
        for r in &attention.regions {
            let (a, b) = r.bbox.aabb();
            let (a, b) = (a.sup(&clip_min), b.inf(&clip_max));
            if (0..3).any(|i| b[i] < a[i]) {
                continue;
            }
            let (ka, kb) = (key_of(&a), key_of(&b));
            for x in ka.x..=kb.x {
                for y in ka.y..=kb.y {
                    for z in ka.z..=kb.z {
                        let key = [x, y, z];
                        if !map.contains_key_array(key) {
                            continue;
                        }
                        if !r.bbox.contains(&map.key_center(VoxelKey::from_array(key))) {
                            continue;
                        }
                        if let Some(ci) = att.dense_index(key) {
                            if att.slots[ci] == 0 {
                                att.masks.push([0; 8]);
                                att.slots[ci] = att.masks.len() as u32;
                            }
                            let bit = split(key).1;
                            att.masks[att.slots[ci] as usize - 1][bit >> 6] |= 1 << (bit & 63);
                        }
                    }
                }
            }
        }
        att.stamps = (0..att.masks.len()).map(|_| None).collect();
        att
    }

    #[inline]
    fn dense_index(&self, key: [i32; 3]) -> Option<usize> {
        let mut idx = 0usize;
        for a in 0..3 {
            let c = key[a].div_euclid(CHUNK) - self.origin[a];
            if c < 0 || c >= self.dims[a] {
                return None;
            }
            idx = idx * self.dims[a] as usize + c as usize;
        }
        Some(idx)
    }

    /// True the first time an attended voxel is seen under `stamp`.
    #[inline]
    fn first_visit(&mut self, key: [i32; 3], stamp: u16) -> bool {
        let Some(ci) = self.dense_index(key) else {
            return false;
        };
        let bit = split(key).1;
        let slot = if self.unrestricted {
            ci
        } else {
            let s = self.slots[ci];
            if s == 0 {
                return false;
            }
            let s = s as usize - 1;
            if self.masks[s][bit >> 6] & (1 << (bit & 63)) == 0 {
                return false;
            }
            s
        };
        let stamps = self.stamps[slot].get_or_insert_with(|| Box::new([0; 512]));
        if stamps[bit] == stamp {
            return false;
        }
        stamps[bit] = stamp;
        true
    }
}

/// Scores viewpoints against one frozen map snapshot and attention set.
pub struct GainEvaluator<'a> {
    map: &'a SemanticVoxelMap,
    intr: CameraIntrinsics,
    ray_stride: usize,
    mode: GainMode,
    attended: Attended,
    stamp: u16,
}

impl<'a> GainEvaluator<'a> {
    pub fn new(
        map: &'a SemanticVoxelMap,
        attention: &AttentionState,
        intr: &CameraIntrinsics,
        ray_stride: usize,
        mode: GainMode,
    ) -> Self {
        let effective = match mode {
            GainMode::Semantic => attention.clone(),
            GainMode::Volumetric => attention.stem_only(),
        };
        Self {
            map,
            intr: *intr,
            ray_stride,
            mode,
            attended: Attended::new(map, &effective),
            stamp: 0,
        }
    }

    /// Sum of voxel entropies over the attended part of the visible set.
    pub fn gain(&mut self, pose: &Viewpoint) -> f64 {
        if self.attended.slots.is_empty() {
            return 0.0;
        }
        if self.stamp == u16::MAX {
            self.attended.stamps.iter_mut().for_each(|s| *s = None);
            self.stamp = 0;
        }
        self.stamp += 1;
        let stamp = self.stamp;
        let map = self.map;
        let mode = self.mode;
        let att = &mut self.attended;
        let (cmin, cmax) = (att.clip_min, att.clip_max);
        let mut total = 0.0;
        cast_frustum(map, pose, &self.intr, self.ray_stride, (&cmin, &cmax), |key, l| {
            if !att.first_visit(key, stamp) {
                return;
            }
            total += voxel_gain(map, key, l, mode);
        });
        total
    }
}

#[inline]
fn voxel_gain(map: &SemanticVoxelMap, key: [i32; 3], l: f32, mode: GainMode) -> f64 {
    match mode {
        GainMode::Semantic => {
            if l.is_nan() {
                1.0
            } else if l >= 0.0 {
                map.semantics_of(VoxelKey::from_array(key))
                    .map_or(1.0, |s| binary_entropy(s.confidence))
            } else {
                0.0
            }
        }
        GainMode::Volumetric => {
            if l.is_nan() {
                1.0
            } else {
                binary_entropy(sigmoid(f64::from(l)))
            }
        }
    }
}

/// One-off gain of a single viewpoint.
pub fn expected_gain(
    map: &SemanticVoxelMap,
    pose: &Viewpoint,
    attention: &AttentionState,
    intr: &CameraIntrinsics,
    ray_stride: usize,
    mode: GainMode,
) -> f64 {
    GainEvaluator::new(map, attention, intr, ray_stride, mode).gain(pose)
}
