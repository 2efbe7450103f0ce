//! Object-level extraction of plant parts from the semantic map.
//!
//! Occupied voxels of one class are ordered with OPTICS and the ordering is
//! cut where reachability exceeds the intra-cluster distance.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;

use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::semantic_map::{SemanticClass, SemanticVoxelMap, VoxelKey};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusteringParams {
    pub min_cluster_size: usize,
    /// Meters. Also the OPTICS neighbourhood radius.
    pub max_intra_distance: f64,
    pub min_pts: usize,
}

impl Default for ClusteringParams {
    fn default() -> Self {
        Self {
            min_cluster_size: 20,
            max_intra_distance: 0.03,
            // with two, reachability reduces to nearest-link distance and the
            // cut reproduces single linkage exactly
            min_pts: 2,
        }
    }
}

impl ClusteringParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_cluster_size == 0 {
            return Err(Error::invalid("min_cluster_size", "must be positive"));
        }
        if !(self.max_intra_distance > 0.0) {
            return Err(Error::invalid("max_intra_distance", "must be positive"));
        }
        if self.min_pts == 0 {
            return Err(Error::invalid("min_pts", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub class: SemanticClass,
    /// Sorted.
    pub members: Vec<VoxelKey>,
    /// Mean of member voxel centers.
    pub center: Vec3,
}

impl Cluster {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// One entry of an OPTICS ordering. `reachability` is infinite when
/// undefined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderedPoint {
    pub index: usize,
    pub reachability: f64,
    pub core_distance: f64,
}

struct Grid<'a> {
    points: &'a [Vec3],
    cell: f64,
    buckets: FxHashMap<[i32; 3], Vec<u32>>,
}

impl<'a> Grid<'a> {
    fn new(points: &'a [Vec3], cell: f64) -> Self {
        let mut buckets: FxHashMap<[i32; 3], Vec<u32>> = FxHashMap::default();
        for (i, p) in points.iter().enumerate() {
            buckets.entry(cell_of(p, cell)).or_default().push(i as u32);
        }
        Self { points, cell, buckets }
    }

    /// Indices within `eps` of point `i` (itself included) with distances.
    fn neighbours(&self, i: usize, eps: f64, out: &mut Vec<(f64, usize)>) {
        out.clear();
        let p = self.points[i];
        let c = cell_of(&p, self.cell);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(b) = self.buckets.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) {
                        for &j in b {
                            let d = (self.points[j as usize] - p).norm();
                            if d <= eps {
                                out.push((d, j as usize));
                            }
                        }
                    }
                }
            }
        }
    }
}

fn cell_of(p: &Vec3, cell: f64) -> [i32; 3] {
    [
        (p.x / cell).floor() as i32,
        (p.y / cell).floor() as i32,
        (p.z / cell).floor() as i32,
    ]
}

#[derive(PartialEq)]
struct Seed(f64, usize);

impl Eq for Seed {}

impl Ord for Seed {
    // min-heap on (reachability, index)
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for Seed {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// OPTICS ordering of `points` with neighbourhood radius `eps`.
///
/// Unprocessed points are started in index order; ties in the seed queue
/// break toward the lower index.
pub fn optics_order(points: &[Vec3], eps: f64, min_pts: usize) -> Result<Vec<OrderedPoint>> {
    if !(eps > 0.0) {
        return Err(Error::invalid("eps", "must be positive"));
    }
    if min_pts == 0 {
        return Err(Error::invalid("min_pts", "must be at least 1"));
    }
    let n = points.len();
    let grid = Grid::new(points, eps);
    let mut reach = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut nb = Vec::new();
    let mut heap = BinaryHeap::new();

    let core_distance = |nb: &mut Vec<(f64, usize)>| -> f64 {
        if nb.len() < min_pts {
            return f64::INFINITY;
        }
        let k = min_pts - 1;
        nb.select_nth_unstable_by(k, |a, b| a.0.total_cmp(&b.0));
        nb[k].0
    };

    for start in 0..n {
        if done[start] {
            continue;
        }
        heap.push(Seed(f64::INFINITY, start));
        while let Some(Seed(r, p)) = heap.pop() {
            if done[p] || r > reach[p] {
                continue;
            }
            done[p] = true;
            grid.neighbours(p, eps, &mut nb);
            let core = core_distance(&mut nb);
            order.push(OrderedPoint {
                index: p,
                reachability: reach[p],
                core_distance: core,
            });
            if core.is_infinite() {
                continue;
            }
            for &(d, q) in &nb {
                if done[q] {
                    continue;
                }
                let r = core.max(d);
                if r < reach[q] {
                    reach[q] = r;
                    heap.push(Seed(r, q));
                }
            }
        }
    }
    Ok(order)
}

/// Splits an ordering into groups wherever reachability exceeds `cut`.
/// Points that start a group but are not core at `cut` are noise.
pub fn cut_ordering(order: &[OrderedPoint], cut: f64) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut open = false;
    for e in order {
        if e.reachability > cut {
            if e.core_distance <= cut {
                groups.push(vec![e.index]);
                open = true;
            } else {
                open = false;
            }
        } else if open {
            groups.last_mut().expect("open group").push(e.index);
        }
    }
    groups
}

/// Clusters the occupied voxels of every object class.
///
/// Output is sorted by class, then by smallest member key.
pub fn extract_clusters(map: &SemanticVoxelMap, params: &ClusteringParams) -> Vec<Cluster> {
    let mut by_class: FxHashMap<SemanticClass, Vec<VoxelKey>> = FxHashMap::default();
    for (key, v) in map.occupied_voxels() {
        if v.c_s.is_object_of_interest() {
            by_class.entry(v.c_s).or_default().push(key);
        }
    }
    let mut out = Vec::new();
    for class in SemanticClass::OBJECTS_OF_INTEREST {
        let Some(keys) = by_class.get(&class) else {
            continue;
        };
        // occupied_voxels is key-sorted, so the input order is canonical
        let points: Vec<Vec3> = keys.iter().map(|k| map.key_center(*k)).collect();
        let order = optics_order(&points, params.max_intra_distance, params.min_pts).expect("validated parameters");
        let mut clusters: Vec<Cluster> = cut_ordering(&order, params.max_intra_distance)
            .into_iter()
            .filter(|g| g.len() >= params.min_cluster_size)
            .map(|g| {
                let mut members: Vec<VoxelKey> = g.iter().map(|&i| keys[i]).collect();
                members.sort_unstable();
                let center = g.iter().fold(Vec3::zeros(), |acc, &i| acc + points[i]) / g.len() as f64;
                Cluster {
                    class,
                    members,
                    center,
                }
            })
            .collect();
        clusters.sort_by_key(|c| c.members[0]);
        out.extend(clusters);
    }
    out
}

/// Injective matching between two cluster sets.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClusterDiff {
    /// `(previous index, current index)`, sorted by previous index.
    pub matched: Vec<(usize, usize)>,
    pub removed: Vec<usize>,
    pub added: Vec<usize>,
}

/// Matches clusters of equal class whose centers lie within `max_distance`,
/// closest pairs first.
pub fn diff_clusters(prev: &[Cluster], curr: &[Cluster], max_distance: f64) -> ClusterDiff {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, a) in prev.iter().enumerate() {
        for (j, b) in curr.iter().enumerate() {
            if a.class == b.class {
                let d = (a.center - b.center).norm();
                if d <= max_distance {
                    pairs.push((d, i, j));
                }
            }
        }
    }
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut used_prev = vec![false; prev.len()];
    let mut used_curr = vec![false; curr.len()];
    let mut diff = ClusterDiff::default();
    for (_, i, j) in pairs {
        if !used_prev[i] && !used_curr[j] {
            used_prev[i] = true;
            used_curr[j] = true;
            diff.matched.push((i, j));
        }
    }
    diff.matched.sort_unstable();
    diff.removed = (0..prev.len()).filter(|&i| !used_prev[i]).collect();
    diff.added = (0..curr.len()).filter(|&j| !used_curr[j]).collect();
    diff
}

/// Writes `class cx cy cz n_voxels` per cluster.
pub fn write_clusters<W: Write>(clusters: &[Cluster], mut out: W) -> Result<()> {
    for c in clusters {
        writeln!(
            out,
            "{} {:.6} {:.6} {:.6} {}",
            c.class.as_i8(),
            c.center.x,
            c.center.y,
            c.center.z,
            c.len()
        )?;
    }
    Ok(())
}
