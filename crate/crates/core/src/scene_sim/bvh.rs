use crate::geometry::{Ray, Vec3};

use super::primitive::Shape;

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone)]
struct Node {
    min: Vec3,
    max: Vec3,
    /// Leaf: `count > 0`, items `first..first + count` of `order`.
    /// Inner: children at `first` and `first + 1`.
    first: u32,
    count: u32,
}

/// Bounding-volume hierarchy over shapes, for nearest-hit queries.
#[derive(Debug, Clone, Default)]
pub(crate) struct Bvh {
    nodes: Vec<Node>,
    order: Vec<u32>,
}

impl Bvh {
    pub(crate) fn build(shapes: &[Shape]) -> Self {
        let boxes: Vec<(Vec3, Vec3)> = shapes.iter().map(Shape::aabb).collect();
        let mut order: Vec<u32> = (0..shapes.len() as u32).collect();
        let mut nodes = Vec::with_capacity(2 * shapes.len().max(1));
        if !shapes.is_empty() {
            nodes.push(Node {
                min: Vec3::zeros(),
                max: Vec3::zeros(),
                first: 0,
                count: 0,
            });
            split(&mut nodes, 0, &mut order, 0, shapes.len(), &boxes);
        }
        Bvh { nodes, order }
    }

    /// Index of the nearest shape hit within `t_max`, with its distance.
    pub(crate) fn nearest(&self, shapes: &[Shape], ray: &Ray, t_max: f64) -> Option<(usize, f64)> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv = ray.direction.map(|d| 1.0 / d);
        let mut best: Option<(usize, f64)> = None;
        let mut limit = t_max;
        let mut stack = [0u32; 64];
        let mut sp = 1;
        while sp > 0 {
            sp -= 1;
            let node = &self.nodes[stack[sp] as usize];
            if !slab(&node.min, &node.max, &ray.origin, &inv, limit) {
                continue;
            }
            if node.count > 0 {
                let start = node.first as usize;
                for &i in &self.order[start..start + node.count as usize] {
                    if let Some(t) = shapes[i as usize].intersect(ray) {
                        if t <= limit && best.is_none_or(|(bi, bt)| t < bt || (t == bt && (i as usize) < bi)) {
                            best = Some((i as usize, t));
                            limit = t;
                        }
                    }
                }
            } else {
                stack[sp] = node.first;
                stack[sp + 1] = node.first + 1;
                sp += 2;
            }
        }
        best
    }
}

fn slab(min: &Vec3, max: &Vec3, o: &Vec3, inv: &Vec3, limit: f64) -> bool {
    let mut t0 = 0.0_f64;
    let mut t1 = limit;
    for a in 0..3 {
        let mut ta = (min[a] - o[a]) * inv[a];
        let mut tb = (max[a] - o[a]) * inv[a];
        if ta > tb {
            std::mem::swap(&mut ta, &mut tb);
        }
        // NaN from 0 * inf keeps the previous bound
        if ta > t0 {
            t0 = ta;
        }
        if tb < t1 {
            t1 = tb;
        }
        if t0 > t1 {
            return false;
        }
    }
    true
}

fn split(nodes: &mut Vec<Node>, ni: usize, order: &mut [u32], lo: usize, hi: usize, boxes: &[(Vec3, Vec3)]) {
    let mut min = Vec3::repeat(f64::INFINITY);
    let mut max = Vec3::repeat(f64::NEG_INFINITY);
    let mut cmin = min;
    let mut cmax = max;
    for &i in &order[lo..hi] {
        let (a, b) = boxes[i as usize];
        min = min.inf(&a);
        max = max.sup(&b);
        let c = (a + b) * 0.5;
        cmin = cmin.inf(&c);
        cmax = cmax.sup(&c);
    }
    nodes[ni].min = min;
    nodes[ni].max = max;
    let n = hi - lo;
    let extent = cmax - cmin;
    if n <= LEAF_SIZE || extent.max() <= 0.0 {
        nodes[ni].first = lo as u32;
        nodes[ni].count = n as u32;
        return;
    }
    let axis = extent.imax();
    let mid = lo + n / 2;
    let key = |i: &u32| {
        let (a, b) = boxes[*i as usize];
        a[axis] + b[axis]
    };
    order[lo..hi].select_nth_unstable_by(n / 2, |x, y| key(x).total_cmp(&key(y)).then(x.cmp(y)));
    let left = nodes.len();
    let empty = Node {
        min: Vec3::zeros(),
        max: Vec3::zeros(),
        first: 0,
        count: 0,
    };
    nodes.push(empty.clone());
    nodes.push(empty);
    nodes[ni].first = left as u32;
    nodes[ni].count = 0;
    split(nodes, left, order, lo, mid, boxes);
    split(nodes, left + 1, order, mid, hi, boxes);
}
