use crate::geometry::Vec3;

/// Exact voxel walk along a ray (Amanatides & Woo). Every cell the ray
/// passes through is visited; when the ray crosses an edge or corner the
/// cells are visited one axis at a time, so none are skipped.
#[derive(Debug, Clone)]
pub(crate) struct GridWalk {
    key: [i32; 3],
    step: [i32; 3],
    t_max: [f64; 3],
    inv_dir: [f64; 3],
    origin: [f64; 3],
    resolution: f64,
    t_enter: f64,
}

impl GridWalk {
    /// Starts at the cell containing `origin + dir * t_start`. `t` values
    /// reported later are measured from `origin`.
    pub(crate) fn new(origin: &Vec3, dir: &Vec3, resolution: f64, t_start: f64) -> Self {
        let start = origin + dir * t_start;
        let mut walk = GridWalk {
            key: [0; 3],
            step: [0; 3],
            t_max: [f64::INFINITY; 3],
            inv_dir: [f64::INFINITY; 3],
            origin: [origin.x, origin.y, origin.z],
            resolution,
            t_enter: t_start,
        };
        for a in 0..3 {
            walk.key[a] = (start[a] / resolution).floor() as i32;
            let d = dir[a];
            if d > 0.0 {
                walk.step[a] = 1;
            } else if d < 0.0 {
                walk.step[a] = -1;
            }
            if d != 0.0 {
                walk.inv_dir[a] = 1.0 / d;
                walk.t_max[a] = walk.boundary_t(a);
            }
        }
        walk
    }

    #[inline]
    fn boundary_t(&self, a: usize) -> f64 {
        let edge = if self.step[a] > 0 {
            self.key[a] + 1
        } else {
            self.key[a]
        };
        (f64::from(edge) * self.resolution - self.origin[a]) * self.inv_dir[a]
    }

    #[inline]
    pub(crate) fn key(&self) -> [i32; 3] {
        self.key
    }

    /// Ray parameter at which the current cell was entered.
    #[inline]
    pub(crate) fn t_enter(&self) -> f64 {
        self.t_enter
    }

    #[inline]
    pub(crate) fn advance(&mut self) {
        let a = if self.t_max[0] < self.t_max[1] {
            if self.t_max[0] < self.t_max[2] {
                0
            } else {
                2
            }
        } else if self.t_max[1] < self.t_max[2] {
            1
        } else {
            2
        };
        self.t_enter = self.t_max[a];
        self.key[a] += self.step[a];
        self.t_max[a] = self.boundary_t(a);
    }
}
