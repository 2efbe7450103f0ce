use std::f64::consts::PI;

use crate::geometry::{Ray, Vec3, Viewpoint};
use crate::semantic_map::SemanticClass;

const T_EPS: f64 = 1e-9;

/// Analytic surface used to build plants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    /// Solid cylinder between two axis endpoints, with flat caps.
    Cylinder { a: Vec3, b: Vec3, radius: f64 },
    Sphere { center: Vec3, radius: f64 },
    /// Flat two-sided disc. `normal` is unit length.
    Disc { center: Vec3, normal: Vec3, radius: f64 },
}

impl Shape {
    pub fn radius(&self) -> f64 {
        match *self {
            Shape::Cylinder { radius, .. } | Shape::Sphere { radius, .. } | Shape::Disc { radius, .. } => radius,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Shape::Cylinder { .. } => "cylinder",
            Shape::Sphere { .. } => "sphere",
            Shape::Disc { .. } => "disc",
        }
    }

    /// Geometric center: cylinder midpoint, sphere or disc center.
    pub fn center(&self) -> Vec3 {
        match *self {
            Shape::Cylinder { a, b, .. } => (a + b) * 0.5,
            Shape::Sphere { center, .. } | Shape::Disc { center, .. } => center,
        }
    }

    pub fn aabb(&self) -> (Vec3, Vec3) {
        match *self {
            Shape::Sphere { center, radius } => (center.add_scalar(-radius), center.add_scalar(radius)),
            Shape::Cylinder { a, b, radius } => {
                let u = (b - a).normalize();
                let ext = u.map(|c| radius * (1.0 - c * c).max(0.0).sqrt());
                (a.inf(&b) - ext, a.sup(&b) + ext)
            }
            Shape::Disc { center, normal, radius } => {
                let ext = normal.map(|c| radius * (1.0 - c * c).max(0.0).sqrt());
                (center - ext, center + ext)
            }
        }
    }

    /// Nearest intersection distance along `ray` beyond a small epsilon.
    pub fn intersect(&self, ray: &Ray) -> Option<f64> {
        match *self {
            Shape::Sphere { center, radius } => intersect_sphere(ray, &center, radius),
            Shape::Cylinder { a, b, radius } => intersect_cylinder(ray, &a, &b, radius),
            Shape::Disc { center, normal, radius } => intersect_disc(ray, &center, &normal, radius),
        }
    }

    /// True for points strictly inside a solid. Discs have no interior.
    pub fn contains_strict(&self, p: &Vec3, margin: f64) -> bool {
        match *self {
            Shape::Sphere { center, radius } => (p - center).norm() < radius - margin,
            Shape::Cylinder { a, b, radius } => {
                let axis = b - a;
                let len = axis.norm();
                let u = axis / len;
                let s = (p - a).dot(&u);
                if s <= margin || s >= len - margin {
                    return false;
                }
                (p - a - u * s).norm() < radius - margin
            }
            Shape::Disc { .. } => false,
        }
    }

    /// Distance from `p` to the surface.
    pub fn surface_distance(&self, p: &Vec3) -> f64 {
        match *self {
            Shape::Sphere { center, radius } => ((p - center).norm() - radius).abs(),
            Shape::Cylinder { a, b, radius } => {
                let axis = b - a;
                let len = axis.norm();
                let u = axis / len;
                let s = (p - a).dot(&u);
                let rho = (p - a - u * s).norm();
                let ds = if s < 0.0 {
                    -s
                } else if s > len {
                    s - len
                } else {
                    0.0
                };
                let dr = rho - radius;
                if ds > 0.0 {
                    (ds * ds + dr.max(0.0).powi(2)).sqrt()
                } else if dr > 0.0 {
                    dr
                } else {
                    // inside: nearest of lateral wall and caps
                    (-dr).min(s).min(len - s)
                }
            }
            Shape::Disc { center, normal, radius } => {
                let d = p - center;
                let h = d.dot(&normal);
                let rho = (d - normal * h).norm();
                let dr = (rho - radius).max(0.0);
                (h * h + dr * dr).sqrt()
            }
        }
    }

    /// Deterministic surface samples spaced roughly `spacing` apart.
    pub fn sample_surface(&self, spacing: f64) -> Vec<Vec3> {
        match *self {
            Shape::Sphere { center, radius } => {
                let n = ((4.0 * PI * radius * radius) / (spacing * spacing)).ceil().max(1.0) as usize;
                fibonacci_sphere(n)
                    .into_iter()
                    .map(|d| center + d * radius)
                    .collect()
            }
            Shape::Cylinder { a, b, radius } => {
                let axis = b - a;
                let len = axis.norm();
                let u = axis / len;
                let (e1, e2) = orthonormal_basis(&u);
                let n_len = (len / spacing).ceil() as usize + 1;
                let n_around = ((2.0 * PI * radius) / spacing).ceil().max(3.0) as usize;
                let mut out = Vec::with_capacity(n_len * n_around);
                for i in 0..n_len {
                    let s = len * i as f64 / (n_len - 1) as f64;
                    for j in 0..n_around {
                        let th = 2.0 * PI * j as f64 / n_around as f64;
                        out.push(a + u * s + (e1 * th.cos() + e2 * th.sin()) * radius);
                    }
                }
                for cap in [a, b] {
                    disc_samples(&cap, &e1, &e2, radius, spacing, &mut out);
                }
                out
            }
            Shape::Disc { center, normal, radius } => {
                let (e1, e2) = orthonormal_basis(&normal);
                let mut out = Vec::new();
                disc_samples(&center, &e1, &e2, radius, spacing, &mut out);
                out
            }
        }
    }

    pub fn transformed(&self, pose: &Viewpoint) -> Shape {
        let r = pose.orientation();
        match *self {
            Shape::Cylinder { a, b, radius } => Shape::Cylinder {
                a: pose.transform_point(&a),
                b: pose.transform_point(&b),
                radius,
            },
            Shape::Sphere { center, radius } => Shape::Sphere {
                center: pose.transform_point(&center),
                radius,
            },
            Shape::Disc { center, normal, radius } => Shape::Disc {
                center: pose.transform_point(&center),
                normal: r * normal,
                radius,
            },
        }
    }
}

fn intersect_sphere(ray: &Ray, c: &Vec3, r: f64) -> Option<f64> {
    let oc = ray.origin - c;
    let b = oc.dot(&ray.direction);
    let cc = oc.norm_squared() - r * r;
    let disc = b * b - cc;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let t0 = -b - sq;
    if t0 > T_EPS {
        return Some(t0);
    }
    let t1 = -b + sq;
    (t1 > T_EPS).then_some(t1)
}

fn intersect_cylinder(ray: &Ray, a: &Vec3, b: &Vec3, r: f64) -> Option<f64> {
    let axis = b - a;
    let len = axis.norm();
    let u = axis / len;
    let oc = ray.origin - a;
    let v = ray.direction;
    let vu = v.dot(&u);
    let ocu = oc.dot(&u);
    let vp = v - u * vu;
    let op = oc - u * ocu;
    let mut best = f64::INFINITY;

    let qa = vp.norm_squared();
    if qa > 1e-18 {
        let qb = op.dot(&vp);
        let qc = op.norm_squared() - r * r;
        let disc = qb * qb - qa * qc;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            for t in [(-qb - sq) / qa, (-qb + sq) / qa] {
                if t > T_EPS && t < best {
                    let s = ocu + t * vu;
                    if (0.0..=len).contains(&s) {
                        best = t;
                        break;
                    }
                }
            }
        }
    }
    if vu.abs() > 1e-18 {
        for cap_s in [0.0, len] {
            let t = (cap_s - ocu) / vu;
            if t > T_EPS && t < best {
                let p = op + vp * t;
                if p.norm_squared() <= r * r {
                    best = t;
                }
            }
        }
    }
    best.is_finite().then_some(best)
}

fn intersect_disc(ray: &Ray, c: &Vec3, n: &Vec3, r: f64) -> Option<f64> {
    let denom = ray.direction.dot(n);
    if denom.abs() < 1e-18 {
        return None;
    }
    let t = (c - ray.origin).dot(n) / denom;
    if t <= T_EPS {
        return None;
    }
    ((ray.at(t) - c).norm_squared() <= r * r).then_some(t)
}

pub(crate) fn orthonormal_basis(n: &Vec3) -> (Vec3, Vec3) {
    let helper = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let e1 = n.cross(&helper).normalize();
    let e2 = n.cross(&e1);
    (e1, e2)
}

fn fibonacci_sphere(n: usize) -> Vec<Vec3> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let rho = (1.0 - z * z).sqrt();
            let th = golden * i as f64;
            Vec3::new(rho * th.cos(), rho * th.sin(), z)
        })
        .collect()
}

fn disc_samples(c: &Vec3, e1: &Vec3, e2: &Vec3, radius: f64, spacing: f64, out: &mut Vec<Vec3>) {
    out.push(*c);
    let rings = (radius / spacing).ceil() as usize;
    for k in 1..=rings {
        let rho = radius * k as f64 / rings as f64;
        let n = ((2.0 * PI * rho) / spacing).ceil().max(3.0) as usize;
        for j in 0..n {
            let th = 2.0 * PI * j as f64 / n as f64;
            out.push(c + (e1 * th.cos() + e2 * th.sin()) * rho);
        }
    }
}

/// A shape with its class and instance id.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledPrimitive {
    pub shape: Shape,
    pub class: SemanticClass,
    pub instance: u32,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ray(o: [f64; 3], d: [f64; 3]) -> Ray {
        Ray {
            origin: Vec3::from(o),
            direction: Vec3::from(d).normalize(),
        }
    }

    #[test]
    fn sphere_hit_distance() {
        let s = Shape::Sphere {
            center: Vec3::new(0.5, 0.0, 0.0),
            radius: 0.1,
        };
        let t = s.intersect(&ray([0.0; 3], [1.0, 0.0, 0.0])).unwrap();
        assert!((t - 0.4).abs() < 1e-12);
        assert!(s.intersect(&ray([0.0; 3], [-1.0, 0.0, 0.0])).is_none());
        // from inside, the far wall
        let t = s.intersect(&ray([0.5, 0.0, 0.0], [0.0, 1.0, 0.0])).unwrap();
        assert!((t - 0.1).abs() < 1e-12);
    }

    #[test]
    fn cylinder_lateral_and_cap_hits() {
        let c = Shape::Cylinder {
            a: Vec3::new(1.0, 0.0, -0.5),
            b: Vec3::new(1.0, 0.0, 0.5),
            radius: 0.1,
        };
        let t = c.intersect(&ray([0.0; 3], [1.0, 0.0, 0.0])).unwrap();
        assert!((t - 0.9).abs() < 1e-12);
        let t = c.intersect(&ray([1.05, 0.0, 2.0], [0.0, 0.0, -1.0])).unwrap();
        assert!((t - 1.5).abs() < 1e-12);
        assert!(c.intersect(&ray([0.0, 0.0, 0.6], [1.0, 0.0, 0.0])).is_none());
        // parallel to the axis but outside the radius
        assert!(c.intersect(&ray([1.2, 0.0, 2.0], [0.0, 0.0, -1.0])).is_none());
    }

    #[test]
    fn disc_is_two_sided() {
        let d = Shape::Disc {
            center: Vec3::new(0.0, 0.0, 1.0),
            normal: Vec3::z(),
            radius: 0.2,
        };
        assert!((d.intersect(&ray([0.1, 0.0, 0.0], [0.0, 0.0, 1.0])).unwrap() - 1.0).abs() < 1e-12);
        assert!((d.intersect(&ray([0.1, 0.0, 2.0], [0.0, 0.0, -1.0])).unwrap() - 1.0).abs() < 1e-12);
        assert!(d.intersect(&ray([0.3, 0.0, 0.0], [0.0, 0.0, 1.0])).is_none());
    }

    #[test]
    fn samples_lie_on_surface_and_inside_aabb() {
        let shapes = [
            Shape::Sphere {
                center: Vec3::new(0.1, 0.2, 0.3),
                radius: 0.012,
            },
            Shape::Cylinder {
                a: Vec3::new(0.0, 0.0, 0.0),
                b: Vec3::new(0.03, 0.02, 0.05),
                radius: 0.004,
            },
            Shape::Disc {
                center: Vec3::new(0.0, 0.1, 0.0),
                normal: Vec3::new(0.3, 0.4, 0.8).normalize(),
                radius: 0.03,
            },
        ];
        for s in shapes {
            let pts = s.sample_surface(0.0015);
            assert!(pts.len() > 20);
            let (lo, hi) = s.aabb();
            for p in pts {
                assert!(s.surface_distance(&p) < 1e-9, "{s:?} {p:?}");
                assert!((0..3).all(|i| p[i] >= lo[i] - 1e-9 && p[i] <= hi[i] + 1e-9));
            }
        }
    }

    #[test]
    fn strict_containment() {
        let c = Shape::Cylinder {
            a: Vec3::zeros(),
            b: Vec3::z(),
            radius: 0.1,
        };
        assert!(c.contains_strict(&Vec3::new(0.05, 0.0, 0.5), 1e-9));
        assert!(!c.contains_strict(&Vec3::new(0.1, 0.0, 0.5), 1e-9));
        assert!(!c.contains_strict(&Vec3::new(0.0, 0.0, 1.0), 1e-9));
    }
}
