//! Poses, camera model, boxes and workspace bounds.
//!
//! Camera frame convention, used everywhere in the crate: the camera looks
//! along its local `+x` axis, image columns grow toward local `-y` and image
//! rows grow toward local `-z`. With the identity orientation a camera in
//! front of the plant looks straight at it along world `+x`.

mod rng;

use nalgebra::{Unit, UnitQuaternion, Vector3};

use crate::error::{Error, Result};

pub use rng::RandomStream;

pub type Vec3 = Vector3<f64>;

const QUAT_RENORM_TOLERANCE: f64 = 1e-6;

/// Builds a unit quaternion from `(x, y, z, w)` components.
///
/// Inputs within `1e-6` of unit norm are renormalized; anything further off
/// is rejected rather than silently reinterpreted.
pub fn unit_quaternion(xyzw: [f64; 4]) -> Result<UnitQuaternion<f64>> {
    let [x, y, z, w] = xyzw;
    let q = nalgebra::Quaternion::new(w, x, y, z);
    let norm = q.norm();
    if !norm.is_finite() || (norm - 1.0).abs() > QUAT_RENORM_TOLERANCE {
        return Err(Error::NonUnitQuaternion { norm });
    }
    Ok(UnitQuaternion::new_normalize(q))
}

/// A 6-DoF camera pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Viewpoint {
    position: Vec3,
    orientation: UnitQuaternion<f64>,
}

impl Viewpoint {
    pub fn new(position: Vec3, xyzw: [f64; 4]) -> Result<Self> {
        Ok(Self {
            position,
            orientation: unit_quaternion(xyzw)?,
        })
    }

    pub fn from_rotation(position: Vec3, orientation: UnitQuaternion<f64>) -> Self {
        Self {
            position,
            orientation,
        }
    }

    pub fn at(position: Vec3) -> Self {
        Self::from_rotation(position, UnitQuaternion::identity())
    }

    pub fn identity() -> Self {
        Self::at(Vec3::zeros())
    }

    /// Pan (`yaw`, about world z) followed by tilt (`pitch`, about the
    /// camera's y axis). Positive pitch tilts the view downward.
    pub fn from_pan_tilt(position: Vec3, yaw: f64, pitch: f64) -> Self {
        let q = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw)
            * UnitQuaternion::from_axis_angle(&Vector3::y_axis(), pitch);
        Self::from_rotation(position, q)
    }

    /// Camera at `position` whose optical axis points at `target`, keeping
    /// the image horizontal.
    pub fn looking_at(position: Vec3, target: Vec3) -> Self {
        let d = target - position;
        let yaw = d.y.atan2(d.x);
        let pitch = (-d.z).atan2(d.xy().norm());
        Self::from_pan_tilt(position, yaw, pitch)
    }

    pub fn position(&self) -> Vec3 {
        self.position
    }

    pub fn orientation(&self) -> UnitQuaternion<f64> {
        self.orientation
    }

    pub fn quaternion_xyzw(&self) -> [f64; 4] {
        let q = self.orientation.quaternion();
        [q.i, q.j, q.k, q.w]
    }

    pub fn inverse(&self) -> Self {
        let inv = self.orientation.inverse();
        Self::from_rotation(-(inv * self.position), inv)
    }

    /// Maps a point from the camera frame into the world frame.
    pub fn transform_point(&self, p_local: &Vec3) -> Vec3 {
        self.orientation * p_local + self.position
    }

    /// Optical axis in world coordinates.
    pub fn forward(&self) -> Vec3 {
        self.orientation * Vec3::x()
    }

    pub fn distance_to(&self, other: &Viewpoint) -> f64 {
        (self.position - other.position).norm()
    }
}

/// Pinhole intrinsics. Pixel coordinates are continuous: pixel `(i, j)`
/// covers `[i, i+1) x [j, j+1)` and its center is `(i + 0.5, j + 0.5)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub width: u32,
    pub height: u32,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub max_range: f64,
}

impl Default for CameraIntrinsics {
    /// 320x240 with a ~60 degree horizontal field of view and 1.5 m range.
    fn default() -> Self {
        Self {
            width: 320,
            height: 240,
            fx: 277.0,
            fy: 277.0,
            cx: 160.0,
            cy: 120.0,
            max_range: 1.5,
        }
    }
}

impl CameraIntrinsics {
    pub fn new(
        width: u32,
        height: u32,
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        max_range: f64,
    ) -> Result<Self> {
        let intr = Self {
            width,
            height,
            fx,
            fy,
            cx,
            cy,
            max_range,
        };
        intr.validate()?;
        Ok(intr)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("intrinsics", "image size must be positive"));
        }
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::invalid("intrinsics", "focal lengths must be positive"));
        }
        if !(self.max_range > 0.0) {
            return Err(Error::invalid("intrinsics", "max_range must be positive"));
        }
        if !(self.cx.is_finite() && self.cy.is_finite()) {
            return Err(Error::invalid("intrinsics", "principal point must be finite"));
        }
        Ok(())
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// Unit viewing direction in the camera frame, without bounds checks.
    pub(crate) fn camera_direction(&self, u: f64, v: f64) -> Vec3 {
        Vec3::new(1.0, -(u - self.cx) / self.fx, -(v - self.cy) / self.fy).normalize()
    }

    /// Back-projects image coordinates `(u, v)` into a world-frame ray.
    ///
    /// Accepts any point of the image rectangle, edges included, so that the
    /// four image corners can be queried.
    pub fn pixel_to_ray(&self, u: f64, v: f64, pose: &Viewpoint) -> Result<Ray> {
        let w = f64::from(self.width);
        let h = f64::from(self.height);
        if !(0.0..=w).contains(&u) || !(0.0..=h).contains(&v) {
            return Err(Error::PixelOutOfBounds {
                u,
                v,
                width: self.width,
                height: self.height,
            });
        }
        Ok(Ray {
            origin: pose.position,
            direction: pose.orientation * self.camera_direction(u, v),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    /// Unit length.
    pub direction: Vec3,
}

impl Ray {
    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }

    /// Parametric interval `[t_enter, t_exit]` inside an axis-aligned box, if
    /// the ray meets it at non-negative `t`.
    pub fn clip_aabb(&self, min: &Vec3, max: &Vec3) -> Option<(f64, f64)> {
        let mut t0 = 0.0_f64;
        let mut t1 = f64::INFINITY;
        for i in 0..3 {
            let o = self.origin[i];
            let d = self.direction[i];
            if d.abs() < 1e-300 {
                if o < min[i] || o > max[i] {
                    return None;
                }
                continue;
            }
            let inv = 1.0 / d;
            let (mut a, mut b) = ((min[i] - o) * inv, (max[i] - o) * inv);
            if a > b {
                std::mem::swap(&mut a, &mut b);
            }
            t0 = t0.max(a);
            t1 = t1.min(b);
            if t0 > t1 {
                return None;
            }
        }
        Some((t0, t1))
    }
}

/// A box with arbitrary orientation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedBox {
    pub center: Vec3,
    pub half_extents: Vec3,
    pub orientation: UnitQuaternion<f64>,
}

impl OrientedBox {
    pub fn new(center: Vec3, half_extents: Vec3, orientation: UnitQuaternion<f64>) -> Result<Self> {
        if half_extents.iter().any(|h| !(*h > 0.0)) {
            return Err(Error::invalid("half_extents", "must be positive on every axis"));
        }
        Ok(Self {
            center,
            half_extents,
            orientation,
        })
    }

    pub fn axis_aligned(center: Vec3, half_extents: Vec3) -> Result<Self> {
        Self::new(center, half_extents, UnitQuaternion::identity())
    }

    pub fn from_min_max(min: Vec3, max: Vec3) -> Result<Self> {
        Self::axis_aligned((min + max) * 0.5, (max - min) * 0.5)
    }

    pub fn cube(center: Vec3, side: f64) -> Result<Self> {
        Self::axis_aligned(center, Vec3::repeat(side * 0.5))
    }

    /// Boundary points count as inside.
    pub fn contains(&self, p: &Vec3) -> bool {
        let local = self.orientation.inverse_transform_vector(&(p - self.center));
        (0..3).all(|i| local[i].abs() <= self.half_extents[i] * (1.0 + 1e-12))
    }

    /// Enclosing axis-aligned box as `(min, max)`.
    pub fn aabb(&self) -> (Vec3, Vec3) {
        let r = self.orientation.to_rotation_matrix();
        let m = r.matrix().abs();
        let ext = m * self.half_extents;
        (self.center - ext, self.center + ext)
    }

    pub fn transformed(&self, pose: &Viewpoint) -> Self {
        Self {
            center: pose.transform_point(&self.center),
            half_extents: self.half_extents,
            orientation: pose.orientation * self.orientation,
        }
    }
}

/// The bounded space expected to contain the plant, together with the
/// nominal (believed) plant-base position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkspaceBounds {
    region: OrientedBox,
    plant_base: Vec3,
}

impl WorkspaceBounds {
    pub fn new(min: Vec3, max: Vec3, plant_base: Vec3) -> Result<Self> {
        if (0..3).any(|i| !(max[i] > min[i])) {
            return Err(Error::invalid("bounds", "max must exceed min on every axis"));
        }
        let region = OrientedBox::from_min_max(min, max)?;
        if !region.contains(&plant_base) {
            return Err(Error::invalid("bounds", "plant base lies outside the bounds"));
        }
        Ok(Self { region, plant_base })
    }

    pub fn region(&self) -> &OrientedBox {
        &self.region
    }

    pub fn plant_base(&self) -> Vec3 {
        self.plant_base
    }

    pub fn min(&self) -> Vec3 {
        self.region.center - self.region.half_extents
    }

    pub fn max(&self) -> Vec3 {
        self.region.center + self.region.half_extents
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        let (lo, hi) = (self.min(), self.max());
        (0..3).all(|i| p[i] >= lo[i] && p[i] <= hi[i])
    }
}

/// Shortest-arc rotation taking local `+z` onto `dir`.
pub fn rotation_z_to(dir: &Vec3) -> UnitQuaternion<f64> {
    let n = dir.norm();
    if n < 1e-12 {
        return UnitQuaternion::identity();
    }
    let d = dir / n;
    UnitQuaternion::rotation_between(&Vec3::z(), &d).unwrap_or_else(|| {
        // antiparallel: half turn about x
        UnitQuaternion::from_axis_angle(&Unit::new_normalize(Vec3::x()), std::f64::consts::PI)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};

    fn close(a: &Vec3, b: &Vec3, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    /// Rotation-matrix oracle built from the quaternion formula, independent
    /// of nalgebra's quaternion multiplication.
    fn rotate_by_matrix(q: [f64; 4], p: Vec3) -> Vec3 {
        let [x, y, z, w] = q;
        let m = [
            [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - z * w), 2.0 * (x * z + y * w)],
            [2.0 * (x * y + z * w), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - x * w)],
            [2.0 * (x * z - y * w), 2.0 * (y * z + x * w), 1.0 - 2.0 * (x * x + y * y)],
        ];
        Vec3::new(
            m[0][0] * p.x + m[0][1] * p.y + m[0][2] * p.z,
            m[1][0] * p.x + m[1][1] * p.y + m[1][2] * p.z,
            m[2][0] * p.x + m[2][1] * p.y + m[2][2] * p.z,
        )
    }

    #[test]
    fn transform_point_examples() {
        let p = Vec3::new(1.0, 2.0, 3.0);
        assert_eq!(Viewpoint::identity().transform_point(&p), p);

        let shifted = Viewpoint::at(Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(shifted.transform_point(&Vec3::zeros()), Vec3::new(1.0, 0.0, 0.0));

        let q = [0.0, 0.0, FRAC_1_SQRT_2, FRAC_1_SQRT_2];
        let rotated = Viewpoint::new(Vec3::zeros(), q).unwrap();
        let got = rotated.transform_point(&Vec3::x());
        let oracle = rotate_by_matrix(q, Vec3::x());
        assert!(close(&got, &oracle, 1e-12));
        assert!(close(&got, &Vec3::new(0.0, 1.0, 0.0), 1e-12));
    }

    #[test]
    fn quaternion_normalization_policy() {
        let v = Viewpoint::new(Vec3::zeros(), [0.0, 0.0, 0.0, 1.0 + 5e-7]).unwrap();
        assert!((v.orientation().norm() - 1.0).abs() < 1e-12);
        assert!(matches!(
            Viewpoint::new(Vec3::zeros(), [0.0, 0.0, -0.26, 0.97]),
            Err(Error::NonUnitQuaternion { .. })
        ));
        assert!(Viewpoint::new(Vec3::zeros(), [0.0; 4]).is_err());
    }

    #[test]
    fn box_contains_examples() {
        let unit = OrientedBox::axis_aligned(Vec3::zeros(), Vec3::repeat(0.5)).unwrap();
        assert!(unit.contains(&Vec3::zeros()));
        assert!(!unit.contains(&Vec3::new(1.001 * 0.5, 0.0, 0.0)));
        assert!(unit.contains(&Vec3::new(0.5, 0.5, -0.5)));

        // rotated 45 degrees about z, long axis along (1,1,0)/sqrt2
        let q = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), FRAC_PI_4);
        let rotated = OrientedBox::new(Vec3::zeros(), Vec3::new(1.0, 0.1, 0.1), q).unwrap();
        // by hand: local x = (0.7+0.7)/sqrt2 = 0.99, local y = 0
        assert!(rotated.contains(&Vec3::new(0.7, 0.7, 0.0)));
        // local y = (0.4-0.6)/sqrt2 ~ -0.14, beyond 0.1
        assert!(!rotated.contains(&Vec3::new(0.6, 0.4, 0.0)));
    }

    #[test]
    fn box_rejects_nonpositive_extents() {
        assert!(OrientedBox::axis_aligned(Vec3::zeros(), Vec3::new(1.0, 0.0, 1.0)).is_err());
    }

    #[test]
    fn pixel_to_ray_examples() {
        let intr = CameraIntrinsics::new(320, 240, 100.0, 100.0, 160.0, 120.0, 1.5).unwrap();
        let pose = Viewpoint::identity();
        let r = intr.pixel_to_ray(160.0, 120.0, &pose).unwrap();
        assert!(close(&r.direction, &Vec3::x(), 1e-15));

        let r = intr.pixel_to_ray(260.0, 120.0, &pose).unwrap();
        let expected = Vec3::new(1.0, -1.0, 0.0).normalize();
        assert!(close(&r.direction, &expected, 1e-15));

        let r = intr.pixel_to_ray(3.0, 200.0, &pose).unwrap();
        assert!((r.direction.norm() - 1.0).abs() < 1e-15);

        assert!(matches!(
            intr.pixel_to_ray(320.5, 10.0, &pose),
            Err(Error::PixelOutOfBounds { .. })
        ));
        assert!(intr.pixel_to_ray(-0.1, 10.0, &pose).is_err());
    }

    #[test]
    fn frustum_corners_subtend_field_of_view() {
        let intr = CameraIntrinsics::default();
        let pose = Viewpoint::identity();
        let w = f64::from(intr.width);
        let h = f64::from(intr.height);
        let expected = 2.0 * (w / (2.0 * intr.fx)).atan();
        for v in [0.0, h] {
            let a = intr.pixel_to_ray(0.0, v, &pose).unwrap().direction;
            let b = intr.pixel_to_ray(w, v, &pose).unwrap().direction;
            // horizontal angle: project onto the x-y plane
            let ha = a.y.atan2(a.x) - b.y.atan2(b.x);
            assert!((ha - expected).abs() < 1e-9, "{ha} vs {expected}");
        }
    }

    #[test]
    fn looking_at_points_the_optical_axis() {
        let cam = Vec3::new(0.35, 0.2, 0.9);
        let target = Vec3::new(0.7, -0.1, 0.7);
        let v = Viewpoint::looking_at(cam, target);
        assert!(close(&v.forward(), &(target - cam).normalize(), 1e-12));
        // image stays level: camera y axis has no vertical component
        assert!((v.orientation() * Vec3::y()).z.abs() < 1e-12);
    }

    #[test]
    fn workspace_bounds_require_base_inside() {
        let lo = Vec3::new(0.0, -1.0, 0.0);
        let hi = Vec3::new(1.0, 1.0, 1.0);
        assert!(WorkspaceBounds::new(lo, hi, Vec3::new(0.5, 0.0, 0.1)).is_ok());
        assert!(WorkspaceBounds::new(lo, hi, Vec3::new(2.0, 0.0, 0.1)).is_err());
    }

    #[test]
    fn clip_aabb_interval() {
        let ray = Ray {
            origin: Vec3::zeros(),
            direction: Vec3::x(),
        };
        let (t0, t1) = ray
            .clip_aabb(&Vec3::new(1.0, -1.0, -1.0), &Vec3::new(2.0, 1.0, 1.0))
            .unwrap();
        assert!((t0 - 1.0).abs() < 1e-12 && (t1 - 2.0).abs() < 1e-12);
        assert!(ray
            .clip_aabb(&Vec3::new(-2.0, -1.0, -1.0), &Vec3::new(-1.0, 1.0, 1.0))
            .is_none());
    }

    fn arb_pose() -> impl Strategy<Value = Viewpoint> {
        (
            prop::array::uniform3(-5.0..5.0f64),
            prop::array::uniform3(-1.0..1.0f64),
            -3.0..3.0f64,
        )
            .prop_map(|(p, axis, angle)| {
                let axis = Vec3::from(axis);
                let q = if axis.norm() < 1e-6 {
                    UnitQuaternion::identity()
                } else {
                    UnitQuaternion::from_axis_angle(&Unit::new_normalize(axis), angle)
                };
                Viewpoint::from_rotation(Vec3::from(p), q)
            })
    }

    proptest! {
        #[test]
        fn inverse_round_trip(pose in arb_pose(), p in prop::array::uniform3(-10.0..10.0f64)) {
            let p = Vec3::from(p);
            let back = pose.transform_point(&pose.inverse().transform_point(&p));
            prop_assert!((back - p).norm() < 1e-9);
        }

        #[test]
        fn box_contains_is_rigid_invariant(
            pose in arb_pose(),
            half in prop::array::uniform3(0.05..1.0f64),
            p in prop::array::uniform3(-1.5..1.5f64),
        ) {
            let b = OrientedBox::axis_aligned(Vec3::zeros(), Vec3::from(half)).unwrap();
            let p = Vec3::from(p);
            // skip points numerically on a face
            let margin = (0..3).map(|i| (p[i].abs() - half[i]).abs()).fold(f64::MAX, f64::min);
            prop_assume!(margin > 1e-9);
            prop_assert_eq!(b.contains(&p), b.transformed(&pose).contains(&pose.transform_point(&p)));
        }
    }
}
