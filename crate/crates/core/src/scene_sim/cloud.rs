use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::CameraIntrinsics;
use crate::semantic_map::SemanticPoint;

use super::{RenderedView, Segmentation};

/// Back-projects every `stride`-th hit pixel in both image directions into
/// a world-frame semantic point.
pub fn to_semantic_cloud(
    view: &RenderedView,
    seg: &Segmentation,
    intr: &CameraIntrinsics,
    stride: usize,
) -> Result<Vec<SemanticPoint>> {
    let n = view.depth.len();
    let expected = intr.pixel_count();
    for actual in [n, view.labels.len(), view.instances.len(), seg.classes.len(), seg.confidence.len()] {
        if actual != expected {
            return Err(Error::ShapeMismatch { expected, actual });
        }
    }
    if stride == 0 {
        return Err(Error::invalid("stride", "must be at least 1"));
    }
    let rot = view.pose.orientation();
    let origin = view.pose.position();
    let mut out = Vec::new();
    for v in (0..view.height).step_by(stride) {
        for u in (0..view.width).step_by(stride) {
            let k = view.index(u, v);
            let d = view.depth[k];
            if !d.is_finite() {
                continue;
            }
            let dir = rot * intr.camera_direction(f64::from(u) + 0.5, f64::from(v) + 0.5);
            out.push(SemanticPoint::new(origin + dir * d, seg.classes[k], seg.confidence[k]));
        }
    }
    Ok(out)
}

/// Adds zero-mean Gaussian noise of deviation `sigma` to every hit depth.
pub fn add_depth_noise<R: Rng + ?Sized>(view: &mut RenderedView, sigma: f64, rng: &mut R) -> Result<()> {
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::invalid("depth_noise", e.to_string()))?;
    for d in view.depth.iter_mut().filter(|d| d.is_finite()) {
        *d = (*d + normal.sample(rng)).max(1e-6);
    }
    Ok(())
}
