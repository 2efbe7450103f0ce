use std::collections::VecDeque;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::semantic_map::SemanticClass;

use super::{RenderedView, NO_INSTANCE};

const FP_PATCH_PIXELS: (usize, usize) = (50, 300);

/// Error model of the simulated instance-segmentation network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionNoise {
    /// Probability that a visible instance is missed in a view.
    pub fn_rate: f64,
    /// Expected number of false-positive masks per view.
    pub fp_rate: f64,
    pub confidence_true: (f64, f64),
    pub confidence_false: (f64, f64),
    /// Instances with fewer visible pixels are never detected.
    pub min_pixels: usize,
}

impl Default for DetectionNoise {
    fn default() -> Self {
        Self {
            fn_rate: 0.1,
            fp_rate: 0.3,
            confidence_true: (0.6, 0.95),
            confidence_false: (0.5, 0.8),
            min_pixels: 20,
        }
    }
}

impl DetectionNoise {
    pub fn noiseless() -> Self {
        Self {
            fn_rate: 0.0,
            fp_rate: 0.0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.fn_rate) {
            return Err(Error::invalid("fn_rate", "must lie in [0, 1]"));
        }
        if !(self.fp_rate >= 0.0 && self.fp_rate.is_finite()) {
            return Err(Error::invalid("fp_rate", "must be non-negative"));
        }
        let (lo, hi) = self.confidence_true;
        if !(lo > 0.5 && lo <= hi && hi <= 1.0) {
            return Err(Error::invalid("confidence_true", "need 0.5 < lo <= hi <= 1"));
        }
        let (lo, hi) = self.confidence_false;
        if !(lo >= 0.0 && lo <= hi && hi <= 1.0) {
            return Err(Error::invalid("confidence_false", "need 0 <= lo <= hi <= 1"));
        }
        Ok(())
    }
}

/// One emitted mask.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub class: SemanticClass,
    pub confidence: f64,
    /// Ground-truth instance, or `None` for a false positive.
    pub instance: Option<u32>,
    pub pixels: usize,
}

/// Per-pixel class and confidence, plus the emitted masks.
#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub width: u32,
    pub height: u32,
    pub classes: Vec<SemanticClass>,
    pub confidence: Vec<f64>,
    pub detections: Vec<Detection>,
}

impl Segmentation {
    pub fn false_positives(&self) -> usize {
        self.detections.iter().filter(|d| d.instance.is_none()).count()
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

/// Simulated detector over a rendered view.
///
/// Visible object instances are reported with their true masks unless
/// dropped at `fn_rate`; a Poisson number of region-grown patches of
/// background surface are reported as random objects. Everything else reads
/// as background with confidence 0.5.
pub fn detect<R: Rng + ?Sized>(view: &RenderedView, noise: &DetectionNoise, rng: &mut R) -> Segmentation {
    let n = view.depth.len();
    let mut seg = Segmentation {
        width: view.width,
        height: view.height,
        classes: vec![SemanticClass::Background; n],
        confidence: vec![0.5; n],
        detections: Vec::new(),
    };

    let mut visible: FxHashMap<u32, (SemanticClass, usize)> = FxHashMap::default();
    for (k, &inst) in view.instances.iter().enumerate() {
        if let Some(class) = view.labels[k].filter(|c| c.is_object_of_interest()) {
            visible.entry(inst).or_insert((class, 0)).1 += 1;
        }
    }
    let mut instances: Vec<(u32, SemanticClass, usize)> =
        visible.into_iter().map(|(i, (c, px))| (i, c, px)).collect();
    instances.sort_unstable_by_key(|x| x.0);

    let mut accepted: FxHashMap<u32, (SemanticClass, f64)> = FxHashMap::default();
    for (inst, class, pixels) in instances {
        if pixels < noise.min_pixels {
            continue;
        }
        // always draw both so the stream does not depend on the outcome
        let dropped = rng.gen::<f64>() < noise.fn_rate;
        let confidence = uniform(rng, noise.confidence_true);
        if dropped {
            continue;
        }
        accepted.insert(inst, (class, confidence));
        seg.detections.push(Detection {
            class,
            confidence,
            instance: Some(inst),
            pixels,
        });
    }
    if !accepted.is_empty() {
        for (k, inst) in view.instances.iter().enumerate() {
            if let Some(&(class, conf)) = accepted.get(inst) {
                seg.classes[k] = class;
                seg.confidence[k] = conf;
            }
        }
    }

    if noise.fp_rate > 0.0 {
        let count = Poisson::new(noise.fp_rate).map(|p| p.sample(rng) as usize).unwrap_or(0);
        let mut taken = vec![false; n];
        for _ in 0..count {
            let class = SemanticClass::OBJECTS_OF_INTEREST[rng.gen_range(0..3)];
            let confidence = uniform(rng, noise.confidence_false);
            let target = rng.gen_range(FP_PATCH_PIXELS.0..=FP_PATCH_PIXELS.1);
            let free = |k: usize, taken: &[bool]| {
                view.instances[k] != NO_INSTANCE && !taken[k] && seg.classes[k] == SemanticClass::Background
            };
            let candidates: Vec<usize> = (0..n).filter(|&k| free(k, &taken)).collect();
            if candidates.is_empty() {
                continue;
            }
            let seed = candidates[rng.gen_range(0..candidates.len())];
            let patch = grow(view, seed, target, |k| free(k, &taken));
            for &k in &patch {
                taken[k] = true;
            }
            for &k in &patch {
                seg.classes[k] = class;
                seg.confidence[k] = confidence;
            }
            seg.detections.push(Detection {
                class,
                confidence,
                instance: None,
                pixels: patch.len(),
            });
        }
    }
    seg
}

/// Breadth-first 4-connected region of at most `target` pixels.
fn grow(view: &RenderedView, seed: usize, target: usize, free: impl Fn(usize) -> bool) -> Vec<usize> {
    let (w, h) = (view.width as usize, view.height as usize);
    let mut out = vec![seed];
    let mut seen = rustc_hash::FxHashSet::default();
    seen.insert(seed);
    let mut queue = VecDeque::from([seed]);
    while let Some(k) = queue.pop_front() {
        let (u, v) = (k % w, k / w);
        let mut neighbours = [None; 4];
        if u > 0 {
            neighbours[0] = Some(k - 1);
        }
        if u + 1 < w {
            neighbours[1] = Some(k + 1);
        }
        if v > 0 {
            neighbours[2] = Some(k - w);
        }
        if v + 1 < h {
            neighbours[3] = Some(k + w);
        }
        for nb in neighbours.into_iter().flatten() {
            if out.len() >= target {
                return out;
            }
            if free(nb) && seen.insert(nb) {
                out.push(nb);
                queue.push_back(nb);
            }
        }
    }
    out
}
