//! C interface to `semnbv`.
//!
//! Every object crosses the boundary as an opaque handle created by a
//! `*_new`/`*_prepare`/`*_run` call and released by the matching `*_free`.
//! Fallible calls return an [`SnbvStatus`]; on failure the message is kept
//! per thread and read with [`snbv_last_error`].
//!
//! ```c
//! SnbvConfig *cfg = NULL;
//! SnbvScene *scene = NULL;
//! SnbvEpisode *ep = NULL;
//! double pco = 0.0;
//! if (snbv_config_new(&cfg) != SNBV_STATUS_OK
//!     || snbv_scene_prepare(cfg, 0, 0, &scene) != SNBV_STATUS_OK
//!     || snbv_episode_run(cfg, scene, SNBV_PLANNER_SEMANTIC, &ep) != SNBV_STATUS_OK) {
//!     fprintf(stderr, "%s\n", snbv_last_error());
//! }
//! snbv_episode_final_pco(ep, &pco);
//! snbv_episode_free(ep);
//! snbv_scene_free(scene);
//! snbv_config_free(cfg);
//! ```

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use semnbv::geometry::{Vec3, WorkspaceBounds};
use semnbv::harness::{self, EpisodeOutcome, ExperimentConfig, PreparedScene};
use semnbv::planner::PlannerKind;
use semnbv::semantic_map::{self, SemanticClass, SemanticPoint, SemanticVoxelMap};
use semnbv::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnbvStatus {
    Ok = 0,
    NullPointer = -1,
    InvalidArgument = -2,
    Parse = -3,
    Config = -4,
    Io = -5,
    OutOfRange = -6,
    Runtime = -7,
    Panic = -8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnbvPlanner {
    Semantic = 0,
    Volumetric = 1,
    PredefinedNarrow = 2,
    PredefinedWide = 3,
    Random = 4,
}

impl From<SnbvPlanner> for PlannerKind {
    fn from(p: SnbvPlanner) -> Self {
        match p {
            SnbvPlanner::Semantic => PlannerKind::SemanticNbv,
            SnbvPlanner::Volumetric => PlannerKind::VolumetricNbv,
            SnbvPlanner::PredefinedNarrow => PlannerKind::PredefinedNarrow,
            SnbvPlanner::PredefinedWide => PlannerKind::PredefinedWide,
            SnbvPlanner::Random => PlannerKind::Random,
        }
    }
}

/// A labelled point. `class_id` is -1 background, 0 peduncle, 1 petiole,
/// 2 tomato.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnbvPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub class_id: i8,
    pub confidence: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnbvVoxel {
    pub p_occupied: f64,
    pub class_id: i8,
    pub p_semantic: f64,
}

/// Camera pose: position and orientation quaternion `(x, y, z, w)`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SnbvPose {
    pub position: [f64; 3],
    pub orientation: [f64; 4],
}

pub struct SnbvConfig(ExperimentConfig);
pub struct SnbvScene(PreparedScene);
pub struct SnbvEpisode(EpisodeOutcome);
pub struct SnbvMap(SemanticVoxelMap);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Fail(SnbvStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Parse { .. } => SnbvStatus::Parse,
            Error::Config(_) => SnbvStatus::Config,
            Error::Io(_) => SnbvStatus::Io,
            Error::InvalidParameter { .. } | Error::NonUnitQuaternion { .. } | Error::ShapeMismatch { .. } => {
                SnbvStatus::InvalidArgument
            }
            Error::PixelOutOfBounds { .. } => SnbvStatus::OutOfRange,
            _ => SnbvStatus::Runtime,
        };
        let mut msg = e.to_string();
        let mut src = std::error::Error::source(&e);
        while let Some(s) = src {
            msg.push_str(": ");
            msg.push_str(&s.to_string());
            src = s.source();
        }
        Fail(code, msg)
    }
}

fn null(what: &str) -> Fail {
    Fail(SnbvStatus::NullPointer, format!("`{what}` is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SnbvStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            clear_error();
            SnbvStatus::Ok
        }
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("panic inside semnbv".into());
            SnbvStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn get_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(SnbvStatus::InvalidArgument, format!("`{what}` is not UTF-8")))
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

fn vec3(a: &[f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn snbv_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn snbv_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Frees a string returned by the library.
///
/// # Safety
/// `s` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn snbv_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Binary entropy in bits; 0 outside `(0, 1)`.
#[no_mangle]
pub extern "C" fn snbv_binary_entropy(p: f64) -> f64 {
    semantic_map::binary_entropy(p)
}

// --- configuration ---

/// Default experiment configuration.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn snbv_config_new(out: *mut *mut SnbvConfig) -> SnbvStatus {
    guard(|| put(out, boxed(SnbvConfig(ExperimentConfig::default())), "out"))
}

/// Parses a `key = value` configuration text.
///
/// # Safety
/// `src` must be a NUL-terminated string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn snbv_config_parse(src: *const c_char, out: *mut *mut SnbvConfig) -> SnbvStatus {
    guard(|| {
        let c: ExperimentConfig = text(src, "src")?.parse()?;
        put(out, boxed(SnbvConfig(c)), "out")
    })
}

/// Sets one configuration key, using the same keys as the text format.
///
/// # Safety
/// `config` must be a live handle; `key` and `value` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn snbv_config_set(
    config: *mut SnbvConfig,
    key: *const c_char,
    value: *const c_char,
) -> SnbvStatus {
    guard(|| {
        let c = get_mut(config, "config")?;
        let line = format!("{} = {}\n", text(key, "key")?, text(value, "value")?);
        let updated: ExperimentConfig = (harness::write_config(&c.0) + &line).parse()?;
        c.0 = updated;
        Ok(())
    })
}

/// Serialises the configuration. Free the result with `snbv_string_free`.
///
/// # Safety
/// `config` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn snbv_config_to_string(config: *const SnbvConfig, out: *mut *mut c_char) -> SnbvStatus {
    guard(|| {
        let c = get(config, "config")?;
        let s = CString::new(harness::write_config(&c.0)).map_err(|e| Fail(SnbvStatus::Runtime, e.to_string()))?;
        put(out, s.into_raw(), "out")
    })
}

/// # Safety
/// `config` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn snbv_config_free(config: *mut SnbvConfig) {
    free(config);
}

// --- scenes ---

/// Generates and places plant `scene` at rotation step `rotation`.
///
/// # Safety
/// `config` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn snbv_scene_prepare(
    config: *const SnbvConfig,
    scene: usize,
    rotation: usize,
    out: *mut *mut SnbvScene,
) -> SnbvStatus {
    guard(|| {
        let c = get(config, "config")?;
        let s = harness::prepare_scene(&c.0, scene, rotation)?;
        put(out, boxed(SnbvScene(s)), "out")
    })
}

/// Number of objects of interest in the scene.
///
/// # Safety
/// `scene` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn snbv_scene_ooi_count(scene: *const SnbvScene, out: *mut usize) -> SnbvStatus {
    guard(|| put(out, get(scene, "scene")?.0.scene.ooi().len(), "out"))
}

/// # Safety
/// `scene` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn snbv_scene_free(scene: *mut SnbvScene) {
    free(scene);
}

// --- episodes ---

/// Runs one episode of `planner` on `scene`.
///
/// # Safety
/// Handles must be live; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn snbv_episode_run(
    config: *const SnbvConfig,
    scene: *const SnbvScene,
    planner: SnbvPlanner,
    out: *mut *mut SnbvEpisode,
) -> SnbvStatus {
    guard(|| {
        let c = get(config, "config")?;
        let s = get(scene, "scene")?;
        let o = harness::run_episode_full(&s.0, &c.0, planner.into())?;
        put(out, boxed(SnbvEpisode(o)), "out")
    })
}

/// Number of views taken.
///
/// # Safety
/// `episode` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn snbv_episode_action_count(episode: *const SnbvEpisode, out: *mut usize) -> SnbvStatus {
    guard(|| put(out, get(episode, "episode")?.0.record.actions.len(), "out"))
}

/// PCO in percent after the last view.
///
/// # Safety
/// `episode` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn snbv_episode_final_pco(episode: *const SnbvEpisode, out: *mut f64) -> SnbvStatus {
    guard(|| put(out, get(episode, "episode")?.0.record.final_pco(), "out"))
}

/// PCO and camera pose of view `index` (0-based).
///
/// # Safety
/// `episode` must be a live handle; `pco` and `pose` valid for writes or null.
#[no_mangle]
pub unsafe extern "C" fn snbv_episode_action(
    episode: *const SnbvEpisode,
    index: usize,
    pco: *mut f64,
    pose: *mut SnbvPose,
) -> SnbvStatus {
    guard(|| {
        let e = get(episode, "episode")?;
        let actions = &e.0.record.actions;
        let a = actions.get(index).ok_or_else(|| {
            Fail(
                SnbvStatus::OutOfRange,
                format!("action {index} out of range ({} taken)", actions.len()),
            )
        })?;
        if !pco.is_null() {
            pco.write(a.pco());
        }
        if !pose.is_null() {
            let p = a.viewpoint.position();
            let q = a.viewpoint.orientation();
            pose.write(SnbvPose {
                position: [p.x, p.y, p.z],
                orientation: [q.i, q.j, q.k, q.w],
            });
        }
        Ok(())
    })
}

/// Copies the episode's final map into a new map handle.
///
/// # Safety
/// `episode` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn snbv_episode_map(episode: *const SnbvEpisode, out: *mut *mut SnbvMap) -> SnbvStatus {
    guard(|| put(out, boxed(SnbvMap(get(episode, "episode")?.0.map.clone())), "out"))
}

/// # Safety
/// `episode` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn snbv_episode_free(episode: *mut SnbvEpisode) {
    free(episode);
}

// --- maps ---

/// Empty map over the box `[min, max]` with voxel edge `resolution`.
///
/// # Safety
/// `min`, `max` and `plant_base` must point to 3 doubles; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn snbv_map_new(
    resolution: f64,
    min: *const [f64; 3],
    max: *const [f64; 3],
    plant_base: *const [f64; 3],
    out: *mut *mut SnbvMap,
) -> SnbvStatus {
    guard(|| {
        let bounds = WorkspaceBounds::new(
            vec3(get(min, "min")?),
            vec3(get(max, "max")?),
            vec3(get(plant_base, "plant_base")?),
        )?;
        put(out, boxed(SnbvMap(SemanticVoxelMap::new(resolution, bounds)?)), "out")
    })
}

/// Integrates `n` labelled points observed from `origin`.
///
/// # Safety
/// `map` must be a live handle; `points` must hold `n` elements (or be null
/// when `n` is 0); `origin` must point to 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn snbv_map_integrate(
    map: *mut SnbvMap,
    points: *const SnbvPoint,
    n: usize,
    origin: *const [f64; 3],
) -> SnbvStatus {
    guard(|| {
        let m = get_mut(map, "map")?;
        let origin = vec3(get(origin, "origin")?);
        let raw: &[SnbvPoint] = if n == 0 {
            &[]
        } else if points.is_null() {
            return Err(null("points"));
        } else {
            std::slice::from_raw_parts(points, n)
        };
        let mut cloud = Vec::with_capacity(n);
        for (i, p) in raw.iter().enumerate() {
            let class = SemanticClass::from_i8(p.class_id).ok_or_else(|| {
                Fail(SnbvStatus::InvalidArgument, format!("point {i}: unknown class {}", p.class_id))
            })?;
            if !(0.0..=1.0).contains(&p.confidence) {
                return Err(Fail(
                    SnbvStatus::InvalidArgument,
                    format!("point {i}: confidence {} outside [0, 1]", p.confidence),
                ));
            }
            cloud.push(SemanticPoint::new(Vec3::new(p.x, p.y, p.z), class, p.confidence));
        }
        m.0.integrate_cloud(&cloud, &origin);
        Ok(())
    })
}

/// Voxel containing `point`; unobserved voxels read as `p = 0.5`, background.
///
/// # Safety
/// `map` must be a live handle; `point` must point to 3 doubles; `out` valid
/// for writes.
#[no_mangle]
pub unsafe extern "C" fn snbv_map_query(
    map: *const SnbvMap,
    point: *const [f64; 3],
    out: *mut SnbvVoxel,
) -> SnbvStatus {
    guard(|| {
        let m = get(map, "map")?;
        let v = m.0.voxel(m.0.world_to_key(&vec3(get(point, "point")?)));
        put(
            out,
            SnbvVoxel {
                p_occupied: v.p_o,
                class_id: v.c_s.as_i8(),
                p_semantic: v.p_s,
            },
            "out",
        )
    })
}

/// Number of occupied voxels.
///
/// # Safety
/// `map` must be a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn snbv_map_occupied_count(map: *const SnbvMap, out: *mut usize) -> SnbvStatus {
    guard(|| put(out, get(map, "map")?.0.occupied_voxels().len(), "out"))
}

/// # Safety
/// `map` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn snbv_map_free(map: *mut SnbvMap) {
    free(map);
}
