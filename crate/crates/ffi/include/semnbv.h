#ifndef SEMNBV_H
#define SEMNBV_H

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum SnbvStatus {
  SNBV_STATUS_OK = 0,
  SNBV_STATUS_NULL_POINTER = -1,
  SNBV_STATUS_INVALID_ARGUMENT = -2,
  SNBV_STATUS_PARSE = -3,
  SNBV_STATUS_CONFIG = -4,
  SNBV_STATUS_IO = -5,
  SNBV_STATUS_OUT_OF_RANGE = -6,
  SNBV_STATUS_RUNTIME = -7,
  SNBV_STATUS_PANIC = -8,
} SnbvStatus;

typedef enum SnbvPlanner {
  SNBV_PLANNER_SEMANTIC = 0,
  SNBV_PLANNER_VOLUMETRIC = 1,
  SNBV_PLANNER_PREDEFINED_NARROW = 2,
  SNBV_PLANNER_PREDEFINED_WIDE = 3,
  SNBV_PLANNER_RANDOM = 4,
} SnbvPlanner;

typedef struct SnbvConfig SnbvConfig;

typedef struct SnbvEpisode SnbvEpisode;

typedef struct SnbvMap SnbvMap;

typedef struct SnbvScene SnbvScene;

// Camera pose: position and orientation quaternion `(x, y, z, w)`.
typedef struct SnbvPose {
  double position[3];
  double orientation[4];
} SnbvPose;

// A labelled point. `class_id` is -1 background, 0 peduncle, 1 petiole,
// 2 tomato.
typedef struct SnbvPoint {
  double x;
  double y;
  double z;
  int8_t class_id;
  double confidence;
} SnbvPoint;

typedef struct SnbvVoxel {
  double p_occupied;
  int8_t class_id;
  double p_semantic;
} SnbvVoxel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. Valid until the
// next call into the library from the same thread.
const char *snbv_last_error(void);

// Library version as a static NUL-terminated string.
const char *snbv_version(void);

// Frees a string returned by the library.
//
// # Safety
// `s` must come from this library or be null.
void snbv_string_free(char *s);

// Binary entropy in bits; 0 outside `(0, 1)`.
double snbv_binary_entropy(double p);

// Default experiment configuration.
//
// # Safety
// `out` must be valid for writes.
enum SnbvStatus snbv_config_new(struct SnbvConfig **out);

// Parses a `key = value` configuration text.
//
// # Safety
// `src` must be a NUL-terminated string; `out` must be valid for writes.
enum SnbvStatus snbv_config_parse(const char *src, struct SnbvConfig **out);

// Sets one configuration key, using the same keys as the text format.
//
// # Safety
// `config` must be a live handle; `key` and `value` NUL-terminated strings.
enum SnbvStatus snbv_config_set(struct SnbvConfig *config, const char *key, const char *value);

// Serialises the configuration. Free the result with `snbv_string_free`.
//
// # Safety
// `config` must be a live handle; `out` must be valid for writes.
enum SnbvStatus snbv_config_to_string(const struct SnbvConfig *config, char **out);

// # Safety
// `config` must come from this library or be null.
void snbv_config_free(struct SnbvConfig *config);

// Generates and places plant `scene` at rotation step `rotation`.
//
// # Safety
// `config` must be a live handle; `out` must be valid for writes.
enum SnbvStatus snbv_scene_prepare(const struct SnbvConfig *config,
                                   size_t scene,
                                   size_t rotation,
                                   struct SnbvScene **out);

// Number of objects of interest in the scene.
//
// # Safety
// `scene` must be a live handle; `out` must be valid for writes.
enum SnbvStatus snbv_scene_ooi_count(const struct SnbvScene *scene, size_t *out);

// # Safety
// `scene` must come from this library or be null.
void snbv_scene_free(struct SnbvScene *scene);

// Runs one episode of `planner` on `scene`.
//
// # Safety
// Handles must be live; `out` must be valid for writes.
enum SnbvStatus snbv_episode_run(const struct SnbvConfig *config,
                                 const struct SnbvScene *scene,
                                 enum SnbvPlanner planner,
                                 struct SnbvEpisode **out);

// Number of views taken.
//
// # Safety
// `episode` must be a live handle; `out` must be valid for writes.
enum SnbvStatus snbv_episode_action_count(const struct SnbvEpisode *episode, size_t *out);

// PCO in percent after the last view.
//
// # Safety
// `episode` must be a live handle; `out` must be valid for writes.
enum SnbvStatus snbv_episode_final_pco(const struct SnbvEpisode *episode, double *out);

// PCO and camera pose of view `index` (0-based).
//
// # Safety
// `episode` must be a live handle; `pco` and `pose` valid for writes or null.
enum SnbvStatus snbv_episode_action(const struct SnbvEpisode *episode,
                                    size_t index,
                                    double *pco,
                                    struct SnbvPose *pose);

// Copies the episode's final map into a new map handle.
//
// # Safety
// `episode` must be a live handle; `out` must be valid for writes.
enum SnbvStatus snbv_episode_map(const struct SnbvEpisode *episode, struct SnbvMap **out);

// # Safety
// `episode` must come from this library or be null.
void snbv_episode_free(struct SnbvEpisode *episode);

// Empty map over the box `[min, max]` with voxel edge `resolution`.
//
// # Safety
// `min`, `max` and `plant_base` must point to 3 doubles; `out` valid for writes.
enum SnbvStatus snbv_map_new(double resolution,
                             const double (*min)[3],
                             const double (*max)[3],
                             const double (*plant_base)[3],
                             struct SnbvMap **out);

// Integrates `n` labelled points observed from `origin`.
//
// # Safety
// `map` must be a live handle; `points` must hold `n` elements (or be null
// when `n` is 0); `origin` must point to 3 doubles.
enum SnbvStatus snbv_map_integrate(struct SnbvMap *map,
                                   const struct SnbvPoint *points,
                                   size_t n,
                                   const double (*origin)[3]);

// Voxel containing `point`; unobserved voxels read as `p = 0.5`, background.
//
// # Safety
// `map` must be a live handle; `point` must point to 3 doubles; `out` valid
// for writes.
enum SnbvStatus snbv_map_query(const struct SnbvMap *map,
                               const double (*point)[3],
                               struct SnbvVoxel *out);

// Number of occupied voxels.
//
// # Safety
// `map` must be a live handle; `out` must be valid for writes.
enum SnbvStatus snbv_map_occupied_count(const struct SnbvMap *map, size_t *out);

// # Safety
// `map` must come from this library or be null.
void snbv_map_free(struct SnbvMap *map);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SEMNBV_H */
