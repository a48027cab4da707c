#ifndef ROVER_H
#define ROVER_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RoverStatus {
  ROVER_STATUS_OK = 0,
  ROVER_STATUS_NULL_ARGUMENT = 1,
  ROVER_STATUS_INVALID_UTF8 = 2,
  ROVER_STATUS_VALIDATION = 3,
  ROVER_STATUS_PLANNING = 4,
  ROVER_STATUS_REJECTED = 5,
  ROVER_STATUS_PANIC = 6,
} RoverStatus;

// Opaque session: one simulated rover plus its mission service.
typedef struct RoverSession RoverSession;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *rover_version(void);

// Message for the last failed call on this thread, or NULL. The pointer
// stays valid until the next library call on the same thread.
const char *rover_last_error(void);

// # Safety
// `s` must be NULL or a string returned by this library and not yet freed.
void rover_string_free(char *s);

// Creates a session from scenario JSON. On success `*out` receives the
// handle, to be released with [`rover_session_free`].
//
// # Safety
// `scenario_json` must be a NUL-terminated string; `out` must be writable.
enum RoverStatus rover_session_new(const char *scenario_json,
                                   uint64_t seed,
                                   struct RoverSession **out);

// # Safety
// `session` must be NULL or a handle from [`rover_session_new`] not yet freed.
void rover_session_free(struct RoverSession *session);

// Applies a command such as `{"type":"start_mapping"}` or
// `{"type":"start_mission","mission":{...}}`. A rejected command leaves the
// session unchanged.
//
// # Safety
// `session` must be a live handle; `command_json` a NUL-terminated string.
enum RoverStatus rover_session_command(struct RoverSession *session, const char *command_json);

// Advances the session by `ticks` control ticks.
//
// # Safety
// `session` must be a live handle.
enum RoverStatus rover_session_step(struct RoverSession *session, uint64_t ticks);

// Current telemetry frame as JSON. The path is included only when it
// changed since the previous telemetry call.
//
// # Safety
// `session` must be a live handle; `out` must be writable.
enum RoverStatus rover_session_telemetry(struct RoverSession *session, char **out);

// Run metrics so far as JSON.
//
// # Safety
// `session` must be a live handle; `out` must be writable.
enum RoverStatus rover_session_metrics(struct RoverSession *session, char **out);

// Current map (live while mapping, frozen afterwards) as run-length
// encoded JSON. Fails with `ROVER_STATUS_REJECTED` before mapping starts.
//
// # Safety
// `session` must be a live handle; `out` must be writable.
enum RoverStatus rover_session_map(struct RoverSession *session, char **out);

// Plans `mission_json` on a map in the JSON form produced by
// [`rover_session_map`], starting at (`start_x`, `start_y`). `*out`
// receives `{"cost": .., "points": [[x, y], ..]}`.
//
// # Safety
// String arguments must be NUL-terminated; `out` must be writable.
enum RoverStatus rover_plan(const char *map_json,
                            const char *mission_json,
                            double start_x,
                            double start_y,
                            double robot_radius,
                            double safety_margin,
                            double lane_width,
                            char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ROVER_H */
