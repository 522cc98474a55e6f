#ifndef ROTORLAB_H
#define ROTORLAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RlStatus {
  RL_STATUS_OK = 0,
  RL_STATUS_NULL_POINTER = 1,
  RL_STATUS_INVALID_ARGUMENT = 2,
  RL_STATUS_IO = 3,
  RL_STATUS_PARSE = 4,
  RL_STATUS_NOT_READY = 5,
  RL_STATUS_NUMERICAL = 6,
  RL_STATUS_PANIC = 7,
} RlStatus;

/**
 * INDI filter bank.
 */
typedef struct RlIndi RlIndi;

/**
 * Trained residual network.
 */
typedef struct RlModel RlModel;

/**
 * Simulated vehicle with its scenario.
 */
typedef struct RlSimulator RlSimulator;

/**
 * Force in N (world frame) and torque in N·m (body frame).
 */
typedef struct RlResidual {
  double force[3];
  double torque[3];
} RlResidual;

typedef struct RlVehicleState {
  double position[3];
  double velocity[3];
  /**
   * Row-major body-to-world rotation.
   */
  double rotation[9];
  double angular_velocity[3];
} RlVehicleState;

typedef struct RlSensorFrame {
  double accel[3];
  double gyro[3];
  double rpm[4];
  double pwm[4];
  double timestamp;
} RlSensorFrame;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread. The pointer stays valid
 * until the next failing call on the same thread.
 */
const char *rl_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *rl_version(void);

/**
 * Loads a model file written by the training pipeline.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum RlStatus rl_model_load(const char *path, struct RlModel **out);

/**
 * Predicts the residual from a 19-element feature vector.
 *
 * # Safety
 * `features` must point to 19 doubles; `model` and `out` must be valid.
 */
enum RlStatus rl_model_predict(const struct RlModel *model,
                               const double *features,
                               struct RlResidual *out);

/**
 * # Safety
 * `model` must come from [`rl_model_load`] or be null.
 */
void rl_model_free(struct RlModel *model);

/**
 * Creates a simulator from a TOML scenario file, or the defaults when
 * `config_path` is null. The vehicle starts hovering at `position`.
 *
 * # Safety
 * `config_path` must be null or NUL-terminated; `position` must point to 3
 * doubles; `out` must be valid.
 */
enum RlStatus rl_sim_new(const char *config_path,
                         bool payload,
                         uint64_t seed,
                         const double *position,
                         struct RlSimulator **out);

/**
 * Sets commanded rotor speeds (rad/s) for the following steps.
 *
 * # Safety
 * `sim` must be valid and `speeds` must point to 4 doubles.
 */
enum RlStatus rl_sim_set_command(struct RlSimulator *sim, const double *speeds);

/**
 * Advances by `steps` physics steps.
 *
 * # Safety
 * `sim` must be valid.
 */
enum RlStatus rl_sim_advance(struct RlSimulator *sim, size_t steps);

/**
 * Physics steps per control tick of the scenario.
 *
 * # Safety
 * `sim` must be valid.
 */
enum RlStatus rl_sim_substeps(const struct RlSimulator *sim, size_t *out);

/**
 * # Safety
 * `sim` and `out` must be valid.
 */
enum RlStatus rl_sim_state(const struct RlSimulator *sim, struct RlVehicleState *out);

/**
 * Draws one noisy sensor sample.
 *
 * # Safety
 * `sim` and `out` must be valid.
 */
enum RlStatus rl_sim_sense(struct RlSimulator *sim, struct RlSensorFrame *out);

/**
 * Ground-truth residual acting on the vehicle.
 *
 * # Safety
 * `sim` and `out` must be valid.
 */
enum RlStatus rl_sim_true_residual(const struct RlSimulator *sim, struct RlResidual *out);

/**
 * # Safety
 * `sim` must come from [`rl_sim_new`] or be null.
 */
void rl_sim_free(struct RlSimulator *sim);

/**
 * # Safety
 * `out` must be valid.
 */
enum RlStatus rl_indi_new(double cutoff_hz, double sample_rate_hz, struct RlIndi **out);

/**
 * Feeds one sample taken from `sim` and writes the rotor-speed based
 * estimate. Returns `NotReady` until the filters are warm. Payload
 * simulators include the cable term.
 *
 * # Safety
 * All pointers must be valid.
 */
enum RlStatus rl_indi_update(struct RlIndi *indi,
                             const struct RlSimulator *sim,
                             const struct RlSensorFrame *frame,
                             struct RlResidual *out);

/**
 * # Safety
 * `indi` must come from [`rl_indi_new`] or be null.
 */
void rl_indi_free(struct RlIndi *indi);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ROTORLAB_H */
