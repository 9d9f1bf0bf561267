#ifndef RMTOOLBOX_H
#define RMTOOLBOX_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

// Status codes; the nonzero values match the command-line exit codes.
typedef enum RmStatus {
  RM_STATUS_OK = 0,
  RM_STATUS_NULL_POINTER = 1,
  RM_STATUS_INVALID_ARGUMENT = 2,
  RM_STATUS_IO = 3,
  RM_STATUS_DATA = 4,
  RM_STATUS_PANIC = 5,
} RmStatus;

// Opaque collection of measurement records.
typedef struct RmRecordSet RmRecordSet;

// A value with its jackknife standard error.
typedef struct RmEstimate {
  double value;
  double std_error;
} RmEstimate;

// Parameters of a simulated Néel-state quench with uniform noise.
typedef struct RmQuenchParams {
  size_t n_qubits;
  // Nearest-neighbour coupling, s⁻¹.
  double j0;
  double alpha;
  // Transverse field, rad/s.
  double b_field;
  // Evolution times in seconds, sorted.
  const double *times;
  size_t n_times;
  // Per-qubit preparation depolarizing strength (1 = none).
  double lambda_prep;
  // Per-qubit measurement depolarizing strength (1 = none).
  double lambda_meas;
  size_t n_unitaries;
  uint64_t n_shots;
  uint64_t seed;
} RmQuenchParams;

// Library version as a static NUL-terminated string.
const char *rm_version(void);

// Message of the last failed call on this thread, or NULL after a success.
//
// The pointer stays valid until the next rmtoolbox call on the same thread.
const char *rm_last_error_message(void);

// New empty record set.
struct RmRecordSet *rm_record_set_new(void);

// # Safety
// `set` must be NULL or a handle returned by this library that has not been freed.
void rm_record_set_free(struct RmRecordSet *set);

// Number of records; 0 for NULL.
//
// # Safety
// `set` must be NULL or a live handle.
size_t rm_record_set_len(const struct RmRecordSet *set);

// Read a JSON Lines record file into a new handle stored in `*out`.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a writable pointer.
enum RmStatus rm_record_set_load(const char *path, struct RmRecordSet **out);

// Write all records as JSON Lines.
//
// # Safety
// `set` must be a live handle and `path` a NUL-terminated string.
enum RmStatus rm_record_set_write(const struct RmRecordSet *set, const char *path);

// Append one record given as a single JSON line.
//
// # Safety
// `set` must be a live handle and `line` a NUL-terminated string.
enum RmStatus rm_record_set_push_json(struct RmRecordSet *set, const char *line);

// JSON line of record `index`, written to `buf` including the NUL terminator.
//
// `*needed` receives the required buffer size; with `buf_len` smaller than
// that the call fails with `RM_STATUS_INVALID_ARGUMENT` and writes nothing.
//
// # Safety
// `set` must be a live handle, `needed` writable, and `buf` writable for
// `buf_len` bytes (or NULL when `buf_len` is 0).
enum RmStatus rm_record_set_get_json(const struct RmRecordSet *set,
                                     size_t index,
                                     char *buf,
                                     size_t buf_len,
                                     size_t *needed);

// New handle with the records taken at `time_s` (exact match).
//
// # Safety
// `set` must be a live handle and `out` writable.
enum RmStatus rm_record_set_select_time(const struct RmRecordSet *set,
                                        double time_s,
                                        struct RmRecordSet **out);

// Purity of the subsystem given by `n_sites` 1-based site indices.
//
// # Safety
// `set` must be a live handle, `sites` readable for `n_sites` entries and
// `out` writable.
enum RmStatus rm_estimate_purity(const struct RmRecordSet *set,
                                 const size_t *sites,
                                 size_t n_sites,
                                 struct RmEstimate *out);

// Second-order Rényi entropy in bits; fails with `RM_STATUS_DATA` when the
// purity estimate is not positive.
//
// # Safety
// As for [`rm_estimate_purity`].
enum RmStatus rm_estimate_entropy(const struct RmRecordSet *set,
                                  const size_t *sites,
                                  size_t n_sites,
                                  struct RmEstimate *out);

// Rényi mutual information `S(A) + S(B) − S(AB)` of two disjoint subsystems.
//
// # Safety
// `set` must be a live handle, `a`/`b` readable for `n_a`/`n_b` entries and
// `out` writable.
enum RmStatus rm_mutual_information(const struct RmRecordSet *set,
                                    const size_t *a,
                                    size_t n_a,
                                    const size_t *b,
                                    size_t n_b,
                                    struct RmEstimate *out);

// Simulate randomized measurements after a Néel-state quench.
//
// # Safety
// `params` must be readable, `params->times` readable for `n_times` entries
// and `out` writable.
enum RmStatus rm_simulate_quench(const struct RmQuenchParams *params, struct RmRecordSet **out);

#endif  /* RMTOOLBOX_H */
