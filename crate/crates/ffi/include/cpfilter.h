#ifndef CPFILTER_H
#define CPFILTER_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum CpfFilter {
  CPF_FILTER_CMR = 0,
  CPF_FILTER_HOP_DIS = 1,
  CPF_FILTER_HOP = 2,
} CpfFilter;

/**
 * Result code of every fallible call.
 */
typedef enum CpfStatus {
  CPF_STATUS_OK = 0,
  CPF_STATUS_NULL_POINTER = 1,
  CPF_STATUS_INVALID_ARGUMENT = 2,
  CPF_STATUS_IO = 3,
  CPF_STATUS_PARSE = 4,
  CPF_STATUS_CODEC = 5,
  CPF_STATUS_BUFFER_TOO_SMALL = 6,
  CPF_STATUS_SIMULATION = 7,
  CPF_STATUS_PANIC = 8,
} CpfStatus;

/**
 * Loaded fitness matrix.
 */
typedef struct CpfMatrix CpfMatrix;

/**
 * Finished simulation run.
 */
typedef struct CpfSimResult CpfSimResult;

/**
 * Raw attributes of one detected object.
 */
typedef struct CpfFeatures {
  /**
   * Distance in meters.
   */
  double d;
  /**
   * Closing speed in m/s.
   */
  double v;
  /**
   * Heading relevance angle in degrees.
   */
  double r;
  /**
   * Category risk rank.
   */
  double c;
} CpfFeatures;

typedef struct CpfPosition {
  /**
   * When true `a`/`b` are latitude/longitude in degrees, otherwise planar x/y in meters.
   */
  bool geodetic;
  double a;
  double b;
} CpfPosition;

typedef struct CpfCmrConfig {
  uint8_t ttl_initial;
  double direction_threshold_deg;
  double distance_threshold_m;
} CpfCmrConfig;

typedef struct CpfVerdict {
  /**
   * 1 = forward and process, 0 = drop.
   */
  uint8_t forward;
  /**
   * Decremented hop budget, may be -1.
   */
  int16_t ttl;
} CpfVerdict;

/**
 * Everything in a framed packet except the objects.
 */
typedef struct CpfPacketHeader {
  uint8_t ttl;
  /**
   * 0 = safety, 1 = non-safety.
   */
  uint8_t msg_type;
  uint16_t timestamp;
  /**
   * Degrees times 1e5.
   */
  int32_t lat;
  int32_t lon;
  /**
   * cm/s.
   */
  int16_t velocity;
  /**
   * Hundredths of a degree, below 36000.
   */
  uint16_t direction;
  uint8_t category;
} CpfPacketHeader;

/**
 * Wire-level object record.
 */
typedef struct CpfObject {
  uint16_t id;
  uint8_t position_x;
  uint8_t position_y;
  uint8_t velocity;
  uint8_t distance;
  /**
   * Category code 0..=8.
   */
  uint8_t label;
  uint8_t confidence;
} CpfObject;

typedef struct CpfVehicleMetrics {
  uint32_t id;
  uint64_t generated;
  uint64_t originated;
  uint64_t forwarded;
  uint64_t received;
  uint64_t filtered;
  uint64_t own_echoes;
  uint64_t lost;
  uint64_t sensed;
  double busy_time_s;
} CpfVehicleMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null.
 *
 * The pointer stays valid until the next call into this library on the same thread.
 */
const char *cpf_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *cpf_version(void);

/**
 * Decayed message informativeness for a message whose best object scored `base`.
 */
double cpf_decay(double base,
                 uint32_t ttl_remaining,
                 uint32_t ttl_initial,
                 double rate,
                 double elapsed_s);

/**
 * Identity matrix over the default attribute ranges.
 */
enum CpfStatus cpf_matrix_identity(struct CpfMatrix **out_matrix);

/**
 * Loads a matrix file written by `cpfilter train`.
 */
enum CpfStatus cpf_matrix_load(const char *path, struct CpfMatrix **out_matrix);

void cpf_matrix_free(struct CpfMatrix *matrix);

/**
 * Normalized fitness in `[0, 1]` of one object.
 */
enum CpfStatus cpf_matrix_score(const struct CpfMatrix *matrix,
                                const struct CpfFeatures *features,
                                double *out_score);

/**
 * Ranks `count` objects by descending fitness.
 *
 * `out_indices` receives the input positions in rank order. `out_scores`
 * may be null; otherwise it receives the normalized score of each ranked object.
 */
enum CpfStatus cpf_rank(const struct CpfMatrix *matrix,
                        const struct CpfFeatures *features,
                        size_t count,
                        size_t *out_indices,
                        double *out_scores);

/**
 * Applies a forwarding filter to a received frame.
 */
enum CpfStatus cpf_route_decide(enum CpfFilter filter,
                                uint8_t tx_ttl,
                                double tx_heading_deg,
                                struct CpfPosition tx_position,
                                double rx_heading_deg,
                                struct CpfPosition rx_position,
                                const struct CpfCmrConfig *config,
                                struct CpfVerdict *out_verdict);

/**
 * Default CMR thresholds.
 */
struct CpfCmrConfig cpf_cmr_config_default(void);

/**
 * Largest framed packet in bytes.
 */
size_t cpf_packet_max_len(void);

/**
 * Encodes a framed packet into `buf`.
 *
 * `out_len` always receives the required size, so a call with a short
 * buffer returns `BufferTooSmall` and reports how much space is needed.
 */
enum CpfStatus cpf_packet_encode(const struct CpfPacketHeader *header,
                                 const struct CpfObject *objects,
                                 size_t object_count,
                                 uint8_t *buf,
                                 size_t buf_len,
                                 size_t *out_len);

/**
 * Decodes a framed packet.
 *
 * `out_object_count` always receives the number of objects in the frame;
 * if it exceeds `object_capacity` the call fails with `BufferTooSmall`.
 */
enum CpfStatus cpf_packet_decode(const uint8_t *bytes,
                                 size_t len,
                                 struct CpfPacketHeader *out_header,
                                 struct CpfObject *out_objects,
                                 size_t object_capacity,
                                 size_t *out_object_count);

/**
 * Runs one simulation described by TOML scenario text (same keys as the CLI
 * scenario file; `filters` and `output_dir` are ignored).
 */
enum CpfStatus cpf_sim_run(const char *scenario_toml,
                           enum CpfFilter filter,
                           struct CpfSimResult **out_result);

void cpf_sim_free(struct CpfSimResult *result);

/**
 * Number of vehicles in a finished run, 0 for a null handle.
 */
size_t cpf_sim_vehicle_count(const struct CpfSimResult *result);

enum CpfStatus cpf_sim_vehicle(const struct CpfSimResult *result,
                               size_t index,
                               struct CpfVehicleMetrics *out_metrics);

/**
 * Mean received frames and mean busy time over all vehicles.
 */
enum CpfStatus cpf_sim_summary(const struct CpfSimResult *result,
                               double *out_mean_received,
                               double *out_mean_busy_time_s);

/**
 * Writes the per-vehicle CSV and/or the CDF CSV; either path may be null.
 */
enum CpfStatus cpf_sim_write_csv(const struct CpfSimResult *result,
                                 const char *metrics_path,
                                 const char *cdf_path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CPFILTER_H */
