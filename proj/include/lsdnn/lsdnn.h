/* C interface to the lsdnn phase-retrieval library. */
#ifndef LSDNN_H
#define LSDNN_H

#include <stddef.h>

#if defined(LSDNN_BUILDING_LIBRARY)
#define LSDNN_API __attribute__((visibility("default")))
#else
#define LSDNN_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum lsdnn_status {
  LSDNN_OK = 0,
  LSDNN_ERR_USAGE = 1,     /* bad arguments, config or call order */
  LSDNN_ERR_DATA = 2,      /* unreadable, malformed or mismatched data */
  LSDNN_ERR_NUMERICAL = 3, /* degenerate or non-finite numerics */
  LSDNN_ERR_INTERNAL = 4
} lsdnn_status;

LSDNN_API const char* lsdnn_version(void);
/* Message of the last failure on the calling thread ("" if none). */
LSDNN_API const char* lsdnn_last_error(void);
LSDNN_API void lsdnn_set_warnings(int enabled);

/* Configuration */
typedef struct lsdnn_config lsdnn_config;

LSDNN_API lsdnn_status lsdnn_config_create(lsdnn_config** out);
LSDNN_API void lsdnn_config_destroy(lsdnn_config* config);
LSDNN_API lsdnn_status lsdnn_config_load(lsdnn_config* config, const char* path);
LSDNN_API lsdnn_status lsdnn_config_set(lsdnn_config* config, const char* key, const char* value);
/* Copies the value (NUL-terminated) into buf when it fits; *needed gets the
   full length including the terminator. */
LSDNN_API lsdnn_status lsdnn_config_get(const lsdnn_config* config, const char* key, char* buf,
                                        size_t capacity, size_t* needed);
LSDNN_API lsdnn_status lsdnn_config_dump(const lsdnn_config* config, char* buf, size_t capacity,
                                         size_t* needed);

/* Real-valued 2-D fields, row-major ny x nx */
typedef struct lsdnn_field lsdnn_field;

LSDNN_API lsdnn_status lsdnn_field_create(size_t ny, size_t nx, double dy, double dx,
                                          lsdnn_field** out);
LSDNN_API lsdnn_status lsdnn_field_load(const char* path, lsdnn_field** out);
LSDNN_API lsdnn_status lsdnn_field_save(const lsdnn_field* field, const char* path,
                                        int single_precision);
LSDNN_API void lsdnn_field_destroy(lsdnn_field* field);
LSDNN_API lsdnn_status lsdnn_field_shape(const lsdnn_field* field, size_t* ny, size_t* nx,
                                         double* dy, double* dx);
LSDNN_API double* lsdnn_field_data(lsdnn_field* field);
LSDNN_API lsdnn_status lsdnn_export_pgm(const lsdnn_field* field, const char* path);

LSDNN_API lsdnn_status lsdnn_pcc(const lsdnn_field* a, const lsdnn_field* b, double* out);
LSDNN_API lsdnn_status lsdnn_psnr(const lsdnn_field* a, const lsdnn_field* b, double peak,
                                  double* out);
/* dynamic_range <= 0 uses the larger of the two ranges. */
LSDNN_API lsdnn_status lsdnn_ssim(const lsdnn_field* a, const lsdnn_field* b, double dynamic_range,
                                  double* out);

/* Single-field physics using the config's optics (grid taken from the field). */
LSDNN_API lsdnn_status lsdnn_forward_intensity(const lsdnn_config* config, const lsdnn_field* phase,
                                               lsdnn_field** out);
LSDNN_API lsdnn_status lsdnn_approximant(const lsdnn_config* config, const lsdnn_field* g,
                                         lsdnn_field** out);

/* Directory-level commands */
LSDNN_API lsdnn_status lsdnn_gen_data(const lsdnn_config* config, size_t count, const char* out_dir,
                                      int force);
LSDNN_API lsdnn_status lsdnn_simulate(const lsdnn_config* config, const char* data_dir,
                                      const char* out_dir, int force);
LSDNN_API lsdnn_status lsdnn_retrieve(const lsdnn_config* config, const char* measurement_dir,
                                      int iterations, const char* out_dir, int force);
/* role: "L", "H", "S" or "L3" */
LSDNN_API lsdnn_status lsdnn_train(const lsdnn_config* config, const char* role,
                                   const char* data_dir, const char* inputs_dir,
                                   const char* states_dir);
LSDNN_API lsdnn_status lsdnn_run_ls(const lsdnn_config* config, const char* experiment_dir,
                                    int force);
LSDNN_API lsdnn_status lsdnn_evaluate(const lsdnn_config* config, const char* states_dir,
                                      const char* data_dir, const char* inputs_dir,
                                      const char* out_dir, int force);
LSDNN_API lsdnn_status lsdnn_analyze_psd(const char* in_dir, int diagonal, const char* out_prefix,
                                         double* slope);

#ifdef __cplusplus
}
#endif

#endif
