#ifndef ANOSOV3_ANOSOV3_H
#define ANOSOV3_ANOSOV3_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define AN3_API __declspec(dllexport)
#else
#define AN3_API __attribute__((visibility("default")))
#endif

typedef enum an3_status {
  AN3_OK = 0,
  AN3_INVALID_ARGUMENT = 1,
  AN3_NO_CONVERGENCE = 2,
  AN3_NOT_DIFFEOMORPHISM = 3,
  AN3_CONE_VIOLATION = 4,
  AN3_DEGENERATE_FRAME = 5,
  AN3_ORDER_VIOLATION = 6,
  AN3_OVERFLOW = 7,
  AN3_BUDGET_EXCEEDED = 8,
  AN3_LOST_ORBIT = 9,
  AN3_COLLISION = 10,
  AN3_NO_INTERSECTION = 11,
  AN3_TANGENT_DRIFT = 12,
  AN3_EIGEN_NO_CONVERGENCE = 13,
  AN3_NORMALIZATION_DEGENERATE = 14,
  AN3_UNDERFLOW = 15,
  AN3_CONFIG_ERROR = 16,
  AN3_IO_ERROR = 17,
  AN3_INTERNAL = 18
} an3_status;

typedef struct an3_map an3_map;
typedef struct an3_report an3_report;

AN3_API const char* an3_version_string(void);
AN3_API const char* an3_status_name(an3_status s);
/* message of the last failing call on this thread, "" if none */
AN3_API const char* an3_last_error(void);

/* matrix is row-major 3x3; terms: n_terms entries of
   k1 k2 k3 (as doubles) amp1 amp2 amp3 phase (7 doubles each) */
AN3_API an3_status an3_map_create(const int64_t matrix[9], const double* terms, size_t n_terms, double epsilon,
                                  an3_map** out);
AN3_API an3_status an3_map_create_default(double epsilon, an3_map** out);
AN3_API void an3_map_free(an3_map* m);
AN3_API an3_status an3_map_eval(const an3_map* m, const double x[3], double out[3]);
/* row-major */
AN3_API an3_status an3_map_jacobian(const an3_map* m, const double x[3], double out[9]);
AN3_API an3_status an3_map_lambda(const an3_map* m, double out[3]);
AN3_API an3_status an3_periodic_count(const an3_map* m, int period, int workers, int64_t* count);

/* config_json: full JSON text; task_filter: comma separated or NULL; workers <= 0 keeps the config value */
AN3_API an3_status an3_run_json(const char* config_json, const char* task_filter, int workers, an3_report** out);
AN3_API void an3_report_free(an3_report* r);
/* 0 all flags pass, 1 a flag failed or a task errored, 3 internal error */
AN3_API int an3_report_exit_code(const an3_report* r);
AN3_API const char* an3_report_json(const an3_report* r);
AN3_API size_t an3_report_table_count(const an3_report* r);
AN3_API const char* an3_report_table_name(const an3_report* r, size_t i);
AN3_API const char* an3_report_table_csv(const an3_report* r, size_t i);
/* writes DIR/report.json and DIR/tables/*.csv */
AN3_API an3_status an3_report_write(const an3_report* r, const char* dir);

#ifdef __cplusplus
}
#endif

#endif
