#ifndef PAMLAB_PAMLAB_H
#define PAMLAB_PAMLAB_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define PAM_API __declspec(dllexport)
#else
#define PAM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes; PAM_OK is zero. */
enum {
  PAM_OK = 0,
  PAM_ERR_PARAMETER = 1,
  PAM_ERR_INVALID_SITE = 2,
  PAM_ERR_CONVERGENCE = 3,
  PAM_ERR_REGIME = 4,
  PAM_ERR_SPECTRUM_COLLISION = 5,
  PAM_ERR_INPUT = 6,
  PAM_ERR_STIFFNESS = 7,
  PAM_ERR_DEGENERATE_SPECTRUM = 8,
  PAM_ERR_SAMPLE_SIZE = 9,
  PAM_ERR_TOLERANCE = 10,
  PAM_ERR_IO = 11,
  PAM_ERR_INTERNAL = 12
};

typedef struct pam_field pam_field;
typedef struct pam_snapshot pam_snapshot;
typedef struct pam_experiment pam_experiment;

typedef struct pam_solve_options {
  size_t spectral_k;   /* 0 selects min(50, sites) */
  double eigen_tol;
  double ode_rel_tol;
  size_t walkers;
  uint64_t seed;
  int workers;
} pam_solve_options;

PAM_API const char* pam_version(void);
PAM_API const char* pam_status_name(int status);
/* Message of the last failure on the calling thread; empty after success. */
PAM_API const char* pam_last_error(void);
PAM_API void pam_string_free(char* s);

/* Strings returned through char** are owned by the caller; release with pam_string_free. */
PAM_API int pam_scales_json(double t, int d, double gamma, double theta, const char* overrides_json, char** out_json);
PAM_API int pam_content_hash(const char* bytes, size_t length, char out_hex[41]);

PAM_API int pam_field_sample(int d, int side, double gamma, uint64_t seed, pam_field** out);
PAM_API int pam_field_constant(int d, int side, double value, pam_field** out);
PAM_API int pam_field_read_csv(const char* path, double gamma, uint64_t seed, pam_field** out);
PAM_API int pam_field_write_csv(const pam_field* field, const char* path);
PAM_API int pam_field_info(const pam_field* field, int* d, int* side, size_t* sites);
PAM_API int pam_field_values(const pam_field* field, double* out, size_t length);
PAM_API void pam_field_free(pam_field* field);

PAM_API void pam_solve_options_default(pam_solve_options* options);
/* method: "spectral", "ode", "fk" or "propagator". */
PAM_API int pam_solve(const pam_field* field, const char* method, double t, const pam_solve_options* options,
                      pam_snapshot** out);
/* u(t, z) = exp(log_scale) * values[z]. */
PAM_API int pam_snapshot_info(const pam_snapshot* snap, double* t, double* log_scale, double* total_mass,
                              double* mass_stderr, int* has_stderr);
PAM_API int pam_snapshot_values(const pam_snapshot* snap, double* values, double* stderr_or_null, size_t length);
PAM_API int pam_snapshot_write(const pam_snapshot* snap, const pam_field* field, const char* csv_path);
PAM_API void pam_snapshot_free(pam_snapshot* snap);

PAM_API size_t pam_experiment_count(void);
PAM_API const char* pam_experiment_name(size_t index);
/* Validates and runs a schema-1 JSON config; results do not depend on workers. */
PAM_API int pam_experiment_run(const char* config_json, int workers, pam_experiment** out);
PAM_API int pam_experiment_passed(const pam_experiment* exp, int* passed);
PAM_API int pam_experiment_csv(const pam_experiment* exp, char** out_csv);
PAM_API int pam_experiment_summary(const pam_experiment* exp, char** out_json);
/* Writes the CSV and summary into the configured output directory. */
PAM_API int pam_experiment_write(const pam_experiment* exp, char** csv_path, char** summary_path);
PAM_API void pam_experiment_free(pam_experiment* exp);

#ifdef __cplusplus
}
#endif

#endif
