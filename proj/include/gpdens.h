/*
 * Copyright 2026 The gpdens Authors. All rights reserved.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/*
 * C interface to the gpdens density-estimation library.
 *
 * All functions returning gpdens_status report GPDENS_OK on success; on any
 * other status a human-readable message is available per thread through
 * gpdens_last_error().  Objects handed out as opaque pointers must be
 * released with the matching *_free function.
 */

#ifndef GPDENS_H_
#define GPDENS_H_

#include <stddef.h>

#if defined(_WIN32)
#if defined(GPDENS_BUILDING)
#define GPDENS_API __declspec(dllexport)
#else
#define GPDENS_API __declspec(dllimport)
#endif
#else
#define GPDENS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum gpdens_status {
  GPDENS_OK = 0,
  GPDENS_ERR_INVALID_ARGUMENT = 1,
  GPDENS_ERR_PARSE = 2,
  GPDENS_ERR_NUMERICAL = 3,
  GPDENS_ERR_IO = 4,
  GPDENS_ERR_INTERNAL = 5
} gpdens_status;

typedef struct gpdens_dataset gpdens_dataset;
typedef struct gpdens_model gpdens_model;

/* Library version string, "major.minor.patch". */
GPDENS_API const char* gpdens_version(void);

/* Message of the most recent failure on the calling thread ("" if none). */
GPDENS_API const char* gpdens_last_error(void);

/* ---- datasets ---------------------------------------------------------- */

/* Sparse index:value text file, 1-based indices, optional leading label
 * token (discarded). */
GPDENS_API gpdens_status gpdens_dataset_load_svmlight(const char* path,
                                                      gpdens_dataset** out);

/* Dense column-major buffer: point j occupies values[j*dim .. j*dim+dim-1]. */
GPDENS_API gpdens_status gpdens_dataset_from_dense(const double* values,
                                                   int dim, int count,
                                                   gpdens_dataset** out);

GPDENS_API int gpdens_dataset_dim(const gpdens_dataset* ds);
GPDENS_API int gpdens_dataset_count(const gpdens_dataset* ds);

/* Copies the features into a caller-owned buffer of dim*count doubles,
 * column-major. */
GPDENS_API gpdens_status gpdens_dataset_values(const gpdens_dataset* ds,
                                               double* out);

GPDENS_API void gpdens_dataset_free(gpdens_dataset* ds);

/* ---- fitting ----------------------------------------------------------- */

typedef struct gpdens_fit_options {
  /* "lz", "loo", "lpo-det", "lpo-rd", "gm", "kde" or "mp". */
  const char* method;
  /* Preprocessing fitted on the training data: "r", "s" or "w". */
  const char* preproc;
  int latent_dim;               /* GPLVM latent dimensionality */
  int leave_out;                /* P of the leave-P-out objective */
  int total_steps;              /* optimizer step budget */
  unsigned long long seed;
  int gm_clusters;              /* gm: number of mixture components */
  int mp_rank;                  /* mp: local principal directions */
  int mp_neighbors;             /* mp: neighborhood size */
} gpdens_fit_options;

/* Fills in the defaults (lpo-det, raw preprocessing, d=2, P=5, 600 steps). */
GPDENS_API void gpdens_fit_options_init(gpdens_fit_options* options);

GPDENS_API gpdens_status gpdens_fit(const gpdens_dataset* train,
                                    const gpdens_fit_options* options,
                                    gpdens_model** out);

/* ---- models ------------------------------------------------------------ */

/* Log density of one raw-space point (preprocessing and its Jacobian offset
 * are applied internally). */
GPDENS_API gpdens_status gpdens_model_log_density(const gpdens_model* model,
                                                  const double* point, int dim,
                                                  double* out);

/* Mean log density over a dataset, in the preprocessed space and in the raw
 * space.  Either output pointer may be NULL. */
GPDENS_API gpdens_status gpdens_model_mean_log_density(
    const gpdens_model* model, const gpdens_dataset* test,
    double* out_transformed, double* out_raw);

/* Versioned JSON document round-trip. */
GPDENS_API gpdens_status gpdens_model_save(const gpdens_model* model,
                                           const char* path);
GPDENS_API gpdens_status gpdens_model_load(const char* path,
                                           gpdens_model** out);

GPDENS_API void gpdens_model_free(gpdens_model* model);

/* ---- benchmark grid ----------------------------------------------------- */

/*
 * Runs an experiment grid described by a JSON document and returns a JSON
 * summary (caller frees with gpdens_string_free).  Config keys:
 *   dataset      path to an svmlight file (or "features": nested arrays)
 *   name         dataset label for reports (default: file stem)
 *   methods      subset of ["lz","lpo-det","lpo-rd","gm","kde","mp"]
 *   n_tr         array of training-set sizes (required)
 *   splits       random splits per cell (default 10)
 *   seed         base seed (default 0)
 *   steps        optimizer budget per GPLVM fit (default 600)
 *   workers      concurrent workers (default 1)
 *   out          output directory for per-run JSON and the CSV summary
 *   preproc      subset of ["r","s","w"]
 *   latent_dims  GPLVM d grid (default [1,2,3])
 *   leave_outs   LPO P grid (default [1,2,5,10,15])
 *   allow_large  permit datasets beyond N=1000 or D=64 (default false)
 */
GPDENS_API gpdens_status gpdens_bench_run(const char* config_json,
                                          char** out_summary_json);

/* ---- selftest ----------------------------------------------------------- */

/* Built-in oracle checks (Monte-Carlo moments, finite differences,
 * downdates, quadrature).  *out_passed is 1 when every check passed; the
 * report text is returned when out_report is non-NULL. */
GPDENS_API gpdens_status gpdens_selftest(unsigned long long seed,
                                         int* out_passed, char** out_report);

GPDENS_API void gpdens_string_free(char* s);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* GPDENS_H_ */
