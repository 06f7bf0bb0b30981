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

#include "gpdens.h"

#include <cstring>
#include <exception>
#include <filesystem>
#include <memory>
#include <new>
#include <string>

#include <json.hpp>

#include "core/harness.hpp"
#include "core/selftest.hpp"
#include "core/types.hpp"

using nlohmann::json;

struct gpdens_dataset {
  gpdens::Dataset data;
};

struct gpdens_model {
  gpdens::FittedModel model;
};

namespace {

thread_local std::string g_last_error;

gpdens_status fail(gpdens_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

// Runs the body and maps exceptions onto status codes.
template <typename Fn>
gpdens_status guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const gpdens::ParseError& e) {
    return fail(GPDENS_ERR_PARSE, e.what());
  } catch (const gpdens::NumericalError& e) {
    return fail(GPDENS_ERR_NUMERICAL, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(GPDENS_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(GPDENS_ERR_IO, e.what());
  } catch (const std::ios_base::failure& e) {
    return fail(GPDENS_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(GPDENS_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(GPDENS_ERR_INTERNAL, e.what());
  }
}

char* copy_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

json record_to_json(const gpdens::RunRecord& rec) {
  json doc;
  doc["dataset"] = rec.dataset;
  doc["method"] = rec.method;
  doc["params"] = rec.params;
  doc["n_tr"] = rec.n_tr;
  doc["split"] = rec.split;
  doc["preproc"] = rec.preproc;
  doc["seed"] = rec.seed;
  doc["log_density"] = rec.log_density;
  doc["log_density_raw_space"] = rec.log_density_raw_space;
  doc["test_count"] = rec.test_count;
  doc["failed"] = rec.failed;
  doc["error"] = rec.error;
  return doc;
}

}  // namespace

extern "C" {

const char* gpdens_version(void) { return "0.1.0"; }

const char* gpdens_last_error(void) { return g_last_error.c_str(); }

gpdens_status gpdens_dataset_load_svmlight(const char* path,
                                           gpdens_dataset** out) {
  if (!path || !out) return fail(GPDENS_ERR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&]() {
    auto ds = std::make_unique<gpdens_dataset>();
    ds->data = gpdens::parse_svmlight(path);
    *out = ds.release();
    return GPDENS_OK;
  });
}

gpdens_status gpdens_dataset_from_dense(const double* values, int dim,
                                        int count, gpdens_dataset** out) {
  if (!values || !out) {
    return fail(GPDENS_ERR_INVALID_ARGUMENT, "null argument");
  }
  if (dim < 1 || count < 1) {
    return fail(GPDENS_ERR_INVALID_ARGUMENT, "dim and count must be >= 1");
  }
  *out = nullptr;
  return guarded([&]() {
    auto ds = std::make_unique<gpdens_dataset>();
    ds->data.name = "dense";
    ds->data.source_format = "dense";
    ds->data.features =
        Eigen::Map<const gpdens::Matrix>(values, dim, count);
    if (!ds->data.features.allFinite()) {
      return fail(GPDENS_ERR_INVALID_ARGUMENT,
                  "dataset contains non-finite values");
    }
    *out = ds.release();
    return GPDENS_OK;
  });
}

int gpdens_dataset_dim(const gpdens_dataset* ds) {
  return ds ? ds->data.data_dim() : 0;
}

int gpdens_dataset_count(const gpdens_dataset* ds) {
  return ds ? ds->data.count() : 0;
}

gpdens_status gpdens_dataset_values(const gpdens_dataset* ds, double* out) {
  if (!ds || !out) return fail(GPDENS_ERR_INVALID_ARGUMENT, "null argument");
  Eigen::Map<gpdens::Matrix>(out, ds->data.features.rows(),
                             ds->data.features.cols()) = ds->data.features;
  return GPDENS_OK;
}

void gpdens_dataset_free(gpdens_dataset* ds) { delete ds; }

void gpdens_fit_options_init(gpdens_fit_options* options) {
  if (!options) return;
  options->method = "lpo-det";
  options->preproc = "r";
  options->latent_dim = 2;
  options->leave_out = 5;
  options->total_steps = 600;
  options->seed = 0;
  options->gm_clusters = 1;
  options->mp_rank = 1;
  options->mp_neighbors = 1;
}

gpdens_status gpdens_fit(const gpdens_dataset* train,
                         const gpdens_fit_options* options,
                         gpdens_model** out) {
  if (!train || !options || !out) {
    return fail(GPDENS_ERR_INVALID_ARGUMENT, "null argument");
  }
  *out = nullptr;
  return guarded([&]() {
    gpdens::FitSpec spec;
    spec.method = options->method ? options->method : "";
    spec.preproc = gpdens::preproc_mode_from_tag(
        options->preproc ? options->preproc : "r");
    spec.latent_dim = options->latent_dim;
    spec.leave_out = options->leave_out;
    spec.total_steps = options->total_steps;
    spec.seed = options->seed;
    spec.gm_clusters = options->gm_clusters;
    spec.mp_rank = options->mp_rank;
    spec.mp_neighbors = options->mp_neighbors;
    auto model = std::make_unique<gpdens_model>();
    model->model = gpdens::fit_model(train->data.features, spec);
    *out = model.release();
    return GPDENS_OK;
  });
}

gpdens_status gpdens_model_log_density(const gpdens_model* model,
                                       const double* point, int dim,
                                       double* out) {
  if (!model || !point || !out) {
    return fail(GPDENS_ERR_INVALID_ARGUMENT, "null argument");
  }
  return guarded([&]() {
    if (dim != model->model.data_dim()) {
      return fail(GPDENS_ERR_INVALID_ARGUMENT, "dimension mismatch");
    }
    gpdens::Vector z = Eigen::Map<const gpdens::Vector>(point, dim);
    *out = model->model.log_density_raw(z);
    return GPDENS_OK;
  });
}

gpdens_status gpdens_model_mean_log_density(const gpdens_model* model,
                                            const gpdens_dataset* test,
                                            double* out_transformed,
                                            double* out_raw) {
  if (!model || !test) {
    return fail(GPDENS_ERR_INVALID_ARGUMENT, "null argument");
  }
  return guarded([&]() {
    gpdens::EvalResult eval =
        gpdens::evaluate_model(model->model, test->data.features);
    if (out_transformed) *out_transformed = eval.transformed;
    if (out_raw) *out_raw = eval.raw;
    return GPDENS_OK;
  });
}

gpdens_status gpdens_model_save(const gpdens_model* model, const char* path) {
  if (!model || !path) {
    return fail(GPDENS_ERR_INVALID_ARGUMENT, "null argument");
  }
  return guarded([&]() {
    gpdens::save_model(model->model, path);
    return GPDENS_OK;
  });
}

gpdens_status gpdens_model_load(const char* path, gpdens_model** out) {
  if (!path || !out) return fail(GPDENS_ERR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&]() {
    auto model = std::make_unique<gpdens_model>();
    model->model = gpdens::load_model(path);
    *out = model.release();
    return GPDENS_OK;
  });
}

void gpdens_model_free(gpdens_model* model) { delete model; }

gpdens_status gpdens_bench_run(const char* config_json,
                               char** out_summary_json) {
  if (!config_json || !out_summary_json) {
    return fail(GPDENS_ERR_INVALID_ARGUMENT, "null argument");
  }
  *out_summary_json = nullptr;
  return guarded([&]() {
    json cfg;
    try {
      cfg = json::parse(config_json);
    } catch (const json::exception& e) {
      return fail(GPDENS_ERR_PARSE, std::string("bench config: ") + e.what());
    }
    if (!cfg.is_object()) {
      return fail(GPDENS_ERR_PARSE, "bench config: expected an object");
    }

    gpdens::GridConfig grid;
    if (cfg.contains("features")) {
      const json& f = cfg.at("features");
      const int rows = static_cast<int>(f.size());
      const int cols = rows > 0 ? static_cast<int>(f[0].size()) : 0;
      grid.features.resize(rows, cols);
      for (int r = 0; r < rows; ++r) {
        if (static_cast<int>(f[r].size()) != cols) {
          return fail(GPDENS_ERR_PARSE, "bench config: ragged features");
        }
        for (int c = 0; c < cols; ++c) {
          grid.features(r, c) = f[r][c].get<double>();
        }
      }
      grid.dataset_name = cfg.value("name", "inline");
    } else if (cfg.contains("dataset")) {
      gpdens::Dataset ds =
          gpdens::parse_svmlight(cfg.at("dataset").get<std::string>());
      grid.features = std::move(ds.features);
      grid.dataset_name = cfg.value("name", ds.name);
    } else {
      return fail(GPDENS_ERR_INVALID_ARGUMENT,
                  "bench config: need 'dataset' or 'features'");
    }

    if (cfg.contains("methods")) {
      grid.methods = cfg.at("methods").get<std::vector<std::string>>();
    }
    if (cfg.contains("latent_dims")) {
      grid.latent_dims = cfg.at("latent_dims").get<std::vector<int>>();
    }
    if (cfg.contains("leave_outs")) {
      grid.leave_outs = cfg.at("leave_outs").get<std::vector<int>>();
    }
    if (cfg.contains("preproc")) {
      grid.preprocs.clear();
      for (const json& tag : cfg.at("preproc")) {
        grid.preprocs.push_back(
            gpdens::preproc_mode_from_tag(tag.get<std::string>()));
      }
    }
    if (!cfg.contains("n_tr")) {
      return fail(GPDENS_ERR_INVALID_ARGUMENT, "bench config: need 'n_tr'");
    }
    grid.n_tr_list = cfg.at("n_tr").get<std::vector<int>>();
    grid.n_splits = cfg.value("splits", 10);
    grid.seed = cfg.value("seed", 0ULL);
    grid.total_steps = cfg.value("steps", 600);
    grid.workers = cfg.value("workers", 1);
    grid.out_dir = cfg.value("out", "");

    const bool large = grid.features.cols() > 1000 || grid.features.rows() > 64;
    if (large && !cfg.value("allow_large", false)) {
      return fail(GPDENS_ERR_INVALID_ARGUMENT,
                  "dataset exceeds N=1000 or D=64; pass allow_large");
    }

    gpdens::GridResult result = gpdens::run_grid(grid);

    json summary;
    summary["dataset"] = grid.dataset_name;
    json records = json::array();
    for (const gpdens::RunRecord& rec : result.records) {
      records.push_back(record_to_json(rec));
    }
    summary["records"] = std::move(records);
    json best = json::array();
    for (const gpdens::MethodBest& mb : result.best) {
      json doc;
      doc["method"] = mb.method;
      doc["params"] = mb.params;
      doc["preproc"] = mb.preproc;
      doc["n_tr"] = mb.n_tr;
      doc["mean_raw"] = mb.mean_raw;
      doc["stderr_raw"] = mb.stderr_raw;
      best.push_back(std::move(doc));
    }
    summary["best"] = std::move(best);
    summary["csv"] = gpdens::grid_summary_csv(result);
    *out_summary_json = copy_string(summary.dump(2));
    return GPDENS_OK;
  });
}

gpdens_status gpdens_selftest(unsigned long long seed, int* out_passed,
                              char** out_report) {
  if (out_report) *out_report = nullptr;
  return guarded([&]() {
    gpdens::SelftestReport report = gpdens::run_selftest(seed);
    if (out_passed) *out_passed = report.all_passed() ? 1 : 0;
    if (out_report) *out_report = copy_string(gpdens::format_report(report));
    return GPDENS_OK;
  });
}

void gpdens_string_free(char* s) { delete[] s; }

}  // extern "C"
