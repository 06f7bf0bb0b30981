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

// Command-line front end; talks to the library exclusively through the C
// API in gpdens.h.

#include <cstdio>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gpdens.h"

namespace {

int report_failure(const std::string& context) {
  std::cerr << context << ": " << gpdens_last_error() << '\n';
  return 1;
}

struct DatasetHandle {
  gpdens_dataset* ptr = nullptr;
  ~DatasetHandle() { gpdens_dataset_free(ptr); }
};

struct ModelHandle {
  gpdens_model* ptr = nullptr;
  ~ModelHandle() { gpdens_model_free(ptr); }
};

struct FitArgs {
  std::string dataset;
  std::string method = "lpo-det";
  std::string preproc = "r";
  std::string out;
  int latent_dim = 2;
  int leave_out = 5;
  int steps = 600;
  unsigned long long seed = 0;
  int gm_clusters = 1;
  int mp_rank = 1;
  int mp_neighbors = 1;
};

int run_fit(const FitArgs& args) {
  DatasetHandle train;
  if (gpdens_dataset_load_svmlight(args.dataset.c_str(), &train.ptr) !=
      GPDENS_OK) {
    return report_failure("loading " + args.dataset);
  }
  std::cerr << "loaded " << args.dataset << ": D="
            << gpdens_dataset_dim(train.ptr) << " N="
            << gpdens_dataset_count(train.ptr) << '\n';

  gpdens_fit_options options;
  gpdens_fit_options_init(&options);
  options.method = args.method.c_str();
  options.preproc = args.preproc.c_str();
  options.latent_dim = args.latent_dim;
  options.leave_out = args.leave_out;
  options.total_steps = args.steps;
  options.seed = args.seed;
  options.gm_clusters = args.gm_clusters;
  options.mp_rank = args.mp_rank;
  options.mp_neighbors = args.mp_neighbors;

  ModelHandle model;
  if (gpdens_fit(train.ptr, &options, &model.ptr) != GPDENS_OK) {
    return report_failure("fit");
  }

  double transformed = 0.0, raw = 0.0;
  if (gpdens_model_mean_log_density(model.ptr, train.ptr, &transformed,
                                    &raw) != GPDENS_OK) {
    return report_failure("scoring training data");
  }
  std::printf("train mean log density: %.6f (preprocessed) %.6f (raw)\n",
              transformed, raw);

  if (!args.out.empty()) {
    if (gpdens_model_save(model.ptr, args.out.c_str()) != GPDENS_OK) {
      return report_failure("saving " + args.out);
    }
    std::cerr << "model written to " << args.out << '\n';
  }
  return 0;
}

int run_eval(const std::string& model_path, const std::string& dataset_path) {
  ModelHandle model;
  if (gpdens_model_load(model_path.c_str(), &model.ptr) != GPDENS_OK) {
    return report_failure("loading " + model_path);
  }
  DatasetHandle test;
  if (gpdens_dataset_load_svmlight(dataset_path.c_str(), &test.ptr) !=
      GPDENS_OK) {
    return report_failure("loading " + dataset_path);
  }
  double transformed = 0.0, raw = 0.0;
  if (gpdens_model_mean_log_density(model.ptr, test.ptr, &transformed,
                                    &raw) != GPDENS_OK) {
    return report_failure("eval");
  }
  std::printf("mean log density: %.6f (preprocessed) %.6f (raw)\n",
              transformed, raw);
  return 0;
}

struct BenchArgs {
  std::string dataset;
  std::string name;
  std::string out;
  std::vector<std::string> methods;
  std::vector<std::string> preprocs;
  std::vector<int> latent_dims;
  std::vector<int> leave_outs;
  std::vector<int> n_tr;
  int splits = 10;
  int steps = 600;
  int workers = 1;
  unsigned long long seed = 0;
  bool allow_large = false;
};

int run_bench(const BenchArgs& args) {
  nlohmann::json cfg;
  cfg["dataset"] = args.dataset;
  if (!args.name.empty()) cfg["name"] = args.name;
  if (!args.methods.empty()) cfg["methods"] = args.methods;
  if (!args.preprocs.empty()) cfg["preproc"] = args.preprocs;
  if (!args.latent_dims.empty()) cfg["latent_dims"] = args.latent_dims;
  if (!args.leave_outs.empty()) cfg["leave_outs"] = args.leave_outs;
  cfg["n_tr"] = args.n_tr;
  cfg["splits"] = args.splits;
  cfg["steps"] = args.steps;
  cfg["workers"] = args.workers;
  cfg["seed"] = args.seed;
  cfg["allow_large"] = args.allow_large;
  if (!args.out.empty()) cfg["out"] = args.out;

  char* summary_text = nullptr;
  const std::string cfg_text = cfg.dump();
  if (gpdens_bench_run(cfg_text.c_str(), &summary_text) != GPDENS_OK) {
    return report_failure("bench");
  }
  std::unique_ptr<char, void (*)(char*)> guard(summary_text,
                                               gpdens_string_free);

  nlohmann::json summary = nlohmann::json::parse(summary_text);
  if (args.out.empty()) {
    std::cout << summary.at("csv").get<std::string>();
  } else {
    std::cerr << "run records and summary written to " << args.out << '\n';
  }
  std::cout << "best per method (raw-space mean log density):\n";
  for (const auto& mb : summary.at("best")) {
    std::printf("  %-8s %-14s preproc=%s n_tr=%d  %.4f +- %.4f\n",
                mb.at("method").get<std::string>().c_str(),
                mb.at("params").get<std::string>().c_str(),
                mb.at("preproc").get<std::string>().c_str(),
                mb.at("n_tr").get<int>(), mb.at("mean_raw").get<double>(),
                mb.at("stderr_raw").get<double>());
  }
  return 0;
}

int run_selftest(unsigned long long seed) {
  int passed = 0;
  char* report = nullptr;
  if (gpdens_selftest(seed, &passed, &report) != GPDENS_OK) {
    return report_failure("selftest");
  }
  std::unique_ptr<char, void (*)(char*)> guard(report, gpdens_string_free);
  std::cout << report;
  return passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      std::string("gpdens ") + gpdens_version() +
      " - latent-variable density estimation and baseline benchmarks"};
  app.require_subcommand(1);

  FitArgs fit_args;
  CLI::App* fit = app.add_subcommand("fit", "fit one model on one dataset");
  fit->add_option("--dataset", fit_args.dataset, "svmlight data file")
      ->required();
  fit->add_option("--method", fit_args.method,
                  "lz|loo|lpo-det|lpo-rd|gm|kde|mp");
  fit->add_option("--d", fit_args.latent_dim, "latent dimensionality");
  fit->add_option("--P", fit_args.leave_out, "leave-out count");
  fit->add_option("--preproc", fit_args.preproc, "r|s|w");
  fit->add_option("--steps", fit_args.steps, "optimizer step budget");
  fit->add_option("--seed", fit_args.seed, "random seed");
  fit->add_option("--out", fit_args.out, "write the fitted model JSON here");
  fit->add_option("--gm-k", fit_args.gm_clusters, "gm: cluster count");
  fit->add_option("--mp-d", fit_args.mp_rank, "mp: principal directions");
  fit->add_option("--mp-r", fit_args.mp_neighbors, "mp: neighborhood size");

  std::string eval_model, eval_dataset;
  CLI::App* eval = app.add_subcommand("eval", "score a saved model");
  eval->add_option("--model", eval_model, "model JSON file")->required();
  eval->add_option("--dataset", eval_dataset, "svmlight data file")
      ->required();

  BenchArgs bench_args;
  CLI::App* bench = app.add_subcommand("bench", "run an experiment grid");
  bench->add_option("--dataset", bench_args.dataset, "svmlight data file")
      ->required();
  bench->add_option("--name", bench_args.name, "dataset label in reports");
  bench->add_option("--method", bench_args.methods,
                    "methods to run (repeatable)");
  bench->add_option("--d", bench_args.latent_dims,
                    "latent dimensions (repeatable)");
  bench->add_option("--P", bench_args.leave_outs,
                    "leave-out counts (repeatable)");
  bench->add_option("--preproc", bench_args.preprocs,
                    "preprocessing tags (repeatable)");
  bench->add_option("--n-tr", bench_args.n_tr,
                    "training-set sizes (repeatable)")
      ->required();
  bench->add_option("--splits", bench_args.splits, "splits per cell");
  bench->add_option("--steps", bench_args.steps, "optimizer step budget");
  bench->add_option("--workers", bench_args.workers, "concurrent workers");
  bench->add_option("--seed", bench_args.seed, "base seed");
  bench->add_option("--out", bench_args.out, "output directory");
  bench->add_flag("--allow-large", bench_args.allow_large,
                  "permit datasets beyond N=1000 or D=64");

  unsigned long long selftest_seed = 0;
  CLI::App* selftest =
      app.add_subcommand("selftest", "run the built-in oracle checks");
  selftest->add_option("--seed", selftest_seed, "random seed");

  CLI11_PARSE(app, argc, argv);

  if (fit->parsed()) return run_fit(fit_args);
  if (eval->parsed()) return run_eval(eval_model, eval_dataset);
  if (bench->parsed()) return run_bench(bench_args);
  if (selftest->parsed()) return run_selftest(selftest_seed);
  return 1;
}
