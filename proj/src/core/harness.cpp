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

#include "core/harness.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace gpdens {

namespace {

using nlohmann::json;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// Unbiased-enough bounded draw via 128-bit multiply; keeps the split
// protocol independent of the standard library's distribution internals.
int bounded(std::mt19937_64& rng, int n) {
  return static_cast<int>(
      (static_cast<unsigned __int128>(rng()) * static_cast<unsigned>(n)) >>
      64);
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j) {
  if (!j.is_array()) throw std::invalid_argument("model json: expected matrix");
  const int rows = static_cast<int>(j.size());
  int cols = rows > 0 ? static_cast<int>(j[0].size()) : 0;
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    if (static_cast<int>(j[r].size()) != cols) {
      throw std::invalid_argument("model json: ragged matrix");
    }
    for (int c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

json vector_to_json(const Vector& v) {
  json arr = json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Vector vector_from_json(const json& j) {
  if (!j.is_array()) throw std::invalid_argument("model json: expected vector");
  Vector v(static_cast<int>(j.size()));
  for (int i = 0; i < v.size(); ++i) v[i] = j[i].get<double>();
  return v;
}

}  // namespace

Dataset parse_svmlight_text(const std::string& text, const std::string& name) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  int max_index = 0;
  std::vector<std::vector<std::pair<int, double>>> columns;

  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream tokens(line);
    std::string token;
    std::vector<std::pair<int, double>> column;
    bool first = true;
    while (tokens >> token) {
      const auto colon = token.find(':');
      if (colon == std::string::npos) {
        if (!first) {
          throw ParseError("expected index:value, got '" + token + "'",
                           line_no);
        }
        first = false;  // leading label token, discarded
        continue;
      }
      first = false;
      const std::string index_part = token.substr(0, colon);
      const std::string value_part = token.substr(colon + 1);
      std::size_t used = 0;
      int index = 0;
      try {
        index = std::stoi(index_part, &used);
      } catch (const std::exception&) {
        throw ParseError("bad feature index '" + index_part + "'", line_no);
      }
      if (used != index_part.size()) {
        throw ParseError("bad feature index '" + index_part + "'", line_no);
      }
      if (index <= 0) {
        throw ParseError("feature index must be >= 1, got " +
                             std::to_string(index),
                         line_no);
      }
      double value = 0.0;
      try {
        value = std::stod(value_part, &used);
      } catch (const std::exception&) {
        throw ParseError("bad feature value '" + value_part + "'", line_no);
      }
      if (used != value_part.size()) {
        throw ParseError("bad feature value '" + value_part + "'", line_no);
      }
      if (!std::isfinite(value)) {
        throw ParseError("non-finite feature value '" + value_part + "'",
                         line_no);
      }
      max_index = std::max(max_index, index);
      column.emplace_back(index, value);
    }
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    columns.push_back(std::move(column));
  }

  Dataset ds;
  ds.name = name;
  ds.source_format = "svmlight";
  ds.features = Matrix::Zero(max_index, static_cast<int>(columns.size()));
  for (int j = 0; j < static_cast<int>(columns.size()); ++j) {
    for (const auto& [index, value] : columns[j]) {
      ds.features(index - 1, j) = value;
    }
  }
  return ds;
}

Dataset parse_svmlight(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'", 0);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  std::string name = std::filesystem::path(path).stem().string();
  return parse_svmlight_text(buffer.str(), name);
}

void write_svmlight(const Matrix& features, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write '" + path + "'");
  for (int j = 0; j < features.cols(); ++j) {
    for (int a = 0; a < features.rows(); ++a) {
      if (a > 0) out << ' ';
      out << (a + 1) << ':' << format_double(features(a, j));
    }
    out << '\n';
  }
  if (!out) throw std::invalid_argument("short write to '" + path + "'");
}

PreprocMode preproc_mode_from_tag(const std::string& tag) {
  if (tag == "r" || tag == "raw") return PreprocMode::kRaw;
  if (tag == "s" || tag == "scaled") return PreprocMode::kScaled;
  if (tag == "w" || tag == "whitened") return PreprocMode::kWhitened;
  throw std::invalid_argument("unknown preprocessing tag '" + tag + "'");
}

std::string preproc_tag(PreprocMode mode) {
  switch (mode) {
    case PreprocMode::kRaw:
      return "r";
    case PreprocMode::kScaled:
      return "s";
    case PreprocMode::kWhitened:
      return "w";
  }
  return "?";
}

Matrix Preprocessing::apply(const Matrix& z) const {
  return transform * (z.colwise() - shift);
}

Vector Preprocessing::apply(const Vector& z) const {
  return transform * (z - shift);
}

Preprocessing fit_preprocessing(const Matrix& train, PreprocMode mode) {
  const int dim = static_cast<int>(train.rows());
  const int n = static_cast<int>(train.cols());
  if (dim == 0 || n == 0) {
    throw std::invalid_argument("preprocess: empty training data");
  }

  Preprocessing pp;
  pp.mode = mode;
  pp.shift = Vector::Zero(dim);
  pp.transform = Matrix::Identity(dim, dim);
  pp.log_abs_det = 0.0;
  if (mode == PreprocMode::kRaw) return pp;

  pp.shift = train.rowwise().mean();
  Matrix centered = train.colwise() - pp.shift;

  if (mode == PreprocMode::kScaled) {
    for (int a = 0; a < dim; ++a) {
      const double var = centered.row(a).squaredNorm() / n;
      if (var > 0.0) {
        const double scale = 1.0 / std::sqrt(var);
        pp.transform(a, a) = scale;
        pp.log_abs_det += std::log(scale);
      } else {
        pp.flagged_dims.push_back(a);
      }
    }
    return pp;
  }

  Matrix cov = centered * centered.transpose() / n;
  Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
  const double max_eig = es.eigenvalues().maxCoeff();
  if (!(max_eig > 0.0)) {
    // All-constant data: whitening degenerates to centering.
    for (int a = 0; a < dim; ++a) pp.flagged_dims.push_back(a);
    pp.transform = es.eigenvectors().transpose();
    return pp;
  }
  const double floor = 1e-8 * max_eig;
  Vector inv_sqrt(dim);
  for (int a = 0; a < dim; ++a) {
    double lam = es.eigenvalues()[a];
    if (lam < floor) {
      lam = floor;
      pp.flagged_dims.push_back(a);
    }
    inv_sqrt[a] = 1.0 / std::sqrt(lam);
    pp.log_abs_det += std::log(inv_sqrt[a]);
  }
  pp.transform = inv_sqrt.asDiagonal() * es.eigenvectors().transpose();
  return pp;
}

std::vector<Split> make_splits(int n_total, int n_tr, int n_splits,
                               std::uint64_t seed) {
  if (n_tr < 1 || n_total < 2 || 2 * n_tr > n_total) {
    throw std::invalid_argument("make_splits: need 1 <= n_tr <= n_total/2");
  }
  if (n_splits < 1) throw std::invalid_argument("make_splits: n_splits >= 1");

  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<Split> splits(n_splits);
  std::vector<int> perm(n_total);
  for (Split& split : splits) {
    for (int i = 0; i < n_total; ++i) perm[i] = i;
    for (int i = n_total - 1; i > 0; --i) {
      std::swap(perm[i], perm[bounded(rng, i + 1)]);
    }
    split.train.assign(perm.begin(), perm.begin() + n_tr);
    split.test.assign(perm.begin() + n_tr, perm.end());
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
  }
  return splits;
}

int FittedModel::data_dim() const {
  if (preproc.transform.rows() > 0) {
    return static_cast<int>(preproc.transform.rows());
  }
  if (gplvm) return gplvm->data_dim();
  if (gm) return static_cast<int>(gm->means.rows());
  if (kde) return static_cast<int>(kde->centers.rows());
  if (mp) return static_cast<int>(mp->centers.rows());
  return 0;
}

double FittedModel::log_density_transformed(const Vector& z) const {
  if (mixture) return mixture_log_density(*mixture, z);
  if (gm) return log_density(*gm, z);
  if (kde) return log_density(*kde, z);
  if (mp) return log_density(*mp, z);
  throw std::invalid_argument("log_density: empty model");
}

double FittedModel::log_density_raw(const Vector& z) const {
  return log_density_transformed(preproc.apply(z)) + preproc.log_abs_det;
}

FittedModel fit_model(const Matrix& train_raw, const FitSpec& spec) {
  FittedModel model;
  model.method = spec.method;
  model.preproc = fit_preprocessing(train_raw, spec.preproc);
  Matrix transformed = model.preproc.apply(train_raw);

  if (spec.method == "lz" || spec.method == "loo" ||
      spec.method == "lpo-det" || spec.method == "lpo-rd") {
    TrainConfig cfg;
    cfg.latent_dim = spec.latent_dim;
    cfg.leave_out = spec.leave_out;
    cfg.total_steps = spec.total_steps;
    cfg.seed = spec.seed;
    cfg.stochastic = (spec.method == "lpo-rd");
    if (spec.method == "lz") {
      cfg.objective = ObjectiveKind::kLz;
    } else if (spec.method == "loo") {
      cfg.objective = ObjectiveKind::kLoo;
    } else {
      cfg.objective = ObjectiveKind::kLpo;
    }
    TrainTrace trace = train(transformed, cfg);
    model.gplvm = std::move(trace.final_state);
    model.mixture = project_mixture(*model.gplvm);
  } else if (spec.method == "gm") {
    model.gm = fit_gm(transformed, spec.gm_clusters, spec.seed);
  } else if (spec.method == "kde") {
    model.kde = fit_kde(transformed);
  } else if (spec.method == "mp") {
    model.mp = fit_mp(transformed, spec.mp_rank, spec.mp_neighbors);
  } else {
    throw std::invalid_argument("unknown method '" + spec.method + "'");
  }
  return model;
}

EvalResult evaluate_model(const FittedModel& model, const Matrix& test_raw) {
  if (static_cast<int>(test_raw.rows()) != model.data_dim()) {
    throw std::invalid_argument("evaluate_model: dimension mismatch");
  }
  if (test_raw.cols() == 0) {
    throw std::invalid_argument("evaluate_model: empty test set");
  }
  Matrix transformed = model.preproc.apply(test_raw);
  double sum = 0.0;
  for (int j = 0; j < transformed.cols(); ++j) {
    sum += model.log_density_transformed(transformed.col(j));
  }
  EvalResult result;
  result.count = static_cast<int>(test_raw.cols());
  result.transformed = sum / result.count;
  result.raw = result.transformed + model.preproc.log_abs_det;
  return result;
}

std::string model_to_json(const FittedModel& model) {
  json doc;
  doc["format"] = "gpdens-model";
  doc["version"] = 1;
  doc["method"] = model.method;

  json pp;
  pp["mode"] = preproc_tag(model.preproc.mode);
  pp["shift"] = vector_to_json(model.preproc.shift);
  pp["transform"] = matrix_to_json(model.preproc.transform);
  pp["log_abs_det"] = model.preproc.log_abs_det;
  pp["flagged_dims"] = model.preproc.flagged_dims;
  doc["preprocessing"] = std::move(pp);

  if (model.gplvm) {
    const ModelState& state = *model.gplvm;
    json g;
    g["latents"] = matrix_to_json(state.latents);
    json hyp;
    hyp["lengthscales_sq"] = vector_to_json(state.hyp.lengthscales_sq);
    hyp["signal_var"] = state.hyp.signal_var;
    hyp["noise_var"] = state.hyp.noise_var;
    if (state.hyp.latent_var.size() > 0) {
      hyp["latent_var"] = vector_to_json(state.hyp.latent_var);
    } else {
      hyp["latent_var"] = nullptr;
    }
    g["hyp"] = std::move(hyp);
    g["targets"] = matrix_to_json(state.targets);
    doc["gplvm"] = std::move(g);
  }
  if (model.gm) {
    json g;
    g["counts"] = vector_to_json(model.gm->counts);
    g["means"] = matrix_to_json(model.gm->means);
    json covs = json::array();
    for (const Matrix& c : model.gm->covs) covs.push_back(matrix_to_json(c));
    g["covs"] = std::move(covs);
    g["ridge"] = model.gm->ridge;
    doc["gm"] = std::move(g);
  }
  if (model.kde) {
    json k;
    k["centers"] = matrix_to_json(model.kde->centers);
    k["widths"] = vector_to_json(model.kde->widths);
    k["degenerate"] = model.kde->degenerate;
    doc["kde"] = std::move(k);
  }
  if (model.mp) {
    json m;
    m["centers"] = matrix_to_json(model.mp->centers);
    json factors = json::array();
    for (const Matrix& f : model.mp->factors) {
      factors.push_back(matrix_to_json(f));
    }
    m["factors"] = std::move(factors);
    m["ridge"] = model.mp->ridge;
    m["neighbor_count"] = model.mp->neighbor_count;
    m["rank"] = model.mp->rank;
    doc["mp"] = std::move(m);
  }
  return doc.dump(2);
}

FittedModel model_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("model json: ") + e.what());
  }
  if (!doc.is_object() || doc.value("format", "") != "gpdens-model") {
    throw std::invalid_argument("model json: not a gpdens model document");
  }
  if (doc.value("version", 0) != 1) {
    throw std::invalid_argument("model json: unsupported version");
  }

  FittedModel model;
  model.method = doc.value("method", "");

  const json& pp = doc.at("preprocessing");
  model.preproc.mode = preproc_mode_from_tag(pp.at("mode").get<std::string>());
  model.preproc.shift = vector_from_json(pp.at("shift"));
  model.preproc.transform = matrix_from_json(pp.at("transform"));
  model.preproc.log_abs_det = pp.at("log_abs_det").get<double>();
  model.preproc.flagged_dims =
      pp.value("flagged_dims", std::vector<int>());

  if (doc.contains("gplvm")) {
    const json& g = doc.at("gplvm");
    ModelState state;
    state.latents = matrix_from_json(g.at("latents"));
    state.targets = matrix_from_json(g.at("targets"));
    const json& hyp = g.at("hyp");
    state.hyp.lengthscales_sq = vector_from_json(hyp.at("lengthscales_sq"));
    state.hyp.signal_var = hyp.at("signal_var").get<double>();
    state.hyp.noise_var = hyp.at("noise_var").get<double>();
    if (!hyp.at("latent_var").is_null()) {
      state.hyp.latent_var = vector_from_json(hyp.at("latent_var"));
    }
    state.validate();
    model.gplvm = std::move(state);
    model.mixture = project_mixture(*model.gplvm);
  }
  if (doc.contains("gm")) {
    GaussianMixtureModel gm;
    gm.counts = vector_from_json(doc.at("gm").at("counts"));
    gm.means = matrix_from_json(doc.at("gm").at("means"));
    for (const json& c : doc.at("gm").at("covs")) {
      gm.covs.push_back(matrix_from_json(c));
    }
    gm.ridge = doc.at("gm").at("ridge").get<double>();
    gm.finalize();
    model.gm = std::move(gm);
  }
  if (doc.contains("kde")) {
    KdeModel kde;
    kde.centers = matrix_from_json(doc.at("kde").at("centers"));
    kde.widths = vector_from_json(doc.at("kde").at("widths"));
    kde.degenerate = doc.at("kde").value("degenerate", false);
    model.kde = std::move(kde);
  }
  if (doc.contains("mp")) {
    ManifoldParzenModel mp;
    mp.centers = matrix_from_json(doc.at("mp").at("centers"));
    for (const json& f : doc.at("mp").at("factors")) {
      mp.factors.push_back(matrix_from_json(f));
    }
    mp.ridge = doc.at("mp").at("ridge").get<double>();
    mp.neighbor_count = doc.at("mp").value("neighbor_count", 0);
    mp.rank = doc.at("mp").value("rank", 0);
    mp.finalize();
    model.mp = std::move(mp);
  }
  return model;
}

void save_model(const FittedModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write '" + path + "'");
  out << model_to_json(model) << '\n';
  if (!out) throw std::invalid_argument("short write to '" + path + "'");
}

FittedModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return model_from_json(buffer.str());
}

namespace {

struct GridJob {
  std::string method;
  std::string params;
  PreprocMode preproc = PreprocMode::kRaw;
  int n_tr = 0;
  int split = 0;
  std::uint64_t split_seed = 0;
  FitSpec spec;
};

std::string cell_key(const GridJob& job) {
  return job.method + "|" + job.params + "|" + preproc_tag(job.preproc) +
         "|ntr=" + std::to_string(job.n_tr);
}

// Unique grid values ceil(base * pct / 100) clamped to [lo, hi].
std::vector<int> percent_grid(int base, const std::vector<int>& pcts, int lo,
                              int hi) {
  std::vector<int> out;
  for (int pct : pcts) {
    int v = (base * pct + 99) / 100;
    v = std::max(lo, std::min(hi, v));
    if (v >= lo && v <= hi &&
        std::find(out.begin(), out.end(), v) == out.end()) {
      out.push_back(v);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

void append_cells(const GridConfig& config, const std::string& method,
                  int n_tr, std::uint64_t split_seed,
                  std::vector<GridJob>* jobs) {
  const int dim = static_cast<int>(config.features.rows());
  std::vector<std::pair<std::string, FitSpec>> cells;

  auto base_spec = [&](const std::string& m) {
    FitSpec spec;
    spec.method = m;
    spec.total_steps = config.total_steps;
    return spec;
  };

  if (method == "lz" || method == "loo") {
    for (int d : config.latent_dims) {
      FitSpec spec = base_spec(method);
      spec.latent_dim = d;
      cells.emplace_back("d=" + std::to_string(d), spec);
    }
  } else if (method == "lpo-det" || method == "lpo-rd") {
    for (int d : config.latent_dims) {
      for (int p : config.leave_outs) {
        if (p > n_tr - 1) continue;
        FitSpec spec = base_spec(method);
        spec.latent_dim = d;
        spec.leave_out = p;
        cells.emplace_back("d=" + std::to_string(d) + ";P=" + std::to_string(p),
                           spec);
      }
    }
  } else if (method == "gm") {
    for (int k = 1; k <= 13 && k <= n_tr; ++k) {
      FitSpec spec = base_spec(method);
      spec.gm_clusters = k;
      cells.emplace_back("K=" + std::to_string(k), spec);
    }
  } else if (method == "kde") {
    cells.emplace_back("-", base_spec(method));
  } else if (method == "mp") {
    const std::vector<int> ranks =
        percent_grid(dim, {5, 12, 19, 26, 33, 40}, 1, dim - 1);
    const std::vector<int> neighbors =
        percent_grid(n_tr, {5, 10, 15, 20, 25, 30}, 1, n_tr - 1);
    for (int d : ranks) {
      for (int r : neighbors) {
        FitSpec spec = base_spec(method);
        spec.mp_rank = d;
        spec.mp_neighbors = r;
        cells.emplace_back("d=" + std::to_string(d) + ";r=" + std::to_string(r),
                           spec);
      }
    }
  } else {
    throw std::invalid_argument("run_grid: unknown method '" + method + "'");
  }

  for (auto& [params, spec] : cells) {
    for (PreprocMode preproc : config.preprocs) {
      for (int s = 0; s < config.n_splits; ++s) {
        GridJob job;
        job.method = method;
        job.params = params;
        job.preproc = preproc;
        job.n_tr = n_tr;
        job.split = s;
        job.split_seed = split_seed;
        job.spec = spec;
        job.spec.preproc = preproc;
        job.spec.seed = fnv1a64("run|" + config.dataset_name + "|" +
                                cell_key(job) + "|split=" +
                                std::to_string(s)) ^
                        config.seed;
        jobs->push_back(std::move(job));
      }
    }
  }
}

Matrix select_columns(const Matrix& m, const std::vector<int>& idx) {
  Matrix out(m.rows(), static_cast<int>(idx.size()));
  for (int j = 0; j < out.cols(); ++j) out.col(j) = m.col(idx[j]);
  return out;
}

}  // namespace

GridResult run_grid(const GridConfig& config) {
  const int n_total = static_cast<int>(config.features.cols());
  if (n_total < 2) throw std::invalid_argument("run_grid: empty dataset");
  if (config.n_tr_list.empty()) {
    throw std::invalid_argument("run_grid: empty n_tr list");
  }

  std::vector<GridJob> jobs;
  std::vector<std::vector<Split>> splits_by_ntr(config.n_tr_list.size());
  for (std::size_t t = 0; t < config.n_tr_list.size(); ++t) {
    const int n_tr = config.n_tr_list[t];
    const std::uint64_t split_seed =
        fnv1a64("split|" + config.dataset_name + "|ntr=" +
                std::to_string(n_tr)) ^
        config.seed;
    splits_by_ntr[t] = make_splits(n_total, n_tr, config.n_splits, split_seed);
    for (const std::string& method : config.methods) {
      append_cells(config, method, n_tr, split_seed, &jobs);
    }
  }

  GridResult result;
  result.records.resize(jobs.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      const GridJob& job = jobs[i];
      RunRecord& rec = result.records[i];
      rec.dataset = config.dataset_name;
      rec.method = job.method;
      rec.params = job.params;
      rec.n_tr = job.n_tr;
      rec.split = job.split;
      rec.preproc = preproc_tag(job.preproc);
      rec.seed = job.spec.seed;
      const std::size_t t =
          std::find(config.n_tr_list.begin(), config.n_tr_list.end(),
                    job.n_tr) -
          config.n_tr_list.begin();
      const Split& split = splits_by_ntr[t][job.split];
      try {
        Matrix train_data = select_columns(config.features, split.train);
        Matrix test_data = select_columns(config.features, split.test);
        FittedModel model = fit_model(train_data, job.spec);
        EvalResult eval = evaluate_model(model, test_data);
        rec.log_density = eval.transformed;
        rec.log_density_raw_space = eval.raw;
        rec.test_count = eval.count;
      } catch (const std::exception& e) {
        rec.failed = true;
        rec.error = e.what();
        rec.log_density = std::numeric_limits<double>::quiet_NaN();
        rec.log_density_raw_space = rec.log_density;
      }
    }
  };

  const int worker_count =
      std::max(1, std::min<int>(config.workers,
                                static_cast<int>(jobs.size())));
  if (worker_count == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(worker_count);
    for (int w = 0; w < worker_count; ++w) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }

  // Aggregate consecutive records of the same cell (jobs are emitted with
  // splits innermost).
  for (std::size_t i = 0; i < jobs.size();) {
    std::size_t j = i;
    while (j < jobs.size() && cell_key(jobs[j]) == cell_key(jobs[i])) ++j;
    ExperimentResult agg;
    agg.dataset = config.dataset_name;
    agg.method = jobs[i].method;
    agg.params = jobs[i].params;
    agg.preproc = preproc_tag(jobs[i].preproc);
    agg.n_tr = jobs[i].n_tr;
    agg.split_seed = jobs[i].split_seed;
    double sum = 0.0, sum_raw = 0.0, pooled = 0.0;
    int successes = 0, pooled_count = 0;
    for (std::size_t k = i; k < j; ++k) {
      const RunRecord& rec = result.records[k];
      agg.run_seeds.push_back(rec.seed);
      agg.values.push_back(rec.log_density);
      agg.values_raw.push_back(rec.log_density_raw_space);
      if (rec.failed) {
        ++agg.failures;
        continue;
      }
      sum += rec.log_density;
      sum_raw += rec.log_density_raw_space;
      pooled += rec.log_density_raw_space * rec.test_count;
      pooled_count += rec.test_count;
      ++successes;
    }
    if (successes > 0) {
      agg.mean = sum / successes;
      agg.mean_raw = sum_raw / successes;
      agg.pooled_raw = pooled / pooled_count;
      if (successes > 1) {
        double ss = 0.0;
        for (std::size_t k = i; k < j; ++k) {
          if (result.records[k].failed) continue;
          const double d = result.records[k].log_density_raw_space -
                           agg.mean_raw;
          ss += d * d;
        }
        agg.stderr_raw = std::sqrt(ss / (successes - 1)) /
                         std::sqrt(static_cast<double>(successes));
      }
    } else {
      agg.mean = std::numeric_limits<double>::quiet_NaN();
      agg.mean_raw = agg.mean;
      agg.pooled_raw = agg.mean;
    }
    result.results.push_back(std::move(agg));
    i = j;
  }

  for (const std::string& method : config.methods) {
    const ExperimentResult* best = nullptr;
    for (const ExperimentResult& er : result.results) {
      if (er.method != method || er.failures == config.n_splits) continue;
      if (!std::isfinite(er.mean_raw)) continue;
      if (!best || er.mean_raw > best->mean_raw) best = &er;
    }
    if (!best) continue;
    MethodBest mb;
    mb.method = best->method;
    mb.params = best->params;
    mb.preproc = best->preproc;
    mb.n_tr = best->n_tr;
    mb.mean_raw = best->mean_raw;
    mb.stderr_raw = best->stderr_raw;
    result.best.push_back(std::move(mb));
  }

  if (!config.out_dir.empty()) {
    namespace fs = std::filesystem;
    fs::create_directories(config.out_dir);
    for (std::size_t i = 0; i < result.records.size(); ++i) {
      const RunRecord& rec = result.records[i];
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
      char name[32];
      std::snprintf(name, sizeof(name), "run_%06zu.json", i);
      std::ofstream out(fs::path(config.out_dir) / name);
      out << doc.dump(2) << '\n';
    }
    {
      std::ofstream out(fs::path(config.out_dir) / "summary.csv");
      out << grid_summary_csv(result);
    }
    {
      json docs = json::array();
      for (const ExperimentResult& er : result.results) {
        json doc;
        doc["dataset"] = er.dataset;
        doc["method"] = er.method;
        doc["params"] = er.params;
        doc["preproc"] = er.preproc;
        doc["n_tr"] = er.n_tr;
        doc["split_seed"] = er.split_seed;
        doc["run_seeds"] = er.run_seeds;
        doc["values"] = er.values;
        doc["values_raw"] = er.values_raw;
        doc["mean"] = er.mean;
        doc["mean_raw"] = er.mean_raw;
        doc["stderr_raw"] = er.stderr_raw;
        doc["pooled_raw"] = er.pooled_raw;
        doc["failures"] = er.failures;
        docs.push_back(std::move(doc));
      }
      std::ofstream out(fs::path(config.out_dir) / "results.json");
      out << docs.dump(2) << '\n';
    }
    {
      json docs = json::array();
      for (const MethodBest& mb : result.best) {
        json doc;
        doc["method"] = mb.method;
        doc["params"] = mb.params;
        doc["preproc"] = mb.preproc;
        doc["n_tr"] = mb.n_tr;
        doc["mean_raw"] = mb.mean_raw;
        doc["stderr_raw"] = mb.stderr_raw;
        docs.push_back(std::move(doc));
      }
      std::ofstream out(fs::path(config.out_dir) / "best.json");
      out << docs.dump(2) << '\n';
    }
  }

  return result;
}

std::string grid_summary_csv(const GridResult& result) {
  std::ostringstream out;
  out << "dataset,method,params,n_tr,split,preproc,log_density,"
         "log_density_raw_space\n";
  for (const RunRecord& rec : result.records) {
    out << rec.dataset << ',' << rec.method << ',' << rec.params << ','
        << rec.n_tr << ',' << rec.split << ',' << rec.preproc << ','
        << format_double(rec.log_density) << ','
        << format_double(rec.log_density_raw_space) << '\n';
  }
  return out.str();
}

}  // namespace gpdens
