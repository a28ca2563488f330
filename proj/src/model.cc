#include "prunekit/model.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "prunekit/error.h"
#include "prunekit/evalkit.h"
#include "prunekit/util.h"

namespace prunekit {
namespace {

double Dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// log(1 + exp(t)) without overflow.
double Softplus(double t) {
  return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

}  // namespace

double Sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

double LogSigmoid(double z) { return -Softplus(-z); }

LogisticObjective::LogisticObjective(const std::vector<IndexedVector> &rows,
                                     const std::vector<int> &labels,
                                     size_t dimension, double C)
    : rows_(rows), dimension_(dimension), inverse_c_(1.0 / C) {
  if (!(C > 0.0) || !std::isfinite(C)) throw InvalidInput("C must be a positive finite number");
  if (rows.size() != labels.size()) throw InvalidInput("rows and labels differ in length");
  signs_.reserve(labels.size());
  for (int y : labels) signs_.push_back(y == 1 ? 1.0 : -1.0);
}

// Sums are carried in long double so that, near the optimum, the objective
// resolves decreases smaller than one double ulp of its value.
double LogisticObjective::Value(std::span<const double> w) const {
  std::vector<double> unused(dimension_);
  return ValueAndGradient(w, unused);
}

double LogisticObjective::ValueAndGradient(std::span<const double> w,
                                           std::span<double> grad) const {
  long double f = 0.0L;
  for (double wk : w) f += static_cast<long double>(wk) * wk;
  f *= 0.5L * inverse_c_;
  std::vector<long double> g(dimension_);
  for (size_t k = 0; k < dimension_; ++k) g[k] = static_cast<long double>(inverse_c_) * w[k];
  for (size_t i = 0; i < rows_.size(); ++i) {
    long double z = 0.0L;
    for (const auto &[col, v] : rows_[i].entries) z += static_cast<long double>(w[col]) * v;
    const double margin = -signs_[i] * static_cast<double>(z);
    f += Softplus(margin);
    // d/dz softplus(-y z) = -y * sigmoid(-y z)
    const double coef = -signs_[i] * Sigmoid(margin);
    for (const auto &[col, v] : rows_[i].entries) g[col] += static_cast<long double>(coef) * v;
  }
  for (size_t k = 0; k < dimension_; ++k) grad[k] = static_cast<double>(g[k]);
  return static_cast<double>(f);
}

std::vector<double> MinimizeLbfgs(const LogisticObjective &objective,
                                  const TrainOptions &options,
                                  OptimizerTrace *trace) {
  const size_t n = objective.dimension();
  std::vector<double> x(n, 0.0), g(n), xn(n), gn(n), d(n);
  double f = objective.ValueAndGradient(x, g);
  OptimizerTrace local;
  OptimizerTrace &t = trace ? *trace : local;
  t = {};
  t.objective.push_back(f);

  struct Pair {
    std::vector<double> s, y;
    double rho;
  };
  std::deque<Pair> history;
  std::vector<double> alpha(options.history);

  for (int it = 0; it < options.max_iterations; ++it) {
    double gnorm = std::sqrt(Dot(g, g));
    t.gradient_norm = gnorm;
    if (gnorm < options.tolerance) {
      t.converged = true;
      break;
    }
    // Two-loop recursion: d = -H g.
    for (size_t k = 0; k < n; ++k) d[k] = -g[k];
    for (int k = static_cast<int>(history.size()) - 1; k >= 0; --k) {
      const Pair &p = history[k];
      alpha[k] = p.rho * Dot(p.s, d);
      for (size_t j = 0; j < n; ++j) d[j] -= alpha[k] * p.y[j];
    }
    if (!history.empty()) {
      const Pair &last = history.back();
      double gamma = Dot(last.s, last.y) / Dot(last.y, last.y);
      for (size_t j = 0; j < n; ++j) d[j] *= gamma;
    }
    for (size_t k = 0; k < history.size(); ++k) {
      const Pair &p = history[k];
      double beta = p.rho * Dot(p.y, d);
      for (size_t j = 0; j < n; ++j) d[j] += p.s[j] * (alpha[k] - beta);
    }
    double slope = Dot(g, d);
    if (!(slope < 0.0)) {
      history.clear();
      for (size_t k = 0; k < n; ++k) d[k] = -g[k];
      slope = -gnorm * gnorm;
    }

    double step = history.empty() ? std::min(1.0, 1.0 / gnorm) : 1.0;
    double fn = 0.0;
    bool accepted = false;
    while (step > 1e-20) {
      for (size_t k = 0; k < n; ++k) xn[k] = x[k] + step * d[k];
      fn = objective.ValueAndGradient(xn, gn);
      if (fn <= f + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      // Near the optimum the decrease drops below round-off in f; fall back
      // to requiring a smaller gradient without any increase in f.
      if (fn <= f && f - fn <= 1e-12 * std::abs(f) && Dot(gn, gn) < gnorm * gnorm) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // no further decrease representable

    Pair p{std::vector<double>(n), std::vector<double>(n), 0.0};
    for (size_t k = 0; k < n; ++k) {
      p.s[k] = xn[k] - x[k];
      p.y[k] = gn[k] - g[k];
    }
    double sy = Dot(p.s, p.y);
    if (sy > 1e-16) {
      p.rho = 1.0 / sy;
      history.push_back(std::move(p));
      if (static_cast<int>(history.size()) > options.history) history.pop_front();
    } else {
      history.clear();  // no curvature information: restart from -g
    }
    x.swap(xn);
    g.swap(gn);
    f = fn;
    ++t.iterations;
    t.objective.push_back(f);
  }
  t.gradient_norm = std::sqrt(Dot(g, g));
  if (t.gradient_norm < options.tolerance) t.converged = true;
  return x;
}

AcceptabilityModel::AcceptabilityModel(std::map<std::string, double> weights,
                                       ModelMetadata metadata)
    : weights_(std::move(weights)), metadata_(std::move(metadata)) {
  for (const auto &[name, w] : weights_) {
    if (!std::isfinite(w)) throw InvalidInput("non-finite weight for '" + name + "'");
  }
}

double AcceptabilityModel::Logit(const FeatureVector &x) const {
  double z = 0.0;
  for (const auto &[name, value] : x.values) {
    auto it = weights_.find(name);
    if (it != weights_.end()) z += it->second * value;
  }
  return z;
}

double AcceptabilityModel::Predict(const FeatureVector &x) const {
  return Sigmoid(Logit(x));
}

FeatureSpace AcceptabilityModel::Space() const {
  std::vector<std::string> names;
  names.reserve(weights_.size());
  for (const auto &kv : weights_) names.push_back(kv.first);
  return FeatureSpace(std::move(names));
}

std::string AcceptabilityModel::ToJson() const {
  nlohmann::json meta = {
      {"C", metadata_.C},
      {"tolerance", metadata_.tolerance},
      {"iterations", metadata_.iterations},
      {"objective", metadata_.objective},
      {"gradient_norm", metadata_.gradient_norm},
      {"converged", metadata_.converged},
      {"feature_space_hash", metadata_.feature_space_hash},
      {"variant", metadata_.variant},
      {"seed", metadata_.seed},
      {"config_hash", metadata_.config_hash},
      {"bias", false},
  };
  nlohmann::json w = nlohmann::json::object();
  for (const auto &[name, value] : weights_) w[name] = value;
  nlohmann::json j = {{"metadata", meta}, {"weights", w}};
  return j.dump(2);
}

AcceptabilityModel AcceptabilityModel::FromJson(const std::string &text,
                                                std::vector<std::string> *warnings,
                                                const std::string *expected_space_hash) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception &e) {
    throw FormatError(std::string("model file is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("weights") || !j["weights"].is_object()) {
    throw FormatError("model file lacks a 'weights' object");
  }
  std::map<std::string, double> weights;
  for (const auto &[name, value] : j["weights"].items()) {
    if (!value.is_number()) throw FormatError("weight for '" + name + "' is not a number");
    weights[name] = value.get<double>();
  }
  ModelMetadata meta;
  if (j.contains("metadata")) {
    const auto &m = j["metadata"];
    meta.C = m.value("C", 0.0);
    meta.tolerance = m.value("tolerance", 0.0);
    meta.iterations = m.value("iterations", 0);
    meta.objective = m.value("objective", 0.0);
    meta.gradient_norm = m.value("gradient_norm", 0.0);
    meta.converged = m.value("converged", false);
    meta.feature_space_hash = m.value("feature_space_hash", std::string());
    meta.variant = m.value("variant", std::string("full"));
    meta.seed = m.value("seed", uint64_t{0});
    meta.config_hash = m.value("config_hash", std::string());
  }
  AcceptabilityModel model(std::move(weights), std::move(meta));
  const std::string actual = model.Space().Hash();
  if (warnings) {
    if (!model.metadata_.feature_space_hash.empty() &&
        model.metadata_.feature_space_hash != actual) {
      warnings->push_back("stored feature-space hash " +
                          model.metadata_.feature_space_hash +
                          " does not match weights (" + actual + ")");
    }
    if (expected_space_hash && *expected_space_hash != actual) {
      warnings->push_back("feature-space hash " + actual + " differs from expected " +
                          *expected_space_hash);
    }
  }
  return model;
}

void AcceptabilityModel::Save(const std::string &path) const {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write model file " + path);
  out << ToJson() << "\n";
}

AcceptabilityModel AcceptabilityModel::Load(const std::string &path,
                                            std::vector<std::string> *warnings,
                                            const std::string *expected_space_hash) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open model file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return FromJson(buf.str(), warnings, expected_space_hash);
}

AcceptabilityModel Train(std::span<const LabeledExample> examples,
                         const TrainOptions &options, OptimizerTrace *trace) {
  if (examples.empty()) throw InvalidInput("no training examples");
  bool has_pos = false, has_neg = false;
  std::vector<FeatureVector> vectors;
  vectors.reserve(examples.size());
  for (const auto &e : examples) {
    if (e.label != 0 && e.label != 1) throw InvalidInput("labels must be 0 or 1");
    (e.label == 1 ? has_pos : has_neg) = true;
    for (const auto &[name, value] : e.x.values) {
      if (!std::isfinite(value)) {
        throw InvalidInput("non-finite value for feature '" + name + "'");
      }
    }
    vectors.push_back(e.x);
  }
  if (!has_pos || !has_neg) {
    throw DegenerateData("training data contains only one label");
  }
  FeatureSpace space = FeatureSpace::Build(vectors);

  std::vector<IndexedVector> rows;
  rows.reserve(examples.size());
  for (const auto &v : vectors) rows.push_back(Vectorize(space, v));
  std::vector<size_t> order(rows.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (examples[a].label != examples[b].label) return examples[a].label < examples[b].label;
    return rows[a].entries < rows[b].entries;
  });
  std::vector<IndexedVector> sorted_rows;
  std::vector<int> labels;
  sorted_rows.reserve(rows.size());
  for (size_t i : order) {
    sorted_rows.push_back(std::move(rows[i]));
    labels.push_back(examples[i].label);
  }

  LogisticObjective objective(sorted_rows, labels, space.size(), options.C);
  OptimizerTrace local;
  OptimizerTrace &t = trace ? *trace : local;
  std::vector<double> w = MinimizeLbfgs(objective, options, &t);

  std::map<std::string, double> weights;
  for (size_t k = 0; k < space.size(); ++k) weights[space.names()[k]] = w[k];
  ModelMetadata meta;
  meta.C = options.C;
  meta.tolerance = options.tolerance;
  meta.iterations = t.iterations;
  meta.objective = t.objective.back();
  meta.gradient_norm = t.gradient_norm;
  meta.converged = t.converged;
  meta.feature_space_hash = space.Hash();
  return AcceptabilityModel(std::move(weights), std::move(meta));
}

std::vector<double> DefaultCGrid() { return {1e-3, 1e-2, 1e-1, 1e0, 1e1, 1e2}; }

std::map<std::string, int> AssignFolds(std::span<const LabeledExample> examples,
                                       int folds, uint64_t seed) {
  std::vector<std::string> ids;
  for (const auto &e : examples) ids.push_back(e.pair_id);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  const uint64_t salt = MixSeed(seed, 0);
  std::vector<std::pair<uint64_t, std::string>> keyed;
  keyed.reserve(ids.size());
  for (auto &id : ids) keyed.emplace_back(Fnv1a64(id, salt), std::move(id));
  std::sort(keyed.begin(), keyed.end());
  std::map<std::string, int> fold_of;
  for (size_t i = 0; i < keyed.size(); ++i) {
    fold_of[keyed[i].second] = static_cast<int>(i % folds);
  }
  return fold_of;
}

CvResult CrossValidate(std::span<const LabeledExample> examples,
                       std::span<const double> grid, int folds, uint64_t seed,
                       const TrainOptions &base) {
  if (grid.empty()) throw InvalidInput("cross-validation grid is empty");
  if (folds < 2) throw InvalidInput("cross-validation needs at least 2 folds");
  long pos = 0, neg = 0;
  for (const auto &e : examples) (e.label == 1 ? pos : neg)++;
  if (pos < folds || neg < folds) {
    throw InvalidInput("cross-validation needs at least " + std::to_string(folds) +
                       " examples of each class");
  }
  std::map<std::string, int> fold_of = AssignFolds(examples, folds, seed);

  CvResult result;
  result.folds = folds;
  result.seed = seed;
  const size_t tasks = grid.size() * static_cast<size_t>(folds);
  std::vector<double> aucs(tasks, std::nan(""));
  ParallelFor(tasks, [&](size_t task) {
    const size_t ci = task / folds;
    const int fold = static_cast<int>(task % folds);
    std::vector<LabeledExample> train;
    std::vector<const LabeledExample *> held_out;
    for (const auto &e : examples) {
      if (fold_of.at(e.pair_id) == fold) {
        held_out.push_back(&e);
      } else {
        train.push_back(e);
      }
    }
    TrainOptions opts = base;
    opts.C = grid[ci];
    AcceptabilityModel m = Train(train, opts);
    std::vector<int> labels;
    std::vector<double> scores;
    for (const auto *e : held_out) {
      labels.push_back(e->label);
      scores.push_back(m.Predict(e->x));
    }
    try {
      aucs[task] = RocAuc(labels, scores);
    } catch (const UndefinedMetric &) {
      // single-class fold; excluded from the mean
    }
  });

  double best = -1.0;
  for (size_t ci = 0; ci < grid.size(); ++ci) {
    CvEntry entry;
    entry.C = grid[ci];
    double sum = 0.0;
    for (int f = 0; f < folds; ++f) {
      double a = aucs[ci * folds + f];
      entry.fold_aucs.push_back(a);
      if (!std::isnan(a)) sum += a;
    }
    size_t valid = std::count_if(entry.fold_aucs.begin(), entry.fold_aucs.end(),
                                 [](double a) { return !std::isnan(a); });
    if (valid == 0) throw UndefinedMetric("every cross-validation fold was single-class");
    entry.mean_auc = sum / valid;
    bool better = entry.mean_auc > best ||
                  (entry.mean_auc == best && entry.C < result.best_C);
    if (better) {
      best = entry.mean_auc;
      result.best_C = entry.C;
    }
    result.entries.push_back(std::move(entry));
  }
  return result;
}

}  // namespace prunekit
