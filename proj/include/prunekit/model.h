#ifndef PRUNEKIT_MODEL_H_
#define PRUNEKIT_MODEL_H_

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prunekit/features.h"

namespace prunekit {

// One binary worker response for an (s, c) pair.
struct Judgment {
  std::string pair_id;
  std::string worker_id;
  int label = 0;  // 1 = yes, the sentence may be shortened this way
};

struct LabeledExample {
  FeatureVector x;
  int label = 0;
  std::string pair_id;  // fold assignment key
};

struct TrainOptions {
  double C = 0.1;              // inverse regularization strength
  double tolerance = 1e-6;     // on the gradient's Euclidean norm
  int max_iterations = 1000;
  int history = 10;            // L-BFGS memory
};

struct ModelMetadata {
  double C = 0.0;
  double tolerance = 0.0;
  int iterations = 0;
  double objective = 0.0;
  double gradient_norm = 0.0;
  bool converged = false;
  std::string feature_space_hash;
  std::string variant = "full";
  uint64_t seed = 0;
  std::string config_hash;
};

// Regularized logistic loss over sparse examples, without an intercept:
//   f(w) = (1 / C) * 0.5 * |w|^2 + sum_i log(1 + exp(-y_i w.x_i)),  y in {-1, 1}
class LogisticObjective {
 public:
  LogisticObjective(const std::vector<IndexedVector> &rows,
                    const std::vector<int> &labels, size_t dimension, double C);

  size_t dimension() const { return dimension_; }
  double Value(std::span<const double> w) const;
  double ValueAndGradient(std::span<const double> w, std::span<double> grad) const;

 private:
  std::vector<IndexedVector> rows_;
  std::vector<double> signs_;
  size_t dimension_;
  double inverse_c_;
};

struct OptimizerTrace {
  std::vector<double> objective;  // per accepted iterate, starting at w = 0
  double gradient_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Deterministic L-BFGS with backtracking (Armijo) line search; the objective
// never increases between accepted iterates.
std::vector<double> MinimizeLbfgs(const LogisticObjective &objective,
                                  const TrainOptions &options,
                                  OptimizerTrace *trace = nullptr);

double Sigmoid(double z);
// log sigmoid(z), finite for any finite z.
double LogSigmoid(double z);

// p(Y = 1 | W, x) = sigmoid(W . x). There is no bias weight. Immutable once
// built; safe to share across threads.
class AcceptabilityModel {
 public:
  AcceptabilityModel() = default;
  AcceptabilityModel(std::map<std::string, double> weights, ModelMetadata metadata);

  double Logit(const FeatureVector &x) const;
  double Predict(const FeatureVector &x) const;

  const std::map<std::string, double> &weights() const { return weights_; }
  const ModelMetadata &metadata() const { return metadata_; }
  FeatureSpace Space() const;

  // {"metadata": {...}, "weights": {name: weight}}; keys sorted.
  std::string ToJson() const;
  // A feature-space hash that disagrees with `expected_space_hash` is
  // reported through `warnings`, not thrown.
  static AcceptabilityModel FromJson(const std::string &text,
                                     std::vector<std::string> *warnings = nullptr,
                                     const std::string *expected_space_hash = nullptr);
  void Save(const std::string &path) const;
  static AcceptabilityModel Load(const std::string &path,
                                 std::vector<std::string> *warnings = nullptr,
                                 const std::string *expected_space_hash = nullptr);

 private:
  std::map<std::string, double> weights_;
  ModelMetadata metadata_;
};

// Fits the model. Examples are put in a canonical order first, so the result
// does not depend on input order.
AcceptabilityModel Train(std::span<const LabeledExample> examples,
                         const TrainOptions &options = {},
                         OptimizerTrace *trace = nullptr);

struct CvEntry {
  double C = 0.0;
  double mean_auc = 0.0;
  std::vector<double> fold_aucs;
};

struct CvResult {
  double best_C = 0.0;
  std::vector<CvEntry> entries;  // in grid order
  int folds = 0;
  uint64_t seed = 0;
};

// 10^j for j in -3..2.
std::vector<double> DefaultCGrid();

// Whole pairs go to one fold. Pairs are ordered by a seeded hash of their id
// and dealt round-robin. Best C maximizes mean AUC; ties go to the smaller C.
CvResult CrossValidate(std::span<const LabeledExample> examples,
                       std::span<const double> grid, int folds = 5,
                       uint64_t seed = 1, const TrainOptions &base = {});

// pair_id -> fold index, as used by CrossValidate.
std::map<std::string, int> AssignFolds(std::span<const LabeledExample> examples,
                                       int folds, uint64_t seed);

}  // namespace prunekit

#endif  // PRUNEKIT_MODEL_H_
