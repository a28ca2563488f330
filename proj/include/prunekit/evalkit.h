#ifndef PRUNEKIT_EVALKIT_H_
#define PRUNEKIT_EVALKIT_H_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace prunekit {

// One judgment with a model score. Classification metrics read `score` as a
// probability in [0, 1]; ranking metrics accept any real score.
struct ScoredJudgment {
  std::string pair_id;
  std::string worker_id;
  int label = 0;
  double score = 0.0;
};

// Fraction of items with (score >= t) == label. Scores equal to t count as
// positive predictions.
double Accuracy(std::span<const ScoredJudgment> items, double threshold = 0.5);

// Probability that a random positive outscores a random negative, ties
// counted one half. Computed from midranks in O(n log n).
double RocAuc(std::span<const ScoredJudgment> items);
double RocAuc(std::span<const int> labels, std::span<const double> scores);

struct BootstrapResult {
  double auc_a = 0.0;
  double auc_b = 0.0;
  double delta = 0.0;        // auc_a - auc_b on the full sample
  double p_value = 1.0;      // fraction of resamples with auc_a <= auc_b
  double mean_delta = 0.0;
  double std_delta = 0.0;
  double ci_low = 0.0;       // 2.5th percentile of resampled deltas
  double ci_high = 0.0;      // 97.5th percentile
  int resamples = 0;         // resamples with both classes present
  int skipped = 0;           // single-class resamples
  uint64_t seed = 0;
};

// Paired bootstrap over judgment rows. `a` and `b` must hold the same
// (pair_id, worker_id, label) rows, in any order.
BootstrapResult BootstrapAucDelta(std::span<const ScoredJudgment> a,
                                  std::span<const ScoredJudgment> b,
                                  int resamples = 10000, uint64_t seed = 1,
                                  unsigned threads = 0);

// pair_id -> binary ratings from however many raters judged the pair.
using RatingTable = std::map<std::string, std::vector<int>>;

struct KappaResult {
  double kappa = 0.0;
  double observed = 0.0;   // mean pairwise agreement over multi-rater items
  double expected = 0.0;   // sum of squared category proportions
  size_t items = 0;        // multi-rater items used
  size_t skipped = 0;      // single-rater items ignored
};

// Fleiss' kappa with per-item pairwise agreement, so rater counts may vary.
// Items with one rating are ignored, including for the category proportions.
KappaResult FleissKappa(const RatingTable &table);

// Each row becomes a two-rater item: the worker's label and the model's
// thresholded prediction.
KappaResult ModelAsRaterKappa(std::span<const ScoredJudgment> items,
                              double threshold = 0.5);

// Mean pairwise agreement over items with at least two ratings.
double WorkerWorkerAgreement(const RatingTable &table);

struct Rate {
  long yes = 0;
  long total = 0;
  double rate() const { return total ? static_cast<double>(yes) / total : 0.0; }
};

// deprel -> endorsement rate, from (deprel, label) observations.
std::map<std::string, Rate> PerDependencyRates(
    std::span<const std::pair<std::string, int>> observations);

struct WorkerRates {
  std::map<std::string, Rate> per_worker;
  double mean = 0.0;
  double std = 0.0;  // population
};
WorkerRates WorkerRateDistribution(std::span<const ScoredJudgment> judgments);

}  // namespace prunekit

#endif  // PRUNEKIT_EVALKIT_H_
