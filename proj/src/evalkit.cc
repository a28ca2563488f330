#include "prunekit/evalkit.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <tuple>

#include "prunekit/error.h"
#include "prunekit/util.h"

namespace prunekit {

double Accuracy(std::span<const ScoredJudgment> items, double threshold) {
  if (items.empty()) throw InvalidInput("accuracy of an empty judgment set");
  size_t correct = 0;
  for (const auto &j : items) {
    int predicted = j.score >= threshold ? 1 : 0;
    if (predicted == j.label) ++correct;
  }
  return static_cast<double>(correct) / items.size();
}

double RocAuc(std::span<const int> labels, std::span<const double> scores) {
  if (labels.size() != scores.size()) {
    throw InvalidInput("labels and scores differ in length");
  }
  const size_t n = labels.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (double s : scores) {
    if (std::isnan(s)) throw InvalidInput("NaN score in AUC input");
  }
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });
  double positives = 0.0, rank_sum = 0.0;
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    // Ranks i+1..j share their midrank.
    double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) {
        rank_sum += midrank;
        positives += 1.0;
      }
    }
    i = j;
  }
  double negatives = static_cast<double>(n) - positives;
  if (positives == 0.0 || negatives == 0.0) {
    throw UndefinedMetric("ROC AUC needs both positive and negative labels");
  }
  return (rank_sum - positives * (positives + 1.0) / 2.0) / (positives * negatives);
}

double RocAuc(std::span<const ScoredJudgment> items) {
  std::vector<int> labels;
  std::vector<double> scores;
  labels.reserve(items.size());
  scores.reserve(items.size());
  for (const auto &j : items) {
    labels.push_back(j.label);
    scores.push_back(j.score);
  }
  return RocAuc(labels, scores);
}

BootstrapResult BootstrapAucDelta(std::span<const ScoredJudgment> a,
                                  std::span<const ScoredJudgment> b,
                                  int resamples, uint64_t seed, unsigned threads) {
  if (a.size() != b.size() || a.empty()) {
    throw InvalidInput("bootstrap inputs must be non-empty and of equal size");
  }
  if (resamples < 1) throw InvalidInput("bootstrap needs at least one resample");
  const size_t n = a.size();
  auto key_order = [n](std::span<const ScoredJudgment> items) {
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](size_t x, size_t y) {
      return std::tie(items[x].pair_id, items[x].worker_id, items[x].label) <
             std::tie(items[y].pair_id, items[y].worker_id, items[y].label);
    });
    return idx;
  };
  std::vector<size_t> ia = key_order(a), ib = key_order(b);
  std::vector<int> labels(n);
  std::vector<double> sa(n), sb(n);
  for (size_t i = 0; i < n; ++i) {
    const auto &x = a[ia[i]];
    const auto &y = b[ib[i]];
    if (x.pair_id != y.pair_id || x.worker_id != y.worker_id || x.label != y.label) {
      throw InvalidInput("bootstrap inputs are not aligned: (" + x.pair_id + ", " +
                         x.worker_id + ") vs (" + y.pair_id + ", " + y.worker_id + ")");
    }
    labels[i] = x.label;
    sa[i] = x.score;
    sb[i] = y.score;
  }

  BootstrapResult out;
  out.seed = seed;
  out.auc_a = RocAuc(labels, sa);
  out.auc_b = RocAuc(labels, sb);
  out.delta = out.auc_a - out.auc_b;

  std::vector<double> deltas(resamples, std::nan(""));
  std::vector<char> not_better(resamples, 0);
  ParallelFor(
      static_cast<size_t>(resamples),
      [&](size_t r) {
        std::mt19937_64 rng(MixSeed(seed, r));
        std::vector<int> rl(n);
        std::vector<double> ra(n), rb(n);
        for (size_t i = 0; i < n; ++i) {
          size_t k = std::min(n - 1, static_cast<size_t>(UniformUnit(rng) * n));
          rl[i] = labels[k];
          ra[i] = sa[k];
          rb[i] = sb[k];
        }
        try {
          double da = RocAuc(rl, ra), db = RocAuc(rl, rb);
          deltas[r] = da - db;
          not_better[r] = da <= db ? 1 : 0;
        } catch (const UndefinedMetric &) {
          // single-class resample; left as NaN
        }
      },
      threads);

  std::vector<double> valid;
  long count_not_better = 0;
  for (int r = 0; r < resamples; ++r) {
    if (std::isnan(deltas[r])) {
      ++out.skipped;
      continue;
    }
    valid.push_back(deltas[r]);
    count_not_better += not_better[r];
  }
  out.resamples = static_cast<int>(valid.size());
  if (valid.empty()) throw UndefinedMetric("every bootstrap resample was single-class");
  out.p_value = static_cast<double>(count_not_better) / valid.size();
  MeanStd ms = Summarize(valid);
  out.mean_delta = ms.mean;
  out.std_delta = ms.std;
  std::sort(valid.begin(), valid.end());
  auto quantile = [&](double q) {
    size_t k = static_cast<size_t>(q * (valid.size() - 1) + 0.5);
    return valid[std::min(k, valid.size() - 1)];
  };
  out.ci_low = quantile(0.025);
  out.ci_high = quantile(0.975);
  return out;
}

KappaResult FleissKappa(const RatingTable &table) {
  KappaResult out;
  std::map<int, double> category_totals;
  double total_ratings = 0.0;
  double agreement_sum = 0.0;
  for (const auto &[item, ratings] : table) {
    if (ratings.size() < 2) {
      ++out.skipped;
      continue;
    }
    std::map<int, double> counts;
    for (int r : ratings) counts[r] += 1.0;
    const double n = static_cast<double>(ratings.size());
    double agreeing_pairs = 0.0;
    for (const auto &[category, c] : counts) {
      agreeing_pairs += c * (c - 1.0);
      category_totals[category] += c;
    }
    agreement_sum += agreeing_pairs / (n * (n - 1.0));
    total_ratings += n;
    ++out.items;
  }
  if (out.items == 0) throw UndefinedMetric("Fleiss kappa needs an item with two or more ratings");
  out.observed = agreement_sum / static_cast<double>(out.items);
  for (const auto &[category, c] : category_totals) {
    double p = c / total_ratings;
    out.expected += p * p;
  }
  if (out.expected >= 1.0) {
    throw UndefinedMetric("Fleiss kappa undefined: all ratings fall in one category");
  }
  out.kappa = (out.observed - out.expected) / (1.0 - out.expected);
  return out;
}

KappaResult ModelAsRaterKappa(std::span<const ScoredJudgment> items, double threshold) {
  if (items.empty()) throw InvalidInput("model-as-rater kappa of an empty judgment set");
  RatingTable table;
  for (size_t i = 0; i < items.size(); ++i) {
    const auto &j = items[i];
    std::string key = j.pair_id + '\x1f' + j.worker_id + '\x1f' + std::to_string(i);
    table[key] = {j.label, j.score >= threshold ? 1 : 0};
  }
  return FleissKappa(table);
}

double WorkerWorkerAgreement(const RatingTable &table) {
  double sum = 0.0;
  size_t items = 0;
  for (const auto &[item, ratings] : table) {
    if (ratings.size() < 2) continue;
    std::map<int, double> counts;
    for (int r : ratings) counts[r] += 1.0;
    const double n = static_cast<double>(ratings.size());
    double agreeing = 0.0;
    for (const auto &kv : counts) agreeing += kv.second * (kv.second - 1.0);
    sum += agreeing / (n * (n - 1.0));
    ++items;
  }
  if (items == 0) throw UndefinedMetric("agreement needs an item with two or more ratings");
  return sum / static_cast<double>(items);
}

std::map<std::string, Rate> PerDependencyRates(
    std::span<const std::pair<std::string, int>> observations) {
  std::map<std::string, Rate> out;
  for (const auto &[deprel, label] : observations) {
    Rate &r = out[deprel];
    r.yes += label == 1 ? 1 : 0;
    ++r.total;
  }
  return out;
}

WorkerRates WorkerRateDistribution(std::span<const ScoredJudgment> judgments) {
  WorkerRates out;
  for (const auto &j : judgments) {
    Rate &r = out.per_worker[j.worker_id];
    r.yes += j.label == 1 ? 1 : 0;
    ++r.total;
  }
  std::vector<double> rates;
  for (const auto &[w, r] : out.per_worker) rates.push_back(r.rate());
  MeanStd ms = Summarize(rates);
  out.mean = ms.mean;
  out.std = ms.std;
  return out;
}

}  // namespace prunekit
