#ifndef PRUNEKIT_SAMPLER_H_
#define PRUNEKIT_SAMPLER_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "prunekit/acceptability.h"
#include "prunekit/deptree.h"
#include "prunekit/error.h"

namespace prunekit {

struct CompressionCandidate {
  TokenSet kept;
  std::string text;
  std::vector<PruneEdit> chain;
  ChainScore score;
  size_t char_length = 0;
  int budget = 0;          // B the chain was drawn against; 0 = none
  uint64_t seed = 0;
  bool budget_unreachable = false;

  std::vector<int> PrunedVertices() const;
};

struct BrevityBudget {
  int max_chars = 0;
  explicit BrevityBudget(int b);
};

struct ImportanceQuery {
  std::vector<std::string> terms;
};

// Thrown when only the root remains and the text is still over budget.
class BudgetUnreachable : public Error {
 public:
  BudgetUnreachable(const std::string &what, CompressionCandidate partial)
      : Error(ErrorKind::kInfeasible, what), partial_(std::move(partial)) {}
  const CompressionCandidate &partial() const { return partial_; }

 private:
  CompressionCandidate partial_;
};

struct CandidateEdit {
  int vertex = 0;
  double probability = 0.0;
  double log_probability = 0.0;
};

// One entry per non-root kept vertex, in index order, scored as a single
// prune of the current kept set.
std::vector<CandidateEdit> CandidateEdits(const DepTree &tree, const TokenSet &kept,
                                          const EditScorer &scorer,
                                          double source_norm_lp);

CompressionCandidate IdentityCandidate(const DepTree &tree, const EditScorer &scorer);

// Prunes one subtree at a time, choosing vertex v with probability p_v / Z,
// until the text is shorter than the budget. Deterministic in `seed`.
CompressionCandidate SampleChain(const DepTree &tree, const BrevityBudget &budget,
                                 const EditScorer &scorer, uint64_t seed);

struct PoolOptions {
  int samples = 1000;
  int budget_min = 50;
  int budget_max = 100;
  uint64_t seed = 1;
  unsigned threads = 0;  // 0 = hardware concurrency
};

// Independent chains, each with B drawn uniformly from [budget_min,
// budget_max]. Unreachable budgets keep their partial candidate, flagged.
std::vector<CompressionCandidate> GeneratePool(const DepTree &tree,
                                               const EditScorer &scorer,
                                               const PoolOptions &options);

// Drops repeated chains, then keeps the highest-a_sum candidate per kept set
// (the earliest on ties). Output follows first appearance in the pool.
std::vector<CompressionCandidate> Dedup(const std::vector<CompressionCandidate> &pool);

// 1 iff some query term equals a kept token, ignoring case.
int Importance(const DepTree &tree, const TokenSet &kept, const ImportanceQuery &query);

// Highest a_sum among candidates within budget (and matching the query, if
// any); ties go to the shorter, then lexicographically smaller, text.
const CompressionCandidate &Select(const DepTree &tree,
                                   const std::vector<CompressionCandidate> &pool,
                                   const BrevityBudget &budget,
                                   const std::optional<ImportanceQuery> &query);

// Sorts best-first with Select's ordering.
void RankCandidates(std::vector<CompressionCandidate> &pool);

std::string CandidateJson(const DepTree &tree, const CompressionCandidate &c,
                          const std::optional<ImportanceQuery> &query);

}  // namespace prunekit

#endif  // PRUNEKIT_SAMPLER_H_
