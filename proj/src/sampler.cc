#include "prunekit/sampler.h"

#include <algorithm>
#include <map>
#include <random>
#include <set>

#include <json.hpp>

#include "prunekit/util.h"

namespace prunekit {
namespace {

// Ordering shared by Select and RankCandidates: a better candidate sorts first.
bool Better(const CompressionCandidate &a, const CompressionCandidate &b) {
  if (a.score.a_sum != b.score.a_sum) return a.score.a_sum > b.score.a_sum;
  if (a.char_length != b.char_length) return a.char_length < b.char_length;
  return a.text < b.text;
}

}  // namespace

std::vector<int> CompressionCandidate::PrunedVertices() const {
  std::vector<int> out;
  out.reserve(chain.size());
  for (const auto &e : chain) out.push_back(e.pruned_vertex);
  return out;
}

BrevityBudget::BrevityBudget(int b) : max_chars(b) {
  if (b < 1) throw InvalidInput("brevity budget must be at least 1 character");
}

std::vector<CandidateEdit> CandidateEdits(const DepTree &tree, const TokenSet &kept,
                                          const EditScorer &scorer,
                                          double source_norm_lp) {
  std::vector<CandidateEdit> out;
  for (int v : kept) {
    if (v == tree.root()) continue;
    PruneEdit edit = Prune(tree, kept, v);
    CandidateEdit c;
    c.vertex = v;
    c.log_probability = scorer.LogProbability(tree, edit, source_norm_lp);
    c.probability = scorer.Probability(tree, edit, source_norm_lp);
    out.push_back(c);
  }
  return out;
}

CompressionCandidate IdentityCandidate(const DepTree &tree, const EditScorer &scorer) {
  CompressionCandidate c;
  c.kept = tree.AllTokens();
  c.text = tree.text();
  c.char_length = CharLength(c.text);
  c.score = AggregateChainScore({}, scorer.SourceNormLp(tree));
  return c;
}

CompressionCandidate SampleChain(const DepTree &tree, const BrevityBudget &budget,
                                 const EditScorer &scorer, uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double source_norm_lp = scorer.SourceNormLp(tree);
  CompressionCandidate c;
  c.kept = tree.AllTokens();
  c.text = tree.text();
  c.char_length = CharLength(c.text);
  c.budget = budget.max_chars;
  c.seed = seed;
  std::vector<double> logps;

  auto finish = [&] {
    double a_lm = logps.empty() ? source_norm_lp : scorer.extractor().TextNormLp(c.text);
    c.score = AggregateChainScore(logps, a_lm);
  };

  while (c.char_length >= static_cast<size_t>(budget.max_chars)) {
    std::vector<CandidateEdit> options = CandidateEdits(tree, c.kept, scorer, source_norm_lp);
    if (options.empty()) {
      c.budget_unreachable = true;
      finish();
      throw BudgetUnreachable("only the root of " + tree.sentence_id() +
                                  " remains and it is still " +
                                  std::to_string(c.char_length) + " characters",
                              std::move(c));
    }
    double z = 0.0;
    for (const auto &o : options) z += o.probability;
    const double u = UniformUnit(rng) * z;
    size_t pick = options.size() - 1;
    double cumulative = 0.0;
    for (size_t i = 0; i < options.size(); ++i) {
      cumulative += options[i].probability;
      if (u < cumulative) {
        pick = i;
        break;
      }
    }
    c.chain.push_back(Prune(tree, c.kept, options[pick].vertex));
    logps.push_back(options[pick].log_probability);
    c.kept = c.chain.back().after;
    c.text = Linearize(tree, c.kept);
    c.char_length = CharLength(c.text);
  }
  finish();
  return c;
}

std::vector<CompressionCandidate> GeneratePool(const DepTree &tree,
                                               const EditScorer &scorer,
                                               const PoolOptions &options) {
  if (options.samples < 1) throw InvalidInput("pool size must be at least 1");
  if (options.budget_min < 1 || options.budget_max < options.budget_min) {
    throw InvalidInput("budget range must satisfy 1 <= min <= max");
  }
  std::vector<CompressionCandidate> pool(options.samples);
  ParallelFor(
      static_cast<size_t>(options.samples),
      [&](size_t i) {
        const uint64_t chain_seed = MixSeed(options.seed, i);
        std::mt19937_64 budget_rng(MixSeed(chain_seed, 0xB));
        const int span = options.budget_max - options.budget_min + 1;
        const int b = options.budget_min +
                      std::min(span - 1, static_cast<int>(UniformUnit(budget_rng) * span));
        try {
          pool[i] = SampleChain(tree, BrevityBudget(b), scorer, chain_seed);
        } catch (const BudgetUnreachable &e) {
          pool[i] = e.partial();
        }
      },
      options.threads);
  return pool;
}

std::vector<CompressionCandidate> Dedup(const std::vector<CompressionCandidate> &pool) {
  std::set<std::vector<int>> seen_chains;
  std::map<TokenSet, size_t> group_of;  // kept set -> slot in `out`
  std::vector<CompressionCandidate> out;
  for (const auto &c : pool) {
    if (!seen_chains.insert(c.PrunedVertices()).second) continue;
    auto it = group_of.find(c.kept);
    if (it == group_of.end()) {
      group_of.emplace(c.kept, out.size());
      out.push_back(c);
    } else if (c.score.a_sum > out[it->second].score.a_sum) {
      out[it->second] = c;
    }
  }
  return out;
}

int Importance(const DepTree &tree, const TokenSet &kept, const ImportanceQuery &query) {
  if (query.terms.empty()) throw InvalidInput("importance query has no terms");
  std::set<std::string> wanted;
  for (const auto &t : query.terms) wanted.insert(ToLower(t));
  for (int i : kept) {
    if (wanted.contains(ToLower(tree.token(i).form))) return 1;
  }
  return 0;
}

const CompressionCandidate &Select(const DepTree &tree,
                                   const std::vector<CompressionCandidate> &pool,
                                   const BrevityBudget &budget,
                                   const std::optional<ImportanceQuery> &query) {
  const CompressionCandidate *best = nullptr;
  for (const auto &c : pool) {
    if (c.char_length > static_cast<size_t>(budget.max_chars)) continue;
    if (query && Importance(tree, c.kept, *query) != 1) continue;
    if (best == nullptr || Better(c, *best)) best = &c;
  }
  if (best == nullptr) {
    throw NoFeasibleCandidate("no candidate of " + tree.sentence_id() + " fits " +
                              std::to_string(budget.max_chars) + " characters" +
                              (query ? " and the importance query" : ""));
  }
  return *best;
}

void RankCandidates(std::vector<CompressionCandidate> &pool) {
  std::stable_sort(pool.begin(), pool.end(), Better);
}

std::string CandidateJson(const DepTree &tree, const CompressionCandidate &c,
                          const std::optional<ImportanceQuery> &query) {
  nlohmann::json j = {
      {"sentence_id", tree.sentence_id()},
      {"kept", c.kept},
      {"text", c.text},
      {"char_length", c.char_length},
      {"chain", c.PrunedVertices()},
      {"M", c.score.M()},
      {"per_edit_logp", c.score.per_edit_logp},
      {"a_sum", c.score.a_sum},
      {"a_min", c.score.a_min},
      {"a_m", c.score.a_m},
      {"a_lm", c.score.a_lm},
      {"budget", c.budget},
      {"seed", c.seed},
      {"budget_unreachable", c.budget_unreachable},
  };
  if (query) j["importance"] = Importance(tree, c.kept, *query);
  return j.dump();
}

}  // namespace prunekit
