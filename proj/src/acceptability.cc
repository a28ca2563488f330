#include "prunekit/acceptability.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "prunekit/error.h"
#include "prunekit/util.h"

namespace prunekit {

ChainScore AggregateChainScore(std::vector<double> per_edit_logp, double a_lm) {
  ChainScore s;
  s.per_edit_logp = std::move(per_edit_logp);
  for (double lp : s.per_edit_logp) {
    s.a_sum += lp;
    s.a_min = std::min(s.a_min, lp);
  }
  s.a_m = -static_cast<double>(s.per_edit_logp.size());
  s.a_lm = a_lm;
  return s;
}

double EditScorer::SourceNormLp(const DepTree &tree) const {
  return extractor_->TextNormLp(tree.text());
}

double EditScorer::Probability(const DepTree &tree, const PruneEdit &edit,
                               double source_norm_lp) const {
  return model_->Predict(extractor_->Extract(tree, edit, std::nullopt, source_norm_lp));
}

double EditScorer::LogProbability(const DepTree &tree, const PruneEdit &edit,
                                  double source_norm_lp) const {
  return LogSigmoid(
      model_->Logit(extractor_->Extract(tree, edit, std::nullopt, source_norm_lp)));
}

void ValidateChain(const DepTree &tree, std::span<const PruneEdit> chain) {
  TokenSet expected_before = tree.AllTokens();
  for (size_t i = 0; i < chain.size(); ++i) {
    const PruneEdit &e = chain[i];
    if (e.before != expected_before) {
      throw InvalidChain("edit " + std::to_string(i) + " of " + tree.sentence_id() +
                         " does not start from the previous edit's result");
    }
    PruneEdit replay;
    try {
      replay = Prune(tree, e.before, e.pruned_vertex);
    } catch (const InvalidOperation &err) {
      throw InvalidChain("edit " + std::to_string(i) + ": " + err.what());
    }
    if (replay.removed != e.removed || replay.after != e.after) {
      throw InvalidChain("edit " + std::to_string(i) + " of " + tree.sentence_id() +
                         " does not remove exactly the pruned subtree");
    }
    expected_before = e.after;
  }
}

ChainScore ScoreChain(const DepTree &tree, std::span<const PruneEdit> chain,
                      const EditScorer &scorer) {
  ValidateChain(tree, chain);
  const double source_norm_lp = scorer.SourceNormLp(tree);
  std::vector<double> logps;
  logps.reserve(chain.size());
  for (const PruneEdit &e : chain) {
    logps.push_back(scorer.LogProbability(tree, e, source_norm_lp));
  }
  const TokenSet &final_kept = chain.empty() ? tree.AllTokens() : chain.back().after;
  double a_lm = chain.empty() ? source_norm_lp
                              : scorer.extractor().TextNormLp(Linearize(tree, final_kept));
  return AggregateChainScore(std::move(logps), a_lm);
}

double ALm(std::string_view compression_text, const FeatureExtractor &extractor) {
  return extractor.TextNormLp(compression_text);
}

ExternalScorer::ExternalScorer(std::string name, std::map<std::string, double> scores)
    : name_(std::move(name)), scores_(std::move(scores)) {}

ExternalScorer ExternalScorer::FromFile(std::string name, const std::string &path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open external score file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  std::map<std::string, double> scores;
  std::string_view head = Trim(text);
  if (!head.empty() && head.front() == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception &e) {
      throw FormatError("external scores: " + std::string(e.what()));
    }
    for (const auto &[id, v] : j.items()) {
      if (!v.is_number()) throw FormatError("external score for '" + id + "' is not a number");
      scores[id] = v.get<double>();
    }
  } else {
    std::istringstream lines(text);
    std::string line;
    long lineno = 0;
    while (std::getline(lines, line)) {
      ++lineno;
      if (Trim(line).empty()) continue;
      auto cols = Split(line, '\t');
      char *end = nullptr;
      double v = cols.size() == 2 ? std::strtod(cols[1].c_str(), &end) : 0.0;
      if (cols.size() != 2 || end == cols[1].c_str() || *end != '\0') {
        throw ParseError("expected 'id<TAB>score'", lineno);
      }
      scores[cols[0]] = v;
    }
  }
  return ExternalScorer(std::move(name), std::move(scores));
}

double ExternalScorer::Score(const std::string &compression_id) const {
  auto it = scores_.find(compression_id);
  if (it == scores_.end()) {
    throw LookupError(name_ + ": no score for compression '" + compression_id + "'");
  }
  return it->second;
}

std::string ChainScoreJson(const std::string &pair_id, const ChainScore &score) {
  nlohmann::json j = {
      {"pair_id", pair_id},     {"M", score.M()},         {"per_edit_logp", score.per_edit_logp},
      {"a_sum", score.a_sum},   {"a_min", score.a_min},   {"a_m", score.a_m},
      {"a_lm", score.a_lm},
  };
  return j.dump();
}

}  // namespace prunekit
