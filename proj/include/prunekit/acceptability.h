#ifndef PRUNEKIT_ACCEPTABILITY_H_
#define PRUNEKIT_ACCEPTABILITY_H_

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prunekit/deptree.h"
#include "prunekit/features.h"
#include "prunekit/model.h"

namespace prunekit {

// Acceptability scores for a chain of M prunes:
//   a_sum = sum of ln p_i    (all edits endorsed)
//   a_min = min of ln p_i    (weakest edit), 0 for an empty chain
//   a_m   = -M
//   a_lm  = NormLP of the final text
struct ChainScore {
  std::vector<double> per_edit_logp;
  double a_sum = 0.0;
  double a_min = 0.0;
  double a_m = 0.0;
  double a_lm = 0.0;

  int M() const { return static_cast<int>(per_edit_logp.size()); }
};

ChainScore AggregateChainScore(std::vector<double> per_edit_logp, double a_lm);

// Endorsement probabilities for prune edits as an application would see
// them: worker features are never supplied.
class EditScorer {
 public:
  EditScorer(const FeatureExtractor &extractor, const AcceptabilityModel &model)
      : extractor_(&extractor), model_(&model) {}

  double SourceNormLp(const DepTree &tree) const;
  double Probability(const DepTree &tree, const PruneEdit &edit,
                     double source_norm_lp) const;
  double LogProbability(const DepTree &tree, const PruneEdit &edit,
                        double source_norm_lp) const;

  const FeatureExtractor &extractor() const { return *extractor_; }
  const AcceptabilityModel &model() const { return *model_; }

 private:
  const FeatureExtractor *extractor_;
  const AcceptabilityModel *model_;
};

// Throws InvalidChain unless the first edit starts from the full sentence,
// each edit is a genuine prune of its own `before` set and each `before`
// equals the previous `after`.
void ValidateChain(const DepTree &tree, std::span<const PruneEdit> chain);

ChainScore ScoreChain(const DepTree &tree, std::span<const PruneEdit> chain,
                      const EditScorer &scorer);

// NormLP of a compression's text.
double ALm(std::string_view compression_text, const FeatureExtractor &extractor);

// Scores computed offline by some other acceptability predictor, looked up
// by compression id.
class ExternalScorer {
 public:
  ExternalScorer(std::string name, std::map<std::string, double> scores);

  // JSON object {id: score} or TSV lines "id<TAB>score".
  static ExternalScorer FromFile(std::string name, const std::string &path);

  const std::string &name() const { return name_; }
  double Score(const std::string &compression_id) const;  // throws LookupError
  size_t size() const { return scores_.size(); }

 private:
  std::string name_;
  std::map<std::string, double> scores_;
};

// {"pair_id", "M", "per_edit_logp", "a_sum", "a_min", "a_m", "a_lm"}
std::string ChainScoreJson(const std::string &pair_id, const ChainScore &score);

}  // namespace prunekit

#endif  // PRUNEKIT_ACCEPTABILITY_H_
