#ifndef PRUNEKIT_FEATURES_H_
#define PRUNEKIT_FEATURES_H_

#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "prunekit/collocations.h"
#include "prunekit/deptree.h"
#include "prunekit/lm.h"

namespace prunekit {

// Feature names, by group prefix:
//   lm:norm_lp_c          NormLP of the post-edit text (the only real value)
//   lm:s_minus_c_pos      NormLP(source) - NormLP(post-edit) > 0
//   dep:<deprel>          relation of the pruned vertex
//   worker:<id>           judging worker, when known
//   edit:removes_start, edit:removes_end, edit:follows_punct,
//   edit:breaks_collocation
//   ix:<deprel>:<prop>    deprel crossed with one edit property
inline constexpr std::string_view kNormLpFeature = "lm:norm_lp_c";
inline constexpr std::string_view kLmDiffFeature = "lm:s_minus_c_pos";

// Sparse name -> value map. Binary features are stored only when active.
struct FeatureVector {
  std::map<std::string, double> values;

  double Get(const std::string &name) const;
  bool operator==(const FeatureVector &) const = default;
};

enum class FeatureGroup { kLm, kDependency, kWorker, kEdit, kInteraction };
FeatureGroup GroupOf(std::string_view name);
using FeatureGroups = std::set<FeatureGroup>;
FeatureGroups AllFeatureGroups();

// Model variants compared in the evaluation tables:
//   full, lm-only, plus-dependencies, plus-worker, no-dependencies, no-worker.
// "no-dependencies" drops both dep:* and the deprel-crossed ix:* features.
FeatureGroups GroupsForVariant(std::string_view variant);
const std::vector<std::string> &VariantNames();
FeatureVector FilterGroups(const FeatureVector &v, const FeatureGroups &keep);

struct Interaction {
  std::string deprel;
  std::string property;  // removes_start | removes_end | follows_punct | breaks_collocation
};
using InteractionList = std::vector<Interaction>;

// One "deprel<TAB>property" per line; '#' comments and blank lines ignored.
InteractionList ParseInteractions(std::istream &in);
InteractionList ReadInteractionsFile(const std::string &path);
const InteractionList &DefaultInteractions();

// Feature extraction for single prune edits. Holds non-owning references;
// the LM and collocation statistics must outlive the extractor.
class FeatureExtractor {
 public:
  FeatureExtractor(const LmBundle &lm, const OffsetStats &collocations,
                   InteractionList interactions = DefaultInteractions(),
                   long collocation_min_count = kDefaultCollocationMinCount);

  // NormLP of detokenized text after re-tokenization.
  double TextNormLp(std::string_view text) const;

  // `source_norm_lp` is NormLP of the original sentence; it is recomputed
  // when absent.
  FeatureVector Extract(const DepTree &tree, const PruneEdit &edit,
                        const std::optional<std::string> &worker,
                        std::optional<double> source_norm_lp = std::nullopt) const;

  const LmBundle &lm() const { return *lm_; }
  const InteractionList &interactions() const { return interactions_; }

 private:
  const LmBundle *lm_;
  const OffsetStats *collocations_;
  InteractionList interactions_;
  long min_count_;
};

// Positional edit predicates, evaluated against the pre-edit kept sequence.
struct EditProperties {
  bool removes_start = false;
  bool removes_end = false;
  bool follows_punct = false;
};
EditProperties ComputeEditProperties(const DepTree &tree, const PruneEdit &edit);

// Name -> column bijection over the names seen in training. Immutable.
class FeatureSpace {
 public:
  FeatureSpace() = default;
  explicit FeatureSpace(std::vector<std::string> names);
  static FeatureSpace Build(const std::vector<FeatureVector> &vectors);

  size_t size() const { return names_.size(); }
  const std::vector<std::string> &names() const { return names_; }
  std::optional<int> Index(const std::string &name) const;

  // Fingerprint of the ordered name list.
  std::string Hash() const;

 private:
  std::vector<std::string> names_;
  std::map<std::string, int, std::less<>> index_;
};

struct IndexedVector {
  std::vector<std::pair<int, double>> entries;  // sorted by column
  int dropped = 0;                              // names not in the space
};
IndexedVector Vectorize(const FeatureSpace &space, const FeatureVector &v);

std::string FeatureVectorJson(const FeatureVector &v);

}  // namespace prunekit

#endif  // PRUNEKIT_FEATURES_H_
