#include "prunekit/features.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>

#include <json.hpp>

#include "prunekit/error.h"
#include "prunekit/util.h"

namespace prunekit {
namespace {

// Generated from data/interactions.tsv at configure time.
constexpr const char *kDefaultInteractionsText =
#include "default_interactions.inc"
    ;

const std::set<std::string, std::less<>> &EditPropertyNames() {
  static const std::set<std::string, std::less<>> kNames = {
      "removes_start", "removes_end", "follows_punct", "breaks_collocation"};
  return kNames;
}

}  // namespace

double FeatureVector::Get(const std::string &name) const {
  auto it = values.find(name);
  return it == values.end() ? 0.0 : it->second;
}

FeatureGroup GroupOf(std::string_view name) {
  if (name.starts_with("lm:")) return FeatureGroup::kLm;
  if (name.starts_with("dep:")) return FeatureGroup::kDependency;
  if (name.starts_with("worker:")) return FeatureGroup::kWorker;
  if (name.starts_with("edit:")) return FeatureGroup::kEdit;
  if (name.starts_with("ix:")) return FeatureGroup::kInteraction;
  throw InvalidInput("feature '" + std::string(name) + "' has no known group prefix");
}

FeatureGroups AllFeatureGroups() {
  return {FeatureGroup::kLm, FeatureGroup::kDependency, FeatureGroup::kWorker,
          FeatureGroup::kEdit, FeatureGroup::kInteraction};
}

const std::vector<std::string> &VariantNames() {
  static const std::vector<std::string> kNames = {
      "lm-only", "plus-dependencies", "plus-worker",
      "full",    "no-dependencies",   "no-worker"};
  return kNames;
}

FeatureGroups GroupsForVariant(std::string_view variant) {
  using G = FeatureGroup;
  if (variant == "full") return AllFeatureGroups();
  if (variant == "lm-only") return {G::kLm};
  if (variant == "plus-dependencies") return {G::kLm, G::kDependency};
  if (variant == "plus-worker") return {G::kLm, G::kDependency, G::kWorker};
  if (variant == "no-dependencies") return {G::kLm, G::kWorker, G::kEdit};
  if (variant == "no-worker") {
    return {G::kLm, G::kDependency, G::kEdit, G::kInteraction};
  }
  throw InvalidInput("unknown model variant '" + std::string(variant) + "'");
}

FeatureVector FilterGroups(const FeatureVector &v, const FeatureGroups &keep) {
  FeatureVector out;
  for (const auto &[name, value] : v.values) {
    if (keep.contains(GroupOf(name))) out.values.emplace(name, value);
  }
  return out;
}

InteractionList ParseInteractions(std::istream &in) {
  InteractionList list;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view t = Trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto cols = Split(t, '\t');
    if (cols.size() != 2 || cols[0].empty()) {
      throw ParseError("expected 'deprel<TAB>edit_property'", lineno);
    }
    if (!EditPropertyNames().contains(cols[1])) {
      throw ParseError("unknown edit property '" + cols[1] + "'", lineno);
    }
    list.push_back({cols[0], cols[1]});
  }
  return list;
}

InteractionList ReadInteractionsFile(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open interaction list " + path);
  return ParseInteractions(in);
}

const InteractionList &DefaultInteractions() {
  static const InteractionList kList = [] {
    std::istringstream in(kDefaultInteractionsText);
    return ParseInteractions(in);
  }();
  return kList;
}

EditProperties ComputeEditProperties(const DepTree &tree, const PruneEdit &edit) {
  EditProperties p;
  if (edit.removed.empty() || edit.before.empty()) return p;
  p.removes_start = Contains(edit.removed, edit.before.front());
  p.removes_end = Contains(edit.removed, edit.before.back());
  auto first = std::lower_bound(edit.before.begin(), edit.before.end(),
                                edit.removed.front());
  if (first != edit.before.begin()) {
    const Token &prev = tree.token(*(first - 1));
    p.follows_punct = prev.deprel == "punct" || IsPunctuation(prev.form);
  }
  return p;
}

FeatureExtractor::FeatureExtractor(const LmBundle &lm,
                                   const OffsetStats &collocations,
                                   InteractionList interactions,
                                   long collocation_min_count)
    : lm_(&lm),
      collocations_(&collocations),
      interactions_(std::move(interactions)),
      min_count_(collocation_min_count) {}

double FeatureExtractor::TextNormLp(std::string_view text) const {
  std::vector<std::string> tokens = Tokenize(text);
  return NormLp(*lm_, tokens);
}

FeatureVector FeatureExtractor::Extract(const DepTree &tree, const PruneEdit &edit,
                                        const std::optional<std::string> &worker,
                                        std::optional<double> source_norm_lp) const {
  FeatureVector v;
  const double norm_lp_c = TextNormLp(Linearize(tree, edit.after));
  const double norm_lp_s = source_norm_lp ? *source_norm_lp : TextNormLp(tree.text());
  v.values[std::string(kNormLpFeature)] = norm_lp_c;
  if (norm_lp_s - norm_lp_c > 0.0) v.values[std::string(kLmDiffFeature)] = 1.0;

  const std::string &deprel = tree.token(edit.pruned_vertex).deprel;
  v.values["dep:" + deprel] = 1.0;
  if (worker) v.values["worker:" + *worker] = 1.0;

  const EditProperties props = ComputeEditProperties(tree, edit);
  const bool breaks = EditBreaksCollocation(*collocations_, edit, tree, min_count_);
  auto active = [&](const std::string &property) {
    if (property == "removes_start") return props.removes_start;
    if (property == "removes_end") return props.removes_end;
    if (property == "follows_punct") return props.follows_punct;
    return breaks;
  };
  for (const std::string &property : EditPropertyNames()) {
    if (active(property)) v.values["edit:" + property] = 1.0;
  }
  for (const Interaction &ix : interactions_) {
    if (ix.deprel == deprel && active(ix.property)) {
      v.values["ix:" + ix.deprel + ":" + ix.property] = 1.0;
    }
  }
  return v;
}

FeatureSpace::FeatureSpace(std::vector<std::string> names) : names_(std::move(names)) {
  for (size_t i = 0; i < names_.size(); ++i) {
    if (!index_.emplace(names_[i], static_cast<int>(i)).second) {
      throw InvalidInput("duplicate feature name '" + names_[i] + "'");
    }
  }
}

FeatureSpace FeatureSpace::Build(const std::vector<FeatureVector> &vectors) {
  std::set<std::string> names;
  for (const auto &v : vectors) {
    for (const auto &kv : v.values) names.insert(kv.first);
  }
  return FeatureSpace(std::vector<std::string>(names.begin(), names.end()));
}

std::optional<int> FeatureSpace::Index(const std::string &name) const {
  auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::string FeatureSpace::Hash() const {
  uint64_t h = Fnv1a64("");
  for (const auto &n : names_) {
    h = Fnv1a64(n, h);
    h = Fnv1a64("\n", h);
  }
  return HexDigest(h);
}

IndexedVector Vectorize(const FeatureSpace &space, const FeatureVector &v) {
  IndexedVector out;
  for (const auto &[name, value] : v.values) {
    if (auto idx = space.Index(name)) {
      out.entries.emplace_back(*idx, value);
    } else {
      ++out.dropped;
    }
  }
  std::sort(out.entries.begin(), out.entries.end());
  return out;
}

std::string FeatureVectorJson(const FeatureVector &v) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto &[name, value] : v.values) j[name] = value;
  return j.dump();
}

}  // namespace prunekit
