#include "prunekit/corpus.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>

#include <json.hpp>

#include "prunekit/util.h"

namespace prunekit {
namespace {

using nlohmann::json;

std::string RequireString(const json &j, const char *field, long record) {
  auto it = j.find(field);
  if (it == j.end()) throw SchemaError(std::string("missing field '") + field + "'", record);
  if (!it->is_string()) throw SchemaError(std::string("'") + field + "' must be a string", record);
  std::string s = it->get<std::string>();
  if (s.empty()) throw SchemaError(std::string("'") + field + "' is empty", record);
  return s;
}

std::vector<int> IndexList(const json &j, const char *field, long record) {
  if (!j.is_array()) throw SchemaError(std::string("'") + field + "' must be an array", record);
  std::vector<int> out;
  for (const auto &v : j) {
    if (!v.is_number_integer() || v.get<long>() < 1) {
      throw SchemaError(std::string("'") + field + "' must hold positive integers", record);
    }
    out.push_back(v.get<int>());
  }
  return out;
}

int ParseLabel(const json &j, long record) {
  if (j.is_boolean()) return j.get<bool>() ? 1 : 0;
  if (j.is_number_integer()) {
    long v = j.get<long>();
    if (v == 0 || v == 1) return static_cast<int>(v);
  }
  if (j.is_string()) {
    std::string s = ToLower(j.get<std::string>());
    if (s == "yes") return 1;
    if (s == "no") return 0;
  }
  throw SchemaError("'label' must be 0/1, true/false or \"yes\"/\"no\"", record);
}

JudgmentRecord ParseRecord(const json &j, long record) {
  if (!j.is_object()) throw SchemaError("not a JSON object", record);
  static const std::set<std::string> kKnown = {"pair_id",   "sentence_id", "conllu_ref",
                                               "kept",      "pruned_vertex", "worker_id",
                                               "label",     "split",       "chain"};
  for (const auto &[key, _] : j.items()) {
    if (!kKnown.contains(key)) throw SchemaError("unknown field '" + key + "'", record);
  }
  JudgmentRecord r;
  r.pair_id = RequireString(j, "pair_id", record);
  r.sentence_id = RequireString(j, "sentence_id", record);
  r.conllu_ref = RequireString(j, "conllu_ref", record);
  r.worker_id = RequireString(j, "worker_id", record);
  r.split = RequireString(j, "split", record);
  if (r.split != "train" && r.split != "test") {
    throw SchemaError("'split' must be \"train\" or \"test\"", record);
  }
  if (!j.contains("label")) throw SchemaError("missing field 'label'", record);
  r.label = ParseLabel(j["label"], record);

  auto pv = j.find("pruned_vertex");
  if (pv != j.end() && !pv->is_null()) {
    if (!pv->is_number_integer() || pv->get<long>() < 1) {
      throw SchemaError("'pruned_vertex' must be a positive integer", record);
    }
    r.pruned_vertex = pv->get<int>();
  }
  auto kept = j.find("kept");
  if (kept != j.end() && !kept->is_null()) {
    r.kept = IndexList(*kept, "kept", record);
    std::vector<int> sorted = r.kept;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw SchemaError("'kept' repeats an index", record);
    }
    r.kept = std::move(sorted);
  }
  auto chain = j.find("chain");
  if (chain != j.end() && !chain->is_null()) r.chain = IndexList(*chain, "chain", record);
  if (!r.pruned_vertex && r.kept.empty()) {
    throw SchemaError("record needs 'kept' or 'pruned_vertex'", record);
  }
  if (r.pruned_vertex && r.chain) {
    throw SchemaError("'chain' is only meaningful without 'pruned_vertex'", record);
  }
  return r;
}

// Checks a record against its tree and fills in the derived kept set.
void Validate(JudgmentRecord &r, const DepTree &tree, long record) {
  auto fail = [&](const std::string &why) {
    throw IntegrityError("record " + std::to_string(record) + " (" + r.pair_id + "): " + why);
  };
  for (int i : r.kept) {
    if (i > tree.size()) fail("kept index " + std::to_string(i) + " is outside the sentence");
  }
  if (r.pruned_vertex) {
    const int v = *r.pruned_vertex;
    if (v > tree.size()) fail("pruned_vertex is outside the sentence");
    if (v == tree.root()) fail("pruned_vertex is the root");
    TokenSet derived = Prune(tree, tree.AllTokens(), v).after;
    if (!r.kept.empty() && r.kept != derived) {
      fail("kept set is not the sentence minus the pruned subtree");
    }
    r.kept = std::move(derived);
    return;
  }
  if (!Contains(r.kept, tree.root())) fail("kept set is missing the root");
  if (!IsHeadClosed(tree, r.kept)) fail("kept set is not head-closed");
  if (r.chain) {
    try {
      Compression c = ApplyPrunes(tree, *r.chain);
      if (c.kept != r.kept) fail("chain does not produce the kept set");
    } catch (const InvalidOperation &e) {
      fail(std::string("chain is not a prune sequence: ") + e.what());
    }
  }
}

}  // namespace

Treebank::Treebank(std::string base_dir) : base_dir_(std::move(base_dir)) {}

void Treebank::Add(DepTree tree) {
  std::string id = tree.sentence_id();
  if (!by_id_.emplace(id, std::move(tree)).second) {
    throw IntegrityError("sentence id '" + id + "' occurs in more than one registered tree");
  }
}

void Treebank::AddFile(const std::string &path) {
  for (DepTree &t : ReadConlluFile(path)) Add(std::move(t));
}

const DepTree &Treebank::Resolve(const std::string &ref) {
  const size_t hash = ref.rfind('#');
  if (hash == std::string::npos) {
    auto it = by_id_.find(ref);
    if (it == by_id_.end()) throw LookupError("no tree registered for sentence '" + ref + "'");
    return it->second;
  }
  std::filesystem::path file = ref.substr(0, hash);
  if (file.is_relative() && !base_dir_.empty()) file = std::filesystem::path(base_dir_) / file;
  const std::string key = file.lexically_normal().string();
  auto fit = files_.find(key);
  if (fit == files_.end()) {
    std::map<std::string, DepTree> trees;
    for (DepTree &t : ReadConlluFile(key)) {
      std::string id = t.sentence_id();
      if (!trees.emplace(id, std::move(t)).second) {
        throw IntegrityError(key + ": sentence id '" + id + "' is repeated");
      }
    }
    fit = files_.emplace(key, std::move(trees)).first;
  }
  auto it = fit->second.find(ref.substr(hash + 1));
  if (it == fit->second.end()) throw LookupError("no sentence for reference '" + ref + "'");
  return it->second;
}

std::vector<JudgmentRecord> LoadJudgments(std::istream &in, Treebank *treebank) {
  std::vector<JudgmentRecord> out;
  std::string line;
  long record = 0;
  while (std::getline(in, line)) {
    ++record;
    if (Trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception &e) {
      throw SchemaError(std::string("invalid JSON: ") + e.what(), record);
    }
    JudgmentRecord r = ParseRecord(j, record);
    if (treebank != nullptr) Validate(r, treebank->Resolve(r.conllu_ref), record);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<JudgmentRecord> LoadJudgmentsFile(const std::string &path, Treebank *treebank) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open judgments file " + path);
  return LoadJudgments(in, treebank);
}

std::string JudgmentJson(const JudgmentRecord &r) {
  json j = {{"pair_id", r.pair_id},       {"sentence_id", r.sentence_id},
            {"conllu_ref", r.conllu_ref}, {"kept", r.kept},
            {"worker_id", r.worker_id},   {"label", r.label},
            {"split", r.split}};
  if (r.pruned_vertex) j["pruned_vertex"] = *r.pruned_vertex;
  if (r.chain) j["chain"] = *r.chain;
  return j.dump();
}

void WriteJudgments(std::ostream &out, const std::vector<JudgmentRecord> &records) {
  for (const auto &r : records) out << JudgmentJson(r) << '\n';
}

std::vector<PruneEdit> RecordChain(const DepTree &tree, const JudgmentRecord &r) {
  if (r.pruned_vertex) return {Prune(tree, tree.AllTokens(), *r.pruned_vertex)};
  if (r.chain) return ApplyPrunes(tree, *r.chain).chain;
  std::vector<int> roots;
  const TokenSet removed = Difference(tree.AllTokens(), r.kept);
  for (int v : removed) {
    if (Contains(r.kept, tree.head(v))) roots.push_back(v);
  }
  Compression c = ApplyPrunes(tree, roots);
  if (c.kept != r.kept) {
    throw IntegrityError("pair " + r.pair_id + ": kept set is not reachable by prunes");
  }
  return c.chain;
}

namespace {

std::string JoinIds(const std::vector<std::string> &ids) {
  std::string s;
  for (size_t i = 0; i < ids.size(); ++i) s += (i ? ", " : "") + ids[i];
  return s;
}

}  // namespace

SplitViolation::SplitViolation(std::vector<std::string> shared)
    : IntegrityError("pair ids in both train and test: " + JoinIds(shared)),
      shared_(std::move(shared)) {}

double SplitReport::YesFraction() const {
  const size_t n = train + test;
  return n == 0 ? 0.0 : static_cast<double>(train_yes + test_yes) / static_cast<double>(n);
}

SplitReport VerifySplit(const std::vector<JudgmentRecord> &records) {
  SplitReport rep;
  std::set<std::string> train_pairs, test_pairs, train_workers, test_workers;
  for (const auto &r : records) {
    if (r.split == "train") {
      ++rep.train;
      rep.train_yes += r.label;
      train_pairs.insert(r.pair_id);
      train_workers.insert(r.worker_id);
    } else if (r.split == "test") {
      ++rep.test;
      rep.test_yes += r.label;
      test_pairs.insert(r.pair_id);
      test_workers.insert(r.worker_id);
    } else {
      throw InvalidInput("pair " + r.pair_id + ": unknown split '" + r.split + "'");
    }
  }
  std::vector<std::string> shared;
  std::set_intersection(train_pairs.begin(), train_pairs.end(), test_pairs.begin(),
                        test_pairs.end(), std::back_inserter(shared));
  if (!shared.empty()) throw SplitViolation(std::move(shared));
  rep.pairs = train_pairs.size() + test_pairs.size();
  std::set_difference(test_workers.begin(), test_workers.end(), train_workers.begin(),
                      train_workers.end(),
                      std::back_inserter(rep.test_workers_missing_from_train));
  return rep;
}

void SplitByPair(std::vector<JudgmentRecord> &records, double test_fraction, uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction <= 1.0)) {
    throw InvalidInput("test fraction must lie in [0, 1]");
  }
  const uint64_t key = MixSeed(seed, 0x5b17);
  for (auto &r : records) {
    const double u =
        static_cast<double>(Fnv1a64(r.pair_id, key) >> 11) * 0x1.0p-53;
    r.split = u < test_fraction ? "test" : "train";
  }
}

CorpusStats ComputeCorpusStats(const std::vector<JudgmentRecord> &records,
                               Treebank &treebank) {
  CorpusStats stats;
  stats.split = VerifySplit(records);
  std::map<std::string, double> rate_by_pair;
  for (const auto &r : records) {
    if (rate_by_pair.contains(r.pair_id)) continue;
    const DepTree &tree = treebank.Resolve(r.conllu_ref);
    rate_by_pair[r.pair_id] = CompressionRate(tree.text(), Linearize(tree, r.kept));
  }
  std::vector<double> rates;
  for (const auto &[_, rate] : rate_by_pair) rates.push_back(rate);
  MeanStd ms = Summarize(rates);
  stats.compression_rate_mean = ms.mean;
  stats.compression_rate_std = ms.std;
  stats.rate_pairs = rates.size();
  return stats;
}

std::vector<GoldPair> LoadGoldPairs(std::istream &in) {
  std::vector<GoldPair> out;
  std::string line;
  long record = 0;
  while (std::getline(in, line)) {
    ++record;
    if (Trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception &e) {
      throw SchemaError(std::string("invalid JSON: ") + e.what(), record);
    }
    if (!j.is_object()) throw SchemaError("not a JSON object", record);
    GoldPair g;
    g.conllu_ref = RequireString(j, "conllu_ref", record);
    auto text = j.find("compression_text");
    if (text == j.end() || !text->is_string()) {
      throw SchemaError("'compression_text' must be a string", record);
    }
    g.compression_text = text->get<std::string>();
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<GoldPair> LoadGoldPairsFile(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open gold pairs file " + path);
  return LoadGoldPairs(in);
}

double ReachabilityReport::Fraction() const {
  return total == 0 ? 0.0 : static_cast<double>(reachable) / static_cast<double>(total);
}

ReachabilityReport ComputeReachability(const std::vector<GoldPair> &gold, Treebank &treebank) {
  ReachabilityReport rep;
  for (const auto &g : gold) {
    ++rep.total;
    const DepTree &tree = treebank.Resolve(g.conllu_ref);
    std::vector<std::string> forms = Tokenize(g.compression_text);
    std::optional<TokenSet> kept = AlignCompression(tree, forms);
    if (!kept) {
      ++rep.alignment_failures;
    } else if (ReachableByPrunes(tree, *kept)) {
      ++rep.reachable;
    } else {
      ++rep.unreachable;
    }
  }
  return rep;
}

}  // namespace prunekit
