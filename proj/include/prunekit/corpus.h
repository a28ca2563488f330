#ifndef PRUNEKIT_CORPUS_H_
#define PRUNEKIT_CORPUS_H_

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "prunekit/deptree.h"
#include "prunekit/error.h"

namespace prunekit {

// Sentence lookup for conllu_ref values. A ref is either "path#sent_id",
// with path relative to the base directory, or a bare sent_id found among
// trees added with AddFile.
class Treebank {
 public:
  explicit Treebank(std::string base_dir = "");

  // Registers every tree in the file under its bare sentence id. Duplicate
  // ids across registered files are an IntegrityError.
  void AddFile(const std::string &path);
  void Add(DepTree tree);

  // Throws LookupError for unknown refs.
  const DepTree &Resolve(const std::string &ref);

  size_t size() const { return by_id_.size(); }

 private:
  std::string base_dir_;
  std::map<std::string, std::map<std::string, DepTree>> files_;
  std::map<std::string, DepTree> by_id_;
};

struct JudgmentRecord {
  std::string pair_id;
  std::string sentence_id;
  std::string conllu_ref;
  TokenSet kept;                       // filled from pruned_vertex when absent
  std::optional<int> pruned_vertex;    // single-prune records
  std::optional<std::vector<int>> chain;  // prune order for multi-prune records
  std::string worker_id;
  int label = 0;                       // 1 = yes, acceptable
  std::string split;                   // "train" | "test"

  bool operator==(const JudgmentRecord &) const = default;
};

// Reads JSON lines. Blank lines are skipped but still count toward record
// numbers. With a treebank, kept sets are checked for head closure and
// single-prune records get their kept set derived from the tree.
std::vector<JudgmentRecord> LoadJudgments(std::istream &in, Treebank *treebank = nullptr);
std::vector<JudgmentRecord> LoadJudgmentsFile(const std::string &path,
                                              Treebank *treebank = nullptr);

std::string JudgmentJson(const JudgmentRecord &r);
void WriteJudgments(std::ostream &out, const std::vector<JudgmentRecord> &records);

// The prune edits a record stands for. Single-prune records give one edit.
// Multi-prune records replay `chain` when present, otherwise they prune the
// maximal removed subtrees in index order.
std::vector<PruneEdit> RecordChain(const DepTree &tree, const JudgmentRecord &r);

class SplitViolation : public IntegrityError {
 public:
  explicit SplitViolation(std::vector<std::string> shared);
  const std::vector<std::string> &shared_pair_ids() const { return shared_; }

 private:
  std::vector<std::string> shared_;
};

struct SplitReport {
  size_t train = 0;
  size_t test = 0;
  size_t train_yes = 0;
  size_t test_yes = 0;
  size_t pairs = 0;
  std::vector<std::string> test_workers_missing_from_train;

  double YesFraction() const;
  bool AllTestWorkersInTrain() const { return test_workers_missing_from_train.empty(); }
};

// Throws SplitViolation if any pair_id occurs in both splits.
SplitReport VerifySplit(const std::vector<JudgmentRecord> &records);

// Assigns every record of a pair to the same split; a pair is in test with
// probability `test_fraction`, decided by a seeded hash of its id.
void SplitByPair(std::vector<JudgmentRecord> &records, double test_fraction, uint64_t seed);

struct CorpusStats {
  SplitReport split;
  double compression_rate_mean = 0.0;  // over distinct pairs
  double compression_rate_std = 0.0;
  size_t rate_pairs = 0;
};
CorpusStats ComputeCorpusStats(const std::vector<JudgmentRecord> &records, Treebank &treebank);

struct GoldPair {
  std::string conllu_ref;
  std::string compression_text;
};
std::vector<GoldPair> LoadGoldPairs(std::istream &in);
std::vector<GoldPair> LoadGoldPairsFile(const std::string &path);

struct ReachabilityReport {
  size_t total = 0;
  size_t reachable = 0;
  size_t unreachable = 0;         // aligned but not head-closed
  size_t alignment_failures = 0;  // counted as unreachable in Fraction()

  double Fraction() const;
};
ReachabilityReport ComputeReachability(const std::vector<GoldPair> &gold, Treebank &treebank);

}  // namespace prunekit

#endif  // PRUNEKIT_CORPUS_H_
