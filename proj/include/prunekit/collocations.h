#ifndef PRUNEKIT_COLLOCATIONS_H_
#define PRUNEKIT_COLLOCATIONS_H_

#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "prunekit/deptree.h"

namespace prunekit {

inline constexpr int kDefaultCollocationWindow = 4;
inline constexpr long kDefaultCollocationMinCount = 10;

// Signed-offset moments for one ordered word pair.
struct OffsetMoments {
  long count = 0;
  double mean = 0.0;
  double variance = 0.0;  // population
};

// Offset statistics for ordered, lowercased word pairs co-occurring within
// +/- window tokens. The offset of (w1, w2) is position(w2) - position(w1).
class OffsetStats {
 public:
  using Key = std::pair<std::string, std::string>;

  OffsetStats(int window, std::map<Key, OffsetMoments> pairs);

  int window() const { return window_; }
  size_t size() const { return pairs_.size(); }
  const std::map<Key, OffsetMoments> &pairs() const { return pairs_; }
  const OffsetMoments *Find(const std::string &w1, const std::string &w2) const;

  // Sorted TSV rows: w1, w2, count, mean, variance. Read skips lines that
  // start with "# ".
  void Write(std::ostream &out) const;
  static OffsetStats Read(std::istream &in, int window = kDefaultCollocationWindow);
  static OffsetStats ReadFile(const std::string &path,
                              int window = kDefaultCollocationWindow);

 private:
  int window_;
  std::map<Key, OffsetMoments> pairs_;
};

OffsetStats BuildOffsetStats(const std::vector<std::vector<std::string>> &corpus,
                             int window = kDefaultCollocationWindow);

// count >= min_count, variance < 2 and |mean| < 1.5.
bool IsCollocation(const OffsetStats &stats, const std::string &w1,
                   const std::string &w2,
                   long min_count = kDefaultCollocationMinCount);

// True iff some collocation pair within the window of the pre-edit token
// sequence has exactly one member removed by the edit.
bool EditBreaksCollocation(const OffsetStats &stats, const PruneEdit &edit,
                           const DepTree &tree,
                           long min_count = kDefaultCollocationMinCount);

}  // namespace prunekit

#endif  // PRUNEKIT_COLLOCATIONS_H_
