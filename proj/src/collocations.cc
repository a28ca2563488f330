#include "prunekit/collocations.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>

#include "prunekit/error.h"
#include "prunekit/util.h"

namespace prunekit {

OffsetStats::OffsetStats(int window, std::map<Key, OffsetMoments> pairs)
    : window_(window), pairs_(std::move(pairs)) {
  if (window_ < 1) throw InvalidInput("collocation window must be >= 1");
}

const OffsetMoments *OffsetStats::Find(const std::string &w1,
                                       const std::string &w2) const {
  auto it = pairs_.find({ToLower(w1), ToLower(w2)});
  return it == pairs_.end() ? nullptr : &it->second;
}

void OffsetStats::Write(std::ostream &out) const {
  char buf[64];
  for (const auto &[key, m] : pairs_) {
    out << key.first << '\t' << key.second << '\t' << m.count << '\t';
    std::snprintf(buf, sizeof(buf), "%.17g\t%.17g", m.mean, m.variance);
    out << buf << '\n';
  }
}

OffsetStats OffsetStats::Read(std::istream &in, int window) {
  std::map<Key, OffsetMoments> pairs;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (Trim(line).empty() || line.starts_with("# ")) continue;
    auto cols = Split(line, '\t');
    if (cols.size() != 5) throw ParseError("expected 5 tab-separated columns", lineno);
    OffsetMoments m;
    char *end = nullptr;
    m.count = std::strtol(cols[2].c_str(), &end, 10);
    bool ok = *end == '\0' && m.count >= 1;
    m.mean = std::strtod(cols[3].c_str(), &end);
    ok = ok && *end == '\0';
    m.variance = std::strtod(cols[4].c_str(), &end);
    ok = ok && *end == '\0' && m.variance >= 0.0;
    if (!ok) throw ParseError("bad collocation statistics row", lineno);
    pairs[{cols[0], cols[1]}] = m;
  }
  return OffsetStats(window, std::move(pairs));
}

OffsetStats OffsetStats::ReadFile(const std::string &path, int window) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open collocation file " + path);
  return Read(in, window);
}

OffsetStats BuildOffsetStats(const std::vector<std::vector<std::string>> &corpus,
                             int window) {
  if (window < 1) throw InvalidInput("collocation window must be >= 1");
  // Welford accumulators: count, mean, sum of squared deviations.
  struct Acc {
    long n = 0;
    double mean = 0.0;
    double m2 = 0.0;
  };
  std::map<OffsetStats::Key, Acc> acc;
  bool any = false;
  for (const auto &raw : corpus) {
    if (raw.empty()) continue;
    any = true;
    std::vector<std::string> s;
    s.reserve(raw.size());
    for (const auto &w : raw) s.push_back(ToLower(w));
    const int n = static_cast<int>(s.size());
    for (int i = 0; i < n; ++i) {
      for (int j = std::max(0, i - window); j <= std::min(n - 1, i + window); ++j) {
        if (j == i) continue;
        Acc &a = acc[{s[i], s[j]}];
        double x = j - i;
        ++a.n;
        double delta = x - a.mean;
        a.mean += delta / a.n;
        a.m2 += delta * (x - a.mean);
      }
    }
  }
  if (!any) throw InvalidInput("cannot build offset statistics from an empty corpus");
  std::map<OffsetStats::Key, OffsetMoments> pairs;
  for (const auto &[key, a] : acc) {
    pairs[key] = {a.n, a.mean, std::max(0.0, a.m2 / a.n)};
  }
  return OffsetStats(window, std::move(pairs));
}

bool IsCollocation(const OffsetStats &stats, const std::string &w1,
                   const std::string &w2, long min_count) {
  const OffsetMoments *m = stats.Find(w1, w2);
  return m != nullptr && m->count >= min_count && m->variance < 2.0 &&
         std::abs(m->mean) < 1.5;
}

bool EditBreaksCollocation(const OffsetStats &stats, const PruneEdit &edit,
                           const DepTree &tree, long min_count) {
  const TokenSet &seq = edit.before;
  const int n = static_cast<int>(seq.size());
  for (int i = 0; i < n; ++i) {
    bool removed_i = Contains(edit.removed, seq[i]);
    for (int j = i + 1; j <= std::min(n - 1, i + stats.window()); ++j) {
      if (removed_i == Contains(edit.removed, seq[j])) continue;
      if (IsCollocation(stats, tree.token(seq[i]).form, tree.token(seq[j]).form,
                        min_count)) {
        return true;
      }
    }
  }
  return false;
}

}  // namespace prunekit
