#ifndef PRUNEKIT_LM_H_
#define PRUNEKIT_LM_H_

#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace prunekit {

inline constexpr std::string_view kBos = "<s>";
inline constexpr std::string_view kEos = "</s>";
inline constexpr std::string_view kUnk = "<unk>";

// Log10 value used for <s> and for OOV words when a model has no <unk>.
inline constexpr double kLog10Floor = -99.0;

struct NGramEntry {
  double log10_prob = 0.0;
  double log10_backoff = 0.0;
};

// Backoff n-gram model in ARPA form. Keys are lowercased tokens joined with
// single spaces. Values are kept in log10 exactly as read; scoring converts to
// natural log.
class NGramModel {
 public:
  using Table = std::unordered_map<std::string, NGramEntry>;

  // tables[k] holds the (k+1)-grams. Throws FormatError if some stored
  // n-gram's (n-1)-prefix is missing.
  explicit NGramModel(std::vector<Table> tables);

  int order() const { return static_cast<int>(tables_.size()); }
  size_t count(int n) const { return tables_.at(n - 1).size(); }
  const Table &table(int n) const { return tables_.at(n - 1); }

  const NGramEntry *Find(std::span<const std::string> ngram) const;
  bool InVocab(const std::string &word) const;
  bool has_unk() const { return has_unk_; }

  // log10 p(word | history) with standard backoff. Both arguments must
  // already be lowercased; OOV words map to <unk>.
  double ConditionalLog10(std::span<const std::string> history,
                          const std::string &word) const;

  // Natural-log probability of a token sequence with <s>/</s> added.
  double SentenceLogProb(std::span<const std::string> tokens) const;

  // Full-precision ARPA text, n-grams sorted within each order.
  void WriteArpa(std::ostream &out) const;

 private:
  std::vector<Table> tables_;
  bool has_unk_ = false;
};

NGramModel LoadArpa(std::istream &in);
NGramModel LoadArpaFile(const std::string &path);

// Interpolated absolute discounting over lowercased, boundary-padded
// sentences. Unigrams interpolate with a uniform distribution over the seen
// vocabulary plus <unk>, so <unk> always has positive mass.
NGramModel TrainNGram(const std::vector<std::vector<std::string>> &corpus,
                      int order, double discount = 0.75);

// One whitespace-tokenized sentence per non-blank line.
std::vector<std::vector<std::string>> ReadTokenizedCorpus(std::istream &in);
std::vector<std::vector<std::string>> ReadTokenizedCorpusFile(
    const std::string &path);

// Context-free word distribution used as the NormLP denominator.
class UnigramModel {
 public:
  // Takes plain probabilities, renormalizes them so that the words plus <unk>
  // sum to one and stores natural logs.
  UnigramModel(std::map<std::string, double> probs, double unk_prob);

  // The n-gram model's unigram level without <s> and </s>, renormalized.
  // Models without <unk> get the smallest word probability for it.
  static UnigramModel FromNGram(const NGramModel &model);

  double LogProb(const std::string &word) const;  // lowercases
  double SentenceLogProb(std::span<const std::string> tokens) const;
  double unk_log_prob() const { return unk_log_prob_; }
  const std::unordered_map<std::string, double> &log_probs() const {
    return log_probs_;
  }

 private:
  std::unordered_map<std::string, double> log_probs_;
  double unk_log_prob_ = 0.0;
};

struct LmBundle {
  NGramModel ngram;
  UnigramModel unigram;
};

// -log p_m / log p_u. Boundary symbols enter p_m only. Throws
// UndefinedScore when |log p_u| < 1e-9.
double NormLp(const NGramModel &model, const UnigramModel &unigram,
              std::span<const std::string> tokens);
double NormLp(const LmBundle &lm, std::span<const std::string> tokens);

// (log p_m - log p_u) / token count.
double Slor(const NGramModel &model, const UnigramModel &unigram,
            std::span<const std::string> tokens);

}  // namespace prunekit

#endif  // PRUNEKIT_LM_H_
