#include "prunekit/lm.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>

#include "prunekit/error.h"
#include "prunekit/util.h"

namespace prunekit {
namespace {

std::string JoinKey(std::span<const std::string> words) {
  std::string key;
  for (size_t i = 0; i < words.size(); ++i) {
    if (i) key += ' ';
    key += words[i];
  }
  return key;
}

std::string FormatLog10(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

bool ParseDouble(const std::string &s, double *out) {
  char *end = nullptr;
  *out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && !s.empty();
}

}  // namespace

NGramModel::NGramModel(std::vector<Table> tables) : tables_(std::move(tables)) {
  if (tables_.empty()) throw FormatError("n-gram model has no orders");
  for (size_t k = 1; k < tables_.size(); ++k) {
    for (const auto &[key, entry] : tables_[k]) {
      std::string prefix = key.substr(0, key.rfind(' '));
      if (!tables_[k - 1].contains(prefix)) {
        throw FormatError("\\" + std::to_string(k + 1) + "-grams: '" + key +
                          "' has no entry for its prefix '" + prefix + "'");
      }
    }
  }
  has_unk_ = tables_[0].contains(std::string(kUnk));
}

const NGramEntry *NGramModel::Find(std::span<const std::string> ngram) const {
  if (ngram.empty() || ngram.size() > tables_.size()) return nullptr;
  const Table &t = tables_[ngram.size() - 1];
  auto it = t.find(JoinKey(ngram));
  return it == t.end() ? nullptr : &it->second;
}

bool NGramModel::InVocab(const std::string &word) const {
  return tables_[0].contains(word);
}

double NGramModel::ConditionalLog10(std::span<const std::string> history,
                                    const std::string &word) const {
  auto map_word = [&](const std::string &w) -> std::string {
    return InVocab(w) ? w : std::string(kUnk);
  };
  const std::string target = map_word(word);
  if (!InVocab(target)) return kLog10Floor;

  size_t n = std::min<size_t>(order() - 1, history.size());
  std::vector<std::string> gram;
  gram.reserve(n + 1);
  for (size_t i = history.size() - n; i < history.size(); ++i) {
    gram.push_back(map_word(history[i]));
  }
  double backoff = 0.0;
  for (;;) {
    gram.push_back(target);
    if (const NGramEntry *e = Find(gram)) return e->log10_prob + backoff;
    gram.pop_back();
    // (context, word) unseen: pay the context's backoff and shorten it.
    if (const NGramEntry *ctx = Find(gram)) backoff += ctx->log10_backoff;
    gram.erase(gram.begin());
  }
}

double NGramModel::SentenceLogProb(std::span<const std::string> tokens) const {
  std::vector<std::string> seq;
  seq.reserve(tokens.size() + 2);
  seq.emplace_back(kBos);
  for (const std::string &t : tokens) seq.push_back(ToLower(t));
  seq.emplace_back(kEos);
  double log10_total = 0.0;
  for (size_t i = 1; i < seq.size(); ++i) {
    std::span<const std::string> history(seq.data(), i);
    log10_total += ConditionalLog10(history, seq[i]);
  }
  return log10_total * std::numbers::ln10;
}

void NGramModel::WriteArpa(std::ostream &out) const {
  out << "\n\\data\\\n";
  for (int n = 1; n <= order(); ++n) {
    out << "ngram " << n << "=" << count(n) << "\n";
  }
  for (int n = 1; n <= order(); ++n) {
    out << "\n\\" << n << "-grams:\n";
    std::vector<const Table::value_type *> rows;
    for (const auto &kv : table(n)) rows.push_back(&kv);
    std::sort(rows.begin(), rows.end(),
              [](auto *a, auto *b) { return a->first < b->first; });
    for (const auto *kv : rows) {
      std::string key = kv->first;
      std::replace(key.begin(), key.end(), ' ', '\t');
      out << FormatLog10(kv->second.log10_prob) << '\t' << key;
      if (n < order() && kv->second.log10_backoff != 0.0) {
        out << '\t' << FormatLog10(kv->second.log10_backoff);
      }
      out << "\n";
    }
  }
  out << "\n\\end\\\n";
}

NGramModel LoadArpa(std::istream &in) {
  std::string line;
  long lineno = 0;
  bool seen_data = false;
  std::vector<size_t> declared;
  std::vector<NGramModel::Table> tables;
  int current = 0;  // order being read, 0 = none
  bool seen_end = false;

  auto check_count = [&](int n) {
    if (n >= 1 && tables[n - 1].size() != declared[n - 1]) {
      throw FormatError("\\" + std::to_string(n) + "-grams: declared " +
                        std::to_string(declared[n - 1]) + " entries, found " +
                        std::to_string(tables[n - 1].size()));
    }
  };

  while (std::getline(in, line)) {
    ++lineno;
    std::string_view t = Trim(line);
    if (t.empty()) continue;
    if (!seen_data) {
      if (t == "\\data\\") seen_data = true;
      continue;
    }
    if (t == "\\end\\") {
      check_count(current);
      seen_end = true;
      break;
    }
    if (t.starts_with("ngram ")) {
      if (current != 0) throw FormatError("\\data\\: ngram count after n-gram section");
      size_t eq = t.find('=');
      int n = 0;
      long c = -1;
      if (eq == std::string_view::npos ||
          std::sscanf(std::string(t).c_str(), "ngram %d=%ld", &n, &c) != 2 ||
          n != static_cast<int>(declared.size()) + 1 || c < 0) {
        throw FormatError("\\data\\: bad count line '" + std::string(t) + "'");
      }
      declared.push_back(static_cast<size_t>(c));
      tables.emplace_back();
      continue;
    }
    if (t.front() == '\\') {
      int n = 0;
      if (std::sscanf(std::string(t).c_str(), "\\%d-grams:", &n) != 1 ||
          n != current + 1 || n > static_cast<int>(declared.size())) {
        throw FormatError("unexpected section header '" + std::string(t) +
                          "' at line " + std::to_string(lineno));
      }
      check_count(current);
      current = n;
      continue;
    }
    if (current == 0) {
      throw FormatError("\\data\\: unexpected line " + std::to_string(lineno));
    }
    std::vector<std::string> fields = SplitWhitespace(t);
    const size_t n = static_cast<size_t>(current);
    if (fields.size() != n + 1 && fields.size() != n + 2) {
      throw FormatError("\\" + std::to_string(n) + "-grams: malformed entry at line " +
                        std::to_string(lineno));
    }
    NGramEntry e;
    if (!ParseDouble(fields[0], &e.log10_prob) ||
        (fields.size() == n + 2 && !ParseDouble(fields[n + 1], &e.log10_backoff))) {
      throw FormatError("\\" + std::to_string(n) + "-grams: bad number at line " +
                        std::to_string(lineno));
    }
    std::span<const std::string> words(fields.data() + 1, n);
    tables[n - 1][JoinKey(words)] = e;
  }
  if (!seen_data) throw FormatError("\\data\\ section header missing");
  if (!seen_end) throw FormatError("\\end\\ marker missing");
  if (current != static_cast<int>(declared.size())) {
    throw FormatError("\\" + std::to_string(current + 1) + "-grams: section missing");
  }
  if (tables.empty()) throw FormatError("\\data\\: no ngram counts declared");
  return NGramModel(std::move(tables));
}

NGramModel LoadArpaFile(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open ARPA file " + path);
  return LoadArpa(in);
}

NGramModel TrainNGram(const std::vector<std::vector<std::string>> &corpus,
                      int order, double discount) {
  if (order < 1 || order > 5) {
    throw InvalidInput("n-gram order must be in 1..5, got " + std::to_string(order));
  }
  if (!(discount > 0.0 && discount < 1.0)) throw InvalidInput("discount must be in (0, 1)");

  // counts[k]: (k+1)-gram -> count, over every predicted position.
  std::vector<std::unordered_map<std::string, double>> counts(order);
  size_t sentences = 0;
  for (const auto &sentence : corpus) {
    if (sentence.empty()) continue;
    ++sentences;
    std::vector<std::string> seq;
    seq.emplace_back(kBos);
    for (const auto &w : sentence) seq.push_back(ToLower(w));
    seq.emplace_back(kEos);
    for (size_t j = 1; j < seq.size(); ++j) {
      for (size_t k = 1; k <= static_cast<size_t>(order) && k <= j + 1; ++k) {
        std::span<const std::string> gram(seq.data() + j + 1 - k, k);
        counts[k - 1][JoinKey(gram)] += 1.0;
      }
    }
  }
  if (sentences == 0) throw InvalidInput("cannot train an n-gram model on an empty corpus");

  // Context totals and distinct continuation types; "" is the unigram context.
  struct ContextStats {
    double total = 0.0;
    double types = 0.0;
  };
  std::vector<std::unordered_map<std::string, ContextStats>> contexts(order);
  for (int k = 0; k < order; ++k) {
    for (const auto &[key, c] : counts[k]) {
      size_t sp = key.rfind(' ');
      std::string ctx = sp == std::string::npos ? "" : key.substr(0, sp);
      ContextStats &s = contexts[k][ctx];
      s.total += c;
      s.types += 1.0;
    }
  }

  std::vector<NGramModel::Table> tables(order);
  // Unigrams: discounted mass spread uniformly over seen words plus <unk>.
  const ContextStats &uni = contexts[0][""];
  const std::string unk(kUnk);
  double vocab = uni.types + (counts[0].contains(unk) ? 0.0 : 1.0);
  double uniform = discount * uni.types / uni.total / vocab;
  std::unordered_map<std::string, double> lower;  // full prob of current level
  for (const auto &[w, c] : counts[0]) {
    lower[w] = (c - discount) / uni.total + uniform;
  }
  if (!lower.contains(unk)) lower[unk] = uniform;
  for (const auto &[w, p] : lower) tables[0][w].log10_prob = std::log10(p);
  tables[0][std::string(kBos)].log10_prob = kLog10Floor;

  for (int k = 1; k < order; ++k) {
    std::unordered_map<std::string, double> level;
    for (const auto &[key, c] : counts[k]) {
      size_t sp = key.rfind(' ');
      std::string ctx = key.substr(0, sp);
      size_t first = key.find(' ');
      std::string suffix = key.substr(first + 1);
      const ContextStats &s = contexts[k].at(ctx);
      double gamma = discount * s.types / s.total;
      double p = (c - discount) / s.total + gamma * lower.at(suffix);
      level[key] = p;
      tables[k][key].log10_prob = std::log10(p);
    }
    lower = std::move(level);
  }

  // Backoff weight of every stored context = its interpolation weight.
  for (int k = 1; k < order; ++k) {
    for (const auto &[ctx, s] : contexts[k]) {
      auto it = tables[k - 1].find(ctx);
      if (it == tables[k - 1].end()) continue;
      it->second.log10_backoff = std::log10(discount * s.types / s.total);
    }
  }
  return NGramModel(std::move(tables));
}

std::vector<std::vector<std::string>> ReadTokenizedCorpus(std::istream &in) {
  std::vector<std::vector<std::string>> corpus;
  std::string line;
  while (std::getline(in, line)) {
    auto tokens = SplitWhitespace(line);
    if (!tokens.empty()) corpus.push_back(std::move(tokens));
  }
  return corpus;
}

std::vector<std::vector<std::string>> ReadTokenizedCorpusFile(
    const std::string &path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open corpus file " + path);
  return ReadTokenizedCorpus(in);
}

UnigramModel::UnigramModel(std::map<std::string, double> probs, double unk_prob) {
  double total = unk_prob;
  for (const auto &[w, p] : probs) {
    if (!(p > 0.0)) throw InvalidInput("unigram probability of '" + w + "' is not positive");
    total += p;
  }
  if (!(unk_prob > 0.0)) throw InvalidInput("unknown-word probability must be positive");
  for (const auto &[w, p] : probs) log_probs_[ToLower(w)] = std::log(p / total);
  unk_log_prob_ = std::log(unk_prob / total);
}

UnigramModel UnigramModel::FromNGram(const NGramModel &model) {
  std::map<std::string, double> probs;
  double unk = 0.0;
  double smallest = 1.0;
  for (const auto &[w, e] : model.table(1)) {
    if (w == kBos || w == kEos) continue;
    double p = std::pow(10.0, e.log10_prob);
    if (w == kUnk) {
      unk = p;
    } else {
      probs[w] = p;
      smallest = std::min(smallest, p);
    }
  }
  if (probs.empty()) throw InvalidInput("n-gram model has no ordinary unigrams");
  return UnigramModel(std::move(probs), unk > 0.0 ? unk : smallest);
}

double UnigramModel::LogProb(const std::string &word) const {
  auto it = log_probs_.find(ToLower(word));
  return it == log_probs_.end() ? unk_log_prob_ : it->second;
}

double UnigramModel::SentenceLogProb(std::span<const std::string> tokens) const {
  double total = 0.0;
  for (const auto &t : tokens) total += LogProb(t);
  return total;
}

double NormLp(const NGramModel &model, const UnigramModel &unigram,
              std::span<const std::string> tokens) {
  if (tokens.empty()) throw InvalidInput("NormLP of an empty sentence");
  double lp_u = unigram.SentenceLogProb(tokens);
  if (std::abs(lp_u) < 1e-9) {
    throw UndefinedScore("NormLP undefined: unigram log-probability is zero");
  }
  return -model.SentenceLogProb(tokens) / lp_u;
}

double NormLp(const LmBundle &lm, std::span<const std::string> tokens) {
  return NormLp(lm.ngram, lm.unigram, tokens);
}

double Slor(const NGramModel &model, const UnigramModel &unigram,
            std::span<const std::string> tokens) {
  if (tokens.empty()) throw InvalidInput("SLOR of an empty sentence");
  return (model.SentenceLogProb(tokens) - unigram.SentenceLogProb(tokens)) /
         static_cast<double>(tokens.size());
}

}  // namespace prunekit
