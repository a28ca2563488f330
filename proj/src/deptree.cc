#include "prunekit/deptree.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>

#include "prunekit/error.h"
#include "prunekit/util.h"

namespace prunekit {
namespace {

const std::set<std::string, std::less<>> &NoSpaceBefore() {
  static const std::set<std::string, std::less<>> kSet = {
      ".", ",", ";", ":", "!", "?", "%", ")", "''"};
  return kSet;
}

const std::set<std::string, std::less<>> &NoSpaceAfter() {
  static const std::set<std::string, std::less<>> kSet = {"(", "``"};
  return kSet;
}

bool ParseInt(std::string_view s, int *out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), *out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

DepTree::DepTree(std::string sentence_id, std::vector<Token> tokens)
    : sentence_id_(std::move(sentence_id)), tokens_(std::move(tokens)) {
  const int n = size();
  if (n == 0) throw StructuralError("sentence " + sentence_id_ + ": no tokens");
  children_.assign(n + 1, {});
  int roots = 0;
  for (int i = 0; i < n; ++i) {
    const Token &t = tokens_[i];
    if (t.index != i + 1) {
      throw StructuralError("sentence " + sentence_id_ +
                            ": token indices are not contiguous from 1");
    }
    if (t.form.empty()) {
      throw StructuralError("sentence " + sentence_id_ + ": empty form at token " +
                            std::to_string(t.index));
    }
    if (t.head < 0 || t.head > n) {
      throw StructuralError("sentence " + sentence_id_ + ": head " +
                            std::to_string(t.head) + " out of range at token " +
                            std::to_string(t.index));
    }
    if (t.head == t.index) {
      throw StructuralError("sentence " + sentence_id_ + ": token " +
                            std::to_string(t.index) + " is its own head");
    }
    if (t.head == 0) {
      ++roots;
      root_ = t.index;
    }
    children_[t.head].push_back(t.index);
  }
  if (roots != 1) {
    throw StructuralError("sentence " + sentence_id_ + ": expected one root, found " +
                          std::to_string(roots));
  }
  // Every token must reach the root without revisiting a vertex.
  std::vector<int> state(n + 1, 0);  // 0 unvisited, 1 on path, 2 done
  for (int start = 1; start <= n; ++start) {
    std::vector<int> path;
    int v = start;
    while (v != 0 && state[v] == 0) {
      state[v] = 1;
      path.push_back(v);
      v = tokens_[v - 1].head;
    }
    if (v != 0 && state[v] == 1) {
      throw StructuralError("sentence " + sentence_id_ +
                            ": head graph has a cycle through token " +
                            std::to_string(v));
    }
    for (int p : path) state[p] = 2;
  }
  text_ = Linearize(*this, AllTokens());
}

TokenSet DepTree::AllTokens() const {
  TokenSet all(size());
  for (int i = 0; i < size(); ++i) all[i] = i + 1;
  return all;
}

TokenSet DepTree::Descendants(int vertex, const TokenSet &within) const {
  TokenSet out;
  if (!Contains(within, vertex)) return out;
  std::vector<int> stack = {vertex};
  while (!stack.empty()) {
    int v = stack.back();
    stack.pop_back();
    out.push_back(v);
    for (int c : children_.at(v)) {
      if (Contains(within, c)) stack.push_back(c);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<DepTree> ParseConllu(std::istream &in, std::string_view source) {
  std::vector<DepTree> trees;
  std::vector<Token> tokens;
  std::string sent_id;
  std::string line;
  long lineno = 0;
  long block_start = 0;
  bool in_block = false;

  auto flush = [&] {
    if (!in_block) return;
    if (sent_id.empty()) {
      sent_id = std::string(source) + ":" + std::to_string(trees.size() + 1);
    }
    if (tokens.empty()) {
      throw ParseError("sentence " + sent_id + " has no token lines", block_start);
    }
    trees.emplace_back(sent_id, std::move(tokens));
    tokens.clear();
    sent_id.clear();
    in_block = false;
  };

  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (Trim(line).empty()) {
      flush();
      continue;
    }
    if (!in_block) {
      in_block = true;
      block_start = lineno;
    }
    if (line[0] == '#') {
      std::string_view body = Trim(std::string_view(line).substr(1));
      if (body.starts_with("sent_id")) {
        size_t eq = body.find('=');
        if (eq != std::string_view::npos) sent_id = std::string(Trim(body.substr(eq + 1)));
      }
      continue;
    }
    std::vector<std::string> cols = Split(line, '\t');
    if (cols.size() != 10) {
      throw ParseError("expected 10 tab-separated columns, found " +
                           std::to_string(cols.size()),
                       lineno);
    }
    if (cols[0].find('-') != std::string::npos ||
        cols[0].find('.') != std::string::npos) {
      continue;  // multiword token range or empty node
    }
    Token t;
    if (!ParseInt(cols[0], &t.index) || t.index < 1) {
      throw ParseError("bad token id '" + cols[0] + "'", lineno);
    }
    if (!ParseInt(cols[6], &t.head) || t.head < 0) {
      throw ParseError("bad head '" + cols[6] + "'", lineno);
    }
    t.form = cols[1];
    t.deprel = cols[7];
    if (t.form.empty()) throw ParseError("empty form", lineno);
    tokens.push_back(std::move(t));
  }
  flush();
  return trees;
}

std::vector<DepTree> ReadConlluFile(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open CoNLL-U file " + path);
  return ParseConllu(in, path);
}

void WriteConllu(std::ostream &out, const DepTree &tree) {
  out << "# sent_id = " << tree.sentence_id() << "\n";
  out << "# text = " << tree.text() << "\n";
  for (const Token &t : tree.tokens()) {
    out << t.index << '\t' << t.form << "\t_\t_\t_\t_\t" << t.head << '\t'
        << t.deprel << "\t_\t_\n";
  }
  out << "\n";
}

PruneEdit Prune(const DepTree &tree, const TokenSet &kept, int vertex) {
  if (vertex == tree.root()) {
    throw InvalidOperation("cannot prune the root (token " +
                           std::to_string(vertex) + ") of " + tree.sentence_id());
  }
  if (!Contains(kept, vertex)) {
    throw InvalidOperation("token " + std::to_string(vertex) +
                           " is not in the kept set of " + tree.sentence_id());
  }
  PruneEdit edit;
  edit.pruned_vertex = vertex;
  edit.before = kept;
  edit.removed = tree.Descendants(vertex, kept);
  edit.after = Difference(kept, edit.removed);
  return edit;
}

Compression ApplyPrunes(const DepTree &tree, std::span<const int> vertices) {
  Compression c;
  c.kept = tree.AllTokens();
  for (int v : vertices) {
    c.chain.push_back(Prune(tree, c.kept, v));
    c.kept = c.chain.back().after;
  }
  c.text = Linearize(tree, c.kept);
  return c;
}

std::string Detokenize(std::span<const std::string> forms) {
  std::string out;
  bool suppress_next = true;
  for (const std::string &f : forms) {
    if (!suppress_next && !NoSpaceBefore().contains(f)) out += ' ';
    out += f;
    suppress_next = NoSpaceAfter().contains(f);
  }
  return out;
}

std::string Linearize(const DepTree &tree, const TokenSet &kept) {
  std::vector<std::string> forms;
  forms.reserve(kept.size());
  for (int i : kept) forms.push_back(tree.token(i).form);
  return Detokenize(forms);
}

std::vector<std::string> Tokenize(std::string_view text) {
  std::vector<std::string> out;
  for (const std::string &chunk : SplitWhitespace(text)) {
    std::string_view rest = chunk;
    while (rest.size() > 1) {
      if (rest.starts_with("``") && rest.size() > 2) {
        out.emplace_back("``");
        rest.remove_prefix(2);
      } else if (rest.front() == '(') {
        out.emplace_back("(");
        rest.remove_prefix(1);
      } else {
        break;
      }
    }
    std::vector<std::string> tail;
    while (rest.size() > 1) {
      if (rest.ends_with("''") && rest.size() > 2) {
        tail.emplace_back("''");
        rest.remove_suffix(2);
        continue;
      }
      std::string last(1, rest.back());
      if (!NoSpaceBefore().contains(last)) break;
      // Keep the final period of abbreviations such as "U.S.".
      if (last == "." && rest.substr(0, rest.size() - 1).find('.') !=
                             std::string_view::npos) {
        break;
      }
      tail.push_back(last);
      rest.remove_suffix(1);
    }
    if (!rest.empty()) out.emplace_back(rest);
    out.insert(out.end(), tail.rbegin(), tail.rend());
  }
  return out;
}

bool IsPunctuation(std::string_view form) {
  if (form.empty()) return false;
  for (unsigned char c : form) {
    if (c >= 0x80 || !std::ispunct(c)) return false;
  }
  return true;
}

size_t CharLength(std::string_view text) {
  size_t n = 0;
  for (unsigned char c : text) {
    if ((c & 0xC0) != 0x80) ++n;
  }
  return n;
}

double CompressionRate(std::string_view source, std::string_view compression) {
  if (source.empty()) throw InvalidInput("compression rate of an empty source");
  return static_cast<double>(CharLength(compression)) /
         static_cast<double>(CharLength(source));
}

bool IsHeadClosed(const DepTree &tree, const TokenSet &kept) {
  for (int i : kept) {
    int h = tree.head(i);
    if (h != 0 && !Contains(kept, h)) return false;
  }
  return true;
}

bool ReachableByPrunes(const DepTree &tree, const TokenSet &gold_kept) {
  return Contains(gold_kept, tree.root()) && IsHeadClosed(tree, gold_kept);
}

std::optional<TokenSet> AlignCompression(const DepTree &tree,
                                         std::span<const std::string> forms) {
  TokenSet kept;
  int pos = 1;
  for (const std::string &f : forms) {
    while (pos <= tree.size() && tree.token(pos).form != f) ++pos;
    if (pos > tree.size()) return std::nullopt;
    kept.push_back(pos++);
  }
  if (kept.empty()) return std::nullopt;
  return kept;
}

TokenSet Difference(const TokenSet &a, const TokenSet &b) {
  TokenSet out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(),
                      std::back_inserter(out));
  return out;
}

bool Contains(const TokenSet &set, int index) {
  return std::binary_search(set.begin(), set.end(), index);
}

}  // namespace prunekit
