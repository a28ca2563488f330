#ifndef PRUNEKIT_DEPTREE_H_
#define PRUNEKIT_DEPTREE_H_

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace prunekit {

// Sorted, duplicate-free list of 1-based token indices. Sorted order is the
// sentence's linear order.
using TokenSet = std::vector<int>;

struct Token {
  int index = 0;        // 1-based
  std::string form;
  int head = 0;         // 0 = root
  std::string deprel;
};

// A single sentence's basic dependency tree. Immutable once constructed; the
// constructor rejects anything that is not a rooted tree over 1..n.
class DepTree {
 public:
  DepTree(std::string sentence_id, std::vector<Token> tokens);

  const std::string &sentence_id() const { return sentence_id_; }
  const std::vector<Token> &tokens() const { return tokens_; }
  const std::string &text() const { return text_; }
  int size() const { return static_cast<int>(tokens_.size()); }
  int root() const { return root_; }

  // 1-based accessors.
  const Token &token(int index) const { return tokens_.at(index - 1); }
  int head(int index) const { return token(index).head; }
  const std::vector<int> &children(int index) const {
    return children_.at(index);
  }

  TokenSet AllTokens() const;

  // Vertex plus every descendant, restricted to `within`.
  TokenSet Descendants(int vertex, const TokenSet &within) const;

 private:
  std::string sentence_id_;
  std::vector<Token> tokens_;
  std::vector<std::vector<int>> children_;  // index 0 holds the root
  int root_ = 0;
  std::string text_;
};

// One subtree deletion.
struct PruneEdit {
  int pruned_vertex = 0;
  TokenSet removed;
  TokenSet before;
  TokenSet after;

  bool operator==(const PruneEdit &) const = default;
};

struct Compression {
  TokenSet kept;
  std::string text;
  std::vector<PruneEdit> chain;
};

// Reads CoNLL-U. Multiword-token ranges (1-2) and empty nodes (1.1) are
// skipped; only ID, FORM, HEAD and DEPREL are consumed. `# sent_id = X`
// comments name sentences, otherwise "<source>:<ordinal>" is used.
std::vector<DepTree> ParseConllu(std::istream &in,
                                 std::string_view source = "conllu");
std::vector<DepTree> ReadConlluFile(const std::string &path);

// Basic-layer CoNLL-U with unknown columns written as "_".
void WriteConllu(std::ostream &out, const DepTree &tree);

// Removes `vertex` and its descendants from `kept`.
PruneEdit Prune(const DepTree &tree, const TokenSet &kept, int vertex);

// Replays a sequence of pruned vertices starting from the full sentence.
Compression ApplyPrunes(const DepTree &tree, std::span<const int> vertices);

// Joins tokens with single spaces, except no space before closing punctuation
// and none after opening brackets/quotes.
std::string Detokenize(std::span<const std::string> forms);
std::string Linearize(const DepTree &tree, const TokenSet &kept);

// Inverse of Detokenize for text produced by it: whitespace split, then
// opening and closing punctuation peeled off each chunk.
std::vector<std::string> Tokenize(std::string_view text);

bool IsPunctuation(std::string_view form);

// Character count of `compression` over character count of `source`. Counts
// are in UTF-8 code points, spaces included.
double CompressionRate(std::string_view source, std::string_view compression);
size_t CharLength(std::string_view text);

// Every kept token's head is kept (the root's head 0 is always satisfied).
bool IsHeadClosed(const DepTree &tree, const TokenSet &kept);

// True iff some sequence of prunes turns the full sentence into `gold_kept`.
bool ReachableByPrunes(const DepTree &tree, const TokenSet &gold_kept);

// Greedy left-to-right exact-form alignment of a tokenized compression to
// the source. nullopt when some token cannot be matched.
std::optional<TokenSet> AlignCompression(const DepTree &tree,
                                         std::span<const std::string> forms);

// Sorted union/difference helpers.
TokenSet Difference(const TokenSet &a, const TokenSet &b);
bool Contains(const TokenSet &set, int index);

}  // namespace prunekit

#endif  // PRUNEKIT_DEPTREE_H_
