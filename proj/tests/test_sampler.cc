#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "prunekit/sampler.h"
#include "test_support.h"

using namespace prunekit;

namespace {

FeatureExtractor &Fx() {
  static FeatureExtractor fx(testdata::FixtureLm(), testdata::FixtureCollocations());
  return fx;
}

const DepTree &News() {
  static const DepTree t = ReadConlluFile(testdata::Path("news.conllu")).front();
  return t;
}

AcceptabilityModel HandModel() {
  return AcceptabilityModel({{"dep:det", -1.0},
                             {"dep:amod", 0.8},
                             {"dep:nmod", 0.3},
                             {"dep:nmod:tmod", 1.2},
                             {"dep:punct", -0.4},
                             {"dep:acl", 0.5},
                             {"dep:compound", 0.2},
                             {"dep:case", -2.0},
                             {"lm:norm_lp_c", -0.5},
                             {"edit:removes_end", -1.0}},
                            {});
}

// Root "aaaa" with an amod and a det leaf; one prune always meets B = 8.
DepTree TwoLeafTree() {
  return DepTree("two", {{1, "bb", 2, "amod"}, {2, "aaaa", 0, "root"}, {3, "cc", 2, "det"}});
}

CompressionCandidate Fake(TokenSet kept, std::vector<int> chain, double a_sum, size_t len,
                          std::string text) {
  CompressionCandidate c;
  c.kept = std::move(kept);
  for (int v : chain) c.chain.push_back(PruneEdit{v, {}, {}, {}});
  c.score.a_sum = a_sum;
  c.char_length = len;
  c.text = std::move(text);
  return c;
}

}  // namespace

TEST_CASE("candidate edits") {
  AcceptabilityModel m = HandModel();
  EditScorer scorer(Fx(), m);
  DepTree t("six", {{1, "the", 2, "det"},
                    {2, "dog", 3, "nsubj"},
                    {3, "barked", 0, "root"},
                    {4, "very", 5, "advmod"},
                    {5, "loudly", 3, "advmod"},
                    {6, ".", 3, "punct"}});
  const double src = scorer.SourceNormLp(t);
  auto edits = CandidateEdits(t, t.AllTokens(), scorer, src);
  REQUIRE(edits.size() == 5);
  for (const CandidateEdit &e : edits) {
    const double p = m.Predict(Fx().Extract(t, Prune(t, t.AllTokens(), e.vertex), std::nullopt, src));
    CHECK(e.probability == doctest::Approx(p).epsilon(1e-14));
    CHECK(e.log_probability == doctest::Approx(std::log(p)).epsilon(1e-12));
  }
  CHECK(CandidateEdits(t, TokenSet{3}, scorer, src).empty());
}

TEST_CASE("first-edit frequencies match p_v / Z") {
  AcceptabilityModel m({{"dep:amod", std::log(1.5)}, {"dep:det", std::log(0.25)}}, {});
  EditScorer scorer(Fx(), m);
  DepTree t = TwoLeafTree();
  auto edits = CandidateEdits(t, t.AllTokens(), scorer, scorer.SourceNormLp(t));
  REQUIRE(edits.size() == 2);
  CHECK(edits[0].probability == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(edits[1].probability == doctest::Approx(0.2).epsilon(1e-12));
  const int draws = 10000;
  int first = 0;
  for (int s = 0; s < draws; ++s) {
    CompressionCandidate c = SampleChain(t, BrevityBudget(8), scorer, static_cast<uint64_t>(s));
    REQUIRE(c.chain.size() == 1);
    first += c.chain[0].pruned_vertex == 1;
  }
  const double e1 = 0.75 * draws, e2 = 0.25 * draws;
  const double chi2 = (first - e1) * (first - e1) / e1 +
                      ((draws - first) - e2) * ((draws - first) - e2) / e2;
  CHECK(chi2 < 6.635);
}

TEST_CASE("sample chain") {
  AcceptabilityModel m = HandModel();
  EditScorer scorer(Fx(), m);
  const DepTree &t = News();
  SUBCASE("source already within budget") {
    CompressionCandidate c = SampleChain(t, BrevityBudget(200), scorer, 4);
    CHECK(c.chain.empty());
    CHECK(c.kept == t.AllTokens());
    CHECK(c.score.a_sum == 0.0);
  }
  SUBCASE("deterministic in the seed") {
    CompressionCandidate a = SampleChain(t, BrevityBudget(70), scorer, 99);
    CompressionCandidate b = SampleChain(t, BrevityBudget(70), scorer, 99);
    CHECK(a.kept == b.kept);
    CHECK(a.text == b.text);
    CHECK(a.PrunedVertices() == b.PrunedVertices());
    CHECK(a.score.a_sum == b.score.a_sum);
    CHECK(CandidateJson(t, a, std::nullopt) == CandidateJson(t, b, std::nullopt));
  }
  SUBCASE("stopping rule") {
    for (uint64_t s = 0; s < 200; ++s) {
      const int b = 50 + static_cast<int>(s % 51);
      CompressionCandidate c = SampleChain(t, BrevityBudget(b), scorer, s);
      CHECK(c.char_length < static_cast<size_t>(b));
      CHECK(c.char_length == CharLength(c.text));
      REQUIRE_FALSE(c.chain.empty());
      CHECK(CharLength(Linearize(t, c.chain.back().before)) >= static_cast<size_t>(b));
      CHECK(ApplyPrunes(t, c.PrunedVertices()).kept == c.kept);
    }
  }
  SUBCASE("unreachable budget carries the partial candidate") {
    try {
      SampleChain(t, BrevityBudget(3), scorer, 1);
      FAIL("expected BudgetUnreachable");
    } catch (const BudgetUnreachable &e) {
      CHECK(e.partial().kept == TokenSet{t.root()});
      CHECK(e.kind() == ErrorKind::kInfeasible);
    }
  }
  CHECK_THROWS_AS(BrevityBudget(0), InvalidInput);
}

TEST_CASE("pool generation") {
  AcceptabilityModel m = HandModel();
  EditScorer scorer(Fx(), m);
  SUBCASE("singleton pool") {
    PoolOptions o;
    o.samples = 1;
    CHECK(GeneratePool(News(), scorer, o).size() == 1);
  }
  SUBCASE("every kept set on a small tree is head-closed") {
    DepTree t("five", {{1, "Alpha", 2, "nsubj"},
                       {2, "bravoed", 0, "root"},
                       {3, "the", 4, "det"},
                       {4, "charlie", 2, "dobj"},
                       {5, "deltas", 4, "amod"}});
    PoolOptions o;
    o.samples = 300;
    o.budget_min = 5;
    o.budget_max = 20;
    for (const auto &c : GeneratePool(t, scorer, o)) {
      CHECK(Contains(c.kept, t.root()));
      CHECK(IsHeadClosed(t, c.kept));
      CHECK(c.budget >= 5);
      CHECK(c.budget <= 20);
      if (!c.budget_unreachable) CHECK(c.char_length < static_cast<size_t>(c.budget));
    }
  }
  SUBCASE("news sentence yields hundreds of distinct compressions") {
    PoolOptions o;
    o.seed = 7;
    auto pool = GeneratePool(News(), scorer, o);
    CHECK(pool.size() == 1000);
    auto distinct = Dedup(pool);
    MESSAGE("distinct candidates: " << distinct.size());
    CHECK(distinct.size() >= 100);
    CHECK(distinct.size() <= 1000);
    std::set<TokenSet> kept;
    for (const auto &c : distinct) CHECK(kept.insert(c.kept).second);
    o.threads = 1;
    auto serial = GeneratePool(News(), scorer, o);
    for (size_t i = 0; i < pool.size(); ++i) CHECK(serial[i].kept == pool[i].kept);
  }
}

TEST_CASE("dedup") {
  SUBCASE("keeps the better duplicate") {
    auto out = Dedup({Fake({1, 2}, {3}, -2.5, 3, "x"), Fake({1, 2}, {4, 3}, -1.0, 3, "x")});
    REQUIRE(out.size() == 1);
    CHECK(out[0].score.a_sum == -1.0);
  }
  SUBCASE("distinct pool unchanged") {
    std::vector<CompressionCandidate> pool = {Fake({1}, {2}, -1, 1, "a"), Fake({1, 2}, {3}, -2, 2, "b")};
    auto out = Dedup(pool);
    REQUIRE(out.size() == 2);
    CHECK(out[0].kept == pool[0].kept);
    CHECK(out[1].kept == pool[1].kept);
  }
  SUBCASE("equals brute-force group-by and argmax") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<CompressionCandidate> pool;
      const int n = 1 + static_cast<int>(rng() % 40);
      for (int i = 0; i < n; ++i) {
        const int k = static_cast<int>(rng() % 6);
        TokenSet kept;
        for (int j = 1; j <= 3; ++j) {
          if (k & (1 << (j - 1))) kept.push_back(j);
        }
        // Identical chains score identically, as they do in a real pool.
        std::vector<int> chain = {k, static_cast<int>(rng() % 3)};
        pool.push_back(Fake(kept, chain, -static_cast<double>((7 * chain[1] + k) % 5), kept.size(), ""));
      }
      std::vector<TokenSet> order;
      std::map<TokenSet, size_t> best;
      for (size_t i = 0; i < pool.size(); ++i) {
        auto it = best.find(pool[i].kept);
        if (it == best.end()) {
          order.push_back(pool[i].kept);
          best[pool[i].kept] = i;
        } else if (pool[i].score.a_sum > pool[it->second].score.a_sum) {
          it->second = i;
        }
      }
      auto out = Dedup(pool);
      REQUIRE(out.size() == order.size());
      for (size_t i = 0; i < order.size(); ++i) {
        CHECK(out[i].kept == order[i]);
        CHECK(out[i].score.a_sum == pool[best[order[i]]].score.a_sum);
      }
    }
  }
}

TEST_CASE("importance") {
  const DepTree &t = News();
  const TokenSet alt2 = {1, 2, 4, 12};
  CHECK(Importance(t, alt2, {{"Afghanistan"}}) == 0);
  CHECK(Importance(t, alt2, {{"tuesday"}}) == 1);
  CHECK(Importance(t, alt2, {{"Afghanistan", "PAKISTAN"}}) == 1);
  CHECK(Importance(t, t.AllTokens(), {{"Afghan"}}) == 0);
  CHECK_THROWS_AS(Importance(t, alt2, {{}}), InvalidInput);
}

TEST_CASE("select") {
  AcceptabilityModel m = HandModel();
  EditScorer scorer(Fx(), m);
  const DepTree &t = News();
  auto pool = Dedup(GeneratePool(t, scorer, PoolOptions{}));
  pool.push_back(IdentityCandidate(t, scorer));
  SUBCASE("budget above the source picks the identity") {
    const CompressionCandidate &c = Select(t, pool, BrevityBudget(500), std::nullopt);
    CHECK(c.chain.empty());
    CHECK(c.text == t.text());
  }
  SUBCASE("brevity and importance") {
    ImportanceQuery q{{"Afghanistan"}};
    const CompressionCandidate &c = Select(t, pool, BrevityBudget(84), q);
    CHECK(c.char_length <= 84);
    CHECK(Importance(t, c.kept, q) == 1);
  }
  SUBCASE("equals brute-force filter and argmax") {
    for (int b : {40, 55, 70, 84, 100}) {
      const CompressionCandidate *expect = nullptr;
      for (const auto &c : pool) {
        if (c.char_length > static_cast<size_t>(b)) continue;
        if (!expect || c.score.a_sum > expect->score.a_sum ||
            (c.score.a_sum == expect->score.a_sum &&
             (c.char_length < expect->char_length ||
              (c.char_length == expect->char_length && c.text < expect->text)))) {
          expect = &c;
        }
      }
      if (!expect) {
        CHECK_THROWS_AS(Select(t, pool, BrevityBudget(b), std::nullopt), NoFeasibleCandidate);
        continue;
      }
      CHECK(&Select(t, pool, BrevityBudget(b), std::nullopt) == expect);
    }
  }
  SUBCASE("ties go to the shorter text") {
    std::vector<CompressionCandidate> tied = {Fake({2}, {1}, -1, 9, "zzzzzzzzz"),
                                              Fake({1, 2}, {3}, -1, 5, "bbbbb"),
                                              Fake({2, 3}, {4}, -1, 5, "aaaaa")};
    CHECK(Select(t, tied, BrevityBudget(10), std::nullopt).text == "aaaaa");
    RankCandidates(tied);
    CHECK(tied[0].text == "aaaaa");
    CHECK(tied[2].text == "zzzzzzzzz");
  }
  CHECK_THROWS_AS(Select(t, pool, BrevityBudget(1), std::nullopt), NoFeasibleCandidate);
}
