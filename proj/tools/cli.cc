#include "cli.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "prunekit/acceptability.h"
#include "prunekit/collocations.h"
#include "prunekit/corpus.h"
#include "prunekit/deptree.h"
#include "prunekit/error.h"
#include "prunekit/evalkit.h"
#include "prunekit/features.h"
#include "prunekit/lm.h"
#include "prunekit/model.h"
#include "prunekit/sampler.h"
#include "prunekit/util.h"

namespace prunekit::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Output helpers

std::string Fixed(double v, int digits = 3) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

// Columns padded to their widest cell; numbers are expected pre-formatted.
class TextTable {
 public:
  explicit TextTable(std::vector<std::string> header) : rows_{std::move(header)} {}
  void Add(std::vector<std::string> row) { rows_.push_back(std::move(row)); }

  void Print(std::ostream &out) const {
    std::vector<size_t> width;
    for (const auto &row : rows_) {
      width.resize(std::max(width.size(), row.size()), 0);
      for (size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
    }
    for (size_t r = 0; r < rows_.size(); ++r) {
      std::string line;
      for (size_t c = 0; c < rows_[r].size(); ++c) {
        std::string cell = rows_[r][c];
        if (c + 1 < rows_[r].size()) cell.resize(width[c], ' ');
        line += (c ? "  " : "") + cell;
      }
      out << line << '\n';
      if (r == 0) {
        size_t total = 0;
        for (size_t c = 0; c < width.size(); ++c) total += width[c] + (c ? 2 : 0);
        out << std::string(total, '-') << '\n';
      }
    }
  }

 private:
  std::vector<std::vector<std::string>> rows_;
};

void WriteText(const fs::path &path, const std::string &content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InvalidInput("cannot write " + path.string());
  f << content;
  if (!f) throw InvalidInput("failed writing " + path.string());
}

// ---------------------------------------------------------------------------
// Options shared by every subcommand

struct Common {
  uint64_t seed = 1;
  unsigned threads = 0;
  std::string out_dir = ".";
  bool json_stdout = false;
  std::string config_hash;
};

void AddCommon(CLI::App *sub, Common &c) {
  sub->add_option("--seed", c.seed, "Base seed for every random choice")->capture_default_str();
  sub->add_option("--threads", c.threads, "Worker threads, 0 = all cores")->capture_default_str();
  sub->add_option("--out-dir", c.out_dir, "Directory for report files")->capture_default_str();
  sub->add_flag("--json", c.json_stdout, "Print the JSON report instead of text");
}

// Options that only name where results go or how fast they are computed do
// not change results, so they stay out of the hash.
const std::set<std::string> &UnhashedOptions() {
  static const std::set<std::string> kSet = {"--help",  "--threads", "--out-dir", "--json",
                                             "--model-out", "--output"};
  return kSet;
}

std::string ConfigHash(const CLI::App &sub) {
  std::string canonical = sub.get_name() + "\n";
  for (const CLI::Option *opt : sub.get_options()) {
    const std::string name = opt->get_name();
    if (UnhashedOptions().contains(name)) continue;
    canonical += name + "=";
    const auto &res = opt->results();
    if (res.empty()) {
      canonical += opt->get_default_str();
    } else {
      for (size_t i = 0; i < res.size(); ++i) canonical += (i ? "," : "") + res[i];
    }
    canonical += "\n";
  }
  return HexDigest(Fnv1a64(canonical));
}

json Stamp(const Common &c, const std::string &command) {
  return {{"command", command}, {"config_hash", c.config_hash}, {"seed", c.seed}};
}

// Writes <out-dir>/<name>.json and prints either the text or the JSON.
void Emit(const Common &c, const std::string &name, const json &report,
          const std::function<void(std::ostream &)> &text, std::ostream &out) {
  WriteText(fs::path(c.out_dir) / (name + ".json"), report.dump(2) + "\n");
  if (c.json_stdout) {
    out << report.dump(2) << '\n';
  } else {
    text(out);
  }
}

// ---------------------------------------------------------------------------
// Shared inputs

struct LmOptions {
  std::string arpa;
  std::string corpus;
  int order = 3;
};

void AddLmOptions(CLI::App *sub, LmOptions &o) {
  sub->add_option("--arpa", o.arpa, "ARPA n-gram model")->check(CLI::ExistingFile);
  sub->add_option("--lm-corpus", o.corpus,
                  "Tokenized corpus (one sentence per line) to train the LM on")
      ->check(CLI::ExistingFile);
  sub->add_option("--lm-order", o.order, "N-gram order when training from --lm-corpus")
      ->capture_default_str();
}

struct FeatureOptions {
  LmOptions lm;
  std::string collocations;
  int window = kDefaultCollocationWindow;
  long min_count = kDefaultCollocationMinCount;
  std::string interactions;
};

void AddFeatureOptions(CLI::App *sub, FeatureOptions &o) {
  AddLmOptions(sub, o.lm);
  sub->add_option("--collocations", o.collocations,
                  "Collocation statistics TSV; built from --lm-corpus when absent")
      ->check(CLI::ExistingFile);
  sub->add_option("--colloc-window", o.window)->capture_default_str();
  sub->add_option("--colloc-min-count", o.min_count)->capture_default_str();
  sub->add_option("--interactions", o.interactions, "deprel<TAB>property list")
      ->check(CLI::ExistingFile);
}

// Owns the LM and collocation statistics the extractor points into.
struct FeatureResources {
  LmBundle lm;
  OffsetStats collocations;
  FeatureExtractor extractor;

  FeatureResources(LmBundle l, OffsetStats s, InteractionList ix, long min_count)
      : lm(std::move(l)),
        collocations(std::move(s)),
        extractor(lm, collocations, std::move(ix), min_count) {}
};

LmBundle LoadLm(const LmOptions &o) {
  NGramModel ngram = [&] {
    if (!o.arpa.empty()) return LoadArpaFile(o.arpa);
    if (!o.corpus.empty()) return TrainNGram(ReadTokenizedCorpusFile(o.corpus), o.order);
    throw InvalidInput("a language model is required: pass --arpa or --lm-corpus");
  }();
  UnigramModel unigram = UnigramModel::FromNGram(ngram);
  return LmBundle{std::move(ngram), std::move(unigram)};
}

std::unique_ptr<FeatureResources> LoadFeatures(const FeatureOptions &o, std::ostream &err) {
  LmBundle lm = LoadLm(o.lm);
  OffsetStats stats = [&] {
    if (!o.collocations.empty()) return OffsetStats::ReadFile(o.collocations, o.window);
    if (!o.lm.corpus.empty()) {
      return BuildOffsetStats(ReadTokenizedCorpusFile(o.lm.corpus), o.window);
    }
    err << "warning: no collocation statistics; edit:breaks_collocation never fires\n";
    return OffsetStats(o.window, {});
  }();
  InteractionList ix =
      o.interactions.empty() ? DefaultInteractions() : ReadInteractionsFile(o.interactions);
  return std::make_unique<FeatureResources>(std::move(lm), std::move(stats), std::move(ix),
                                            o.min_count);
}

struct JudgmentOptions {
  std::string judgments;
  std::vector<std::string> treebanks;
};

void AddJudgmentOptions(CLI::App *sub, JudgmentOptions &o) {
  sub->add_option("--judgments", o.judgments, "Judgments in JSON lines")
      ->required()
      ->check(CLI::ExistingFile);
  sub->add_option("--treebank", o.treebanks,
                  "CoNLL-U files resolving bare sentence ids in conllu_ref")
      ->check(CLI::ExistingFile);
}

std::unique_ptr<Treebank> OpenTreebank(const std::string &anchor_file,
                                       const std::vector<std::string> &files) {
  auto bank = std::make_unique<Treebank>(fs::path(anchor_file).parent_path().string());
  for (const auto &f : files) bank->AddFile(f);
  return bank;
}

// Per-sentence cache of source NormLP values.
class SourceScores {
 public:
  explicit SourceScores(const FeatureExtractor &extractor) : extractor_(extractor) {}
  double Get(const DepTree &tree) {
    auto it = cache_.find(&tree);
    if (it != cache_.end()) return it->second;
    double v = extractor_.TextNormLp(tree.text());
    cache_.emplace(&tree, v);
    return v;
  }

 private:
  const FeatureExtractor &extractor_;
  std::map<const DepTree *, double> cache_;
};

struct SingleEdit {
  const JudgmentRecord *record;
  const DepTree *tree;
  PruneEdit edit;
};

// Records describing exactly one prune, in file order.
std::vector<SingleEdit> SingleEdits(const std::vector<JudgmentRecord> &records,
                                    Treebank &bank, const std::string &split,
                                    size_t *skipped) {
  std::vector<SingleEdit> out;
  *skipped = 0;
  for (const auto &r : records) {
    if (!split.empty() && r.split != split) continue;
    const DepTree &tree = bank.Resolve(r.conllu_ref);
    std::vector<PruneEdit> chain = RecordChain(tree, r);
    if (chain.size() != 1) {
      ++*skipped;
      continue;
    }
    out.push_back({&r, &tree, std::move(chain.front())});
  }
  return out;
}

std::string ResolveVariant(const std::string &variant, const std::string &ablate) {
  if (ablate.empty()) {
    GroupsForVariant(variant);  // validates the name
    return variant;
  }
  if (variant != "full") throw InvalidInput("--ablate and --variant cannot be combined");
  if (ablate == "dependencies") return "no-dependencies";
  if (ablate == "worker") return "no-worker";
  throw InvalidInput("--ablate takes 'dependencies' or 'worker'");
}

// ---------------------------------------------------------------------------
// lm-train

struct LmTrainArgs {
  Common common;
  std::string corpus;
  int order = 3;
  double discount = 0.75;
  std::string output;
};

int CmdLmTrain(const LmTrainArgs &a, std::ostream &out) {
  auto corpus = ReadTokenizedCorpusFile(a.corpus);
  NGramModel model = TrainNGram(corpus, a.order, a.discount);
  std::ostringstream arpa;
  arpa << "# prunekit lm-train config_hash=" << a.common.config_hash
       << " seed=" << a.common.seed << "\n";
  model.WriteArpa(arpa);
  WriteText(a.output, arpa.str());

  json report = Stamp(a.common, "lm-train");
  report["sentences"] = corpus.size();
  report["order"] = a.order;
  report["discount"] = a.discount;
  report["output"] = a.output;
  json counts = json::array();
  for (int n = 1; n <= model.order(); ++n) counts.push_back(model.count(n));
  report["ngram_counts"] = counts;
  Emit(a.common, "lm_train_report", report, [&](std::ostream &o) {
    TextTable t({"order", "ngrams"});
    for (int n = 1; n <= model.order(); ++n) t.Add({std::to_string(n), std::to_string(model.count(n))});
    o << "trained " << a.order << "-gram model on " << corpus.size() << " sentences -> "
      << a.output << "\n";
    t.Print(o);
  }, out);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// colloc-build

struct CollocArgs {
  Common common;
  std::string corpus;
  int window = kDefaultCollocationWindow;
  long min_count = kDefaultCollocationMinCount;
  std::string output;
};

int CmdCollocBuild(const CollocArgs &a, std::ostream &out) {
  auto corpus = ReadTokenizedCorpusFile(a.corpus);
  OffsetStats stats = BuildOffsetStats(corpus, a.window);
  std::ostringstream tsv;
  tsv << "# prunekit colloc-build window=" << a.window << " config_hash=" << a.common.config_hash
      << " seed=" << a.common.seed << "\n";
  stats.Write(tsv);
  WriteText(a.output, tsv.str());

  size_t collocations = 0;
  for (const auto &[key, _] : stats.pairs()) {
    if (IsCollocation(stats, key.first, key.second, a.min_count)) ++collocations;
  }
  json report = Stamp(a.common, "colloc-build");
  report["sentences"] = corpus.size();
  report["window"] = a.window;
  report["pairs"] = stats.size();
  report["collocations"] = collocations;
  report["min_count"] = a.min_count;
  report["output"] = a.output;
  Emit(a.common, "colloc_build_report", report, [&](std::ostream &o) {
    o << stats.size() << " word pairs, " << collocations << " collocations (min count "
      << a.min_count << ") -> " << a.output << "\n";
  }, out);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// ingest / verify-split

json SplitJson(const SplitReport &s) {
  return {{"train", s.train},
          {"test", s.test},
          {"train_yes", s.train_yes},
          {"test_yes", s.test_yes},
          {"pairs", s.pairs},
          {"yes_fraction", s.YesFraction()},
          {"no_fraction", 1.0 - s.YesFraction()},
          {"all_test_workers_in_train", s.AllTestWorkersInTrain()},
          {"test_workers_missing_from_train", s.test_workers_missing_from_train}};
}

void PrintSplit(std::ostream &o, const SplitReport &s) {
  TextTable t({"split", "judgments", "yes", "no"});
  t.Add({"train", std::to_string(s.train), std::to_string(s.train_yes),
         std::to_string(s.train - s.train_yes)});
  t.Add({"test", std::to_string(s.test), std::to_string(s.test_yes),
         std::to_string(s.test - s.test_yes)});
  t.Print(o);
  o << "class balance no/yes: " << Fixed(100 * (1 - s.YesFraction()), 1) << "% / "
    << Fixed(100 * s.YesFraction(), 1) << "%\n";
  o << "test workers also in train: " << (s.AllTestWorkersInTrain() ? "all" : "not all");
  if (!s.AllTestWorkersInTrain()) {
    o << " (" << s.test_workers_missing_from_train.size() << " missing)";
  }
  o << "\n";
}

struct IngestArgs {
  Common common;
  JudgmentOptions in;
  std::string output;
  std::optional<double> resplit;
};

int CmdIngest(const IngestArgs &a, std::ostream &out) {
  auto bank = OpenTreebank(a.in.judgments, a.in.treebanks);
  auto records = LoadJudgmentsFile(a.in.judgments, bank.get());
  if (a.resplit) SplitByPair(records, *a.resplit, a.common.seed);
  CorpusStats stats = ComputeCorpusStats(records, *bank);
  if (!a.output.empty()) {
    std::ostringstream lines;
    WriteJudgments(lines, records);
    WriteText(a.output, lines.str());
    json manifest = Stamp(a.common, "ingest");
    manifest["source"] = a.in.judgments;
    manifest["records"] = records.size();
    if (a.resplit) manifest["test_fraction"] = *a.resplit;
    WriteText(a.output + ".meta.json", manifest.dump(2) + "\n");
  }
  json report = Stamp(a.common, "ingest");
  report["records"] = records.size();
  report["split"] = SplitJson(stats.split);
  report["compression_rate"] = {{"mean", stats.compression_rate_mean},
                                {"std", stats.compression_rate_std},
                                {"pairs", stats.rate_pairs}};
  Emit(a.common, "ingest_report", report, [&](std::ostream &o) {
    o << records.size() << " judgments loaded from " << a.in.judgments << "\n";
    PrintSplit(o, stats.split);
    o << "compression rate over " << stats.rate_pairs << " pairs: mean "
      << Fixed(stats.compression_rate_mean) << ", sd " << Fixed(stats.compression_rate_std)
      << "\n";
  }, out);
  return kExitOk;
}

struct VerifySplitArgs {
  Common common;
  JudgmentOptions in;
};

int CmdVerifySplit(const VerifySplitArgs &a, std::ostream &out) {
  auto bank = OpenTreebank(a.in.judgments, a.in.treebanks);
  auto records = LoadJudgmentsFile(a.in.judgments, bank.get());
  SplitReport s = VerifySplit(records);
  json report = Stamp(a.common, "verify-split");
  report["ok"] = true;
  report["split"] = SplitJson(s);
  Emit(a.common, "verify_split_report", report, [&](std::ostream &o) {
    o << "split ok: no pair_id occurs in both train and test\n";
    PrintSplit(o, s);
  }, out);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// reachability

struct ReachArgs {
  Common common;
  std::string gold;
  std::vector<std::string> treebanks;
  size_t limit = 0;
};

int CmdReachability(const ReachArgs &a, std::ostream &out) {
  auto bank = OpenTreebank(a.gold, a.treebanks);
  auto gold = LoadGoldPairsFile(a.gold);
  if (a.limit > 0 && gold.size() > a.limit) gold.resize(a.limit);
  ReachabilityReport r = ComputeReachability(gold, *bank);
  json report = Stamp(a.common, "reachability");
  report["total"] = r.total;
  report["reachable"] = r.reachable;
  report["unreachable"] = r.unreachable;
  report["alignment_failures"] = r.alignment_failures;
  report["fraction_reachable"] = r.Fraction();
  Emit(a.common, "reachability_report", report, [&](std::ostream &o) {
    TextTable t({"pairs", "reachable", "unreachable", "unaligned", "fraction"});
    t.Add({std::to_string(r.total), std::to_string(r.reachable), std::to_string(r.unreachable),
           std::to_string(r.alignment_failures), Fixed(r.Fraction())});
    t.Print(o);
  }, out);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  Common common;
  JudgmentOptions in;
  FeatureOptions features;
  std::string variant = "full";
  std::string ablate;
  std::optional<double> C;
  std::vector<double> grid;
  int folds = 5;
  double tolerance = 1e-6;
  int max_iterations = 1000;
  std::string model_out = "model.json";
};

int CmdTrain(const TrainArgs &a, std::ostream &out, std::ostream &err) {
  const std::string variant = ResolveVariant(a.variant, a.ablate);
  auto bank = OpenTreebank(a.in.judgments, a.in.treebanks);
  auto records = LoadJudgmentsFile(a.in.judgments, bank.get());
  VerifySplit(records);
  auto res = LoadFeatures(a.features, err);
  size_t skipped = 0;
  auto edits = SingleEdits(records, *bank, "train", &skipped);
  if (edits.empty()) throw InvalidInput("no single-prune training judgments in " + a.in.judgments);

  const FeatureGroups groups = GroupsForVariant(variant);
  SourceScores sources(res->extractor);
  std::vector<LabeledExample> examples;
  examples.reserve(edits.size());
  for (const auto &e : edits) {
    FeatureVector x = res->extractor.Extract(*e.tree, e.edit, e.record->worker_id,
                                             sources.Get(*e.tree));
    examples.push_back({FilterGroups(x, groups), e.record->label, e.record->pair_id});
  }

  TrainOptions base;
  base.tolerance = a.tolerance;
  base.max_iterations = a.max_iterations;
  const std::vector<double> grid = a.grid.empty() ? DefaultCGrid() : a.grid;
  CvResult cv = CrossValidate(examples, grid, a.folds, a.common.seed, base);

  TrainOptions opts = base;
  opts.C = a.C.value_or(cv.best_C);
  AcceptabilityModel fitted = Train(examples, opts);
  ModelMetadata meta = fitted.metadata();
  meta.variant = variant;
  meta.seed = a.common.seed;
  meta.config_hash = a.common.config_hash;
  AcceptabilityModel model(fitted.weights(), meta);
  model.Save(a.model_out);
  if (!meta.converged) err << "warning: optimizer stopped before reaching the tolerance\n";

  json report = Stamp(a.common, "train");
  report["variant"] = variant;
  report["examples"] = examples.size();
  report["skipped_multi_prune"] = skipped;
  report["folds"] = cv.folds;
  json rows = json::array();
  for (const auto &entry : cv.entries) {
    json fold_aucs = json::array();
    for (double v : entry.fold_aucs) fold_aucs.push_back(std::isnan(v) ? json(nullptr) : json(v));
    rows.push_back({{"C", entry.C}, {"mean_auc", entry.mean_auc}, {"fold_aucs", fold_aucs}});
  }
  report["cv"] = rows;
  report["best_C"] = cv.best_C;
  report["C"] = opts.C;
  report["model"] = a.model_out;
  report["features"] = model.weights().size();
  report["iterations"] = meta.iterations;
  report["converged"] = meta.converged;
  Emit(a.common, "train_report", report, [&](std::ostream &o) {
    o << "variant " << variant << ", " << examples.size() << " training judgments";
    if (skipped) o << " (" << skipped << " multi-prune records ignored)";
    o << "\n" << cv.folds << "-fold cross-validation:\n";
    TextTable t({"C", "mean AUC"});
    for (const auto &entry : cv.entries) {
      std::ostringstream c;
      c << entry.C;
      t.Add({c.str() + (entry.C == cv.best_C ? " *" : ""), Fixed(entry.mean_auc)});
    }
    t.Print(o);
    o << "model (C = " << opts.C << ", " << model.weights().size() << " weights) -> "
      << a.model_out << "\n";
  }, out);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateArgs {
  Common common;
  JudgmentOptions in;
  FeatureOptions features;
  std::vector<std::string> models;
  std::vector<std::string> externals;
  bool multi_op = false;
  double threshold = 0.5;
  int resamples = 10000;
};

std::string ModelLabel(const AcceptabilityModel &m, const std::string &path,
                       std::set<std::string> &used) {
  std::string label = m.metadata().variant;
  if (used.insert(label).second) return label;
  label = fs::path(path).stem().string();
  for (int k = 2; !used.insert(label).second; ++k) {
    label = fs::path(path).stem().string() + "#" + std::to_string(k);
  }
  return label;
}

std::string PValue(double p) { return p < 0.001 ? "<0.001" : Fixed(p); }

int EvaluateSingle(const EvaluateArgs &a, std::vector<JudgmentRecord> &records, Treebank &bank,
                   const FeatureResources &res, std::ostream &out, std::ostream &err) {
  size_t skipped = 0;
  auto edits = SingleEdits(records, bank, "test", &skipped);
  if (edits.empty()) throw InvalidInput("no single-prune test judgments in " + a.in.judgments);

  SourceScores sources(res.extractor);
  std::vector<FeatureVector> xs;
  xs.reserve(edits.size());
  for (const auto &e : edits) {
    xs.push_back(res.extractor.Extract(*e.tree, e.edit, e.record->worker_id, sources.Get(*e.tree)));
  }

  struct Row {
    std::string label;
    std::string path;
    std::vector<ScoredJudgment> scored;
    double accuracy = 0, kappa = 0, auc = 0;
    std::optional<BootstrapResult> vs_first;
  };
  std::vector<Row> rows;
  std::set<std::string> used;
  for (const auto &path : a.models) {
    std::vector<std::string> warnings;
    AcceptabilityModel m = AcceptabilityModel::Load(path, &warnings);
    for (const auto &w : warnings) err << "warning: " << path << ": " << w << "\n";
    Row row;
    row.label = ModelLabel(m, path, used);
    row.path = path;
    const FeatureGroups groups = GroupsForVariant(m.metadata().variant);
    for (size_t i = 0; i < edits.size(); ++i) {
      const JudgmentRecord &r = *edits[i].record;
      row.scored.push_back({r.pair_id, r.worker_id, r.label, m.Predict(FilterGroups(xs[i], groups))});
    }
    row.accuracy = Accuracy(row.scored, a.threshold);
    row.kappa = ModelAsRaterKappa(row.scored, a.threshold).kappa;
    row.auc = RocAuc(row.scored);
    rows.push_back(std::move(row));
  }
  for (size_t i = 0; i < rows.size(); ++i) {
    rows[i].vs_first = BootstrapAucDelta(rows.front().scored, rows[i].scored, a.resamples,
                                         MixSeed(a.common.seed, i), a.common.threads);
  }

  RatingTable ratings;
  for (const auto &e : edits) ratings[e.record->pair_id].push_back(e.record->label);
  const double worker_agreement = WorkerWorkerAgreement(ratings);
  std::optional<KappaResult> worker_kappa;
  try {
    worker_kappa = FleissKappa(ratings);
  } catch (const Error &e) {
    err << "warning: worker kappa undefined: " << e.what() << "\n";
  }

  json report = Stamp(a.common, "evaluate");
  report["mode"] = "single-prune";
  report["test_judgments"] = edits.size();
  report["skipped_multi_prune"] = skipped;
  report["threshold"] = a.threshold;
  report["bootstrap_resamples"] = a.resamples;
  json jrows = json::array();
  for (const auto &r : rows) {
    jrows.push_back({{"model", r.label},
                     {"path", r.path},
                     {"accuracy", r.accuracy},
                     {"kappa", r.kappa},
                     {"auc", r.auc},
                     {"p_vs_first", r.vs_first->p_value},
                     {"delta_vs_first", r.vs_first->delta}});
  }
  report["models"] = jrows;
  report["worker_worker"] = {{"agreement", worker_agreement},
                             {"kappa", worker_kappa ? json(worker_kappa->kappa) : json(nullptr)}};
  Emit(a.common, "evaluate_report", report, [&](std::ostream &o) {
    o << edits.size() << " test judgments; p is the paired-bootstrap p-value against "
      << rows.front().label << "\n";
    TextTable t({"model", "accuracy", "kappa", "AUC (p)"});
    for (const auto &r : rows) {
      t.Add({r.label, Fixed(r.accuracy), Fixed(r.kappa),
             Fixed(r.auc) + " (" + PValue(r.vs_first->p_value) + ")"});
    }
    t.Add({"worker-worker", Fixed(worker_agreement),
           worker_kappa ? Fixed(worker_kappa->kappa) : "n/a", "-"});
    t.Print(o);
  }, out);
  return kExitOk;
}

int EvaluateMultiOp(const EvaluateArgs &a, std::vector<JudgmentRecord> &records, Treebank &bank,
                    const FeatureResources &res, std::ostream &out, std::ostream &err) {
  if (a.models.size() != 1) throw InvalidInput("--multi-op scores chains with exactly one --model");
  std::vector<std::string> warnings;
  AcceptabilityModel model = AcceptabilityModel::Load(a.models.front(), &warnings);
  for (const auto &w : warnings) err << "warning: " << w << "\n";
  EditScorer scorer(res.extractor, model);

  std::vector<std::pair<std::string, ExternalScorer>> externals;
  for (const auto &spec : a.externals) {
    const size_t eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw InvalidInput("--external expects NAME=PATH, got '" + spec + "'");
    }
    externals.emplace_back(spec.substr(0, eq),
                           ExternalScorer::FromFile(spec.substr(0, eq), spec.substr(eq + 1)));
  }

  std::map<std::string, ChainScore> by_pair;
  std::vector<const JudgmentRecord *> rows;
  for (const auto &r : records) {
    if (r.split != "test") continue;
    rows.push_back(&r);
    if (by_pair.contains(r.pair_id)) continue;
    const DepTree &tree = bank.Resolve(r.conllu_ref);
    by_pair.emplace(r.pair_id, ScoreChain(tree, RecordChain(tree, r), scorer));
  }
  if (rows.empty()) throw InvalidInput("no test judgments in " + a.in.judgments);

  std::vector<std::pair<std::string, std::function<double(const JudgmentRecord &)>>> fns = {
      {"A", [&](const JudgmentRecord &r) { return by_pair.at(r.pair_id).a_sum; }},
      {"A_min", [&](const JudgmentRecord &r) { return by_pair.at(r.pair_id).a_min; }},
      {"A_M", [&](const JudgmentRecord &r) { return by_pair.at(r.pair_id).a_m; }},
      {"A_LM", [&](const JudgmentRecord &r) { return by_pair.at(r.pair_id).a_lm; }},
  };
  for (const auto &[name, ext] : externals) {
    const ExternalScorer *e = &ext;
    fns.emplace_back(name, [e](const JudgmentRecord &r) { return e->Score(r.pair_id); });
  }

  std::vector<std::vector<ScoredJudgment>> scored(fns.size());
  for (size_t f = 0; f < fns.size(); ++f) {
    for (const JudgmentRecord *r : rows) {
      scored[f].push_back({r->pair_id, r->worker_id, r->label, fns[f].second(*r)});
    }
  }
  json jrows = json::array();
  std::vector<std::vector<std::string>> text_rows;
  for (size_t f = 0; f < fns.size(); ++f) {
    const double auc = RocAuc(scored[f]);
    json row = {{"function", fns[f].first}, {"auc", auc}};
    std::string p = "-";
    if (f > 0) {
      BootstrapResult b = BootstrapAucDelta(scored[0], scored[f], a.resamples,
                                            MixSeed(a.common.seed, f), a.common.threads);
      row["p_A_not_better"] = b.p_value;
      row["delta_A_minus_this"] = b.delta;
      row["ci95"] = {b.ci_low, b.ci_high};
      p = PValue(b.p_value);
    }
    jrows.push_back(row);
    text_rows.push_back({fns[f].first, Fixed(auc), p});
  }

  json report = Stamp(a.common, "evaluate");
  report["mode"] = "multi-op";
  report["test_judgments"] = rows.size();
  report["pairs"] = by_pair.size();
  report["bootstrap_resamples"] = a.resamples;
  report["functions"] = jrows;
  Emit(a.common, "evaluate_multi_op_report", report, [&](std::ostream &o) {
    o << rows.size() << " judgments over " << by_pair.size()
      << " compressions; p tests whether A beats each function\n";
    TextTable t({"function", "AUC", "p"});
    for (auto &r : text_rows) t.Add(std::move(r));
    t.Print(o);
  }, out);
  return kExitOk;
}

int CmdEvaluate(const EvaluateArgs &a, std::ostream &out, std::ostream &err) {
  auto bank = OpenTreebank(a.in.judgments, a.in.treebanks);
  auto records = LoadJudgmentsFile(a.in.judgments, bank.get());
  auto res = LoadFeatures(a.features, err);
  return a.multi_op ? EvaluateMultiOp(a, records, *bank, *res, out, err)
                    : EvaluateSingle(a, records, *bank, *res, out, err);
}

// ---------------------------------------------------------------------------
// compress

struct CompressArgs {
  Common common;
  FeatureOptions features;
  std::string model;
  std::string conllu;
  std::string sentence_id;
  int budget = 0;
  std::vector<std::string> query;
  int samples = 1000;
  int budget_min = 50;
  int budget_max = 100;
  size_t top = 10;
};

int CmdCompress(const CompressArgs &a, std::ostream &out, std::ostream &err) {
  const BrevityBudget budget(a.budget);
  auto trees = ReadConlluFile(a.conllu);
  if (trees.empty()) throw InvalidInput(a.conllu + " holds no sentences");
  const DepTree *tree = &trees.front();
  if (!a.sentence_id.empty()) {
    auto it = std::find_if(trees.begin(), trees.end(),
                           [&](const DepTree &t) { return t.sentence_id() == a.sentence_id; });
    if (it == trees.end()) throw LookupError("no sentence '" + a.sentence_id + "' in " + a.conllu);
    tree = &*it;
  }
  auto res = LoadFeatures(a.features, err);
  std::vector<std::string> warnings;
  AcceptabilityModel model = AcceptabilityModel::Load(a.model, &warnings);
  for (const auto &w : warnings) err << "warning: " << w << "\n";
  EditScorer scorer(res->extractor, model);

  PoolOptions po;
  po.samples = a.samples;
  po.budget_min = a.budget_min;
  po.budget_max = a.budget_max;
  po.seed = a.common.seed;
  po.threads = a.common.threads;
  std::vector<CompressionCandidate> pool = {IdentityCandidate(*tree, scorer)};
  for (auto &c : GeneratePool(*tree, scorer, po)) pool.push_back(std::move(c));
  const size_t drawn = pool.size() - 1;
  size_t unreachable = 0;
  for (const auto &c : pool) unreachable += c.budget_unreachable;
  std::vector<CompressionCandidate> candidates = Dedup(pool);
  RankCandidates(candidates);

  std::optional<ImportanceQuery> query;
  if (!a.query.empty()) query = ImportanceQuery{a.query};
  const CompressionCandidate *best = nullptr;
  std::string infeasible;
  try {
    best = &Select(*tree, candidates, budget, query);
  } catch (const NoFeasibleCandidate &e) {
    infeasible = e.what();
  }

  const fs::path dir(a.common.out_dir);
  std::ostringstream jsonl, csv;
  csv << "# config_hash=" << a.common.config_hash << " seed=" << a.common.seed << "\n";
  csv << "rank,char_length,a_sum,importance,feasible\n";
  for (size_t i = 0; i < candidates.size(); ++i) {
    const auto &c = candidates[i];
    json j = json::parse(CandidateJson(*tree, c, query));
    j["rank"] = i + 1;
    j["best"] = (&c == best);
    j["config_hash"] = a.common.config_hash;
    j["pool_seed"] = a.common.seed;
    jsonl << j.dump() << '\n';
    const int importance = query ? Importance(*tree, c.kept, *query) : 1;
    const bool feasible = c.char_length <= static_cast<size_t>(budget.max_chars) && importance == 1;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", c.score.a_sum);
    csv << i + 1 << ',' << c.char_length << ',' << buf << ',' << importance << ','
        << (feasible ? 1 : 0) << '\n';
  }
  WriteText(dir / "candidates.jsonl", jsonl.str());
  WriteText(dir / "scatter.csv", csv.str());

  json report = Stamp(a.common, "compress");
  report["sentence_id"] = tree->sentence_id();
  report["source"] = tree->text();
  report["source_chars"] = CharLength(tree->text());
  report["budget"] = budget.max_chars;
  report["query"] = a.query;
  report["samples"] = drawn;
  report["budget_unreachable"] = unreachable;
  report["candidates"] = candidates.size();
  report["best"] = best ? json::parse(CandidateJson(*tree, *best, query)) : json(nullptr);
  if (!best) report["error"] = infeasible;
  Emit(a.common, "compress_report", report, [&](std::ostream &o) {
    o << "source (" << CharLength(tree->text()) << " chars): " << tree->text() << "\n";
    o << candidates.size() << " distinct candidates from " << drawn << " sampled chains\n";
    TextTable t({"rank", "chars", "A", "M", "text"});
    for (size_t i = 0; i < std::min(a.top, candidates.size()); ++i) {
      const auto &c = candidates[i];
      t.Add({std::to_string(i + 1) + (&c == best ? " *" : ""), std::to_string(c.char_length),
             Fixed(c.score.a_sum), std::to_string(c.score.M()), c.text});
    }
    t.Print(o);
    if (best) {
      o << "best within " << budget.max_chars << " chars: " << best->text << "\n";
    } else {
      o << infeasible << "\n";
    }
  }, out);
  if (!best) {
    err << "error: " << infeasible << "\n";
    return kExitInfeasible;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// agreement

struct AgreementArgs {
  Common common;
  JudgmentOptions in;
  std::string split = "all";
};

int CmdAgreement(const AgreementArgs &a, std::ostream &out, std::ostream &err) {
  if (a.split != "all" && a.split != "train" && a.split != "test") {
    throw InvalidInput("--split takes all, train or test");
  }
  auto bank = OpenTreebank(a.in.judgments, a.in.treebanks);
  auto records = LoadJudgmentsFile(a.in.judgments, bank.get());
  RatingTable ratings;
  std::vector<ScoredJudgment> judgments;
  std::vector<std::pair<std::string, int>> by_deprel;
  for (const auto &r : records) {
    if (a.split != "all" && r.split != a.split) continue;
    ratings[r.pair_id].push_back(r.label);
    judgments.push_back({r.pair_id, r.worker_id, r.label, static_cast<double>(r.label)});
    if (r.pruned_vertex) {
      const DepTree &tree = bank->Resolve(r.conllu_ref);
      by_deprel.emplace_back(tree.token(*r.pruned_vertex).deprel, r.label);
    }
  }
  if (judgments.empty()) throw InvalidInput("no judgments in the selected split");

  std::optional<KappaResult> kappa;
  try {
    kappa = FleissKappa(ratings);
  } catch (const Error &e) {
    err << "warning: kappa undefined: " << e.what() << "\n";
  }
  const double agreement = WorkerWorkerAgreement(ratings);
  auto deps = PerDependencyRates(by_deprel);
  WorkerRates workers = WorkerRateDistribution(judgments);

  json report = Stamp(a.common, "agreement");
  report["split"] = a.split;
  report["judgments"] = judgments.size();
  report["fleiss_kappa"] = kappa ? json(kappa->kappa) : json(nullptr);
  if (kappa) {
    report["kappa_detail"] = {{"observed", kappa->observed},
                              {"expected", kappa->expected},
                              {"items", kappa->items},
                              {"single_rater_items", kappa->skipped}};
  }
  report["worker_worker_agreement"] = agreement;
  json jdeps = json::object();
  for (const auto &[deprel, rate] : deps) {
    jdeps[deprel] = {{"yes", rate.yes}, {"total", rate.total}, {"rate", rate.rate()}};
  }
  report["per_dependency"] = jdeps;
  report["worker_rates"] = {{"workers", workers.per_worker.size()},
                            {"mean", workers.mean},
                            {"std", workers.std}};
  Emit(a.common, "agreement_report", report, [&](std::ostream &o) {
    o << judgments.size() << " judgments (" << a.split << ")\n";
    o << "Fleiss kappa: " << (kappa ? Fixed(kappa->kappa) : "undefined") << "\n";
    o << "worker-worker agreement: " << Fixed(agreement) << "\n";
    o << "worker endorsement rate: mean " << Fixed(workers.mean) << ", sd " << Fixed(workers.std)
      << " over " << workers.per_worker.size() << " workers\n";
    if (!deps.empty()) {
      TextTable t({"deprel", "yes", "total", "rate"});
      for (const auto &[deprel, rate] : deps) {
        t.Add({deprel, std::to_string(rate.yes), std::to_string(rate.total), Fixed(rate.rate())});
      }
      t.Print(o);
    }
  }, out);
  return kExitOk;
}

int ExitCodeFor(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kIntegrity:
      return kExitIntegrity;
    case ErrorKind::kInfeasible:
      return kExitInfeasible;
    case ErrorKind::kInvalidInput:
    case ErrorKind::kUndefined:
      return kExitInvalidInput;
  }
  return kExitInternal;
}

}  // namespace

int Run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  CLI::App app{"Dependency-tree pruning: acceptability modelling and compression"};
  app.name(args.empty() ? "prunekit" : fs::path(args.front()).filename().string());
  app.set_config("--config", "", "TOML/INI file; sections name subcommands, flags override it");
  app.require_subcommand(1);
  app.fallthrough();

  LmTrainArgs lm_train;
  auto *s_lm = app.add_subcommand("lm-train", "Train an ARPA n-gram model");
  AddCommon(s_lm, lm_train.common);
  s_lm->add_option("--corpus", lm_train.corpus, "Tokenized corpus, one sentence per line")
      ->required()
      ->check(CLI::ExistingFile);
  s_lm->add_option("--order", lm_train.order)->capture_default_str();
  s_lm->add_option("--discount", lm_train.discount)->capture_default_str();
  s_lm->add_option("--output", lm_train.output, "ARPA file to write")->required();

  CollocArgs colloc;
  auto *s_colloc = app.add_subcommand("colloc-build", "Build collocation offset statistics");
  AddCommon(s_colloc, colloc.common);
  s_colloc->add_option("--corpus", colloc.corpus)->required()->check(CLI::ExistingFile);
  s_colloc->add_option("--window", colloc.window)->capture_default_str();
  s_colloc->add_option("--min-count", colloc.min_count)->capture_default_str();
  s_colloc->add_option("--output", colloc.output, "TSV file to write")->required();

  IngestArgs ingest;
  auto *s_ingest = app.add_subcommand("ingest", "Validate judgments and report corpus statistics");
  AddCommon(s_ingest, ingest.common);
  AddJudgmentOptions(s_ingest, ingest.in);
  s_ingest->add_option("--output", ingest.output, "Write normalized judgments here");
  s_ingest->add_option("--resplit", ingest.resplit,
                       "Reassign splits by pair with this test fraction");

  VerifySplitArgs verify;
  auto *s_verify = app.add_subcommand("verify-split", "Check that no pair spans both splits");
  AddCommon(s_verify, verify.common);
  AddJudgmentOptions(s_verify, verify.in);

  ReachArgs reach;
  auto *s_reach = app.add_subcommand("reachability", "Fraction of gold compressions reachable by prunes");
  AddCommon(s_reach, reach.common);
  s_reach->add_option("--gold", reach.gold, "Gold pairs in JSON lines")
      ->required()
      ->check(CLI::ExistingFile);
  s_reach->add_option("--treebank", reach.treebanks)->check(CLI::ExistingFile);
  s_reach->add_option("--limit", reach.limit, "Use only the first N pairs, 0 = all")
      ->capture_default_str();

  TrainArgs train;
  auto *s_train = app.add_subcommand("train", "Fit the single-prune acceptability model");
  AddCommon(s_train, train.common);
  AddJudgmentOptions(s_train, train.in);
  AddFeatureOptions(s_train, train.features);
  s_train->add_option("--variant", train.variant,
                      "full, lm-only, plus-dependencies, plus-worker, no-dependencies, no-worker")
      ->capture_default_str();
  s_train->add_option("--ablate", train.ablate, "Shorthand: dependencies or worker");
  s_train->add_option("--C", train.C, "Fix C instead of taking the cross-validated best");
  s_train->add_option("--c-grid", train.grid, "C values for cross-validation");
  s_train->add_option("--folds", train.folds)->capture_default_str();
  s_train->add_option("--tolerance", train.tolerance)->capture_default_str();
  s_train->add_option("--max-iterations", train.max_iterations)->capture_default_str();
  s_train->add_option("--model-out", train.model_out)->capture_default_str();

  EvaluateArgs eval;
  auto *s_eval = app.add_subcommand("evaluate", "Score test judgments with one or more models");
  AddCommon(s_eval, eval.common);
  AddJudgmentOptions(s_eval, eval.in);
  AddFeatureOptions(s_eval, eval.features);
  s_eval->add_option("--model", eval.models, "Model JSON; the first is the reference")
      ->required()
      ->check(CLI::ExistingFile);
  s_eval->add_flag("--multi-op", eval.multi_op, "Score whole prune chains (A, A_min, A_M, A_LM)");
  s_eval->add_option("--external", eval.externals, "NAME=PATH scores keyed by pair_id");
  s_eval->add_option("--threshold", eval.threshold)->capture_default_str();
  s_eval->add_option("--resamples", eval.resamples, "Bootstrap resamples")->capture_default_str();

  CompressArgs comp;
  auto *s_comp = app.add_subcommand("compress", "Sample, rank and select compressions of a sentence");
  AddCommon(s_comp, comp.common);
  AddFeatureOptions(s_comp, comp.features);
  s_comp->add_option("--model", comp.model)->required()->check(CLI::ExistingFile);
  s_comp->add_option("--conllu", comp.conllu)->required()->check(CLI::ExistingFile);
  s_comp->add_option("--sentence-id", comp.sentence_id, "Defaults to the first sentence");
  s_comp->add_option("--budget", comp.budget, "Maximum characters")->required();
  s_comp->add_option("--query", comp.query, "Importance terms; one must survive");
  s_comp->add_option("--samples", comp.samples)->capture_default_str();
  s_comp->add_option("--budget-min", comp.budget_min, "Smallest sampling budget")->capture_default_str();
  s_comp->add_option("--budget-max", comp.budget_max, "Largest sampling budget")->capture_default_str();
  s_comp->add_option("--top", comp.top, "Candidates shown in the text report")->capture_default_str();

  AgreementArgs agree;
  auto *s_agree = app.add_subcommand("agreement", "Inter-worker agreement and endorsement rates");
  AddCommon(s_agree, agree.common);
  AddJudgmentOptions(s_agree, agree.in);
  s_agree->add_option("--split", agree.split, "all, train or test")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(std::move(reversed));
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInvalidInput;
  }

  CLI::App *sub = app.get_subcommands().front();
  const std::string command = sub->get_name();
  try {
    const std::string hash = ConfigHash(*sub);
    if (sub == s_lm) {
      lm_train.common.config_hash = hash;
      return CmdLmTrain(lm_train, out);
    }
    if (sub == s_colloc) {
      colloc.common.config_hash = hash;
      return CmdCollocBuild(colloc, out);
    }
    if (sub == s_ingest) {
      ingest.common.config_hash = hash;
      return CmdIngest(ingest, out);
    }
    if (sub == s_verify) {
      verify.common.config_hash = hash;
      return CmdVerifySplit(verify, out);
    }
    if (sub == s_reach) {
      reach.common.config_hash = hash;
      return CmdReachability(reach, out);
    }
    if (sub == s_train) {
      train.common.config_hash = hash;
      return CmdTrain(train, out, err);
    }
    if (sub == s_eval) {
      eval.common.config_hash = hash;
      return CmdEvaluate(eval, out, err);
    }
    if (sub == s_comp) {
      comp.common.config_hash = hash;
      return CmdCompress(comp, out, err);
    }
    agree.common.config_hash = hash;
    return CmdAgreement(agree, out, err);
  } catch (const Error &e) {
    err << command << ": error: " << e.what() << "\n";
    return ExitCodeFor(e.kind());
  } catch (const fs::filesystem_error &e) {
    err << command << ": error: " << e.what() << "\n";
    return kExitInvalidInput;
  } catch (const std::exception &e) {
    err << command << ": internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}

}  // namespace prunekit::cli
