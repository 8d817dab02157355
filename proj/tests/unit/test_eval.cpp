#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "emofuse/eval.hpp"
#include "emofuse/rng.hpp"
#include "support/tmpdir.hpp"

using namespace emofuse;
using namespace emofuse::eval;
using testutil::TempDir;

namespace {

DatasetManifest random_manifest(int n, Rng& rng, int max_session = 5) {
  DatasetManifest m;
  for (int i = 0; i < n; ++i) {
    UtteranceRecord r;
    r.utterance_id = "u" + std::to_string(i);
    r.session_id = rng.uniform_int(1, max_session);
    r.start_time_s = 0;
    r.end_time_s = 1;
    r.label = label_from_id(rng.uniform_int(0, 3));
    m.records.push_back(r);
  }
  m.recount();
  return m;
}

std::vector<EmotionLabel> random_labels(std::size_t n, Rng& rng) {
  std::vector<EmotionLabel> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back(label_from_id(rng.uniform_int(0, 3)));
  return out;
}

}  // namespace

TEST_CASE("holdout: test fold is exactly the session-5 records") {
  Rng rng(1);
  auto m = random_manifest(60, rng);
  auto folds = make_folds(m, {});
  REQUIRE(folds.size() == 1);
  std::set<std::string> expected;
  for (const auto& r : m.records)
    if (r.session_id == 5) expected.insert(r.utterance_id);
  REQUIRE(std::set<std::string>(folds[0].test_ids.begin(),
                                folds[0].test_ids.end()) == expected);
  REQUIRE(folds[0].train_ids.size() + folds[0].test_ids.size() ==
          m.records.size());
}

TEST_CASE("loso: five folds, each record tested exactly once, session-pure") {
  Rng rng(2);
  auto m = random_manifest(80, rng);
  EvalProtocol p;
  p.scheme = "loso_rotating";
  auto folds = make_folds(m, p);
  REQUIRE(folds.size() == 5);

  std::map<std::string, int> tested;
  for (const auto& f : folds) {
    std::set<std::string> train(f.train_ids.begin(), f.train_ids.end());
    for (const auto& id : f.test_ids) {
      ++tested[id];
      REQUIRE_FALSE(train.count(id));  // disjoint
    }
    // session purity
    std::map<std::string, int> session_of;
    for (const auto& r : m.records) session_of[r.utterance_id] = r.session_id;
    for (const auto& id : f.test_ids)
      REQUIRE(session_of[id] == f.test_session);
    for (const auto& id : f.train_ids)
      REQUIRE(session_of[id] != f.test_session);
  }
  REQUIRE(tested.size() == m.records.size());  // covering
  for (const auto& [id, n] : tested) REQUIRE(n == 1);
}

TEST_CASE("empty sessions are skipped with a warning") {
  Rng rng(3);
  auto m = random_manifest(30, rng, /*max_session=*/3);
  EvalProtocol p;
  p.scheme = "loso_rotating";
  std::vector<std::string> warnings;
  auto folds = make_folds(m, p, &warnings);
  REQUIRE(folds.size() == 3);
  REQUIRE(warnings.size() == 2);

  std::vector<std::string> holdout_warnings;
  auto holdout = make_folds(m, {}, &holdout_warnings);
  REQUIRE(holdout.empty());
  REQUIRE(holdout_warnings.size() == 1);
}

TEST_CASE("unknown scheme is a config error") {
  EvalProtocol p;
  p.scheme = "kfold10";
  Rng rng(4);
  auto m = random_manifest(10, rng);
  REQUIRE_THROWS_AS(make_folds(m, p), ConfigError);
}

TEST_CASE("binary accuracy formula") {
  REQUIRE(accuracy(8, 2, 1, 1) == Catch::Approx(10.0 / 12.0));
  REQUIRE(accuracy(0, 37, 0, 0) == 1.0);
  REQUIRE_THROWS_AS(accuracy(0, 0, 0, 0), ValidationError);
  REQUIRE_THROWS_AS(accuracy(-1, 1, 1, 1), ValidationError);
}

TEST_CASE("binary accuracy equals the counting oracle on random lists") {
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    std::size_t n = static_cast<std::size_t>(rng.uniform_int(1, 500));
    long tp = 0, tn = 0, fp = 0, fn = 0;
    std::size_t matches = 0;
    for (std::size_t i = 0; i < n; ++i) {
      bool truth = rng.uniform() < 0.5;
      bool pred = rng.uniform() < 0.5;
      if (truth && pred) ++tp;
      if (!truth && !pred) ++tn;
      if (!truth && pred) ++fp;
      if (truth && !pred) ++fn;
      if (truth == pred) ++matches;
    }
    REQUIRE(accuracy(tp, tn, fp, fn) ==
            Catch::Approx(static_cast<double>(matches) / static_cast<double>(n)));
  }
}

TEST_CASE("multiclass accuracy: identity, disjoint, counting oracle") {
  using L = EmotionLabel;
  std::vector<L> a = {L::neutral, L::sad, L::angry};
  REQUIRE(multiclass_accuracy(a, a) == 1.0);
  std::vector<L> b = {L::excited, L::neutral, L::sad};
  REQUIRE(multiclass_accuracy(b, a) == 0.0);
  REQUIRE_THROWS_AS(multiclass_accuracy({}, {}), ValidationError);
  REQUIRE_THROWS_AS(multiclass_accuracy(a, {L::sad}), ValidationError);

  Rng rng(6);
  auto preds = random_labels(1000, rng);
  auto truths = random_labels(1000, rng);
  std::size_t matches = 0;
  for (std::size_t i = 0; i < 1000; ++i)
    if (preds[i] == truths[i]) ++matches;
  REQUIRE(multiclass_accuracy(preds, truths) ==
          Catch::Approx(static_cast<double>(matches) / 1000.0));
}

TEST_CASE("confusion counts and row normalization") {
  using L = EmotionLabel;
  std::vector<L> truths = {L::neutral, L::neutral, L::neutral};
  auto m = confusion(truths, truths);
  REQUIRE(m.counts[0][0] == 3);
  REQUIRE(m.total() == 3);
  auto norm = normalize(m);
  REQUIRE(norm.values[0] == std::array<double, 4>{1.0, 0.0, 0.0, 0.0});
  for (int i = 1; i < 4; ++i) REQUIRE(norm.empty_rows[static_cast<std::size_t>(i)]);
}

TEST_CASE("trace identity: trace(confusion)/N equals multiclass accuracy") {
  Rng rng(7);
  for (int trial = 0; trial < 25; ++trial) {
    std::size_t n = static_cast<std::size_t>(rng.uniform_int(1, 400));
    auto preds = random_labels(n, rng);
    auto truths = random_labels(n, rng);
    auto m = confusion(preds, truths);
    REQUIRE(static_cast<double>(m.trace()) / static_cast<double>(m.total()) ==
            Catch::Approx(multiclass_accuracy(preds, truths)).margin(1e-12));
  }
}

TEST_CASE("normalized rows sum to 1 within 1e-9 for nonempty rows") {
  Rng rng(8);
  auto preds = random_labels(777, rng);
  auto truths = random_labels(777, rng);
  auto norm = normalize(confusion(preds, truths));
  for (int i = 0; i < 4; ++i) {
    auto row = static_cast<std::size_t>(i);
    if (norm.empty_rows[row]) continue;
    double sum = 0.0;
    for (double v : norm.values[row]) sum += v;
    REQUIRE(std::abs(sum - 1.0) < 1e-9);
  }
}

TEST_CASE("mean accuracy is invariant under fold reordering") {
  EvalReport r;
  r.per_fold = {{0, 10, 5, 0.8, {}}, {1, 10, 5, 0.6, {}}, {2, 10, 5, 0.9, {}}};
  double mean = r.mean_accuracy();
  std::reverse(r.per_fold.begin(), r.per_fold.end());
  REQUIRE(r.mean_accuracy() == Catch::Approx(mean).margin(1e-15));
}

TEST_CASE("render_report: metrics rows, mean row, deterministic bytes") {
  TempDir dir("report");
  Rng rng(9);
  EvalReport report;
  report.protocol.scheme = "loso_rotating";
  for (int f = 0; f < 5; ++f) {
    auto preds = random_labels(40, rng);
    auto truths = random_labels(40, rng);
    FoldResult fr;
    fr.fold_id = f;
    fr.n_train = 160;
    fr.n_test = 40;
    fr.matrix = confusion(preds, truths);
    fr.accuracy = multiclass_accuracy(preds, truths);
    report.per_fold.push_back(fr);
  }

  auto files = render_report(report, dir.file("out1"));
  REQUIRE(files.size() == 6);  // metrics + 5 confusion files
  auto metrics = testutil::slurp(dir.file("out1/metrics.csv"));
  REQUIRE(std::count(metrics.begin(), metrics.end(), '\n') == 7);  // header+5+mean
  REQUIRE(metrics.find("mean,,,") != std::string::npos);

  render_report(report, dir.file("out2"));
  REQUIRE(testutil::slurp(dir.file("out2/metrics.csv")) == metrics);
  REQUIRE(testutil::slurp(dir.file("out2/confusion_3.txt")) ==
          testutil::slurp(dir.file("out1/confusion_3.txt")));

  // rendered normalized rows: 4 values summing to 1.00 +- 0.01
  auto text = testutil::slurp(dir.file("out1/confusion_0.txt"));
  std::istringstream lines(text);
  std::string line;
  std::getline(lines, line);  // header
  for (int i = 0; i < 4; ++i) {
    std::getline(lines, line);
    std::istringstream row(line);
    std::string label;
    row >> label;
    double sum = 0.0, v = 0.0;
    for (int j = 0; j < 4; ++j) {
      row >> v;
      sum += v;
    }
    REQUIRE(sum == Catch::Approx(1.0).margin(0.01));
  }
}

TEST_CASE("render_report rejects an unwritable directory") {
  EvalReport report;
  report.per_fold = {{0, 1, 1, 1.0, {}}};
  REQUIRE_THROWS_AS(render_report(report, "/proc/emofuse-no-such/reports"),
                    IoError);
}
