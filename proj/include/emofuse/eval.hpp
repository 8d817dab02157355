#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "emofuse/dataset.hpp"
#include "emofuse/error.hpp"
#include "emofuse/labels.hpp"

namespace emofuse::eval {

// Session-based splits guarantee speaker independence: speakers never cross
// sessions in this corpus family.
struct EvalProtocol {
  std::string scheme = "holdout_session5";  // or "loso_rotating"
  double train_fraction_expected = 0.8;     // informational
  std::uint64_t seed = 0;

  void validate() const {
    if (scheme != "holdout_session5" && scheme != "loso_rotating")
      throw ConfigError("eval protocol: unknown scheme " + scheme);
  }
};

struct Fold {
  int fold_id = 0;
  int test_session = 0;
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
};

// holdout_session5: one fold, sessions 1..4 train / session 5 test.
// loso_rotating: five folds, each session tested exactly once.
inline std::vector<Fold> make_folds(const DatasetManifest& manifest,
                                    const EvalProtocol& protocol,
                                    std::vector<std::string>* warnings = nullptr) {
  protocol.validate();
  std::array<std::vector<const UtteranceRecord*>, 6> by_session;
  for (const auto& r : manifest.records)
    by_session[static_cast<std::size_t>(r.session_id)].push_back(&r);

  std::vector<int> test_sessions;
  if (protocol.scheme == "holdout_session5")
    test_sessions = {5};
  else
    test_sessions = {1, 2, 3, 4, 5};

  std::vector<Fold> folds;
  int fold_id = 0;
  for (int test_session : test_sessions) {
    if (by_session[static_cast<std::size_t>(test_session)].empty()) {
      if (warnings)
        warnings->push_back("fold for session " + std::to_string(test_session) +
                            " skipped: no records");
      continue;
    }
    Fold f;
    f.fold_id = fold_id++;
    f.test_session = test_session;
    for (const auto& r : manifest.records) {
      if (r.session_id == test_session)
        f.test_ids.push_back(r.utterance_id);
      else
        f.train_ids.push_back(r.utterance_id);
    }
    folds.push_back(std::move(f));
  }
  return folds;
}

// Eq-style binary accuracy: (TP + TN) / (TP + TN + FP + FN).
inline double accuracy(long tp, long tn, long fp, long fn) {
  if (tp < 0 || tn < 0 || fp < 0 || fn < 0)
    throw ValidationError("accuracy: negative count");
  long total = tp + tn + fp + fn;
  if (total == 0) throw ValidationError("accuracy: undefined for all-zero counts");
  return static_cast<double>(tp + tn) / static_cast<double>(total);
}

// Fraction of exact matches; the micro-averaged one-vs-rest reduction of
// the binary formula collapses to matches/total for single-label data.
inline double multiclass_accuracy(const std::vector<EmotionLabel>& preds,
                                  const std::vector<EmotionLabel>& truths) {
  if (preds.empty() || preds.size() != truths.size())
    throw ValidationError("multiclass_accuracy: empty or mismatched lists");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (preds[i] == truths[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(preds.size());
}

// rows = true label, cols = predicted label, fixed schema order.
struct ConfusionMatrix {
  std::array<std::array<long, kNumClasses>, kNumClasses> counts = {};

  long total() const {
    long t = 0;
    for (const auto& row : counts)
      for (long v : row) t += v;
    return t;
  }
  long trace() const {
    long t = 0;
    for (int i = 0; i < kNumClasses; ++i)
      t += counts[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)];
    return t;
  }
};

inline ConfusionMatrix confusion(const std::vector<EmotionLabel>& preds,
                                 const std::vector<EmotionLabel>& truths) {
  if (preds.size() != truths.size())
    throw ValidationError("confusion: mismatched lists");
  ConfusionMatrix m;
  for (std::size_t i = 0; i < preds.size(); ++i)
    ++m.counts[static_cast<std::size_t>(label_id(truths[i]))]
              [static_cast<std::size_t>(label_id(preds[i]))];
  return m;
}

struct NormalizedConfusion {
  std::array<std::array<double, kNumClasses>, kNumClasses> values = {};
  std::array<bool, kNumClasses> empty_rows = {};  // zero rows stay zero, flagged
};

inline NormalizedConfusion normalize(const ConfusionMatrix& m) {
  NormalizedConfusion out;
  for (int i = 0; i < kNumClasses; ++i) {
    auto row = static_cast<std::size_t>(i);
    long sum = 0;
    for (long v : m.counts[row]) sum += v;
    if (sum == 0) {
      out.empty_rows[row] = true;
      continue;
    }
    for (int j = 0; j < kNumClasses; ++j)
      out.values[row][static_cast<std::size_t>(j)] =
          static_cast<double>(m.counts[row][static_cast<std::size_t>(j)]) /
          static_cast<double>(sum);
  }
  return out;
}

struct FoldResult {
  int fold_id = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  double accuracy = 0.0;
  ConfusionMatrix matrix;
};

struct EvalReport {
  EvalProtocol protocol;
  std::vector<FoldResult> per_fold;

  double mean_accuracy() const {
    if (per_fold.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& f : per_fold) acc += f.accuracy;
    return acc / static_cast<double>(per_fold.size());
  }
};

namespace detail {
inline std::string render_confusion_text(const ConfusionMatrix& m) {
  auto norm = normalize(m);
  std::ostringstream out;
  out << "true\\pred";
  for (int j = 0; j < kNumClasses; ++j)
    out << '\t' << kLabelNames[static_cast<std::size_t>(j)];
  out << '\n';
  bool any_empty = false;
  for (int i = 0; i < kNumClasses; ++i) {
    auto row = static_cast<std::size_t>(i);
    out << kLabelNames[row];
    for (int j = 0; j < kNumClasses; ++j)
      out << '\t' << std::fixed << std::setprecision(2)
          << norm.values[row][static_cast<std::size_t>(j)];
    if (norm.empty_rows[row]) {
      out << "\t(*)";
      any_empty = true;
    }
    out << '\n';
  }
  out << "counts\n";
  for (int i = 0; i < kNumClasses; ++i) {
    auto row = static_cast<std::size_t>(i);
    out << kLabelNames[row];
    for (int j = 0; j < kNumClasses; ++j)
      out << '\t' << m.counts[row][static_cast<std::size_t>(j)];
    out << '\n';
  }
  if (any_empty) out << "(*) no test samples for this class; row left at zero\n";
  return out.str();
}
}  // namespace detail

// Emits metrics.csv (fold_id,n_train,n_test,accuracy with a final mean row)
// and confusion_<fold>.txt per fold. Filenames and bytes are deterministic
// functions of the report.
inline std::vector<std::string> render_report(const EvalReport& report,
                                              const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (!fs::is_directory(out_dir))
    throw IoError("render_report: cannot create " + out_dir);

  std::vector<std::string> written;
  std::string metrics_path = (fs::path(out_dir) / "metrics.csv").string();
  {
    std::ofstream out(metrics_path, std::ios::binary);
    if (!out) throw IoError("render_report: cannot open " + metrics_path);
    out << "fold_id,n_train,n_test,accuracy\n";
    char buf[64];
    for (const auto& f : report.per_fold) {
      std::snprintf(buf, sizeof(buf), "%.6f", f.accuracy);
      out << f.fold_id << ',' << f.n_train << ',' << f.n_test << ',' << buf << '\n';
    }
    std::snprintf(buf, sizeof(buf), "%.6f", report.mean_accuracy());
    out << "mean,,," << buf << '\n';
  }
  written.push_back(metrics_path);

  for (const auto& f : report.per_fold) {
    std::string path =
        (fs::path(out_dir) / ("confusion_" + std::to_string(f.fold_id) + ".txt"))
            .string();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("render_report: cannot open " + path);
    out << detail::render_confusion_text(f.matrix);
    written.push_back(path);
  }
  return written;
}

}  // namespace emofuse::eval
