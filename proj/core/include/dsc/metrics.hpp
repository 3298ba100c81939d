#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dsc/tensor.hpp"

namespace dsc {

// KxK counts, rows = actual class, columns = predicted class.
class ConfusionMatrix {
 public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(int num_classes)
      : k_(num_classes),
        counts_(static_cast<size_t>(num_classes) * num_classes, 0) {}

  int num_classes() const { return k_; }
  int64_t& at(int actual, int predicted) {
    return counts_[static_cast<size_t>(actual) * k_ + predicted];
  }
  int64_t at(int actual, int predicted) const {
    return counts_[static_cast<size_t>(actual) * k_ + predicted];
  }
  int64_t total() const;
  int64_t trace() const;
  double accuracy() const;
  int64_t row_sum(int actual) const;
  int64_t col_sum(int predicted) const;

 private:
  int k_ = 0;
  std::vector<int64_t> counts_;
};

ConfusionMatrix confusion(std::span<const int> y_true,
                          std::span<const int> y_pred, int num_classes);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  int64_t support = 0;
};

struct ClassReport {
  std::vector<ClassMetrics> per_class;
  ClassMetrics macro;  // support = total samples
  double accuracy = 0.0;
  bool zero_division_hit = false;  // some precision/recall forced to 0
};

// precision_k = cm[k,k]/colsum_k, recall_k = cm[k,k]/rowsum_k; divisions
// by zero yield 0 and set zero_division_hit.
ClassReport class_report(const ConfusionMatrix& cm);

// Row argmax with ties resolved toward the lower class index.
template <typename T>
int argmax_row(const T* row, int64_t k);

template <typename T>
std::vector<int> predictions(const Tensor<T>& probs);

// Fraction of rows whose true class ranks among the k highest scores.
// Equal scores rank by lower class index first.
template <typename T>
double top_k_accuracy(const Tensor<T>& probs, std::span<const int> y_true,
                      int k);

struct RocCurve {
  std::vector<double> fpr;  // non-decreasing, from 0 to 1
  std::vector<double> tpr;
  double auc = 0.0;
  bool defined = false;  // false when the class lacks positives or negatives
};

struct RocResult {
  std::vector<RocCurve> per_class;
  double auc_macro = 0.0;  // mean over defined curves
};

// One-vs-rest ROC per class; thresholds sweep the distinct scores and the
// AUC is the trapezoidal area.
template <typename T>
RocResult roc_auc(const Tensor<T>& scores, std::span<const int> y_true);

// Per-epoch training record. Seconds are informational only; the emitted
// CSV omits them (identical runs must produce identical files).
struct History {
  struct Row {
    int epoch = 0;  // 1-based
    std::string optimizer;
    double train_accuracy = 0.0;
    double train_loss = 0.0;
    double val_accuracy = 0.0;
    double val_loss = 0.0;
    double seconds = 0.0;
  };
  std::vector<Row> rows;
};

// Writes report.txt, confusion.csv, history.csv and roc.csv into out_dir.
// Files are deterministic: UTF-8, comma-separated, header row, floats at 6
// significant digits.
void emit_report(const ClassReport& report, const History& history,
                 const ConfusionMatrix& cm, const RocResult& roc,
                 const std::vector<std::string>& class_names,
                 double loss, const std::filesystem::path& out_dir);

}  // namespace dsc
