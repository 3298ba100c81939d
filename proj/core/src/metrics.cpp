#include "dsc/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "dsc/error.hpp"

namespace dsc {

namespace {

std::string g6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);  // binary: no newline surprises
  if (!os) throw IoError("cannot open for write: " + path.string());
  return os;
}

}  // namespace

int64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), int64_t{0});
}

int64_t ConfusionMatrix::trace() const {
  int64_t t = 0;
  for (int i = 0; i < k_; ++i) t += at(i, i);
  return t;
}

double ConfusionMatrix::accuracy() const {
  const int64_t n = total();
  return n == 0 ? 0.0
               : static_cast<double>(trace()) / static_cast<double>(n);
}

int64_t ConfusionMatrix::row_sum(int actual) const {
  int64_t s = 0;
  for (int j = 0; j < k_; ++j) s += at(actual, j);
  return s;
}

int64_t ConfusionMatrix::col_sum(int predicted) const {
  int64_t s = 0;
  for (int i = 0; i < k_; ++i) s += at(i, predicted);
  return s;
}

ConfusionMatrix confusion(std::span<const int> y_true,
                          std::span<const int> y_pred, int num_classes) {
  if (y_true.size() != y_pred.size()) {
    throw UsageError("confusion: label vectors differ in length");
  }
  ConfusionMatrix cm(num_classes);
  for (size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] < 0 || y_true[i] >= num_classes || y_pred[i] < 0 ||
        y_pred[i] >= num_classes) {
      throw DataError("confusion: label out of range at index " +
                      std::to_string(i));
    }
    ++cm.at(y_true[i], y_pred[i]);
  }
  return cm;
}

ClassReport class_report(const ConfusionMatrix& cm) {
  ClassReport report;
  const int k = cm.num_classes();
  double psum = 0, rsum = 0, fsum = 0;
  for (int c = 0; c < k; ++c) {
    ClassMetrics m;
    const int64_t tp = cm.at(c, c);
    const int64_t col = cm.col_sum(c);
    const int64_t row = cm.row_sum(c);
    if (col > 0) {
      m.precision = static_cast<double>(tp) / static_cast<double>(col);
    } else {
      report.zero_division_hit = true;
    }
    if (row > 0) {
      m.recall = static_cast<double>(tp) / static_cast<double>(row);
    } else {
      report.zero_division_hit = true;
    }
    if (m.precision + m.recall > 0.0) {
      m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
    }
    m.support = row;
    psum += m.precision;
    rsum += m.recall;
    fsum += m.f1;
    report.per_class.push_back(m);
  }
  report.macro.precision = psum / k;
  report.macro.recall = rsum / k;
  report.macro.f1 = fsum / k;
  report.macro.support = cm.total();
  report.accuracy = cm.accuracy();
  return report;
}

template <typename T>
int argmax_row(const T* row, int64_t k) {
  int best = 0;
  for (int64_t j = 1; j < k; ++j) {
    if (row[j] > row[best]) best = static_cast<int>(j);  // ties keep lower
  }
  return best;
}

template <typename T>
std::vector<int> predictions(const Tensor<T>& probs) {
  const int64_t n = probs.dim(0), k = probs.dim(1);
  std::vector<int> out(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    out[static_cast<size_t>(i)] = argmax_row(probs.data() + i * k, k);
  }
  return out;
}

template <typename T>
double top_k_accuracy(const Tensor<T>& probs, std::span<const int> y_true,
                      int k) {
  const int64_t n = probs.dim(0), classes = probs.dim(1);
  if (k < 1 || k > classes) {
    throw UsageError("top_k_accuracy: k must be in [1," +
                     std::to_string(classes) + "]");
  }
  if (static_cast<int64_t>(y_true.size()) != n) {
    throw UsageError("top_k_accuracy: label count mismatch");
  }
  int64_t hits = 0;
  for (int64_t i = 0; i < n; ++i) {
    const T* row = probs.data() + i * classes;
    const int t = y_true[static_cast<size_t>(i)];
    if (t < 0 || t >= classes) {
      throw DataError("top_k_accuracy: label out of range");
    }
    // rank of the true class under (score desc, index asc)
    int64_t rank = 0;
    for (int64_t j = 0; j < classes; ++j) {
      if (row[j] > row[t] || (row[j] == row[t] && j < t)) ++rank;
    }
    if (rank < k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

template <typename T>
RocResult roc_auc(const Tensor<T>& scores, std::span<const int> y_true) {
  const int64_t n = scores.dim(0), k = scores.dim(1);
  if (static_cast<int64_t>(y_true.size()) != n) {
    throw UsageError("roc_auc: label count mismatch");
  }
  RocResult result;
  double auc_sum = 0.0;
  int defined = 0;
  for (int64_t c = 0; c < k; ++c) {
    RocCurve curve;
    std::vector<std::pair<double, bool>> items;  // (score, is_positive)
    int64_t pos = 0;
    for (int64_t i = 0; i < n; ++i) {
      const bool is_pos = y_true[static_cast<size_t>(i)] == c;
      pos += is_pos;
      items.emplace_back(static_cast<double>(scores.data()[i * k + c]),
                         is_pos);
    }
    const int64_t neg = n - pos;
    if (pos == 0 || neg == 0) {
      curve.defined = false;
      result.per_class.push_back(std::move(curve));
      continue;
    }
    std::sort(items.begin(), items.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    curve.defined = true;
    curve.fpr.push_back(0.0);
    curve.tpr.push_back(0.0);
    int64_t tp = 0, fp = 0;
    size_t i = 0;
    while (i < items.size()) {
      const double threshold = items[i].first;
      // everything with this score flips together (distinct thresholds)
      while (i < items.size() && items[i].first == threshold) {
        if (items[i].second) {
          ++tp;
        } else {
          ++fp;
        }
        ++i;
      }
      curve.fpr.push_back(static_cast<double>(fp) /
                          static_cast<double>(neg));
      curve.tpr.push_back(static_cast<double>(tp) /
                          static_cast<double>(pos));
    }
    double auc = 0.0;
    for (size_t j = 1; j < curve.fpr.size(); ++j) {
      auc += (curve.fpr[j] - curve.fpr[j - 1]) *
             (curve.tpr[j] + curve.tpr[j - 1]) / 2.0;
    }
    curve.auc = auc;
    auc_sum += auc;
    ++defined;
    result.per_class.push_back(std::move(curve));
  }
  result.auc_macro = defined > 0 ? auc_sum / defined : 0.0;
  return result;
}

void emit_report(const ClassReport& report, const History& history,
                 const ConfusionMatrix& cm, const RocResult& roc,
                 const std::vector<std::string>& class_names,
                 double loss, const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output dir: " + out_dir.string());

  auto name_of = [&](size_t c) {
    return c < class_names.size() ? class_names[c]
                                  : "class_" + std::to_string(c);
  };

  {
    auto os = open_out(out_dir / "report.txt");
    os << "accuracy: " << g6(report.accuracy) << "\n";
    os << "loss: " << g6(loss) << "\n";
    os << "per_class:\n";
    for (size_t c = 0; c < report.per_class.size(); ++c) {
      const ClassMetrics& m = report.per_class[c];
      os << "  " << name_of(c) << " precision " << g6(m.precision)
         << " recall " << g6(m.recall) << " f1 " << g6(m.f1) << " support "
         << m.support;
      if (c < roc.per_class.size() && roc.per_class[c].defined) {
        os << " auc " << g6(roc.per_class[c].auc);
      }
      os << "\n";
    }
    os << "macro: precision " << g6(report.macro.precision) << " recall "
       << g6(report.macro.recall) << " f1 " << g6(report.macro.f1) << "\n";
    os << "auc_macro: " << g6(roc.auc_macro) << "\n";
    os << "zero_division: " << (report.zero_division_hit ? "true" : "false")
       << "\n";
  }

  {
    auto os = open_out(out_dir / "confusion.csv");
    os << "class";
    for (int j = 0; j < cm.num_classes(); ++j) {
      os << ',' << name_of(static_cast<size_t>(j));
    }
    os << "\n";
    for (int i = 0; i < cm.num_classes(); ++i) {
      os << name_of(static_cast<size_t>(i));
      for (int j = 0; j < cm.num_classes(); ++j) os << ',' << cm.at(i, j);
      os << "\n";
    }
  }

  {
    auto os = open_out(out_dir / "history.csv");
    os << "epoch,optimizer,train_accuracy,train_loss,val_accuracy,val_loss\n";
    for (const History::Row& r : history.rows) {
      os << r.epoch << ',' << r.optimizer << ',' << g6(r.train_accuracy)
         << ',' << g6(r.train_loss) << ',' << g6(r.val_accuracy) << ','
         << g6(r.val_loss) << "\n";
    }
  }

  {
    auto os = open_out(out_dir / "roc.csv");
    os << "class,fpr,tpr\n";
    for (size_t c = 0; c < roc.per_class.size(); ++c) {
      const RocCurve& curve = roc.per_class[c];
      if (!curve.defined) continue;
      for (size_t j = 0; j < curve.fpr.size(); ++j) {
        os << name_of(c) << ',' << g6(curve.fpr[j]) << ',' << g6(curve.tpr[j])
           << "\n";
      }
    }
  }
}

#define DSC_INSTANTIATE_METRICS(T)                                       \
  template int argmax_row<T>(const T*, int64_t);                         \
  template std::vector<int> predictions<T>(const Tensor<T>&);            \
  template double top_k_accuracy<T>(const Tensor<T>&,                    \
                                    std::span<const int>, int);          \
  template RocResult roc_auc<T>(const Tensor<T>&, std::span<const int>);

DSC_INSTANTIATE_METRICS(float)
DSC_INSTANTIATE_METRICS(double)
#undef DSC_INSTANTIATE_METRICS

}  // namespace dsc
