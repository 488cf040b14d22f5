#pragma once

#include <string>
#include <vector>

#include "tpc/common.hpp"

namespace tpc::metrics {

/// C x C count matrix; rows are actual classes, columns are predicted.
struct ConfusionMatrix {
  int num_classes = 0;
  std::vector<std::int64_t> cells;  // row-major

  ConfusionMatrix() = default;
  explicit ConfusionMatrix(int c)
      : num_classes(c), cells(static_cast<std::size_t>(c) * c, 0) {}

  std::int64_t& at(int actual, int predicted) {
    return cells[static_cast<std::size_t>(actual) * num_classes + predicted];
  }
  std::int64_t at(int actual, int predicted) const {
    return cells[static_cast<std::size_t>(actual) * num_classes + predicted];
  }

  std::int64_t total() const;

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

struct ClassScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool degenerate_precision = false;  // class never predicted
  bool degenerate_recall = false;     // class never present
};

struct MetricReport {
  ConfusionMatrix cm;
  double accuracy = 0.0;
  std::vector<ClassScore> per_class;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
};

ConfusionMatrix confusion(const std::vector<int>& predictions, const std::vector<int>& labels,
                          int num_classes);

double accuracy(const ConfusionMatrix& cm);

std::vector<ClassScore> precision_recall_f1(const ConfusionMatrix& cm);

MetricReport score(const ConfusionMatrix& cm);

/// Fixed-width text table, byte-stable for identical inputs.
std::string render_text(const MetricReport& report, const std::vector<std::string>& names);

/// JSON document; parse_report(render_json(...)) recovers the confusion matrix.
std::string render_json(const MetricReport& report, const std::vector<std::string>& names);

ConfusionMatrix parse_report(const std::string& json_text);

}  // namespace tpc::metrics
