#include "tpc/metrics.hpp"

#include <cstdio>
#include <numeric>

#include <json.hpp>

namespace tpc::metrics {

std::int64_t ConfusionMatrix::total() const {
  return std::accumulate(cells.begin(), cells.end(), std::int64_t{0});
}

ConfusionMatrix confusion(const std::vector<int>& predictions, const std::vector<int>& labels,
                          int num_classes) {
  if (predictions.size() != labels.size()) {
    throw Error(Errc::LengthMismatch, "predictions and labels differ in length");
  }
  if (predictions.empty()) {
    throw Error(Errc::LengthMismatch, "no scored samples");
  }
  ConfusionMatrix cm(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int a = labels[i];
    const int p = predictions[i];
    if (a < 0 || a >= num_classes || p < 0 || p >= num_classes) {
      throw Error(Errc::ClassOutOfRange, "class index outside [0, C) at sample " +
                                             std::to_string(i));
    }
    ++cm.at(a, p);
  }
  return cm;
}

double accuracy(const ConfusionMatrix& cm) {
  const std::int64_t total = cm.total();
  if (total == 0) throw Error(Errc::EmptyMatrix, "accuracy of empty matrix");
  std::int64_t trace = 0;
  for (int c = 0; c < cm.num_classes; ++c) trace += cm.at(c, c);
  return static_cast<double>(trace) / static_cast<double>(total);
}

std::vector<ClassScore> precision_recall_f1(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw Error(Errc::EmptyMatrix, "metrics of empty matrix");
  std::vector<ClassScore> out(static_cast<std::size_t>(cm.num_classes));
  for (int c = 0; c < cm.num_classes; ++c) {
    std::int64_t col_sum = 0;
    std::int64_t row_sum = 0;
    for (int i = 0; i < cm.num_classes; ++i) {
      col_sum += cm.at(i, c);
      row_sum += cm.at(c, i);
    }
    ClassScore& s = out[static_cast<std::size_t>(c)];
    const double diag = static_cast<double>(cm.at(c, c));
    if (col_sum == 0) {
      s.degenerate_precision = true;  // never predicted: score 0, flagged
    } else {
      s.precision = diag / static_cast<double>(col_sum);
    }
    if (row_sum == 0) {
      s.degenerate_recall = true;
    } else {
      s.recall = diag / static_cast<double>(row_sum);
    }
    s.f1 = (s.precision + s.recall == 0.0)
               ? 0.0
               : 2.0 * s.precision * s.recall / (s.precision + s.recall);
  }
  return out;
}

MetricReport score(const ConfusionMatrix& cm) {
  MetricReport r;
  r.cm = cm;
  r.accuracy = accuracy(cm);
  r.per_class = precision_recall_f1(cm);
  for (const ClassScore& s : r.per_class) {
    r.macro_precision += s.precision;
    r.macro_recall += s.recall;
    r.macro_f1 += s.f1;
  }
  const double n = static_cast<double>(r.per_class.size());
  r.macro_precision /= n;
  r.macro_recall /= n;
  r.macro_f1 /= n;
  return r;
}

std::string render_text(const MetricReport& report, const std::vector<std::string>& names) {
  if (static_cast<int>(names.size()) != report.cm.num_classes) {
    throw Error(Errc::NameCountMismatch, "one name per class required");
  }
  std::string out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-16s %10s %10s %10s\n", "class", "precision", "recall",
                "f1");
  out += line;
  for (int c = 0; c < report.cm.num_classes; ++c) {
    const ClassScore& s = report.per_class[static_cast<std::size_t>(c)];
    std::snprintf(line, sizeof(line), "%-16s %10.6f %10.6f %10.6f%s\n",
                  names[static_cast<std::size_t>(c)].c_str(), s.precision, s.recall, s.f1,
                  (s.degenerate_precision || s.degenerate_recall) ? "  (degenerate)" : "");
    out += line;
  }
  std::snprintf(line, sizeof(line), "%-16s %10.6f %10.6f %10.6f\n", "macro",
                report.macro_precision, report.macro_recall, report.macro_f1);
  out += line;
  std::snprintf(line, sizeof(line), "accuracy %.6f over %lld samples\n", report.accuracy,
                static_cast<long long>(report.cm.total()));
  out += line;
  return out;
}

std::string render_json(const MetricReport& report, const std::vector<std::string>& names) {
  if (static_cast<int>(names.size()) != report.cm.num_classes) {
    throw Error(Errc::NameCountMismatch, "one name per class required");
  }
  nlohmann::json j;
  j["num_classes"] = report.cm.num_classes;
  j["names"] = names;
  nlohmann::json cells = nlohmann::json::array();
  for (int a = 0; a < report.cm.num_classes; ++a) {
    nlohmann::json row = nlohmann::json::array();
    for (int p = 0; p < report.cm.num_classes; ++p) row.push_back(report.cm.at(a, p));
    cells.push_back(row);
  }
  j["confusion"] = cells;
  j["accuracy"] = report.accuracy;
  nlohmann::json per = nlohmann::json::array();
  for (std::size_t c = 0; c < report.per_class.size(); ++c) {
    const ClassScore& s = report.per_class[c];
    per.push_back({{"name", names[c]},
                   {"precision", s.precision},
                   {"recall", s.recall},
                   {"f1", s.f1},
                   {"degenerate_precision", s.degenerate_precision},
                   {"degenerate_recall", s.degenerate_recall}});
  }
  j["per_class"] = per;
  j["macro"] = {{"precision", report.macro_precision},
                {"recall", report.macro_recall},
                {"f1", report.macro_f1}};
  return j.dump(2);
}

ConfusionMatrix parse_report(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::CorruptPayload, e.what());
  }
  ConfusionMatrix cm(j.at("num_classes").get<int>());
  const auto& cells = j.at("confusion");
  for (int a = 0; a < cm.num_classes; ++a) {
    for (int p = 0; p < cm.num_classes; ++p) {
      cm.at(a, p) = cells.at(a).at(p).get<std::int64_t>();
    }
  }
  return cm;
}

}  // namespace tpc::metrics
