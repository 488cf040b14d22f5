#include "tpc/tuning.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>

#include <json.hpp>

#include "tpc/metrics.hpp"
#include "tpc/serde.hpp"

namespace tpc::tuning {

namespace {
constexpr const char* kReportHeader = "TPC-CVREPORT v1";
}

void GridSpec::validate() const {
  const bool any_empty = output_size.empty() || kernel_init.empty() || recurrent_init.empty() ||
                         dropout_rate.empty() || output_activation.empty() ||
                         optimizer.empty() || batch_size.empty() || num_layers.empty() ||
                         epochs.empty();
  if (any_empty) throw Error(Errc::EmptyAxis, "every grid axis needs at least one candidate");
  if (output_activation != std::vector<std::string>{"softmax"}) {
    throw Error(Errc::BadShape, "output_activation axis must be exactly [softmax]");
  }
}

std::size_t GridSpec::config_count() const {
  return output_size.size() * kernel_init.size() * recurrent_init.size() * dropout_rate.size() *
         output_activation.size() * optimizer.size() * batch_size.size() * num_layers.size() *
         epochs.size();
}

std::vector<std::size_t> FoldPlan::fold_indices(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    if (assignment[i] == fold) out.push_back(i);
  }
  return out;
}

FoldPlan kfold_partition(std::size_t n, int k, std::uint64_t seed) {
  if (k < 2 || static_cast<std::size_t>(k) > n) {
    throw Error(Errc::KTooLarge, "need 2 <= k <= n, got k=" + std::to_string(k) +
                                     " n=" + std::to_string(n));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  FoldPlan plan;
  plan.k = k;
  plan.assignment.assign(n, 0);
  // Contiguous slices of the shuffled order; the first n%k folds get one extra.
  const std::size_t base = n / static_cast<std::size_t>(k);
  const std::size_t extra = n % static_cast<std::size_t>(k);
  std::size_t pos = 0;
  for (int fold = 0; fold < k; ++fold) {
    const std::size_t size = base + (static_cast<std::size_t>(fold) < extra ? 1 : 0);
    for (std::size_t i = 0; i < size; ++i) {
      plan.assignment[order[pos++]] = fold;
    }
  }
  return plan;
}

std::vector<neural::HyperParams> grid_expand(const GridSpec& spec) {
  spec.validate();
  std::vector<neural::HyperParams> out;
  out.reserve(spec.config_count());
  for (int hidden : spec.output_size)
    for (const auto& kinit : spec.kernel_init)
      for (const auto& rinit : spec.recurrent_init)
        for (double dropout : spec.dropout_rate)
          for (const auto& activation : spec.output_activation)
            for (const auto& opt : spec.optimizer)
              for (int batch : spec.batch_size)
                for (int layers : spec.num_layers)
                  for (int epochs : spec.epochs) {
                    (void)activation;
                    neural::HyperParams hp;
                    hp.output_size = hidden;
                    hp.kernel_init = kinit;
                    hp.recurrent_init = rinit;
                    hp.dropout_rate = dropout;
                    hp.optimizer = opt;
                    hp.batch_size = batch;
                    hp.num_layers = layers;
                    hp.epochs = epochs;
                    out.push_back(hp);
                  }
  return out;
}

CvSummary cross_validate(const neural::HyperParams& hp, const std::vector<Matrix>& windows,
                         const std::vector<int>& labels, int num_classes,
                         const FoldPlan& plan) {
  if (plan.assignment.size() != windows.size() || windows.size() != labels.size()) {
    throw Error(Errc::LengthMismatch, "fold plan does not cover the sample set");
  }
  CvSummary summary;
  for (int fold = 0; fold < plan.k; ++fold) {
    std::vector<Matrix> train_windows, val_windows;
    std::vector<int> train_labels, val_labels;
    for (std::size_t i = 0; i < windows.size(); ++i) {
      if (plan.assignment[i] == fold) {
        val_windows.push_back(windows[i]);
        val_labels.push_back(labels[i]);
      } else {
        train_windows.push_back(windows[i]);
        train_labels.push_back(labels[i]);
      }
    }
    neural::HyperParams fold_hp = hp;
    fold_hp.seed = hp.seed ^ static_cast<std::uint64_t>(fold);
    neural::ModelParams model =
        neural::init_params(fold_hp, train_windows.front().cols, num_classes);
    neural::train(model, train_windows, train_labels, fold_hp);
    std::vector<int> preds;
    preds.reserve(val_windows.size());
    for (const Matrix& w : val_windows) preds.push_back(neural::predict(model, w).label);
    const metrics::MetricReport r =
        metrics::score(metrics::confusion(preds, val_labels, num_classes));
    summary.folds.push_back({r.accuracy, r.macro_f1});
  }
  for (const FoldMetrics& f : summary.folds) {
    summary.mean_accuracy += f.accuracy;
    summary.mean_macro_f1 += f.macro_f1;
  }
  summary.mean_accuracy /= static_cast<double>(plan.k);
  summary.mean_macro_f1 /= static_cast<double>(plan.k);
  return summary;
}

namespace {

std::vector<std::size_t> ranking_of(const std::vector<ConfigResult>& configs) {
  std::vector<std::size_t> ranking(configs.size());
  std::iota(ranking.begin(), ranking.end(), 0);
  std::sort(ranking.begin(), ranking.end(), [&](std::size_t a, std::size_t b) {
    const ConfigResult& ca = configs[a];
    const ConfigResult& cb = configs[b];
    if (ca.cv.mean_accuracy != cb.cv.mean_accuracy) {
      return ca.cv.mean_accuracy > cb.cv.mean_accuracy;
    }
    if (ca.cv.mean_macro_f1 != cb.cv.mean_macro_f1) {
      return ca.cv.mean_macro_f1 > cb.cv.mean_macro_f1;
    }
    return ca.ordinal < cb.ordinal;
  });
  return ranking;
}

}  // namespace

CvReport grid_search_ordered(const GridSpec& spec, const std::vector<Matrix>& windows,
                             const std::vector<int>& labels, int num_classes, int k,
                             std::uint64_t seed, const std::vector<std::size_t>& order) {
  spec.validate();
  if (windows.empty()) throw Error(Errc::EmptyDataset, "no samples to tune on");
  std::vector<neural::HyperParams> configs = grid_expand(spec);
  const FoldPlan plan = kfold_partition(windows.size(), k, seed);

  CvReport report;
  report.k = k;
  report.seed = seed;
  report.configs.resize(configs.size());
  for (std::size_t ordinal : order) {
    if (ordinal >= configs.size()) {
      throw Error(Errc::BadShape, "evaluation order references unknown config");
    }
    neural::HyperParams hp = configs[ordinal];
    hp.seed = seed;
    const auto start = std::chrono::steady_clock::now();
    CvSummary cv = cross_validate(hp, windows, labels, num_classes, plan);
    const auto stop = std::chrono::steady_clock::now();
    ConfigResult& slot = report.configs[ordinal];
    slot.ordinal = ordinal;
    slot.hp = hp;
    slot.cv = std::move(cv);
    slot.wall_seconds = std::chrono::duration<double>(stop - start).count();
  }
  report.ranking = ranking_of(report.configs);
  report.best = report.ranking.front();
  return report;
}

CvReport grid_search(const GridSpec& spec, const std::vector<Matrix>& windows,
                     const std::vector<int>& labels, int num_classes, int k,
                     std::uint64_t seed) {
  std::vector<std::size_t> order(spec.config_count());
  std::iota(order.begin(), order.end(), 0);
  return grid_search_ordered(spec, windows, labels, num_classes, k, seed, order);
}

bool CvReport::equivalent(const CvReport& other) const {
  if (k != other.k || seed != other.seed || best != other.best || ranking != other.ranking ||
      configs.size() != other.configs.size()) {
    return false;
  }
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const ConfigResult& a = configs[i];
    const ConfigResult& b = other.configs[i];
    if (a.ordinal != b.ordinal || !(a.hp == b.hp) ||
        a.cv.mean_accuracy != b.cv.mean_accuracy ||
        a.cv.mean_macro_f1 != b.cv.mean_macro_f1 || a.cv.folds.size() != b.cv.folds.size()) {
      return false;
    }
    for (std::size_t f = 0; f < a.cv.folds.size(); ++f) {
      if (a.cv.folds[f].accuracy != b.cv.folds[f].accuracy ||
          a.cv.folds[f].macro_f1 != b.cv.folds[f].macro_f1) {
        return false;
      }
    }
  }
  return true;
}

GridSpec grid_spec_from_json(const std::string& text) {
  try {
    nlohmann::json j = nlohmann::json::parse(text);
    GridSpec spec;
    if (j.contains("output_size")) spec.output_size = j["output_size"].get<std::vector<int>>();
    if (j.contains("kernel_init")) {
      spec.kernel_init = j["kernel_init"].get<std::vector<neural::KernelInitSpec>>();
    }
    if (j.contains("recurrent_init")) {
      spec.recurrent_init = j["recurrent_init"].get<std::vector<neural::RecurrentInitSpec>>();
    }
    if (j.contains("dropout_rate")) {
      spec.dropout_rate = j["dropout_rate"].get<std::vector<double>>();
    }
    if (j.contains("output_activation")) {
      spec.output_activation = j["output_activation"].get<std::vector<std::string>>();
    }
    if (j.contains("optimizer")) {
      spec.optimizer = j["optimizer"].get<std::vector<neural::OptimizerSpec>>();
    }
    if (j.contains("batch_size")) spec.batch_size = j["batch_size"].get<std::vector<int>>();
    if (j.contains("num_layers")) spec.num_layers = j["num_layers"].get<std::vector<int>>();
    if (j.contains("epochs")) spec.epochs = j["epochs"].get<std::vector<int>>();
    spec.validate();
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::CorruptPayload, std::string("grid spec: ") + e.what());
  }
}

std::string grid_spec_to_json(const GridSpec& spec) {
  nlohmann::json j;
  j["output_size"] = spec.output_size;
  j["kernel_init"] = spec.kernel_init;
  j["recurrent_init"] = spec.recurrent_init;
  j["dropout_rate"] = spec.dropout_rate;
  j["output_activation"] = spec.output_activation;
  j["optimizer"] = spec.optimizer;
  j["batch_size"] = spec.batch_size;
  j["num_layers"] = spec.num_layers;
  j["epochs"] = spec.epochs;
  return j.dump(2);
}

std::string save_report(const CvReport& report) {
  nlohmann::json j;
  j["k"] = report.k;
  j["seed"] = report.seed;
  j["best"] = report.best;
  j["ranking"] = report.ranking;
  nlohmann::json configs = nlohmann::json::array();
  for (const ConfigResult& c : report.configs) {
    nlohmann::json folds = nlohmann::json::array();
    for (const FoldMetrics& f : c.cv.folds) {
      folds.push_back({{"accuracy", f.accuracy}, {"macro_f1", f.macro_f1}});
    }
    configs.push_back({{"ordinal", c.ordinal},
                       {"hyperparams", c.hp},
                       {"folds", folds},
                       {"mean_accuracy", c.cv.mean_accuracy},
                       {"mean_macro_f1", c.cv.mean_macro_f1},
                       {"wall_seconds", c.wall_seconds}});
  }
  j["configs"] = configs;
  return std::string(kReportHeader) + "\n" + j.dump() + "\n";
}

CvReport load_report(const std::string& bytes) {
  const std::size_t nl = bytes.find('\n');
  if (nl == std::string::npos || bytes.substr(0, nl) != kReportHeader) {
    throw Error(Errc::BadMagic, "not a TPC-CVREPORT v1 file");
  }
  try {
    nlohmann::json j = nlohmann::json::parse(bytes.substr(nl + 1));
    CvReport report;
    report.k = j.at("k").get<int>();
    report.seed = j.at("seed").get<std::uint64_t>();
    report.best = j.at("best").get<std::size_t>();
    report.ranking = j.at("ranking").get<std::vector<std::size_t>>();
    for (const auto& jc : j.at("configs")) {
      ConfigResult c;
      c.ordinal = jc.at("ordinal").get<std::size_t>();
      c.hp = jc.at("hyperparams").get<neural::HyperParams>();
      for (const auto& jf : jc.at("folds")) {
        c.cv.folds.push_back(
            {jf.at("accuracy").get<double>(), jf.at("macro_f1").get<double>()});
      }
      c.cv.mean_accuracy = jc.at("mean_accuracy").get<double>();
      c.cv.mean_macro_f1 = jc.at("mean_macro_f1").get<double>();
      c.wall_seconds = jc.at("wall_seconds").get<double>();
      report.configs.push_back(std::move(c));
    }
    return report;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::CorruptPayload, std::string("cv report: ") + e.what());
  }
}

}  // namespace tpc::tuning
