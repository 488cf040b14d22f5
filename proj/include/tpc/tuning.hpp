#pragma once

#include <string>
#include <vector>

#include "tpc/matrix.hpp"
#include "tpc/neural.hpp"

namespace tpc::tuning {

/// Candidate lists for every tunable axis. The activation axis exists for
/// completeness but is pinned to softmax.
struct GridSpec {
  std::vector<int> output_size = {8, 16};
  std::vector<neural::KernelInitSpec> kernel_init = {{neural::KernelInit::GlorotUniform}};
  std::vector<neural::RecurrentInitSpec> recurrent_init = {
      {neural::RecurrentInit::GlorotUniform}};
  std::vector<double> dropout_rate = {0.0};
  std::vector<std::string> output_activation = {"softmax"};
  std::vector<neural::OptimizerSpec> optimizer = {{}};
  std::vector<int> batch_size = {16, 32, 64};
  std::vector<int> num_layers = {1, 2};
  std::vector<int> epochs = {10};

  void validate() const;
  std::size_t config_count() const;
};

/// Partition of [0, n) into k folds whose sizes differ by at most one.
struct FoldPlan {
  int k = 0;
  std::vector<int> assignment;  // sample index -> fold index

  std::vector<std::size_t> fold_indices(int fold) const;
};

FoldPlan kfold_partition(std::size_t n, int k, std::uint64_t seed);

/// Cartesian product in fixed axis order (output_size slowest, epochs fastest).
std::vector<neural::HyperParams> grid_expand(const GridSpec& spec);

struct FoldMetrics {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
};

struct CvSummary {
  std::vector<FoldMetrics> folds;
  double mean_accuracy = 0.0;
  double mean_macro_f1 = 0.0;
};

/// Trains on all-but-fold, validates on the fold, for every fold. The per-fold
/// training seed is hp.seed XOR fold index.
CvSummary cross_validate(const neural::HyperParams& hp, const std::vector<Matrix>& windows,
                         const std::vector<int>& labels, int num_classes,
                         const FoldPlan& plan);

struct ConfigResult {
  std::size_t ordinal = 0;
  neural::HyperParams hp;
  CvSummary cv;
  double wall_seconds = 0.0;
};

struct CvReport {
  int k = 0;
  std::uint64_t seed = 0;
  std::vector<ConfigResult> configs;   // by ordinal
  std::vector<std::size_t> ranking;    // ordinals, best first
  std::size_t best = 0;

  const neural::HyperParams& best_hp() const { return configs[best].hp; }

  /// Equality on everything that is deterministic (wall time excluded).
  bool equivalent(const CvReport& other) const;
};

CvReport grid_search(const GridSpec& spec, const std::vector<Matrix>& windows,
                     const std::vector<int>& labels, int num_classes, int k,
                     std::uint64_t seed);

/// Same search, evaluating configs in the given ordinal order. The report is
/// identical to grid_search's regardless of the order.
CvReport grid_search_ordered(const GridSpec& spec, const std::vector<Matrix>& windows,
                             const std::vector<int>& labels, int num_classes, int k,
                             std::uint64_t seed, const std::vector<std::size_t>& order);

// Grid spec JSON (axis name -> candidate array) and the `TPC-CVREPORT v1` file.
GridSpec grid_spec_from_json(const std::string& text);
std::string grid_spec_to_json(const GridSpec& spec);

std::string save_report(const CvReport& report);
CvReport load_report(const std::string& bytes);

}  // namespace tpc::tuning
