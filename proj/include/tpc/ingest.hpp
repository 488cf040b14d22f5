#pragma once

#include <istream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "tpc/common.hpp"
#include "tpc/matrix.hpp"

namespace tpc::ingest {

struct ObservationRow {
  DateTime at;
  std::string junction;
  std::int64_t vehicles = 0;
  std::string record_id;
};

/// Parsed sensor table, sorted by (junction, timestamp), strictly increasing
/// timestamps within a junction.
struct ObservationTable {
  std::vector<ObservationRow> rows;

  std::vector<std::string> junctions() const;
};

struct ClassTaxonomy {
  int num_classes = 3;
  std::vector<std::string> names = {"free_flow", "moderate", "congested"};
  std::vector<double> quantile_cuts = {0.40, 0.75};

  void validate() const;

  friend bool operator==(const ClassTaxonomy&, const ClassTaxonomy&) = default;
};

struct LabeledSeries {
  std::string junction;
  std::vector<double> values;
  std::vector<int> labels;
  std::vector<DateTime> stamps;
};

struct TrafficSample {
  Matrix window;  // L x F
  int label = 0;
  std::string junction;
  DateTime window_start;

  friend bool operator==(const TrafficSample&, const TrafficSample&) = default;
};

/// Per-junction (mean, stddev) of the raw count feature.
struct NormStats {
  std::map<std::string, std::pair<double, double>> by_junction;

  friend bool operator==(const NormStats&, const NormStats&) = default;
};

struct SampleSet {
  std::vector<TrafficSample> samples;
  ClassTaxonomy taxonomy;
  NormStats norm_stats;
  int window_length = 0;
  int feature_width = 0;
  int horizon = 1;
};

/// Parses `DateTime,Junction,Vehicles,ID` CSV. Rejects out-of-contract input
/// rather than repairing it; see the Errc values for the failure modes.
ObservationTable parse_traffic_csv(std::istream& in);
ObservationTable parse_traffic_csv(const std::string& text);

/// Labels every reading by its junction-local nearest-rank quantile band:
/// label = number of thresholds strictly below the count.
std::vector<LabeledSeries> derive_labels(const ObservationTable& table,
                                         const ClassTaxonomy& taxonomy);

/// Sliding windows of length L; the label is taken `horizon` steps past the
/// window end. Yields max(0, len - L - horizon + 1) samples.
/// With time_features, hour-of-day sine/cosine columns are appended (F = 3).
std::vector<TrafficSample> make_windows(const LabeledSeries& series, int window_length,
                                        int horizon, bool time_features = false);

/// Z-scores the count column per junction, computing stats from these samples.
SampleSet normalize(std::vector<TrafficSample> samples, const ClassTaxonomy& taxonomy,
                    int horizon = 1);

/// Same transform but reusing previously computed stats (new data at inference).
SampleSet normalize_with(std::vector<TrafficSample> samples, const ClassTaxonomy& taxonomy,
                         const NormStats& stats, int horizon = 1);

std::pair<SampleSet, SampleSet> split(const SampleSet& set, double test_fraction,
                                      std::uint64_t seed);

// Dataset file: header line `TPC-DATASET v1`, then one JSON document.
std::string save_dataset(const SampleSet& set);
SampleSet load_dataset(const std::string& bytes);

}  // namespace tpc::ingest
