#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "tpc/common.hpp"

namespace tpc::roadnet {

inline constexpr int kSpeedBins = 20;       // 5 km/h resolution up to the 100 km/h cap
inline constexpr double kBinWidth = 5.0;
inline constexpr int kDefaultWindows = 8;   // 3-hour daily intervals

struct Segment {
  std::string id;
  std::string from;
  std::string to;
  double length_km = 1.0;
  double speed_limit_kmph = 50.0;

  friend bool operator==(const Segment&, const Segment&) = default;
};

/// Directed road graph; vertices are intersections, edges are road segments.
struct RoadGraph {
  std::set<std::string> vertices;
  std::vector<Segment> segments;
  // Optional sensor attachment: which count series observes a segment.
  std::map<std::string, std::string> sensor_of_segment;

  void validate() const;
  const Segment* find_segment(const std::string& id) const;
  const Segment& segment(const std::string& id) const;
  /// head(from_edge) == tail(to_edge)
  bool adjacent(const std::string& from_edge, const std::string& to_edge) const;

  friend bool operator==(const RoadGraph&, const RoadGraph&) = default;
};

struct SpeedTransitionEvent {
  std::string from_edge;
  std::string to_edge;
  double s_origin = 0.0;  // kmph on the origin segment
  double s_dest = 0.0;    // kmph on the destination segment
  DateTime at;
};

/// Row-stochastic matrix of discretized speed-change probabilities for one
/// (edge pair, daily window). Rows that saw no events stay all-zero and are
/// listed in unobserved_rows rather than being filled with a fabricated prior.
struct SpeedTransitionMatrix {
  int bins = kSpeedBins;
  int window = 0;
  std::vector<std::int64_t> counts;  // bins x bins, row-major
  std::vector<double> probs;         // bins x bins, row-major
  std::vector<int> unobserved_rows;

  SpeedTransitionMatrix()
      : counts(static_cast<std::size_t>(kSpeedBins) * kSpeedBins, 0),
        probs(static_cast<std::size_t>(kSpeedBins) * kSpeedBins, 0.0) {}

  std::int64_t& count_at(int i, int j) { return counts[static_cast<std::size_t>(i) * bins + j]; }
  std::int64_t count_at(int i, int j) const {
    return counts[static_cast<std::size_t>(i) * bins + j];
  }
  double prob_at(int i, int j) const { return probs[static_cast<std::size_t>(i) * bins + j]; }

  std::int64_t total_count() const;

  friend bool operator==(const SpeedTransitionMatrix&, const SpeedTransitionMatrix&) = default;
};

struct StmKey {
  std::string from_edge;
  std::string to_edge;
  int window = 0;

  friend auto operator<=>(const StmKey&, const StmKey&) = default;
};

using StmStore = std::map<StmKey, SpeedTransitionMatrix>;

/// floor(s / 5) clamped into [0, 19]; speeds at or above the cap land in the
/// last bin. Negative speeds are rejected.
int bin_speed(double speed_kmph);

/// Daily window of a timestamp: floor(seconds_of_day * num_windows / 86400).
int window_of(DateTime at, int num_windows);

/// Increments the count cell for one observed transition. The edge pair must
/// be adjacent in the graph.
void accumulate(SpeedTransitionMatrix& stm, const SpeedTransitionEvent& event,
                const RoadGraph& graph);

/// Divides each observed row by its sum; zero rows are preserved and flagged.
void normalize_stm(SpeedTransitionMatrix& stm);

StmStore build_stms(const RoadGraph& graph, const std::vector<SpeedTransitionEvent>& events,
                    int num_windows = kDefaultWindows);

/// Row-major flattening of the probability matrix (bins*bins values).
std::vector<double> stm_features(const SpeedTransitionMatrix& stm);

// JSON (de)serialization for the graph and the `TPC-STM v1` store file.
std::string graph_to_json(const RoadGraph& graph);
RoadGraph graph_from_json(const std::string& text);

std::string save_stm_store(const StmStore& store, int num_windows);
StmStore load_stm_store(const std::string& bytes, int* num_windows = nullptr);

std::vector<SpeedTransitionEvent> events_from_json(const std::string& text);
std::string events_to_json(const std::vector<SpeedTransitionEvent>& events);

}  // namespace tpc::roadnet
