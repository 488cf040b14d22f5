#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tpc/roadnet.hpp"

namespace tpc::routing {

inline const std::vector<double> kDefaultSpeedFactors = {1.0, 0.6, 0.3};

enum class Provenance { Classified, FeedbackAdjusted };

/// Per-segment expected speed for each daily window, periodic over the day.
struct DailyPattern {
  std::string segment;
  std::vector<double> interval_speeds;  // kmph, one per window
  Provenance provenance = Provenance::Classified;

  friend bool operator==(const DailyPattern&, const DailyPattern&) = default;
};

struct Representative {
  DailyPattern pattern;              // elementwise mean of the members
  std::vector<std::string> members;  // segment ids, first is the founder

  friend bool operator==(const Representative&, const Representative&) = default;
};

struct RouteDb {
  roadnet::RoadGraph graph;
  int daily_windows = roadnet::kDefaultWindows;
  std::map<std::string, DailyPattern> patterns;             // segment -> own pattern
  std::map<std::string, Representative> representatives;    // pattern id -> rep
  std::map<std::string, std::string> member_rep;            // segment -> pattern id

  /// Own pattern if present, else the representative the segment belongs to.
  const DailyPattern& pattern_for(const std::string& segment) const;
  void validate() const;

  friend bool operator==(const RouteDb&, const RouteDb&) = default;
};

struct RoutePlan {
  struct Leg {
    std::string segment;
    double enter_seconds = 0.0;  // absolute, depart + elapsed (not wrapped)
    double traversal_seconds = 0.0;
  };
  std::vector<std::string> path;
  double depart_seconds = 0.0;
  double eta_seconds = 0.0;  // sum of traversal times
  std::vector<Leg> legs;
};

/// Expected speed of a congestion class on a segment: limit * factor[class].
double class_to_speed(int class_index, const roadnet::Segment& segment,
                      std::span<const double> factors = kDefaultSpeedFactors);

/// Majority class per interval (ties go to the more congested class), mapped
/// through class_to_speed. votes[w] holds the class votes for window w.
DailyPattern pattern_from_predictions(const roadnet::Segment& segment,
                                      const std::vector<std::vector<int>>& votes,
                                      std::span<const double> factors = kDefaultSpeedFactors);

/// Piecewise-constant integration of the segment length at the pattern's
/// interval speeds, carrying remaining distance across interval boundaries
/// and the midnight wrap.
double travel_time(const roadnet::Segment& segment, double enter_seconds_of_day,
                   const DailyPattern& pattern);

/// Earliest-arrival route via time-dependent label-setting search. Exact
/// because piecewise-constant speeds make per-segment arrival functions FIFO.
RoutePlan best_route(const RouteDb& db, const std::string& from, const std::string& to,
                     double depart_seconds_of_day);

/// Single-pass greedy clustering in db iteration order (sorted segment id).
/// A pattern joins a representative when its max-abs deviation from that
/// representative's founding pattern is <= epsilon; the stored representative
/// speeds are the running elementwise mean of the members. The founder test
/// bounds every member within 2*epsilon of the final mean in max-norm.
RouteDb compress_patterns(const RouteDb& db, double epsilon_kmph);

/// EWMA update of the covering interval; the segment detaches from any
/// representative and its pattern becomes feedback-adjusted.
void apply_feedback(RouteDb& db, const std::string& segment, double time_of_day_seconds,
                    double observed_speed_kmph, double alpha);

// `TPC-ROUTEDB v1` file.
std::string save_route_db(const RouteDb& db);
RouteDb load_route_db(const std::string& bytes);

}  // namespace tpc::routing
