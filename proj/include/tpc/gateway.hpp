#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tpc/ingest.hpp"
#include "tpc/neural.hpp"
#include "tpc/roadnet.hpp"
#include "tpc/routing.hpp"

namespace tpc::gateway {

struct WindowingConfig {
  int length = 12;
  int horizon = 1;
  int daily_windows = roadnet::kDefaultWindows;
  bool time_features = false;
};

struct Config {
  std::string dataset_path;
  std::string model_path;
  std::string stm_path;
  std::string routedb_path;
  std::string grid_path;
  ingest::ClassTaxonomy taxonomy;
  WindowingConfig windowing;
  std::vector<double> class_speed_factors = routing::kDefaultSpeedFactors;
  double feedback_alpha = 0.3;
  std::string bind_address = "127.0.0.1:8088";

  void validate() const;
  static Config from_json(const std::string& text);
  std::string to_json() const;
};

/// Loads the config named by TPC_CONFIG (or an explicit path); either may be
/// empty, yielding defaults. CLI flags override whatever is loaded.
Config load_config(const std::string& explicit_path);

// ---------------------------------------------------------------------------
// Seed-deterministic synthetic fixtures. The public dataset carries neither
// labels nor speeds, so reproducible synthetic inputs are a first-class tool.

/// Hourly count CSV with three congestion regimes per junction, block
/// occupancies aligned with the default taxonomy's quantile cuts.
std::string synth_traffic_csv(std::uint64_t seed, int junctions, int rows_per_junction);

/// Ring-with-chords directed graph; every segment carries a sensor id cycling
/// through the synthetic junctions.
roadnet::RoadGraph synth_graph(std::uint64_t seed, int vertices, int chords, int sensors);

/// Speed transition events over each adjacent segment pair, slow during rush
/// hours, spanning the given number of days.
std::vector<roadnet::SpeedTransitionEvent> synth_events(const roadnet::RoadGraph& graph,
                                                        std::uint64_t seed, int days,
                                                        int events_per_pair_per_hour);

// ---------------------------------------------------------------------------

/// Classifies every sample, collects per-interval class votes per sensor, and
/// materializes a route database with one daily pattern per segment.
/// Sample cadence is hourly: the label reading sits (L + horizon - 1) hours
/// after window_start.
routing::RouteDb build_route_db(const roadnet::RoadGraph& graph,
                                const neural::ModelParams& model,
                                const ingest::SampleSet& set, int daily_windows,
                                std::span<const double> factors);

// ---------------------------------------------------------------------------

/// JSON-over-HTTP route service. Reads share the database under a shared
/// lock; feedback writes are serialized and bump the version counter, so a
/// response is always consistent with exactly one database state.
class Service {
 public:
  Service(routing::RouteDb db, Config cfg);
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds the listening socket; false on failure.
  bool bind(const std::string& host, int port);
  /// Binds an ephemeral port and returns it (-1 on failure).
  int bind_any(const std::string& host);
  /// Serves until stop(); call after bind().
  void serve_blocking();
  void stop();

  std::uint64_t version() const;
  routing::RouteDb snapshot() const;
  /// Atomically writes the current database to the given path.
  void flush(const std::string& path) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

int run_cli(int argc, char** argv);

}  // namespace tpc::gateway
