#include "tpc/gateway.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <mutex>
#include <set>
#include <shared_mutex>

#include <httplib.h>
#include <json.hpp>

namespace tpc::gateway {

void Config::validate() const {
  taxonomy.validate();
  if (windowing.length < 1 || windowing.horizon < 1 || windowing.daily_windows < 1) {
    throw Error(Errc::BadShape, "windowing values must be >= 1");
  }
  if (static_cast<int>(class_speed_factors.size()) != taxonomy.num_classes) {
    throw Error(Errc::BadShape, "one speed factor per class required");
  }
  for (double f : class_speed_factors) {
    if (f <= 0.0 || f > 1.0) throw Error(Errc::BadShape, "speed factors must be in (0, 1]");
  }
  if (feedback_alpha < 0.0 || feedback_alpha > 1.0) {
    throw Error(Errc::BadShape, "feedback alpha must be in [0, 1]");
  }
  std::set<std::string> paths;
  for (const std::string* p : {&dataset_path, &model_path, &stm_path, &routedb_path, &grid_path}) {
    if (!p->empty() && !paths.insert(*p).second) {
      throw Error(Errc::BadShape, "configured paths must be distinct: " + *p);
    }
  }
}

Config Config::from_json(const std::string& text) {
  try {
    nlohmann::json j = nlohmann::json::parse(text);
    Config cfg;
    if (j.contains("paths")) {
      const auto& p = j["paths"];
      cfg.dataset_path = p.value("dataset", "");
      cfg.model_path = p.value("model", "");
      cfg.stm_path = p.value("stm", "");
      cfg.routedb_path = p.value("routedb", "");
      cfg.grid_path = p.value("grid", "");
    }
    if (j.contains("taxonomy")) {
      const auto& t = j["taxonomy"];
      cfg.taxonomy.num_classes = t.value("num_classes", 3);
      if (t.contains("names")) cfg.taxonomy.names = t["names"].get<std::vector<std::string>>();
      if (t.contains("quantile_cuts")) {
        cfg.taxonomy.quantile_cuts = t["quantile_cuts"].get<std::vector<double>>();
      }
    }
    if (j.contains("windowing")) {
      const auto& w = j["windowing"];
      cfg.windowing.length = w.value("length", 12);
      cfg.windowing.horizon = w.value("horizon", 1);
      cfg.windowing.daily_windows = w.value("daily_windows", roadnet::kDefaultWindows);
      cfg.windowing.time_features = w.value("time_features", false);
    }
    if (j.contains("class_speed_factors")) {
      cfg.class_speed_factors = j["class_speed_factors"].get<std::vector<double>>();
    }
    cfg.feedback_alpha = j.value("feedback_alpha", 0.3);
    cfg.bind_address = j.value("bind", cfg.bind_address);
    cfg.validate();
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::CorruptPayload, std::string("config: ") + e.what());
  }
}

std::string Config::to_json() const {
  nlohmann::json j;
  j["paths"] = {{"dataset", dataset_path},
                {"model", model_path},
                {"stm", stm_path},
                {"routedb", routedb_path},
                {"grid", grid_path}};
  j["taxonomy"] = {{"num_classes", taxonomy.num_classes},
                   {"names", taxonomy.names},
                   {"quantile_cuts", taxonomy.quantile_cuts}};
  j["windowing"] = {{"length", windowing.length},
                    {"horizon", windowing.horizon},
                    {"daily_windows", windowing.daily_windows},
                    {"time_features", windowing.time_features}};
  j["class_speed_factors"] = class_speed_factors;
  j["feedback_alpha"] = feedback_alpha;
  j["bind"] = bind_address;
  return j.dump(2);
}

Config load_config(const std::string& explicit_path) {
  std::string path = explicit_path;
  if (path.empty()) {
    if (const char* env = std::getenv("TPC_CONFIG")) path = env;
  }
  if (path.empty()) return Config{};
  return Config::from_json(read_file(path));
}

// ---------------------------------------------------------------------------
// Synthetic fixtures

std::string synth_traffic_csv(std::uint64_t seed, int junctions, int rows_per_junction) {
  if (junctions < 1 || rows_per_junction < 10) {
    throw Error(Errc::BadShape, "need >= 1 junction and >= 10 rows");
  }
  const int n = rows_per_junction;
  // Regime row counts aligned with the default cuts {0.40, 0.75}; the same
  // floor arithmetic the labeler uses, so regimes and labels coincide.
  const int n_low = static_cast<int>(0.40 * static_cast<double>(n));
  const int n_mid = static_cast<int>(0.75 * static_cast<double>(n)) - n_low;
  const int n_high = n - n_low - n_mid;

  std::string out = "DateTime,Junction,Vehicles,ID\n";
  const DateTime start = make_datetime(2023, 1, 2, 0, 0, 0);
  char line[128];
  for (int j = 1; j <= junctions; ++j) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(j)));
    const double scale = rng.uniform(0.8, 1.25);
    // One contiguous block per regime, in a junction-specific order. Few
    // regime switches keep next-step labels predictable from the window.
    std::vector<std::pair<int, double>> blocks = {{n_low, 20.0}, {n_mid, 50.0}, {n_high, 80.0}};
    rng.shuffle(blocks);
    std::vector<double> levels;
    levels.reserve(static_cast<std::size_t>(n));
    for (const auto& [count, base] : blocks) {
      for (int r = 0; r < count; ++r) levels.push_back(base);
    }
    for (int r = 0; r < n; ++r) {
      const double noisy = scale * (levels[static_cast<std::size_t>(r)] + rng.normal(0.0, 1.5));
      const long long count = std::max(0ll, std::llround(noisy));
      const DateTime at{start.epoch_s + static_cast<std::int64_t>(r) * 3600};
      std::snprintf(line, sizeof(line), "%s,%d,%lld,%s%02d\n", format_datetime(at).c_str(), j,
                    count, std::to_string(at.epoch_s).c_str(), j);
      out += line;
    }
  }
  return out;
}

roadnet::RoadGraph synth_graph(std::uint64_t seed, int vertices, int chords, int sensors) {
  if (vertices < 2) throw Error(Errc::BadShape, "need >= 2 vertices");
  if (sensors < 1) throw Error(Errc::BadShape, "need >= 1 sensor");
  Rng rng(mix_seed(seed, 0x6a6au));
  roadnet::RoadGraph g;
  std::vector<std::string> names;
  char buf[16];
  for (int v = 0; v < vertices; ++v) {
    std::snprintf(buf, sizeof(buf), "V%02d", v);
    names.emplace_back(buf);
    g.vertices.insert(names.back());
  }
  static const double kLimits[] = {50.0, 60.0, 70.0, 80.0};
  std::set<std::pair<std::string, std::string>> used;
  int next_id = 0;
  auto add_segment = [&](const std::string& from, const std::string& to) {
    if (from == to || !used.insert({from, to}).second) return;
    roadnet::Segment s;
    std::snprintf(buf, sizeof(buf), "s%03d", next_id);
    s.id = buf;
    s.from = from;
    s.to = to;
    s.length_km = rng.uniform(0.5, 3.0);
    s.speed_limit_kmph = kLimits[rng.below(4)];
    g.sensor_of_segment[s.id] = std::to_string(1 + next_id % sensors);
    g.segments.push_back(std::move(s));
    ++next_id;
  };
  // Two-way ring keeps everything reachable; chords add route variety.
  for (int v = 0; v < vertices; ++v) {
    add_segment(names[static_cast<std::size_t>(v)],
                names[static_cast<std::size_t>((v + 1) % vertices)]);
    add_segment(names[static_cast<std::size_t>((v + 1) % vertices)],
                names[static_cast<std::size_t>(v)]);
  }
  for (int c = 0; c < chords; ++c) {
    add_segment(names[rng.below(names.size())], names[rng.below(names.size())]);
  }
  g.validate();
  return g;
}

std::vector<roadnet::SpeedTransitionEvent> synth_events(const roadnet::RoadGraph& graph,
                                                        std::uint64_t seed, int days,
                                                        int events_per_pair_per_hour) {
  graph.validate();
  if (days < 1 || events_per_pair_per_hour < 1) {
    throw Error(Errc::BadShape, "need >= 1 day and >= 1 event per pair per hour");
  }
  std::vector<std::pair<const roadnet::Segment*, const roadnet::Segment*>> pairs;
  for (const roadnet::Segment& a : graph.segments) {
    for (const roadnet::Segment& b : graph.segments) {
      if (a.id != b.id && a.to == b.from) pairs.emplace_back(&a, &b);
    }
  }
  Rng rng(mix_seed(seed, 0xe7e7u));
  std::vector<roadnet::SpeedTransitionEvent> events;
  const DateTime start = make_datetime(2023, 3, 6, 0, 0, 0);
  for (int d = 0; d < days; ++d) {
    for (int hour = 0; hour < 24; ++hour) {
      const bool rush = (hour >= 7 && hour < 10) || (hour >= 16 && hour < 19);
      for (const auto& [a, b] : pairs) {
        for (int e = 0; e < events_per_pair_per_hour; ++e) {
          roadnet::SpeedTransitionEvent ev;
          ev.from_edge = a->id;
          ev.to_edge = b->id;
          const double f_a = rush ? 0.3 : 0.8;
          ev.s_origin = std::clamp(rng.normal(f_a * a->speed_limit_kmph, 5.0), 1.0, 100.0);
          ev.s_dest = std::clamp(rng.normal(f_a * b->speed_limit_kmph, 5.0), 1.0, 100.0);
          ev.at = DateTime{start.epoch_s + static_cast<std::int64_t>(d) * 86400 +
                           static_cast<std::int64_t>(hour) * 3600 +
                           static_cast<std::int64_t>(rng.below(3600))};
          events.push_back(std::move(ev));
        }
      }
    }
  }
  return events;
}

// ---------------------------------------------------------------------------

routing::RouteDb build_route_db(const roadnet::RoadGraph& graph,
                                const neural::ModelParams& model,
                                const ingest::SampleSet& set, int daily_windows,
                                std::span<const double> factors) {
  graph.validate();
  if (set.samples.empty()) throw Error(Errc::EmptyDataset, "no samples to classify");
  std::map<std::string, std::vector<std::vector<int>>> votes;
  const std::int64_t label_offset_s =
      static_cast<std::int64_t>(set.window_length + set.horizon - 1) * 3600;
  for (const ingest::TrafficSample& s : set.samples) {
    const int predicted = neural::predict(model, s.window).label;
    const DateTime label_time{s.window_start.epoch_s + label_offset_s};
    const int w = roadnet::window_of(label_time, daily_windows);
    auto& junction_votes = votes[s.junction];
    junction_votes.resize(static_cast<std::size_t>(daily_windows));
    junction_votes[static_cast<std::size_t>(w)].push_back(predicted);
  }
  routing::RouteDb db;
  db.graph = graph;
  db.daily_windows = daily_windows;
  for (const roadnet::Segment& seg : graph.segments) {
    auto sensor = graph.sensor_of_segment.find(seg.id);
    if (sensor == graph.sensor_of_segment.end()) {
      throw Error(Errc::UnknownJunction, "segment " + seg.id + " has no sensor");
    }
    auto v = votes.find(sensor->second);
    if (v == votes.end()) {
      throw Error(Errc::UnknownJunction,
                  "no samples for sensor " + sensor->second + " (segment " + seg.id + ")");
    }
    db.patterns[seg.id] = routing::pattern_from_predictions(seg, v->second, factors);
  }
  return db;
}

// ---------------------------------------------------------------------------
// HTTP service

namespace {

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

int status_for(Errc code) {
  switch (code) {
    case Errc::UnknownVertex:
    case Errc::UnknownSegment:
    case Errc::NoPath:
      return 404;
    case Errc::BadRequest:
    case Errc::BadTimestamp:
    case Errc::BadShape:
      return 422;
    default:
      return 500;
  }
}

void send_error(httplib::Response& res, const Error& e) {
  send_json(res, status_for(e.code()),
            {{"error", {{"code", errc_name(e.code())}, {"message", e.what()}}}});
}

nlohmann::json plan_to_json(const routing::RoutePlan& plan, std::uint64_t version) {
  nlohmann::json legs = nlohmann::json::array();
  for (const auto& leg : plan.legs) {
    legs.push_back({{"segment", leg.segment},
                    {"enter_seconds", leg.enter_seconds},
                    {"traversal_seconds", leg.traversal_seconds}});
  }
  return {{"path", plan.path},
          {"depart_seconds", plan.depart_seconds},
          {"eta_seconds", plan.eta_seconds},
          {"legs", legs},
          {"version", version}};
}

nlohmann::json pattern_to_json(const routing::DailyPattern& p, std::uint64_t version) {
  return {{"segment", p.segment},
          {"interval_speeds", p.interval_speeds},
          {"provenance",
           p.provenance == routing::Provenance::Classified ? "classified" : "feedback-adjusted"},
          {"version", version}};
}

}  // namespace

struct Service::Impl {
  mutable std::shared_mutex mutex;
  routing::RouteDb db;
  Config cfg;
  std::uint64_t version = 1;  // guarded by mutex
  httplib::Server server;
};

Service::Service(routing::RouteDb db, Config cfg) : impl_(new Impl) {
  db.validate();
  impl_->db = std::move(db);
  impl_->cfg = std::move(cfg);

  httplib::Server& server = impl_->server;
  Impl* impl = impl_.get();

  server.Get("/health", [](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, {{"status", "ok"}});
  });

  server.Post("/route", [impl](const httplib::Request& req, httplib::Response& res) {
    nlohmann::json body;
    try {
      body = nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::exception& e) {
      send_json(res, 400, {{"error", {{"code", "MalformedBody"}, {"message", e.what()}}}});
      return;
    }
    try {
      if (!body.contains("from") || !body.contains("to") || !body.contains("depart")) {
        throw Error(Errc::BadRequest, "route request needs from, to, depart");
      }
      const std::string from = body["from"].get<std::string>();
      const std::string to = body["to"].get<std::string>();
      const int depart = parse_time_of_day(body["depart"].get<std::string>());
      std::shared_lock lock(impl->mutex);
      const routing::RoutePlan plan =
          routing::best_route(impl->db, from, to, static_cast<double>(depart));
      send_json(res, 200, plan_to_json(plan, impl->version));
    } catch (const Error& e) {
      send_error(res, e);
    } catch (const nlohmann::json::exception& e) {
      send_json(res, 422, {{"error", {{"code", "BadRequest"}, {"message", e.what()}}}});
    }
  });

  server.Post("/feedback", [impl](const httplib::Request& req, httplib::Response& res) {
    nlohmann::json body;
    try {
      body = nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::exception& e) {
      send_json(res, 400, {{"error", {{"code", "MalformedBody"}, {"message", e.what()}}}});
      return;
    }
    try {
      if (!body.contains("segment") || !body.contains("time") || !body.contains("speed_kmph")) {
        throw Error(Errc::BadRequest, "feedback needs segment, time, speed_kmph");
      }
      const std::string segment = body["segment"].get<std::string>();
      const int tod = parse_time_of_day(body["time"].get<std::string>());
      const double speed = body["speed_kmph"].get<double>();
      std::unique_lock lock(impl->mutex);
      routing::apply_feedback(impl->db, segment, static_cast<double>(tod), speed,
                              impl->cfg.feedback_alpha);
      const std::uint64_t v = ++impl->version;
      send_json(res, 200, {{"accepted", true}, {"version", v}});
    } catch (const Error& e) {
      send_error(res, e);
    } catch (const nlohmann::json::exception& e) {
      send_json(res, 422, {{"error", {{"code", "BadRequest"}, {"message", e.what()}}}});
    }
  });

  server.Get("/patterns", [impl](const httplib::Request& req, httplib::Response& res) {
    try {
      if (!req.has_param("segment")) {
        throw Error(Errc::BadRequest, "patterns query needs ?segment=");
      }
      const std::string segment = req.get_param_value("segment");
      std::shared_lock lock(impl->mutex);
      const routing::DailyPattern& p = impl->db.pattern_for(segment);
      send_json(res, 200, pattern_to_json(p, impl->version));
    } catch (const Error& e) {
      send_error(res, e);
    }
  });
}

Service::~Service() { stop(); }

bool Service::bind(const std::string& host, int port) {
  return impl_->server.bind_to_port(host, port);
}

int Service::bind_any(const std::string& host) { return impl_->server.bind_to_any_port(host); }

void Service::serve_blocking() { impl_->server.listen_after_bind(); }

void Service::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

std::uint64_t Service::version() const {
  std::shared_lock lock(impl_->mutex);
  return impl_->version;
}

routing::RouteDb Service::snapshot() const {
  std::shared_lock lock(impl_->mutex);
  return impl_->db;
}

void Service::flush(const std::string& path) const {
  std::shared_lock lock(impl_->mutex);
  write_file_atomic(path, routing::save_route_db(impl_->db));
}

}  // namespace tpc::gateway
