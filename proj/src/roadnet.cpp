#include "tpc/roadnet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

namespace tpc::roadnet {

namespace {
constexpr const char* kStmHeader = "TPC-STM v1";
}

void RoadGraph::validate() const {
  std::set<std::string> seen;
  for (const Segment& s : segments) {
    if (!seen.insert(s.id).second) {
      throw Error(Errc::BadShape, "duplicate segment id " + s.id);
    }
    if (!vertices.count(s.from) || !vertices.count(s.to)) {
      throw Error(Errc::UnknownVertex, "segment " + s.id + " references unknown vertex");
    }
    if (s.length_km <= 0.0) {
      throw Error(Errc::BadShape, "segment " + s.id + " must have positive length");
    }
    if (s.speed_limit_kmph <= 0.0 || s.speed_limit_kmph > 100.0) {
      throw Error(Errc::BadShape, "segment " + s.id + " speed limit outside (0, 100]");
    }
  }
}

const Segment* RoadGraph::find_segment(const std::string& id) const {
  for (const Segment& s : segments) {
    if (s.id == id) return &s;
  }
  return nullptr;
}

const Segment& RoadGraph::segment(const std::string& id) const {
  const Segment* s = find_segment(id);
  if (!s) throw Error(Errc::UnknownSegment, id);
  return *s;
}

bool RoadGraph::adjacent(const std::string& from_edge, const std::string& to_edge) const {
  const Segment* a = find_segment(from_edge);
  const Segment* b = find_segment(to_edge);
  return a && b && a->to == b->from;
}

std::int64_t SpeedTransitionMatrix::total_count() const {
  return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

int bin_speed(double speed_kmph) {
  if (speed_kmph < 0.0) throw Error(Errc::NegativeSpeed, std::to_string(speed_kmph));
  const int bin = static_cast<int>(std::floor(speed_kmph / kBinWidth));
  return std::min(bin, kSpeedBins - 1);
}

int window_of(DateTime at, int num_windows) {
  const std::int64_t sod = seconds_of_day(at);
  return static_cast<int>(sod * num_windows / 86400);
}

void accumulate(SpeedTransitionMatrix& stm, const SpeedTransitionEvent& event,
                const RoadGraph& graph) {
  if (!graph.adjacent(event.from_edge, event.to_edge)) {
    throw Error(Errc::NonAdjacentEdges, event.from_edge + " -> " + event.to_edge);
  }
  ++stm.count_at(bin_speed(event.s_origin), bin_speed(event.s_dest));
}

void normalize_stm(SpeedTransitionMatrix& stm) {
  stm.unobserved_rows.clear();
  for (int i = 0; i < stm.bins; ++i) {
    std::int64_t row_sum = 0;
    for (int j = 0; j < stm.bins; ++j) row_sum += stm.count_at(i, j);
    if (row_sum == 0) {
      stm.unobserved_rows.push_back(i);
      for (int j = 0; j < stm.bins; ++j) stm.probs[static_cast<std::size_t>(i) * stm.bins + j] = 0.0;
    } else {
      for (int j = 0; j < stm.bins; ++j) {
        stm.probs[static_cast<std::size_t>(i) * stm.bins + j] =
            static_cast<double>(stm.count_at(i, j)) / static_cast<double>(row_sum);
      }
    }
  }
}

StmStore build_stms(const RoadGraph& graph, const std::vector<SpeedTransitionEvent>& events,
                    int num_windows) {
  if (num_windows < 1) throw Error(Errc::BadShape, "num_windows must be >= 1");
  StmStore store;
  for (const SpeedTransitionEvent& e : events) {
    StmKey key{e.from_edge, e.to_edge, window_of(e.at, num_windows)};
    auto [it, inserted] = store.try_emplace(key);
    if (inserted) it->second.window = key.window;
    accumulate(it->second, e, graph);
  }
  for (auto& [key, stm] : store) normalize_stm(stm);
  return store;
}

std::vector<double> stm_features(const SpeedTransitionMatrix& stm) {
  return stm.probs;
}

std::string graph_to_json(const RoadGraph& graph) {
  nlohmann::json j;
  j["vertices"] = graph.vertices;
  nlohmann::json segs = nlohmann::json::array();
  for (const Segment& s : graph.segments) {
    nlohmann::json js = {{"id", s.id},
                         {"from", s.from},
                         {"to", s.to},
                         {"length_km", s.length_km},
                         {"speed_limit_kmph", s.speed_limit_kmph}};
    auto it = graph.sensor_of_segment.find(s.id);
    if (it != graph.sensor_of_segment.end()) js["sensor"] = it->second;
    segs.push_back(js);
  }
  j["segments"] = segs;
  return j.dump(2);
}

RoadGraph graph_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
    RoadGraph g;
    for (const auto& v : j.at("vertices")) g.vertices.insert(v.get<std::string>());
    for (const auto& js : j.at("segments")) {
      Segment s;
      s.id = js.at("id").get<std::string>();
      s.from = js.at("from").get<std::string>();
      s.to = js.at("to").get<std::string>();
      s.length_km = js.at("length_km").get<double>();
      s.speed_limit_kmph = js.at("speed_limit_kmph").get<double>();
      if (js.contains("sensor")) g.sensor_of_segment[s.id] = js["sensor"].get<std::string>();
      g.segments.push_back(std::move(s));
    }
    g.validate();
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::CorruptPayload, std::string("graph: ") + e.what());
  }
}

std::string save_stm_store(const StmStore& store, int num_windows) {
  nlohmann::json j;
  j["bins"] = kSpeedBins;
  j["num_windows"] = num_windows;
  nlohmann::json matrices = nlohmann::json::object();
  for (const auto& [key, stm] : store) {
    matrices[key.from_edge + ":" + key.to_edge + ":" + std::to_string(key.window)] = {
        {"counts", stm.counts}, {"probs", stm.probs}, {"unobserved_rows", stm.unobserved_rows}};
  }
  j["matrices"] = matrices;
  return std::string(kStmHeader) + "\n" + j.dump() + "\n";
}

StmStore load_stm_store(const std::string& bytes, int* num_windows) {
  const std::size_t nl = bytes.find('\n');
  if (nl == std::string::npos || bytes.substr(0, nl) != kStmHeader) {
    throw Error(Errc::BadMagic, "not a TPC-STM v1 file");
  }
  try {
    nlohmann::json j = nlohmann::json::parse(bytes.substr(nl + 1));
    if (num_windows) *num_windows = j.at("num_windows").get<int>();
    StmStore store;
    for (const auto& [name, jm] : j.at("matrices").items()) {
      const std::size_t c1 = name.find(':');
      const std::size_t c2 = name.rfind(':');
      if (c1 == std::string::npos || c2 == c1) {
        throw Error(Errc::CorruptPayload, "bad STM key " + name);
      }
      StmKey key{name.substr(0, c1), name.substr(c1 + 1, c2 - c1 - 1),
                 std::stoi(name.substr(c2 + 1))};
      SpeedTransitionMatrix stm;
      stm.window = key.window;
      stm.counts = jm.at("counts").get<std::vector<std::int64_t>>();
      stm.probs = jm.at("probs").get<std::vector<double>>();
      stm.unobserved_rows = jm.at("unobserved_rows").get<std::vector<int>>();
      if (stm.counts.size() != static_cast<std::size_t>(kSpeedBins) * kSpeedBins ||
          stm.probs.size() != stm.counts.size()) {
        throw Error(Errc::CorruptPayload, "bad STM dimensions for " + name);
      }
      store[key] = std::move(stm);
    }
    return store;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::CorruptPayload, std::string("stm store: ") + e.what());
  }
}

std::vector<SpeedTransitionEvent> events_from_json(const std::string& text) {
  try {
    nlohmann::json j = nlohmann::json::parse(text);
    std::vector<SpeedTransitionEvent> events;
    for (const auto& je : j.at("events")) {
      SpeedTransitionEvent e;
      e.from_edge = je.at("from_edge").get<std::string>();
      e.to_edge = je.at("to_edge").get<std::string>();
      e.s_origin = je.at("s_origin").get<double>();
      e.s_dest = je.at("s_dest").get<double>();
      e.at = parse_datetime(je.at("at").get<std::string>());
      events.push_back(std::move(e));
    }
    return events;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::CorruptPayload, std::string("events: ") + e.what());
  }
}

std::string events_to_json(const std::vector<SpeedTransitionEvent>& events) {
  nlohmann::json arr = nlohmann::json::array();
  for (const SpeedTransitionEvent& e : events) {
    arr.push_back({{"from_edge", e.from_edge},
                   {"to_edge", e.to_edge},
                   {"s_origin", e.s_origin},
                   {"s_dest", e.s_dest},
                   {"at", format_datetime(e.at)}});
  }
  nlohmann::json j;
  j["events"] = arr;
  return j.dump();
}

}  // namespace tpc::roadnet
