#include "tpc/routing.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

#include <json.hpp>

namespace tpc::routing {

namespace {
constexpr const char* kRouteDbHeader = "TPC-ROUTEDB v1";
constexpr double kSecondsPerDay = 86400.0;
}  // namespace

const DailyPattern& RouteDb::pattern_for(const std::string& segment) const {
  auto own = patterns.find(segment);
  if (own != patterns.end()) return own->second;
  auto mem = member_rep.find(segment);
  if (mem != member_rep.end()) {
    auto rep = representatives.find(mem->second);
    if (rep != representatives.end()) return rep->second.pattern;
  }
  throw Error(Errc::UnknownSegment, segment);
}

void RouteDb::validate() const {
  graph.validate();
  if (daily_windows < 1) throw Error(Errc::BadShape, "daily_windows must be >= 1");
  for (const roadnet::Segment& s : graph.segments) {
    const DailyPattern& p = pattern_for(s.id);  // throws if unresolved
    if (static_cast<int>(p.interval_speeds.size()) != daily_windows) {
      throw Error(Errc::BadShape, "pattern for " + s.id + " has wrong window count");
    }
    for (double v : p.interval_speeds) {
      if (v <= 0.0 || v > s.speed_limit_kmph + 1e-9) {
        throw Error(Errc::BadShape, "pattern speed outside (0, limit] for " + s.id);
      }
    }
  }
}

double class_to_speed(int class_index, const roadnet::Segment& segment,
                      std::span<const double> factors) {
  if (class_index < 0 || class_index >= static_cast<int>(factors.size())) {
    throw Error(Errc::BadClass, "class " + std::to_string(class_index) + " has no speed factor");
  }
  return segment.speed_limit_kmph * factors[static_cast<std::size_t>(class_index)];
}

DailyPattern pattern_from_predictions(const roadnet::Segment& segment,
                                      const std::vector<std::vector<int>>& votes,
                                      std::span<const double> factors) {
  DailyPattern p;
  p.segment = segment.id;
  p.provenance = Provenance::Classified;
  p.interval_speeds.reserve(votes.size());
  for (std::size_t w = 0; w < votes.size(); ++w) {
    if (votes[w].empty()) {
      throw Error(Errc::MissingInterval,
                  "segment " + segment.id + " interval " + std::to_string(w));
    }
    std::vector<int> tally(factors.size(), 0);
    for (int cls : votes[w]) {
      if (cls < 0 || cls >= static_cast<int>(factors.size())) {
        throw Error(Errc::BadClass, "vote " + std::to_string(cls));
      }
      ++tally[static_cast<std::size_t>(cls)];
    }
    // Majority; ties resolve to the more congested (higher) class.
    int winner = 0;
    for (int cls = 1; cls < static_cast<int>(tally.size()); ++cls) {
      if (tally[static_cast<std::size_t>(cls)] >= tally[static_cast<std::size_t>(winner)]) {
        winner = cls;
      }
    }
    p.interval_speeds.push_back(class_to_speed(winner, segment, factors));
  }
  return p;
}

double travel_time(const roadnet::Segment& segment, double enter_seconds_of_day,
                   const DailyPattern& pattern) {
  const int windows = static_cast<int>(pattern.interval_speeds.size());
  if (windows < 1) throw Error(Errc::BadShape, "pattern has no intervals");
  if (enter_seconds_of_day < 0.0 || enter_seconds_of_day >= kSecondsPerDay) {
    throw Error(Errc::BadShape, "enter time outside [0, 86400)");
  }
  const double interval_len = kSecondsPerDay / windows;
  double remaining_km = segment.length_km;
  double elapsed = 0.0;
  int idx = std::min(static_cast<int>(enter_seconds_of_day / interval_len), windows - 1);
  // First chunk runs to the next boundary; afterwards every chunk is a full
  // interval, so the index advances without float boundary arithmetic.
  double chunk_s = (idx + 1) * interval_len - enter_seconds_of_day;
  // Each positive-speed day covers distance, so this terminates; the cap
  // guards against a malformed pattern.
  for (int iter = 0; iter < windows * 4096; ++iter) {
    const double speed = pattern.interval_speeds[static_cast<std::size_t>(idx)];
    if (speed <= 0.0) {
      throw Error(Errc::ZeroSpeed, "segment " + segment.id);
    }
    const double needed_s = remaining_km / speed * 3600.0;
    if (needed_s <= chunk_s) {
      return elapsed + needed_s;
    }
    remaining_km -= speed * chunk_s / 3600.0;
    elapsed += chunk_s;
    idx = (idx + 1) % windows;
    chunk_s = interval_len;
  }
  throw Error(Errc::ZeroSpeed, "segment " + segment.id + " never completes");
}

RoutePlan best_route(const RouteDb& db, const std::string& from, const std::string& to,
                     double depart_seconds_of_day) {
  if (!db.graph.vertices.count(from)) throw Error(Errc::UnknownVertex, from);
  if (!db.graph.vertices.count(to)) throw Error(Errc::UnknownVertex, to);

  RoutePlan plan;
  plan.depart_seconds = depart_seconds_of_day;
  if (from == to) return plan;

  std::map<std::string, std::vector<const roadnet::Segment*>> out_edges;
  for (const roadnet::Segment& s : db.graph.segments) {
    out_edges[s.from].push_back(&s);
  }
  for (auto& [v, edges] : out_edges) {
    std::sort(edges.begin(), edges.end(),
              [](const roadnet::Segment* a, const roadnet::Segment* b) { return a->id < b->id; });
  }

  struct Label {
    double arrival;
    std::string vertex;
    bool operator>(const Label& o) const {
      if (arrival != o.arrival) return arrival > o.arrival;
      return vertex > o.vertex;
    }
  };
  struct Entry {
    double arrival = std::numeric_limits<double>::infinity();
    std::string via_segment;  // incoming segment id
    std::string prev_vertex;
    double enter = 0.0;
    double traversal = 0.0;
    bool settled = false;
  };

  std::map<std::string, Entry> table;
  table[from].arrival = depart_seconds_of_day;
  std::priority_queue<Label, std::vector<Label>, std::greater<Label>> queue;
  queue.push({depart_seconds_of_day, from});

  while (!queue.empty()) {
    const Label top = queue.top();
    queue.pop();
    Entry& cur = table[top.vertex];
    if (cur.settled || top.arrival > cur.arrival) continue;
    cur.settled = true;
    if (top.vertex == to) break;
    auto edges = out_edges.find(top.vertex);
    if (edges == out_edges.end()) continue;
    for (const roadnet::Segment* seg : edges->second) {
      const double enter = cur.arrival;
      const double tod = std::fmod(enter, kSecondsPerDay);
      const double tt = travel_time(*seg, tod, db.pattern_for(seg->id));
      const double arrival = enter + tt;
      Entry& next = table[seg->to];
      const bool better = arrival < next.arrival;
      const bool tie_break = arrival == next.arrival && !next.via_segment.empty() &&
                             seg->id < next.via_segment;
      if (better || tie_break) {
        next.arrival = arrival;
        next.via_segment = seg->id;
        next.prev_vertex = top.vertex;
        next.enter = enter;
        next.traversal = tt;
        if (better) queue.push({arrival, seg->to});
      }
    }
  }

  const auto dest = table.find(to);
  if (dest == table.end() || !std::isfinite(dest->second.arrival)) {
    throw Error(Errc::NoPath, from + " -> " + to);
  }

  std::vector<RoutePlan::Leg> reversed;
  std::string v = to;
  while (v != from) {
    const Entry& e = table.at(v);
    reversed.push_back({e.via_segment, e.enter, e.traversal});
    v = e.prev_vertex;
  }
  for (auto it = reversed.rbegin(); it != reversed.rend(); ++it) {
    plan.legs.push_back(*it);
    plan.path.push_back(it->segment);
    plan.eta_seconds += it->traversal_seconds;
  }
  return plan;
}

RouteDb compress_patterns(const RouteDb& db, double epsilon_kmph) {
  if (epsilon_kmph < 0.0) throw Error(Errc::BadShape, "epsilon must be >= 0");

  struct Cluster {
    std::vector<double> anchor;  // founder's speeds, the join test target
    std::vector<double> sum;
    std::vector<std::string> members;
    Provenance provenance = Provenance::Classified;
  };
  std::vector<Cluster> clusters;

  // Effective pattern per segment, in sorted segment id order.
  std::map<std::string, const roadnet::Segment*> by_id;
  for (const roadnet::Segment& s : db.graph.segments) by_id[s.id] = &s;

  for (const auto& [segment_id, seg] : by_id) {
    (void)seg;
    const DailyPattern& p = db.pattern_for(segment_id);
    Cluster* home = nullptr;
    for (Cluster& c : clusters) {
      if (c.anchor.size() != p.interval_speeds.size()) continue;
      double dev = 0.0;
      for (std::size_t w = 0; w < c.anchor.size(); ++w) {
        dev = std::max(dev, std::abs(c.anchor[w] - p.interval_speeds[w]));
      }
      if (dev <= epsilon_kmph) {
        home = &c;
        break;
      }
    }
    if (home) {
      for (std::size_t w = 0; w < home->sum.size(); ++w) {
        home->sum[w] += p.interval_speeds[w];
      }
      home->members.push_back(segment_id);
    } else {
      Cluster c;
      c.anchor = p.interval_speeds;
      c.sum = p.interval_speeds;
      c.members = {segment_id};
      c.provenance = p.provenance;
      clusters.push_back(std::move(c));
    }
  }

  RouteDb out;
  out.graph = db.graph;
  out.daily_windows = db.daily_windows;
  for (const Cluster& c : clusters) {
    if (c.members.size() == 1) {
      DailyPattern p;
      p.segment = c.members.front();
      p.interval_speeds = c.anchor;
      p.provenance = c.provenance;
      out.patterns[p.segment] = std::move(p);
      continue;
    }
    Representative rep;
    const std::string rep_id = "rep:" + c.members.front();
    rep.pattern.segment = rep_id;
    rep.pattern.provenance = Provenance::Classified;
    rep.pattern.interval_speeds.resize(c.sum.size());
    for (std::size_t w = 0; w < c.sum.size(); ++w) {
      rep.pattern.interval_speeds[w] = c.sum[w] / static_cast<double>(c.members.size());
    }
    rep.members = c.members;
    for (const std::string& m : c.members) out.member_rep[m] = rep_id;
    out.representatives[rep_id] = std::move(rep);
  }
  return out;
}

void apply_feedback(RouteDb& db, const std::string& segment, double time_of_day_seconds,
                    double observed_speed_kmph, double alpha) {
  if (alpha < 0.0 || alpha > 1.0) throw Error(Errc::BadRequest, "alpha must be in [0,1]");
  if (observed_speed_kmph <= 0.0) {
    throw Error(Errc::BadRequest, "observed speed must be positive");
  }
  if (time_of_day_seconds < 0.0 || time_of_day_seconds >= kSecondsPerDay) {
    throw Error(Errc::BadRequest, "time of day outside [0, 86400)");
  }
  const roadnet::Segment* seg = db.graph.find_segment(segment);
  if (!seg) throw Error(Errc::UnknownSegment, segment);

  DailyPattern updated = db.pattern_for(segment);  // copy; detaches from any rep
  updated.segment = segment;
  const int windows = static_cast<int>(updated.interval_speeds.size());
  int idx = static_cast<int>(time_of_day_seconds * windows / kSecondsPerDay);
  if (idx >= windows) idx = windows - 1;
  const double clamped = std::min(observed_speed_kmph, seg->speed_limit_kmph);
  double& slot = updated.interval_speeds[static_cast<std::size_t>(idx)];
  slot = (1.0 - alpha) * slot + alpha * clamped;
  updated.provenance = Provenance::FeedbackAdjusted;

  auto mem = db.member_rep.find(segment);
  if (mem != db.member_rep.end()) {
    auto rep = db.representatives.find(mem->second);
    if (rep != db.representatives.end()) {
      auto& members = rep->second.members;
      members.erase(std::remove(members.begin(), members.end(), segment), members.end());
      if (members.empty()) db.representatives.erase(rep);
    }
    db.member_rep.erase(mem);
  }
  db.patterns[segment] = std::move(updated);
}

namespace {

nlohmann::json pattern_to_json(const DailyPattern& p) {
  return {{"segment", p.segment},
          {"interval_speeds", p.interval_speeds},
          {"provenance",
           p.provenance == Provenance::Classified ? "classified" : "feedback-adjusted"}};
}

DailyPattern pattern_from_json(const nlohmann::json& j) {
  DailyPattern p;
  p.segment = j.at("segment").get<std::string>();
  p.interval_speeds = j.at("interval_speeds").get<std::vector<double>>();
  const std::string prov = j.at("provenance").get<std::string>();
  if (prov == "classified") {
    p.provenance = Provenance::Classified;
  } else if (prov == "feedback-adjusted") {
    p.provenance = Provenance::FeedbackAdjusted;
  } else {
    throw Error(Errc::CorruptPayload, "bad provenance " + prov);
  }
  return p;
}

}  // namespace

std::string save_route_db(const RouteDb& db) {
  nlohmann::json j;
  j["graph"] = nlohmann::json::parse(roadnet::graph_to_json(db.graph));
  j["daily_windows"] = db.daily_windows;
  nlohmann::json patterns = nlohmann::json::object();
  for (const auto& [segment, p] : db.patterns) patterns[segment] = pattern_to_json(p);
  j["patterns"] = patterns;
  nlohmann::json reps = nlohmann::json::object();
  for (const auto& [id, rep] : db.representatives) {
    reps[id] = {{"pattern", pattern_to_json(rep.pattern)}, {"members", rep.members}};
  }
  j["representatives"] = reps;
  return std::string(kRouteDbHeader) + "\n" + j.dump() + "\n";
}

RouteDb load_route_db(const std::string& bytes) {
  const std::size_t nl = bytes.find('\n');
  if (nl == std::string::npos || bytes.substr(0, nl) != kRouteDbHeader) {
    throw Error(Errc::BadMagic, "not a TPC-ROUTEDB v1 file");
  }
  try {
    nlohmann::json j = nlohmann::json::parse(bytes.substr(nl + 1));
    RouteDb db;
    db.graph = roadnet::graph_from_json(j.at("graph").dump());
    db.daily_windows = j.at("daily_windows").get<int>();
    for (const auto& [segment, jp] : j.at("patterns").items()) {
      db.patterns[segment] = pattern_from_json(jp);
    }
    for (const auto& [id, jr] : j.at("representatives").items()) {
      Representative rep;
      rep.pattern = pattern_from_json(jr.at("pattern"));
      rep.members = jr.at("members").get<std::vector<std::string>>();
      for (const std::string& m : rep.members) db.member_rep[m] = id;
      db.representatives[id] = std::move(rep);
    }
    db.validate();
    return db;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::CorruptPayload, std::string("route db: ") + e.what());
  }
}

}  // namespace tpc::routing
