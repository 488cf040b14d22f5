#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "tpc/routing.hpp"

using namespace tpc;
using namespace tpc::routing;
using tpc::roadnet::RoadGraph;
using tpc::roadnet::Segment;

namespace {

DailyPattern flat(const std::string& segment, double speed, int windows = 8) {
  DailyPattern p;
  p.segment = segment;
  p.interval_speeds.assign(static_cast<std::size_t>(windows), speed);
  return p;
}

RouteDb diamond(double ab_rush_speed) {
  // A -> B -> D is short, A -> C -> D is longer; AB crawls in window 2.
  RouteDb db;
  db.graph.vertices = {"A", "B", "C", "D"};
  db.graph.segments.push_back({"AB", "A", "B", 1.0, 60.0});
  db.graph.segments.push_back({"BD", "B", "D", 1.0, 60.0});
  db.graph.segments.push_back({"AC", "A", "C", 2.0, 60.0});
  db.graph.segments.push_back({"CD", "C", "D", 2.0, 60.0});
  db.patterns["AB"] = flat("AB", 60.0);
  db.patterns["AB"].interval_speeds[2] = ab_rush_speed;  // 06:00-09:00
  db.patterns["BD"] = flat("BD", 60.0);
  db.patterns["AC"] = flat("AC", 60.0);
  db.patterns["CD"] = flat("CD", 60.0);
  return db;
}

// Exhaustive simple-path enumeration; FIFO makes revisiting vertices useless,
// so simple paths suffice as the oracle.
struct PathSearch {
  const RouteDb& db;
  std::string target;
  double best_arrival = std::numeric_limits<double>::infinity();
  std::vector<std::string> best_path;
  std::set<std::string> visited;
  std::vector<std::string> current;

  void dfs(const std::string& vertex, double arrival) {
    if (vertex == target) {
      if (arrival < best_arrival) {
        best_arrival = arrival;
        best_path = current;
      }
      return;
    }
    for (const Segment& s : db.graph.segments) {
      if (s.from != vertex || visited.count(s.to)) continue;
      const double tt = travel_time(s, std::fmod(arrival, 86400.0), db.pattern_for(s.id));
      visited.insert(s.to);
      current.push_back(s.id);
      dfs(s.to, arrival + tt);
      current.pop_back();
      visited.erase(s.to);
    }
  }
};

double oracle_arrival(const RouteDb& db, const std::string& from, const std::string& to,
                      double depart, std::vector<std::string>* path = nullptr) {
  PathSearch search{db, to};
  search.visited.insert(from);
  search.dfs(from, depart);
  if (path) *path = search.best_path;
  return search.best_arrival;
}

double replay_arrival(const RoutePlan& plan) {
  double arrival = plan.depart_seconds;
  for (const auto& leg : plan.legs) arrival += leg.traversal_seconds;
  return arrival;
}

}  // namespace

TEST_CASE("class_to_speed scales the limit by the class factor") {
  const Segment seg60{"x", "a", "b", 1.0, 60.0};
  const Segment seg80{"y", "a", "b", 1.0, 80.0};
  CHECK(class_to_speed(0, seg60) == doctest::Approx(60.0));
  CHECK(class_to_speed(2, seg60) == doctest::Approx(18.0));  // 60 * 0.3
  CHECK(class_to_speed(1, seg80) == doctest::Approx(48.0));  // 80 * 0.6
  CHECK_THROWS_WITH_AS(class_to_speed(3, seg60), doctest::Contains("BadClass"), Error);
  CHECK_THROWS_AS(class_to_speed(-1, seg60), Error);
}

TEST_CASE("pattern_from_predictions takes majority with congested tie-break") {
  const Segment seg{"s", "a", "b", 1.0, 60.0};
  std::vector<std::vector<int>> votes(8, std::vector<int>{0});
  DailyPattern p = pattern_from_predictions(seg, votes);
  for (double v : p.interval_speeds) CHECK(v == doctest::Approx(60.0));

  votes[2] = {2, 2, 0};  // majority congested
  p = pattern_from_predictions(seg, votes);
  CHECK(p.interval_speeds[2] == doctest::Approx(18.0));

  votes[2] = {0, 2};  // tie -> more congested wins
  p = pattern_from_predictions(seg, votes);
  CHECK(p.interval_speeds[2] == doctest::Approx(18.0));

  votes[5] = {};
  CHECK_THROWS_WITH_AS(pattern_from_predictions(seg, votes),
                       doctest::Contains("MissingInterval"), Error);
}

TEST_CASE("travel_time integrates piecewise-constant speeds") {
  const Segment one_km{"s", "a", "b", 1.0, 80.0};
  CHECK(travel_time(one_km, 0.0, flat("s", 60.0)) == doctest::Approx(60.0));

  // 2 km entered 60 s before a boundary: 1 km at 60, then 1 km at 30
  const Segment two_km{"s", "a", "b", 2.0, 80.0};
  DailyPattern p = flat("s", 60.0);
  p.interval_speeds[1] = 30.0;  // boundary at 03:00 = 10800 s
  CHECK(travel_time(two_km, 10800.0 - 60.0, p) == doctest::Approx(180.0));

  // midnight wrap: enter 23:59:30, 0.5 km at 60 (30 s), then 1.5 km at 30
  DailyPattern wrap = flat("s", 30.0);
  wrap.interval_speeds[7] = 60.0;
  CHECK(travel_time(two_km, 86400.0 - 30.0, wrap) ==
        doctest::Approx(30.0 + 1.5 / 30.0 * 3600.0));

  CHECK_THROWS_WITH_AS(travel_time(one_km, 0.0, flat("s", 0.0)),
                       doctest::Contains("ZeroSpeed"), Error);
  CHECK_THROWS_AS(travel_time(one_km, 86400.0, flat("s", 50.0)), Error);
}

TEST_CASE("travel_time is FIFO and continuous over random patterns") {
  Rng rng(31);
  const Segment seg{"s", "a", "b", 3.0, 100.0};
  for (int trial = 0; trial < 1000; ++trial) {
    DailyPattern p;
    p.segment = "s";
    const int windows = 1 + static_cast<int>(rng.below(12));
    for (int w = 0; w < windows; ++w) p.interval_speeds.push_back(rng.uniform(3.0, 100.0));
    double e1 = rng.uniform(0.0, 86400.0);
    double e2 = rng.uniform(0.0, 86400.0);
    if (e1 > e2) std::swap(e1, e2);
    const double a1 = e1 + travel_time(seg, e1, p);
    const double a2 = e2 + travel_time(seg, e2, p);
    CHECK(a1 <= a2 + 1e-6);  // FIFO: departing later never arrives earlier

    const double base = travel_time(seg, e1, p);
    const double nudged = travel_time(seg, std::min(e1 + 1e-6, 86400.0 - 1e-9), p);
    CHECK(std::abs(nudged - base) <= 1e-2);  // continuity at speed-ratio scale
  }
}

TEST_CASE("best_route: trivial, congestion-avoiding, and error cases") {
  const RouteDb db = diamond(5.0);

  const RoutePlan self = best_route(db, "A", "A", 3600.0);
  CHECK(self.path.empty());
  CHECK(self.eta_seconds == 0.0);

  // depart 07:00 inside the crawl window: the longer free arm wins
  const RoutePlan plan = best_route(db, "A", "D", 7.0 * 3600.0);
  CHECK(plan.path == std::vector<std::string>{"AC", "CD"});
  CHECK(plan.eta_seconds == doctest::Approx(240.0));

  // depart 11:00, crawl over: the short arm wins
  const RoutePlan later = best_route(db, "A", "D", 11.0 * 3600.0);
  CHECK(later.path == std::vector<std::string>{"AB", "BD"});
  CHECK(later.eta_seconds == doctest::Approx(120.0));

  CHECK_THROWS_WITH_AS(best_route(db, "A", "Z", 0.0), doctest::Contains("UnknownVertex"),
                       Error);
  RouteDb island = db;
  island.graph.vertices.insert("Z");
  CHECK_THROWS_WITH_AS(best_route(island, "A", "Z", 0.0), doctest::Contains("NoPath"), Error);
}

TEST_CASE("best_route plans are internally consistent") {
  const RouteDb db = diamond(5.0);
  const RoutePlan plan = best_route(db, "A", "D", 6.5 * 3600.0);
  REQUIRE(plan.legs.size() == plan.path.size());
  double eta = 0.0;
  double prev_enter = -1.0;
  for (const auto& leg : plan.legs) {
    CHECK(leg.enter_seconds > prev_enter);
    prev_enter = leg.enter_seconds;
    eta += leg.traversal_seconds;
  }
  CHECK(plan.eta_seconds == eta);
  // consecutive segments adjacent
  for (std::size_t i = 1; i < plan.path.size(); ++i) {
    CHECK(db.graph.adjacent(plan.path[i - 1], plan.path[i]));
  }
}

TEST_CASE("best_route equals exhaustive enumeration on random graphs") {
  Rng rng(47);
  int routable = 0;
  for (int trial = 0; trial < 100; ++trial) {
    RouteDb db;
    const int n = 2 + static_cast<int>(rng.below(7));  // |V| <= 8
    std::vector<std::string> names;
    for (int v = 0; v < n; ++v) {
      names.push_back("N" + std::to_string(v));
      db.graph.vertices.insert(names.back());
    }
    const int edges = 1 + static_cast<int>(rng.below(static_cast<std::size_t>(2 * n)));
    std::set<std::pair<std::string, std::string>> used;
    for (int e = 0; e < edges; ++e) {
      const std::string from = names[rng.below(names.size())];
      const std::string to = names[rng.below(names.size())];
      if (from == to || !used.insert({from, to}).second) continue;
      Segment s;
      s.id = "e" + std::to_string(e);
      s.from = from;
      s.to = to;
      s.length_km = rng.uniform(0.2, 5.0);
      s.speed_limit_kmph = 30.0 + 10.0 * static_cast<double>(rng.below(8));
      db.graph.segments.push_back(s);
      DailyPattern p;
      p.segment = s.id;
      const int windows = rng.below(2) == 0 ? 4 : 8;
      for (int w = 0; w < windows; ++w) {
        p.interval_speeds.push_back(rng.uniform(2.0, s.speed_limit_kmph));
      }
      db.patterns[s.id] = std::move(p);
    }
    const std::string from = names[rng.below(names.size())];
    const std::string to = names[rng.below(names.size())];
    if (from == to) continue;
    const double depart = rng.uniform(0.0, 86400.0);

    const double oracle = oracle_arrival(db, from, to, depart);
    try {
      const RoutePlan plan = best_route(db, from, to, depart);
      CHECK(replay_arrival(plan) == oracle);  // exact double equality
      ++routable;
    } catch (const Error& e) {
      CHECK(e.code() == Errc::NoPath);
      CHECK(std::isinf(oracle));
    }
  }
  CHECK(routable > 20);  // the fixture must actually exercise routing
}

TEST_CASE("compress merges identical patterns and respects epsilon zero") {
  RouteDb db;
  db.graph.vertices = {"A", "B", "C"};
  db.graph.segments.push_back({"AB", "A", "B", 1.0, 60.0});
  db.graph.segments.push_back({"BC", "B", "C", 1.0, 60.0});
  db.graph.segments.push_back({"CA", "C", "A", 1.0, 60.0});
  db.patterns["AB"] = flat("AB", 40.0);
  db.patterns["BC"] = flat("BC", 40.0);
  db.patterns["CA"] = flat("CA", 25.0);

  const RouteDb merged = compress_patterns(db, 0.5);
  CHECK(merged.representatives.size() == 1);  // AB and BC merge
  CHECK(merged.patterns.size() == 1);         // CA stays own
  CHECK(merged.pattern_for("AB").interval_speeds == flat("", 40.0).interval_speeds);
  CHECK(merged.pattern_for("AB") == merged.pattern_for("BC"));
  merged.validate();

  RouteDb distinct = db;
  distinct.patterns["BC"] = flat("BC", 41.0);
  const RouteDb untouched = compress_patterns(distinct, 0.0);
  CHECK(untouched.representatives.empty());
  CHECK(untouched.patterns.size() == 3);  // epsilon 0: no reduction
}

TEST_CASE("compress on archetypes+noise: <=3 reps within epsilon, 2eps always") {
  Rng rng(61);
  const double eps = 5.0;
  RouteDb db;
  db.graph.vertices = {"A", "B"};
  const double archetype_base[3] = {20.0, 45.0, 70.0};
  std::map<std::string, std::vector<double>> original;
  for (int i = 0; i < 100; ++i) {
    char id[8];
    std::snprintf(id, sizeof(id), "s%03d", i);
    db.graph.segments.push_back({id, "A", "B", 1.0, 80.0});
    DailyPattern p;
    p.segment = id;
    const double base = archetype_base[rng.below(3)];
    for (int w = 0; w < 8; ++w) {
      p.interval_speeds.push_back(base + rng.uniform(-eps / 2.0, eps / 2.0));
    }
    original[id] = p.interval_speeds;
    db.patterns[id] = std::move(p);
  }
  const RouteDb compact = compress_patterns(db, eps);
  CHECK(compact.representatives.size() + compact.patterns.size() <= 3);
  for (const auto& [id, speeds] : original) {
    const DailyPattern& rep = compact.pattern_for(id);
    double dev = 0.0;
    for (int w = 0; w < 8; ++w) {
      dev = std::max(dev, std::abs(rep.interval_speeds[static_cast<std::size_t>(w)] -
                                   speeds[static_cast<std::size_t>(w)]));
    }
    CHECK(dev <= eps);  // archetype fixture stays within eps of the mean
  }
}

TEST_CASE("compress never maps a segment farther than 2*epsilon, adversarially") {
  // drifting chain: each pattern within eps of the previous one; without the
  // founder-anchored join test the running mean would walk away unboundedly
  Rng rng(67);
  const double eps = 2.0;
  RouteDb db;
  db.graph.vertices = {"A", "B"};
  double level = 30.0;
  std::map<std::string, std::vector<double>> original;
  for (int i = 0; i < 60; ++i) {
    char id[8];
    std::snprintf(id, sizeof(id), "s%03d", i);
    db.graph.segments.push_back({id, "A", "B", 1.0, 100.0});
    DailyPattern p;
    p.segment = id;
    p.interval_speeds.assign(8, level);
    original[id] = p.interval_speeds;
    db.patterns[id] = std::move(p);
    level += rng.uniform(0.0, eps * 0.9);  // creep upward
  }
  const RouteDb compact = compress_patterns(db, eps);
  CHECK(compact.representatives.size() + compact.patterns.size() <= db.patterns.size());
  for (const auto& [id, speeds] : original) {
    const DailyPattern& rep = compact.pattern_for(id);
    for (int w = 0; w < 8; ++w) {
      CHECK(std::abs(rep.interval_speeds[static_cast<std::size_t>(w)] -
                     speeds[static_cast<std::size_t>(w)]) <= 2.0 * eps + 1e-12);
    }
  }
}

TEST_CASE("apply_feedback EWMA update, clamping, detachment, isolation") {
  RouteDb db = diamond(5.0);
  const RouteDb before = db;

  // alpha = 0: unchanged
  apply_feedback(db, "AB", 12.0 * 3600.0, 40.0, 0.0);
  CHECK(db.pattern_for("AB").interval_speeds == before.pattern_for("AB").interval_speeds);
  CHECK(db.pattern_for("AB").provenance == Provenance::FeedbackAdjusted);

  // EWMA: old 60, observed 40, alpha 0.5 -> 50 (window 4 = 12:00-15:00)
  apply_feedback(db, "AB", 12.0 * 3600.0, 40.0, 0.5);
  CHECK(db.pattern_for("AB").interval_speeds[4] == doctest::Approx(50.0));

  // alpha = 1: speed becomes the observation, clamped to the limit
  apply_feedback(db, "AB", 12.0 * 3600.0, 200.0, 1.0);
  CHECK(db.pattern_for("AB").interval_speeds[4] == doctest::Approx(60.0));

  // other segments bit-exact
  CHECK(db.pattern_for("BD") == before.pattern_for("BD"));
  CHECK(db.pattern_for("AC") == before.pattern_for("AC"));
  CHECK(db.pattern_for("CD") == before.pattern_for("CD"));

  CHECK_THROWS_WITH_AS(apply_feedback(db, "nope", 0.0, 10.0, 0.5),
                       doctest::Contains("UnknownSegment"), Error);
  CHECK_THROWS_AS(apply_feedback(db, "AB", 0.0, -5.0, 0.5), Error);
  CHECK_THROWS_AS(apply_feedback(db, "AB", 0.0, 10.0, 1.5), Error);

  // feedback on a compressed member detaches it from its representative
  RouteDb tri;
  tri.graph.vertices = {"A", "B"};
  tri.graph.segments.push_back({"s1", "A", "B", 1.0, 60.0});
  tri.graph.segments.push_back({"s2", "A", "B", 1.0, 60.0});
  tri.patterns["s1"] = flat("s1", 30.0);
  tri.patterns["s2"] = flat("s2", 30.0);
  RouteDb packed = compress_patterns(tri, 1.0);
  REQUIRE(packed.representatives.size() == 1);
  apply_feedback(packed, "s1", 1000.0, 50.0, 1.0);
  CHECK(packed.pattern_for("s1").provenance == Provenance::FeedbackAdjusted);
  CHECK(packed.pattern_for("s1").interval_speeds[0] == doctest::Approx(50.0));
  CHECK(packed.pattern_for("s2").interval_speeds[0] == doctest::Approx(30.0));
  packed.validate();
}

TEST_CASE("route db file round-trips through compression and feedback") {
  RouteDb db = diamond(5.0);
  apply_feedback(db, "AC", 3600.0, 33.0, 0.7);
  const RouteDb compact = compress_patterns(db, 1.0);
  const std::string bytes = save_route_db(compact);
  CHECK(bytes.rfind("TPC-ROUTEDB v1\n", 0) == 0);
  const RouteDb back = load_route_db(bytes);
  CHECK(back == compact);
  CHECK_THROWS_WITH_AS(load_route_db("junk\n{}"), doctest::Contains("BadMagic"), Error);
}
