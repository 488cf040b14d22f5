#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "tpc/gateway.hpp"

using namespace tpc;
using namespace tpc::gateway;
using nlohmann::json;

namespace {

routing::RouteDb tiny_db() {
  routing::RouteDb db;
  db.graph.vertices = {"A", "B", "C"};
  db.graph.segments.push_back({"AB", "A", "B", 1.0, 60.0});
  db.graph.segments.push_back({"BC", "B", "C", 1.0, 60.0});
  routing::DailyPattern p;
  p.segment = "AB";
  p.interval_speeds.assign(8, 60.0);
  db.patterns["AB"] = p;
  p.segment = "BC";
  db.patterns["BC"] = p;
  return db;
}

struct RunningService {
  Service service;
  int port;
  std::thread thread;

  RunningService(routing::RouteDb db, Config cfg)
      : service(std::move(db), std::move(cfg)), port(service.bind_any("127.0.0.1")) {
    REQUIRE(port > 0);
    thread = std::thread([this] { service.serve_blocking(); });
  }
  ~RunningService() {
    service.stop();
    thread.join();
  }
  httplib::Client client() const { return httplib::Client("127.0.0.1", port); }
};

}  // namespace

TEST_CASE("synth outputs are byte-deterministic per seed") {
  const std::string a = synth_traffic_csv(42, 3, 60);
  const std::string b = synth_traffic_csv(42, 3, 60);
  CHECK(a == b);
  CHECK(a != synth_traffic_csv(43, 3, 60));

  const std::string ga = roadnet::graph_to_json(synth_graph(7, 6, 3, 4));
  CHECK(ga == roadnet::graph_to_json(synth_graph(7, 6, 3, 4)));

  const roadnet::RoadGraph graph = synth_graph(7, 6, 3, 4);
  const auto ea = synth_events(graph, 9, 1, 1);
  const auto eb = synth_events(graph, 9, 1, 1);
  CHECK(roadnet::events_to_json(ea) == roadnet::events_to_json(eb));
}

TEST_CASE("synthetic CSV ingests into a balanced three-class dataset") {
  const std::string csv = synth_traffic_csv(11, 2, 120);
  const ingest::ObservationTable table = ingest::parse_traffic_csv(csv);
  CHECK(table.junctions().size() == 2);
  const auto series = ingest::derive_labels(table, ingest::ClassTaxonomy{});
  for (const auto& s : series) {
    int counts[3] = {0, 0, 0};
    for (int label : s.labels) ++counts[label];
    // occupancies follow the quantile cuts: 40% / 35% / 25%
    CHECK(counts[0] == 48);
    CHECK(counts[1] == 42);
    CHECK(counts[2] == 30);
  }
}

TEST_CASE("synthetic graph is valid and sensor-covered") {
  const roadnet::RoadGraph g = synth_graph(3, 8, 4, 6);
  g.validate();
  CHECK(g.vertices.size() == 8);
  CHECK(g.segments.size() >= 16);  // two-way ring at minimum
  for (const auto& s : g.segments) {
    CHECK(g.sensor_of_segment.count(s.id) == 1);
  }
}

TEST_CASE("config json round-trips and rejects duplicate paths") {
  Config cfg;
  cfg.dataset_path = "a.tpcd";
  cfg.model_path = "b.tpcm";
  cfg.feedback_alpha = 0.5;
  cfg.windowing.length = 10;
  const Config back = Config::from_json(cfg.to_json());
  CHECK(back.dataset_path == "a.tpcd");
  CHECK(back.feedback_alpha == 0.5);
  CHECK(back.windowing.length == 10);

  Config bad = cfg;
  bad.model_path = "a.tpcd";
  CHECK_THROWS_AS(Config::from_json(bad.to_json()), Error);
  CHECK_THROWS_AS(Config::from_json("{\"feedback_alpha\": 2.0}"), Error);
}

TEST_CASE("build_route_db votes per interval through the classifier") {
  roadnet::RoadGraph graph;
  graph.vertices = {"A", "B", "C"};
  graph.segments.push_back({"AB", "A", "B", 1.0, 60.0});
  graph.segments.push_back({"BC", "B", "C", 2.0, 80.0});
  graph.sensor_of_segment["AB"] = "1";
  graph.sensor_of_segment["BC"] = "1";

  // five days of hourly data covers all eight intervals at horizon offsets
  const std::string csv = synth_traffic_csv(5, 1, 120);
  ingest::SampleSet set = ingest::load_dataset(
      ingest::save_dataset(ingest::normalize(
          [&] {
            std::vector<ingest::TrafficSample> samples;
            for (const auto& series :
                 ingest::derive_labels(ingest::parse_traffic_csv(csv), ingest::ClassTaxonomy{})) {
              for (auto& w : ingest::make_windows(series, 12, 1)) samples.push_back(std::move(w));
            }
            return samples;
          }(),
          ingest::ClassTaxonomy{})));

  neural::HyperParams hp;
  hp.output_size = 4;
  hp.epochs = 0;
  const neural::ModelParams model = neural::init_params(hp, 1, 3);
  const routing::RouteDb db = build_route_db(graph, model, set, 8, routing::kDefaultSpeedFactors);
  db.validate();
  CHECK(db.patterns.size() == 2);
  CHECK(db.pattern_for("AB").interval_speeds.size() == 8);
  for (double v : db.pattern_for("BC").interval_speeds) {
    CHECK(v > 0.0);
    CHECK(v <= 80.0);
  }

  roadnet::RoadGraph no_sensor = graph;
  no_sensor.sensor_of_segment.erase("AB");
  CHECK_THROWS_WITH_AS(build_route_db(no_sensor, model, set, 8, routing::kDefaultSpeedFactors),
                       doctest::Contains("UnknownJunction"), Error);
}

TEST_CASE("service answers health, route, patterns, feedback") {
  RunningService rs(tiny_db(), Config{});
  httplib::Client client = rs.client();

  auto health = client.Get("/health");
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(json::parse(health->body) == json({{"status", "ok"}}));

  // route to self: empty path, zero eta
  auto self = client.Post("/route", R"({"from":"A","to":"A","depart":"08:00"})",
                          "application/json");
  REQUIRE(self);
  CHECK(self->status == 200);
  json self_body = json::parse(self->body);
  CHECK(self_body["eta_seconds"] == 0.0);
  CHECK(self_body["path"].empty());

  auto plan = client.Post("/route", R"({"from":"A","to":"C","depart":"08:00:30"})",
                          "application/json");
  REQUIRE(plan);
  const json plan_body = json::parse(plan->body);
  CHECK(plan_body["path"] == json::array({"AB", "BC"}));
  CHECK(plan_body["eta_seconds"].get<double>() == doctest::Approx(120.0));
  const std::uint64_t v0 = plan_body["version"].get<std::uint64_t>();

  // patterns before feedback
  auto pattern = client.Get("/patterns?segment=AB");
  REQUIRE(pattern);
  CHECK(json::parse(pattern->body)["provenance"] == "classified");

  auto fb = client.Post("/feedback", R"({"segment":"AB","time":"08:10","speed_kmph":15})",
                        "application/json");
  REQUIRE(fb);
  CHECK(fb->status == 200);
  const json fb_body = json::parse(fb->body);
  CHECK(fb_body["accepted"] == true);
  CHECK(fb_body["version"].get<std::uint64_t>() == v0 + 1);

  auto pattern_after = client.Get("/patterns?segment=AB");
  REQUIRE(pattern_after);
  const json pa = json::parse(pattern_after->body);
  CHECK(pa["provenance"] == "feedback-adjusted");
  CHECK(pa["version"].get<std::uint64_t>() == v0 + 1);

  // eta reflects the slower segment now (default alpha 0.3: 60 -> 46.5)
  auto plan_after = client.Post("/route", R"({"from":"A","to":"C","depart":"08:00:30"})",
                                "application/json");
  REQUIRE(plan_after);
  CHECK(json::parse(plan_after->body)["eta_seconds"].get<double>() >
        plan_body["eta_seconds"].get<double>());
}

TEST_CASE("service maps errors to 400/404/422 and stays up") {
  RunningService rs(tiny_db(), Config{});
  httplib::Client client = rs.client();

  auto malformed = client.Post("/route", "{not json", "application/json");
  REQUIRE(malformed);
  CHECK(malformed->status == 400);

  auto unknown = client.Post("/route", R"({"from":"A","to":"Z","depart":"08:00"})",
                             "application/json");
  REQUIRE(unknown);
  CHECK(unknown->status == 404);
  CHECK(json::parse(unknown->body)["error"]["code"] == "UnknownVertex");

  auto missing = client.Post("/route", R"({"from":"A"})", "application/json");
  REQUIRE(missing);
  CHECK(missing->status == 422);

  auto bad_time = client.Post("/feedback", R"({"segment":"AB","time":"25:99","speed_kmph":5})",
                              "application/json");
  REQUIRE(bad_time);
  CHECK(bad_time->status == 422);

  auto bad_speed = client.Post("/feedback", R"({"segment":"AB","time":"08:00","speed_kmph":-4})",
                               "application/json");
  REQUIRE(bad_speed);
  CHECK(bad_speed->status == 422);

  auto gone = client.Get("/patterns?segment=ZZ");
  REQUIRE(gone);
  CHECK(gone->status == 404);

  // still serving after the error barrage
  auto health = client.Get("/health");
  REQUIRE(health);
  CHECK(health->status == 200);
}

TEST_CASE("service flush writes a loadable database snapshot") {
  RunningService rs(tiny_db(), Config{});
  httplib::Client client = rs.client();
  client.Post("/feedback", R"({"segment":"AB","time":"00:10","speed_kmph":12})",
              "application/json");
  const std::string path = "/tmp/tpc_gateway_flush_test.tpcdb";
  rs.service.flush(path);
  const routing::RouteDb loaded = routing::load_route_db(read_file(path));
  CHECK(loaded.pattern_for("AB").provenance == routing::Provenance::FeedbackAdjusted);
  CHECK(loaded == rs.service.snapshot());
}
