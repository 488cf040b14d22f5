#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>

#include "tpc/ingest.hpp"

using namespace tpc;
using namespace tpc::ingest;

namespace {

std::string csv_header() { return "DateTime,Junction,Vehicles,ID\n"; }

LabeledSeries series_of(std::vector<double> values, std::vector<int> labels) {
  LabeledSeries s;
  s.junction = "1";
  s.values = std::move(values);
  s.labels = std::move(labels);
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    s.stamps.push_back(DateTime{make_datetime(2023, 1, 2, 0, 0, 0).epoch_s +
                                static_cast<std::int64_t>(i) * 3600});
  }
  return s;
}

}  // namespace

TEST_CASE("parse accepts minimal valid input") {
  const ObservationTable t = parse_traffic_csv(
      csv_header() + "2023-01-02 00:00:00,1,5,a\n2023-01-02 01:00:00,1,7,b\n");
  CHECK(t.rows.size() == 2);
  CHECK(t.junctions() == std::vector<std::string>{"1"});
  CHECK(t.rows[0].vehicles == 5);
  CHECK(t.rows[1].at > t.rows[0].at);
}

TEST_CASE("parse rejects contract violations") {
  CHECK_THROWS_WITH_AS(parse_traffic_csv("Date,Junction\n"), doctest::Contains("MalformedHeader"),
                       Error);
  CHECK_THROWS_WITH_AS(parse_traffic_csv(csv_header() + "2023-13-02 00:00:00,1,5,a\n"),
                       doctest::Contains("BadTimestamp"), Error);
  CHECK_THROWS_WITH_AS(parse_traffic_csv(csv_header() + "2023-02-29 00:00:00,1,5,a\n"),
                       doctest::Contains("BadTimestamp"), Error);
  CHECK_THROWS_WITH_AS(parse_traffic_csv(csv_header() + "2023-01-02 00:00:00,1,-3,a\n"),
                       doctest::Contains("NegativeCount"), Error);
  CHECK_THROWS_WITH_AS(
      parse_traffic_csv(csv_header() + "2023-01-02 00:00:00,1,5,a\n2023-01-02 00:00:00,1,6,b\n"),
      doctest::Contains("DuplicateTimestamp"), Error);
  CHECK_THROWS_WITH_AS(parse_traffic_csv(csv_header() + "2023-01-02 00:00:00,1,x,a\n"),
                       doctest::Contains("MalformedRow"), Error);
}

TEST_CASE("parse sorts shuffled rows per junction") {
  // shuffled fixture; oracle is plain sort of the timestamps
  std::vector<int> hours = {7, 2, 9, 0, 5, 3, 8, 1, 6, 4};
  std::string text = csv_header();
  for (int h : hours) {
    char line[64];
    std::snprintf(line, sizeof(line), "2023-01-02 %02d:00:00,2,%d,r%d\n", h, h, h);
    text += line;
  }
  const ObservationTable t = parse_traffic_csv(text);
  std::vector<std::int64_t> got;
  for (const auto& r : t.rows) got.push_back(r.at.epoch_s);
  std::vector<std::int64_t> expected = got;
  std::sort(expected.begin(), expected.end());
  CHECK(got == expected);
}

TEST_CASE("derive_labels nearest-rank quantile oracle") {
  ClassTaxonomy tax;  // cuts {0.40, 0.75}

  std::string text = csv_header();
  for (int i = 1; i <= 10; ++i) {
    char line[64];
    std::snprintf(line, sizeof(line), "2023-01-02 %02d:00:00,1,%d,r%d\n", i - 1, i, i);
    text += line;
  }
  const auto series = derive_labels(parse_traffic_csv(text), tax);
  REQUIRE(series.size() == 1);
  // counts 1..10: thresholds 4 and 7; labels 0 for <=4, 1 for 5..7, 2 for 8..10
  for (std::size_t i = 0; i < 10; ++i) {
    const double v = series[0].values[i];
    const int expected = v <= 4 ? 0 : (v <= 7 ? 1 : 2);
    CHECK(series[0].labels[i] == expected);
  }
}

TEST_CASE("derive_labels median split and degenerate distribution") {
  ClassTaxonomy two;
  two.num_classes = 2;
  two.names = {"low", "high"};
  two.quantile_cuts = {0.5};

  std::string text = csv_header();
  const int counts[] = {1, 1, 9, 9, 1, 1, 9, 9, 1, 9};  // median threshold = 1
  for (int i = 0; i < 10; ++i) {
    char line[64];
    std::snprintf(line, sizeof(line), "2023-01-02 %02d:00:00,1,%d,r%d\n", i, counts[i], i);
    text += line;
  }
  const auto series = derive_labels(parse_traffic_csv(text), two);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(series[0].labels[i] == (counts[i] == 1 ? 0 : 1));
  }

  // all equal -> every label 0
  text = csv_header();
  for (int i = 0; i < 12; ++i) {
    char line[64];
    std::snprintf(line, sizeof(line), "2023-01-02 %02d:00:00,1,5,r%d\n", i, i);
    text += line;
  }
  const auto flat_series = derive_labels(parse_traffic_csv(text), ClassTaxonomy{});
  for (int label : flat_series[0].labels) {
    CHECK(label == 0);
  }
}

TEST_CASE("derive_labels needs at least 10 rows per junction") {
  std::string text = csv_header();
  for (int i = 0; i < 9; ++i) {
    char line[64];
    std::snprintf(line, sizeof(line), "2023-01-02 %02d:00:00,1,5,r%d\n", i, i);
    text += line;
  }
  CHECK_THROWS_WITH_AS(derive_labels(parse_traffic_csv(text), ClassTaxonomy{}),
                       doctest::Contains("TooFewRows"), Error);
}

TEST_CASE("labels re-derived independently match the quantile rule") {
  // property: for random counts, label == #(thresholds strictly below value)
  Rng rng(41);
  std::string text = csv_header();
  std::vector<double> values;
  for (int i = 0; i < 200; ++i) {
    const int v = static_cast<int>(rng.below(60));
    values.push_back(v);
    char line[80];
    std::snprintf(line, sizeof(line), "%s,1,%d,r%d\n",
                  format_datetime(DateTime{1672617600 + i * 3600}).c_str(), v, i);
    text += line;
  }
  ClassTaxonomy tax;
  const auto series = derive_labels(parse_traffic_csv(text), tax);
  // independent oracle: sort, nearest-rank thresholds, strict comparison
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> thresholds;
  for (double q : tax.quantile_cuts) {
    std::size_t rank = static_cast<std::size_t>(q * 200.0);
    rank = std::clamp<std::size_t>(rank, 1, 200);
    thresholds.push_back(sorted[rank - 1]);
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    int expected = 0;
    for (double t : thresholds) {
      if (t < values[i]) ++expected;
    }
    CHECK(series[0].labels[i] == expected);
    CHECK(series[0].labels[i] >= 0);
    CHECK(series[0].labels[i] < tax.num_classes);
  }
}

TEST_CASE("make_windows count formula") {
  LabeledSeries s = series_of(std::vector<double>(10, 1.0), std::vector<int>(10, 0));
  CHECK(make_windows(s, 4, 1).size() == 6);  // 10-4-1+1

  LabeledSeries exact = series_of(std::vector<double>(5, 1.0), std::vector<int>(5, 0));
  CHECK(make_windows(exact, 4, 1).size() == 1);

  LabeledSeries tooshort = series_of(std::vector<double>(4, 1.0), std::vector<int>(4, 0));
  CHECK(make_windows(tooshort, 4, 1).empty());
}

TEST_CASE("make_windows count formula holds for random lengths") {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const int len = static_cast<int>(rng.below(1000));
    const int window = 1 + static_cast<int>(rng.below(30));
    const int horizon = 1 + static_cast<int>(rng.below(5));
    LabeledSeries s = series_of(std::vector<double>(static_cast<std::size_t>(len), 1.0),
                                std::vector<int>(static_cast<std::size_t>(len), 0));
    const auto windows = make_windows(s, window, horizon);
    const long expected = std::max(0l, static_cast<long>(len) - window - horizon + 1);
    CHECK(static_cast<long>(windows.size()) == expected);
  }
}

TEST_CASE("make_windows takes the label horizon steps past the window end") {
  LabeledSeries s = series_of({0, 1, 2, 3, 4, 5}, {10, 11, 12, 13, 14, 15});
  const auto windows = make_windows(s, 3, 2);
  REQUIRE(windows.size() == 2);
  CHECK(windows[0].label == 14);  // end index 2, +2 -> index 4
  CHECK(windows[1].label == 15);
  CHECK(windows[0].window.at(0, 0) == 0);
  CHECK(windows[0].window.at(2, 0) == 2);
  CHECK(windows[0].window_start == s.stamps[0]);
  CHECK(windows[1].window_start == s.stamps[1]);
}

TEST_CASE("time features add bounded sin/cos columns") {
  LabeledSeries s = series_of(std::vector<double>(6, 2.0), std::vector<int>(6, 0));
  const auto windows = make_windows(s, 3, 1, true);
  REQUIRE_FALSE(windows.empty());
  CHECK(windows[0].window.cols == 3);
  // midnight start: sin 0, cos 1
  CHECK(windows[0].window.at(0, 1) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(windows[0].window.at(0, 2) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("normalize z-scores per junction with a stddev guard") {
  LabeledSeries s = series_of({0, 10, 0, 10, 0, 10}, std::vector<int>(6, 0));
  auto windows = make_windows(s, 2, 1);  // windows hold values {0,10},{10,0},...
  SampleSet set = normalize(std::move(windows), ClassTaxonomy{});
  const auto [mean, stddev] = set.norm_stats.by_junction.at("1");
  CHECK(mean == doctest::Approx(5.0));
  CHECK(stddev == doctest::Approx(5.0));
  for (const TrafficSample& w : set.samples) {
    for (int t = 0; t < w.window.rows; ++t) {
      CHECK(std::abs(w.window.at(t, 0)) == doctest::Approx(1.0));
    }
  }

  LabeledSeries flat = series_of(std::vector<double>(6, 4.0), std::vector<int>(6, 0));
  SampleSet constant = normalize(make_windows(flat, 2, 1), ClassTaxonomy{});
  for (const TrafficSample& w : constant.samples) {
    for (double v : w.window.data) CHECK(v == 0.0);
  }
}

TEST_CASE("normalize then denormalize recovers raw values") {
  Rng rng(5);
  LabeledSeries s;
  s.junction = "9";
  for (int i = 0; i < 40; ++i) {
    s.values.push_back(rng.uniform(3.0, 120.0));
    s.labels.push_back(0);
    s.stamps.push_back(DateTime{static_cast<std::int64_t>(i) * 3600});
  }
  auto raw_windows = make_windows(s, 6, 1);
  const auto raw_copy = raw_windows;
  SampleSet set = normalize(std::move(raw_windows), ClassTaxonomy{});
  const auto [mean, stddev] = set.norm_stats.by_junction.at("9");
  REQUIRE(stddev > 1e-12);
  for (std::size_t i = 0; i < set.samples.size(); ++i) {
    for (int t = 0; t < set.samples[i].window.rows; ++t) {
      const double recovered = set.samples[i].window.at(t, 0) * stddev + mean;
      const double raw = raw_copy[i].window.at(t, 0);
      CHECK(std::abs(recovered - raw) <= 1e-9 * std::max(1.0, std::abs(raw)));
    }
  }
}

TEST_CASE("normalize_with reuses training stats for new data") {
  NormStats stats;
  stats.by_junction["1"] = {10.0, 2.0};
  LabeledSeries s = series_of({14, 14, 14, 14}, {0, 0, 0, 0});
  SampleSet set = normalize_with(make_windows(s, 2, 1), ClassTaxonomy{}, stats);
  for (const TrafficSample& w : set.samples) {
    for (int t = 0; t < w.window.rows; ++t) {
      CHECK(w.window.at(t, 0) == doctest::Approx(2.0));  // (14-10)/2
    }
  }
  LabeledSeries other = series_of({1, 1, 1, 1}, {0, 0, 0, 0});
  other.junction = "unknown";
  CHECK_THROWS_WITH_AS(normalize_with(make_windows(other, 2, 1), ClassTaxonomy{}, stats),
                       doctest::Contains("UnknownJunction"), Error);
}

namespace {

SampleSet tiny_set(std::size_t n) {
  LabeledSeries s = series_of(std::vector<double>(n + 2, 1.0), std::vector<int>(n + 2, 0));
  for (std::size_t i = 0; i < s.values.size(); ++i) s.values[i] = static_cast<double>(i % 7);
  return normalize(make_windows(s, 2, 1), ClassTaxonomy{});
}

}  // namespace

TEST_CASE("split sizes, determinism and divergence") {
  SampleSet set = tiny_set(10);
  REQUIRE(set.samples.size() == 10);
  const auto [train, test] = split(set, 0.2, 3);
  CHECK(train.samples.size() == 8);
  CHECK(test.samples.size() == 2);

  const auto [train2, test2] = split(set, 0.2, 3);
  CHECK(train.samples == train2.samples);
  CHECK(test.samples == test2.samples);

  SampleSet big = tiny_set(100);
  const auto [a_train, a_test] = split(big, 0.3, 1);
  const auto [b_train, b_test] = split(big, 0.3, 2);
  CHECK(a_test.samples != b_test.samples);  // different seeds diverge on n=100

  CHECK_THROWS_WITH_AS(split(tiny_set(3), 0.01, 1), doctest::Contains("EmptySplit"), Error);
}

TEST_CASE("split partitions the input for many fractions and seeds") {
  SampleSet set = tiny_set(53);
  Rng rng(23);
  for (int trial = 0; trial < 40; ++trial) {
    const double fraction = rng.uniform(0.05, 0.95);
    const std::uint64_t seed = rng.next();
    const std::size_t expected_test =
        static_cast<std::size_t>(std::llround(53 * fraction));
    if (expected_test == 0 || expected_test == 53) continue;
    const auto [train, test] = split(set, fraction, seed);
    CHECK(train.samples.size() + test.samples.size() == set.samples.size());
    CHECK(test.samples.size() == expected_test);
    // union equals input as multisets of window_start stamps (stable order per side)
    std::multiset<std::int64_t> lhs, rhs;
    for (const auto& s : set.samples) lhs.insert(s.window_start.epoch_s);
    for (const auto& s : train.samples) rhs.insert(s.window_start.epoch_s);
    for (const auto& s : test.samples) rhs.insert(s.window_start.epoch_s);
    CHECK(lhs == rhs);
  }
}

TEST_CASE("dataset file round-trips") {
  SampleSet set = tiny_set(12);
  const std::string bytes = save_dataset(set);
  CHECK(bytes.rfind("TPC-DATASET v1\n", 0) == 0);
  const SampleSet back = load_dataset(bytes);
  CHECK(back.samples == set.samples);
  CHECK(back.taxonomy == set.taxonomy);
  CHECK(back.norm_stats == set.norm_stats);
  CHECK(back.window_length == set.window_length);
  CHECK(back.feature_width == set.feature_width);

  CHECK_THROWS_WITH_AS(load_dataset("BOGUS\n{}"), doctest::Contains("BadMagic"), Error);
  CHECK_THROWS_WITH_AS(load_dataset("TPC-DATASET v1\n{\"taxonomy\""),
                       doctest::Contains("CorruptPayload"), Error);
}
