#include "tpc/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace tpc::ingest {

namespace {

constexpr const char* kDatasetHeader = "TPC-DATASET v1";
constexpr double kTwoPi = 6.283185307179586;

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace

std::vector<std::string> ObservationTable::junctions() const {
  std::vector<std::string> out;
  for (const ObservationRow& r : rows) {
    if (out.empty() || out.back() != r.junction) out.push_back(r.junction);
  }
  return out;
}

void ClassTaxonomy::validate() const {
  if (num_classes < 2) throw Error(Errc::BadShape, "taxonomy needs at least 2 classes");
  if (static_cast<int>(names.size()) != num_classes) {
    throw Error(Errc::NameCountMismatch, "taxonomy names must match num_classes");
  }
  if (static_cast<int>(quantile_cuts.size()) != num_classes - 1) {
    throw Error(Errc::BadShape, "need num_classes-1 quantile cuts");
  }
  double prev = 0.0;
  for (double q : quantile_cuts) {
    if (q <= prev || q >= 1.0) {
      throw Error(Errc::BadShape, "quantile cuts must be strictly increasing in (0,1)");
    }
    prev = q;
  }
}

ObservationTable parse_traffic_csv(const std::string& text) {
  std::istringstream in(text);
  return parse_traffic_csv(in);
}

ObservationTable parse_traffic_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || strip_cr(line) != "DateTime,Junction,Vehicles,ID") {
    throw Error(Errc::MalformedHeader, "expected 'DateTime,Junction,Vehicles,ID'");
  }
  ObservationTable table;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const std::size_t c1 = line.find(',');
    const std::size_t c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
    const std::size_t c3 = c2 == std::string::npos ? std::string::npos : line.find(',', c2 + 1);
    if (c3 == std::string::npos) {
      throw Error(Errc::MalformedRow, "line " + std::to_string(line_no) + ": expected 4 fields");
    }
    ObservationRow row;
    try {
      row.at = parse_datetime(line.substr(0, c1));
    } catch (const Error&) {
      throw Error(Errc::BadTimestamp, "line " + std::to_string(line_no));
    }
    row.junction = line.substr(c1 + 1, c2 - c1 - 1);
    const std::string count_text = line.substr(c2 + 1, c3 - c2 - 1);
    std::size_t consumed = 0;
    std::int64_t count = 0;
    try {
      count = std::stoll(count_text, &consumed);
    } catch (const std::exception&) {
      consumed = 0;
    }
    if (consumed != count_text.size() || count_text.empty()) {
      throw Error(Errc::MalformedRow,
                  "line " + std::to_string(line_no) + ": bad vehicle count '" + count_text + "'");
    }
    if (count < 0) {
      throw Error(Errc::NegativeCount, "line " + std::to_string(line_no));
    }
    row.vehicles = count;
    row.record_id = line.substr(c3 + 1);
    if (row.junction.empty()) {
      throw Error(Errc::MalformedRow, "line " + std::to_string(line_no) + ": empty junction");
    }
    table.rows.push_back(std::move(row));
  }
  std::stable_sort(table.rows.begin(), table.rows.end(),
                   [](const ObservationRow& a, const ObservationRow& b) {
                     if (a.junction != b.junction) return a.junction < b.junction;
                     return a.at < b.at;
                   });
  for (std::size_t i = 1; i < table.rows.size(); ++i) {
    const ObservationRow& prev = table.rows[i - 1];
    const ObservationRow& cur = table.rows[i];
    if (prev.junction == cur.junction && prev.at == cur.at) {
      throw Error(Errc::DuplicateTimestamp,
                  "junction " + cur.junction + " at " + format_datetime(cur.at));
    }
  }
  return table;
}

namespace {

// Nearest-rank quantile: rank = floor(q*n) clamped to [1, n], value = sorted[rank-1].
double nearest_rank_quantile(const std::vector<double>& sorted, double q) {
  const std::size_t n = sorted.size();
  std::size_t rank = static_cast<std::size_t>(q * static_cast<double>(n));
  if (rank < 1) rank = 1;
  if (rank > n) rank = n;
  return sorted[rank - 1];
}

}  // namespace

std::vector<LabeledSeries> derive_labels(const ObservationTable& table,
                                         const ClassTaxonomy& taxonomy) {
  taxonomy.validate();
  std::vector<LabeledSeries> out;
  std::size_t i = 0;
  while (i < table.rows.size()) {
    std::size_t j = i;
    while (j < table.rows.size() && table.rows[j].junction == table.rows[i].junction) ++j;
    const std::size_t n = j - i;
    if (n < 10) {
      throw Error(Errc::TooFewRows, "junction " + table.rows[i].junction + " has " +
                                        std::to_string(n) + " rows, need >= 10");
    }
    LabeledSeries series;
    series.junction = table.rows[i].junction;
    series.values.reserve(n);
    series.stamps.reserve(n);
    for (std::size_t r = i; r < j; ++r) {
      series.values.push_back(static_cast<double>(table.rows[r].vehicles));
      series.stamps.push_back(table.rows[r].at);
    }
    std::vector<double> sorted = series.values;
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> thresholds;
    thresholds.reserve(taxonomy.quantile_cuts.size());
    for (double q : taxonomy.quantile_cuts) {
      thresholds.push_back(nearest_rank_quantile(sorted, q));
    }
    series.labels.reserve(n);
    for (double v : series.values) {
      int label = 0;
      for (double t : thresholds) {
        if (t < v) ++label;
      }
      series.labels.push_back(label);
    }
    out.push_back(std::move(series));
    i = j;
  }
  return out;
}

std::vector<TrafficSample> make_windows(const LabeledSeries& series, int window_length,
                                        int horizon, bool time_features) {
  if (window_length < 1 || horizon < 1) {
    throw Error(Errc::BadShape, "window_length and horizon must be >= 1");
  }
  const std::size_t len = series.values.size();
  const int feature_width = time_features ? 3 : 1;
  std::vector<TrafficSample> out;
  if (len < static_cast<std::size_t>(window_length + horizon)) return out;
  const std::size_t count = len - static_cast<std::size_t>(window_length + horizon) + 1;
  out.reserve(count);
  for (std::size_t start = 0; start < count; ++start) {
    TrafficSample s;
    s.window = Matrix(window_length, feature_width);
    for (int t = 0; t < window_length; ++t) {
      const std::size_t idx = start + static_cast<std::size_t>(t);
      s.window.at(t, 0) = series.values[idx];
      if (time_features) {
        const double frac = static_cast<double>(seconds_of_day(series.stamps[idx])) / 86400.0;
        s.window.at(t, 1) = std::sin(kTwoPi * frac);
        s.window.at(t, 2) = std::cos(kTwoPi * frac);
      }
    }
    const std::size_t label_idx = start + static_cast<std::size_t>(window_length + horizon) - 1;
    s.label = series.labels[label_idx];
    s.junction = series.junction;
    s.window_start = series.stamps[start];
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

SampleSet assemble(std::vector<TrafficSample> samples, const ClassTaxonomy& taxonomy,
                   NormStats stats, int horizon) {
  SampleSet set;
  set.taxonomy = taxonomy;
  set.norm_stats = std::move(stats);
  set.horizon = horizon;
  if (!samples.empty()) {
    set.window_length = samples.front().window.rows;
    set.feature_width = samples.front().window.cols;
  }
  for (TrafficSample& s : samples) {
    if (s.window.rows != set.window_length || s.window.cols != set.feature_width) {
      throw Error(Errc::ShapeMismatch, "all samples must share window shape");
    }
    auto it = set.norm_stats.by_junction.find(s.junction);
    if (it == set.norm_stats.by_junction.end()) {
      throw Error(Errc::UnknownJunction, "no normalization stats for " + s.junction);
    }
    const auto [mean, stddev] = it->second;
    for (int t = 0; t < s.window.rows; ++t) {
      s.window.at(t, 0) = stddev < 1e-12 ? 0.0 : (s.window.at(t, 0) - mean) / stddev;
    }
  }
  set.samples = std::move(samples);
  return set;
}

}  // namespace

SampleSet normalize(std::vector<TrafficSample> samples, const ClassTaxonomy& taxonomy,
                    int horizon) {
  std::map<std::string, std::vector<double>> per_junction;
  for (const TrafficSample& s : samples) {
    auto& vals = per_junction[s.junction];
    for (int t = 0; t < s.window.rows; ++t) vals.push_back(s.window.at(t, 0));
  }
  NormStats stats;
  for (auto& [junction, vals] : per_junction) {
    const double n = static_cast<double>(vals.size());
    const double mean = std::accumulate(vals.begin(), vals.end(), 0.0) / n;
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    stats.by_junction[junction] = {mean, std::sqrt(var / n)};
  }
  return assemble(std::move(samples), taxonomy, std::move(stats), horizon);
}

SampleSet normalize_with(std::vector<TrafficSample> samples, const ClassTaxonomy& taxonomy,
                         const NormStats& stats, int horizon) {
  return assemble(std::move(samples), taxonomy, stats, horizon);
}

std::pair<SampleSet, SampleSet> split(const SampleSet& set, double test_fraction,
                                      std::uint64_t seed) {
  if (test_fraction <= 0.0 || test_fraction >= 1.0) {
    throw Error(Errc::BadShape, "test_fraction must be in (0,1)");
  }
  const std::size_t n = set.samples.size();
  const std::size_t n_test =
      static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));
  if (n_test == 0 || n_test == n) {
    throw Error(Errc::EmptySplit, "split would leave an empty side");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  SampleSet train = set;
  SampleSet test = set;
  train.samples.clear();
  test.samples.clear();
  // First n_test shuffled indices become the test side; stable within each side.
  std::vector<bool> is_test(n, false);
  for (std::size_t i = 0; i < n_test; ++i) is_test[order[i]] = true;
  for (std::size_t i = 0; i < n; ++i) {
    (is_test[i] ? test : train).samples.push_back(set.samples[i]);
  }
  return {std::move(train), std::move(test)};
}

std::string save_dataset(const SampleSet& set) {
  nlohmann::json j;
  j["taxonomy"] = {{"num_classes", set.taxonomy.num_classes},
                   {"names", set.taxonomy.names},
                   {"quantile_cuts", set.taxonomy.quantile_cuts}};
  nlohmann::json stats = nlohmann::json::object();
  for (const auto& [junction, ms] : set.norm_stats.by_junction) {
    stats[junction] = {{"mean", ms.first}, {"stddev", ms.second}};
  }
  j["norm_stats"] = stats;
  j["window"] = {{"length", set.window_length},
                 {"features", set.feature_width},
                 {"horizon", set.horizon}};
  nlohmann::json samples = nlohmann::json::array();
  for (const TrafficSample& s : set.samples) {
    samples.push_back({{"junction", s.junction},
                       {"window_start", format_datetime(s.window_start)},
                       {"label", s.label},
                       {"window", s.window.data}});
  }
  j["samples"] = samples;
  return std::string(kDatasetHeader) + "\n" + j.dump() + "\n";
}

SampleSet load_dataset(const std::string& bytes) {
  const std::size_t nl = bytes.find('\n');
  if (nl == std::string::npos || bytes.substr(0, nl) != kDatasetHeader) {
    throw Error(Errc::BadMagic, "not a TPC-DATASET v1 file");
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes.substr(nl + 1));
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::CorruptPayload, e.what());
  }
  SampleSet set;
  try {
    const auto& tax = j.at("taxonomy");
    set.taxonomy.num_classes = tax.at("num_classes").get<int>();
    set.taxonomy.names = tax.at("names").get<std::vector<std::string>>();
    set.taxonomy.quantile_cuts = tax.at("quantile_cuts").get<std::vector<double>>();
    for (const auto& [junction, ms] : j.at("norm_stats").items()) {
      set.norm_stats.by_junction[junction] = {ms.at("mean").get<double>(),
                                              ms.at("stddev").get<double>()};
    }
    set.window_length = j.at("window").at("length").get<int>();
    set.feature_width = j.at("window").at("features").get<int>();
    set.horizon = j.at("window").at("horizon").get<int>();
    for (const auto& js : j.at("samples")) {
      TrafficSample s;
      s.junction = js.at("junction").get<std::string>();
      s.window_start = parse_datetime(js.at("window_start").get<std::string>());
      s.label = js.at("label").get<int>();
      s.window = Matrix(set.window_length, set.feature_width);
      s.window.data = js.at("window").get<std::vector<double>>();
      if (static_cast<int>(s.window.data.size()) != set.window_length * set.feature_width) {
        throw Error(Errc::CorruptPayload, "window size mismatch");
      }
      set.samples.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::CorruptPayload, e.what());
  }
  return set;
}

}  // namespace tpc::ingest
