#include <csignal>
#include <cstring>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "tpc/gateway.hpp"
#include "tpc/metrics.hpp"
#include "tpc/serde.hpp"
#include "tpc/tuning.hpp"

namespace tpc::gateway {

namespace {

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = text.find(',', pos);
    const std::string item = text.substr(pos, comma - pos);
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw Error(Errc::BadRequest, "bad number '" + item + "' in list");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::vector<std::string> parse_string_list(const std::string& text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = text.find(',', pos);
    out.push_back(text.substr(pos, comma - pos));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

void dataset_tensors(const ingest::SampleSet& set, std::vector<Matrix>& windows,
                     std::vector<int>& labels) {
  windows.clear();
  labels.clear();
  windows.reserve(set.samples.size());
  for (const ingest::TrafficSample& s : set.samples) {
    windows.push_back(s.window);
    labels.push_back(s.label);
  }
}

ingest::SampleSet ingest_csv(const std::string& csv_path, const ingest::ClassTaxonomy& taxonomy,
                             int length, int horizon, bool time_features) {
  const ingest::ObservationTable table = ingest::parse_traffic_csv(read_file(csv_path));
  std::vector<ingest::TrafficSample> samples;
  for (const ingest::LabeledSeries& series : ingest::derive_labels(table, taxonomy)) {
    for (ingest::TrafficSample& s : ingest::make_windows(series, length, horizon, time_features)) {
      samples.push_back(std::move(s));
    }
  }
  return ingest::normalize(std::move(samples), taxonomy, horizon);
}

nlohmann::json plan_json(const routing::RoutePlan& plan) {
  nlohmann::json legs = nlohmann::json::array();
  for (const auto& leg : plan.legs) {
    legs.push_back({{"segment", leg.segment},
                    {"enter_seconds", leg.enter_seconds},
                    {"traversal_seconds", leg.traversal_seconds}});
  }
  return {{"path", plan.path},
          {"depart_seconds", plan.depart_seconds},
          {"eta_seconds", plan.eta_seconds},
          {"legs", legs}};
}

metrics::MetricReport evaluate_model(const neural::ModelParams& model,
                                     const ingest::SampleSet& set) {
  std::vector<int> preds;
  std::vector<int> labels;
  preds.reserve(set.samples.size());
  for (const ingest::TrafficSample& s : set.samples) {
    preds.push_back(neural::predict(model, s.window).label);
    labels.push_back(s.label);
  }
  return metrics::score(metrics::confusion(preds, labels, set.taxonomy.num_classes));
}

Service* g_service = nullptr;

void handle_signal(int) {
  if (g_service) g_service->stop();
}

}  // namespace

int run_cli(int argc, char** argv) {
  std::string config_path;
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::strcmp(argv[i], "--config") == 0) config_path = argv[i + 1];
  }
  Config cfg;
  try {
    cfg = load_config(config_path);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  CLI::App app{"traffic pattern classification and time-dependent routing toolkit"};
  app.require_subcommand(1);
  std::string config_flag;
  app.add_option("--config", config_flag, "config JSON (default: $TPC_CONFIG)");

  // synth
  auto* synth = app.add_subcommand("synth", "generate seed-deterministic fixtures");
  std::string synth_kind;
  std::string synth_out, synth_graph_path;
  std::uint64_t synth_seed = 1;
  int synth_junctions = 6, synth_rows = 162;
  int synth_vertices = 8, synth_chords = 4, synth_sensors = 6;
  int synth_days = 3, synth_per_hour = 2;
  synth->add_option("--kind", synth_kind, "traffic-csv | graph | events")
      ->required()
      ->check(CLI::IsMember({"traffic-csv", "graph", "events"}));
  synth->add_option("--out", synth_out)->required();
  synth->add_option("--seed", synth_seed);
  synth->add_option("--junctions", synth_junctions);
  synth->add_option("--rows", synth_rows, "rows per junction");
  synth->add_option("--vertices", synth_vertices);
  synth->add_option("--chords", synth_chords);
  synth->add_option("--sensors", synth_sensors);
  synth->add_option("--graph", synth_graph_path, "graph JSON (events kind)");
  synth->add_option("--days", synth_days);
  synth->add_option("--per-hour", synth_per_hour, "events per adjacent pair per hour");

  // ingest
  auto* ing = app.add_subcommand("ingest", "CSV -> labeled, windowed, normalized dataset");
  std::string ing_csv, ing_out, ing_out_train, ing_out_test;
  double ing_test_fraction = 0.0;
  std::uint64_t ing_seed = 1;
  int ing_length = cfg.windowing.length, ing_horizon = cfg.windowing.horizon;
  bool ing_time_features = cfg.windowing.time_features;
  std::string ing_cuts, ing_names;
  ing->add_option("--csv", ing_csv)->required();
  ing->add_option("--out", ing_out, "single dataset output");
  ing->add_option("--out-train", ing_out_train);
  ing->add_option("--out-test", ing_out_test);
  ing->add_option("--test-fraction", ing_test_fraction);
  ing->add_option("--seed", ing_seed, "split seed");
  ing->add_option("--length", ing_length, "window length L");
  ing->add_option("--horizon", ing_horizon, "label horizon h");
  ing->add_flag("--time-features", ing_time_features, "append hour-of-day sin/cos");
  ing->add_option("--cuts", ing_cuts, "quantile cuts, comma separated");
  ing->add_option("--names", ing_names, "class names, comma separated");

  // build-stm
  auto* stm = app.add_subcommand("build-stm", "speed transition matrices from events");
  std::string stm_graph, stm_events, stm_out = cfg.stm_path;
  int stm_windows = cfg.windowing.daily_windows;
  stm->add_option("--graph", stm_graph)->required();
  stm->add_option("--events", stm_events)->required();
  auto* stm_out_opt = stm->add_option("--out", stm_out);
  if (cfg.stm_path.empty()) stm_out_opt->required();
  stm->add_option("--windows", stm_windows);

  // tune
  auto* tune = app.add_subcommand("tune", "grid search with k-fold cross-validation");
  std::string tune_dataset = cfg.dataset_path, tune_grid = cfg.grid_path, tune_out;
  int tune_k = 5;
  std::uint64_t tune_seed = 7;
  auto* tune_ds_opt = tune->add_option("--dataset", tune_dataset);
  if (cfg.dataset_path.empty()) tune_ds_opt->required();
  tune->add_option("--grid", tune_grid, "grid spec JSON (default grid if omitted)");
  tune->add_option("--out", tune_out, "write TPC-CVREPORT file");
  tune->add_option("--k", tune_k);
  tune->add_option("--seed", tune_seed);

  // train
  auto* train = app.add_subcommand("train", "train the classifier");
  std::string train_dataset = cfg.dataset_path, train_out = cfg.model_path;
  std::string train_report, train_hp_json;
  neural::HyperParams train_hp;
  std::string train_kernel = "glorot_uniform", train_recurrent = "glorot_uniform";
  std::string train_optimizer = "adam";
  double train_lr = 1e-3, train_kernel_limit = 0.05, train_recurrent_gain = 1.0;
  auto* train_ds_opt = train->add_option("--dataset", train_dataset);
  if (cfg.dataset_path.empty()) train_ds_opt->required();
  auto* train_out_opt = train->add_option("--out", train_out);
  if (cfg.model_path.empty()) train_out_opt->required();
  train->add_option("--from-report", train_report, "use the best config of a CV report");
  train->add_option("--hp-json", train_hp_json, "hyperparameters JSON file");
  train->add_option("--hidden", train_hp.output_size);
  train->add_option("--layers", train_hp.num_layers);
  train->add_option("--epochs", train_hp.epochs);
  train->add_option("--batch", train_hp.batch_size);
  train->add_option("--dropout", train_hp.dropout_rate);
  train->add_option("--kernel-init", train_kernel)
      ->check(CLI::IsMember({"glorot_uniform", "he_uniform", "scaled_uniform"}));
  train->add_option("--kernel-limit", train_kernel_limit);
  train->add_option("--recurrent-init", train_recurrent)
      ->check(CLI::IsMember({"glorot_uniform", "scaled_identity"}));
  train->add_option("--recurrent-gain", train_recurrent_gain);
  train->add_option("--optimizer", train_optimizer)->check(CLI::IsMember({"adam", "sgd"}));
  train->add_option("--lr", train_lr);
  train->add_option("--seed", train_hp.seed);
  bool train_quiet = false;
  train->add_flag("--quiet", train_quiet, "suppress per-epoch progress");

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "metrics JSON for a model on a dataset");
  std::string eval_model = cfg.model_path, eval_dataset = cfg.dataset_path;
  bool eval_text = false;
  auto* eval_model_opt = eval->add_option("--model", eval_model);
  if (cfg.model_path.empty()) eval_model_opt->required();
  auto* eval_ds_opt = eval->add_option("--dataset", eval_dataset);
  if (cfg.dataset_path.empty()) eval_ds_opt->required();
  eval->add_flag("--text", eval_text, "also print a table to stderr");

  // classify
  auto* classify = app.add_subcommand("classify", "per-sample predictions JSON");
  std::string cls_model = cfg.model_path, cls_dataset = cfg.dataset_path;
  std::size_t cls_limit = 0;
  auto* cls_model_opt = classify->add_option("--model", cls_model);
  if (cfg.model_path.empty()) cls_model_opt->required();
  auto* cls_ds_opt = classify->add_option("--dataset", cls_dataset);
  if (cfg.dataset_path.empty()) cls_ds_opt->required();
  classify->add_option("--limit", cls_limit, "0 = all samples");

  // patterns
  auto* patterns = app.add_subcommand("patterns", "classified dataset -> route database");
  std::string pat_graph, pat_model = cfg.model_path, pat_dataset = cfg.dataset_path;
  std::string pat_out = cfg.routedb_path, pat_factors;
  int pat_windows = cfg.windowing.daily_windows;
  patterns->add_option("--graph", pat_graph)->required();
  auto* pat_model_opt = patterns->add_option("--model", pat_model);
  if (cfg.model_path.empty()) pat_model_opt->required();
  auto* pat_ds_opt = patterns->add_option("--dataset", pat_dataset);
  if (cfg.dataset_path.empty()) pat_ds_opt->required();
  auto* pat_out_opt = patterns->add_option("--out", pat_out);
  if (cfg.routedb_path.empty()) pat_out_opt->required();
  patterns->add_option("--windows", pat_windows);
  patterns->add_option("--factors", pat_factors, "class speed factors, comma separated");

  // route
  auto* route = app.add_subcommand("route", "time-dependent shortest route");
  std::string route_db = cfg.routedb_path, route_from, route_to, route_depart;
  auto* route_db_opt = route->add_option("--db", route_db);
  if (cfg.routedb_path.empty()) route_db_opt->required();
  route->add_option("--from", route_from)->required();
  route->add_option("--to", route_to)->required();
  route->add_option("--depart", route_depart, "HH:MM[:SS]")->required();

  // compress
  auto* compress = app.add_subcommand("compress", "merge similar daily patterns");
  std::string cmp_db = cfg.routedb_path, cmp_out;
  double cmp_epsilon = 5.0;
  auto* cmp_db_opt = compress->add_option("--db", cmp_db);
  if (cfg.routedb_path.empty()) cmp_db_opt->required();
  compress->add_option("--out", cmp_out)->required();
  compress->add_option("--epsilon", cmp_epsilon, "max-norm join radius, kmph");

  // serve
  auto* serve = app.add_subcommand("serve", "route/feedback/patterns JSON service");
  std::string serve_db = cfg.routedb_path, serve_bind = cfg.bind_address;
  auto* serve_db_opt = serve->add_option("--db", serve_db);
  if (cfg.routedb_path.empty()) serve_db_opt->required();
  serve->add_option("--bind", serve_bind, "host:port");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (synth->parsed()) {
      std::string bytes;
      if (synth_kind == "traffic-csv") {
        bytes = synth_traffic_csv(synth_seed, synth_junctions, synth_rows);
      } else if (synth_kind == "graph") {
        bytes = roadnet::graph_to_json(
            synth_graph(synth_seed, synth_vertices, synth_chords, synth_sensors));
      } else {
        if (synth_graph_path.empty()) {
          throw Error(Errc::BadRequest, "synth --kind events needs --graph");
        }
        const roadnet::RoadGraph graph = roadnet::graph_from_json(read_file(synth_graph_path));
        bytes = roadnet::events_to_json(
            synth_events(graph, synth_seed, synth_days, synth_per_hour));
      }
      write_file_atomic(synth_out, bytes);
      std::cerr << "wrote " << synth_out << " (" << bytes.size() << " bytes)\n";
      return 0;
    }

    if (ing->parsed()) {
      ingest::ClassTaxonomy taxonomy = cfg.taxonomy;
      if (!ing_cuts.empty()) {
        taxonomy.quantile_cuts = parse_double_list(ing_cuts);
        taxonomy.num_classes = static_cast<int>(taxonomy.quantile_cuts.size()) + 1;
        if (ing_names.empty() && taxonomy.num_classes != 3) {
          taxonomy.names.clear();
          for (int c = 0; c < taxonomy.num_classes; ++c) {
            taxonomy.names.push_back("class_" + std::to_string(c));
          }
        }
      }
      if (!ing_names.empty()) {
        taxonomy.names = parse_string_list(ing_names);
        taxonomy.num_classes = static_cast<int>(taxonomy.names.size());
      }
      taxonomy.validate();
      ingest::SampleSet set =
          ingest_csv(ing_csv, taxonomy, ing_length, ing_horizon, ing_time_features);
      std::cerr << "ingested " << set.samples.size() << " samples\n";
      if (!ing_out.empty()) {
        write_file_atomic(ing_out, ingest::save_dataset(set));
        std::cerr << "wrote " << ing_out << "\n";
        return 0;
      }
      if (ing_out_train.empty() || ing_out_test.empty() || ing_test_fraction <= 0.0) {
        throw Error(Errc::BadRequest,
                    "ingest needs --out, or --out-train/--out-test with --test-fraction");
      }
      auto [train_set, test_set] = ingest::split(set, ing_test_fraction, ing_seed);
      write_file_atomic(ing_out_train, ingest::save_dataset(train_set));
      write_file_atomic(ing_out_test, ingest::save_dataset(test_set));
      std::cerr << "wrote " << ing_out_train << " (" << train_set.samples.size() << ") and "
                << ing_out_test << " (" << test_set.samples.size() << ")\n";
      return 0;
    }

    if (stm->parsed()) {
      const roadnet::RoadGraph graph = roadnet::graph_from_json(read_file(stm_graph));
      const auto events = roadnet::events_from_json(read_file(stm_events));
      const roadnet::StmStore store = roadnet::build_stms(graph, events, stm_windows);
      write_file_atomic(stm_out, roadnet::save_stm_store(store, stm_windows));
      std::cerr << "wrote " << stm_out << " (" << store.size() << " matrices from "
                << events.size() << " events)\n";
      return 0;
    }

    if (tune->parsed()) {
      const ingest::SampleSet set = ingest::load_dataset(read_file(tune_dataset));
      tuning::GridSpec spec =
          tune_grid.empty() ? tuning::GridSpec{} : tuning::grid_spec_from_json(read_file(tune_grid));
      std::vector<Matrix> windows;
      std::vector<int> labels;
      dataset_tensors(set, windows, labels);
      std::cerr << "grid search over " << spec.config_count() << " configs, k=" << tune_k
                << ", n=" << windows.size() << "\n";
      const tuning::CvReport report =
          tuning::grid_search(spec, windows, labels, set.taxonomy.num_classes, tune_k, tune_seed);
      if (!tune_out.empty()) {
        write_file_atomic(tune_out, tuning::save_report(report));
        std::cerr << "wrote " << tune_out << "\n";
      }
      nlohmann::json best;
      best["best_ordinal"] = report.best;
      best["mean_accuracy"] = report.configs[report.best].cv.mean_accuracy;
      best["mean_macro_f1"] = report.configs[report.best].cv.mean_macro_f1;
      best["hyperparams"] = report.best_hp();
      std::cout << best.dump(2) << "\n";
      return 0;
    }

    if (train->parsed()) {
      const ingest::SampleSet set = ingest::load_dataset(read_file(train_dataset));
      neural::HyperParams hp;
      if (!train_report.empty()) {
        hp = tuning::load_report(read_file(train_report)).best_hp();
      } else if (!train_hp_json.empty()) {
        hp = nlohmann::json::parse(read_file(train_hp_json)).get<neural::HyperParams>();
      } else {
        hp = train_hp;
        hp.kernel_init = nlohmann::json(train_kernel).get<neural::KernelInitSpec>();
        hp.kernel_init.limit = train_kernel_limit;
        hp.recurrent_init = nlohmann::json(train_recurrent).get<neural::RecurrentInitSpec>();
        hp.recurrent_init.gain = train_recurrent_gain;
        hp.optimizer = nlohmann::json(train_optimizer).get<neural::OptimizerSpec>();
        hp.optimizer.learning_rate = train_lr;
      }
      if (train->count("--seed")) hp.seed = train_hp.seed;
      std::vector<Matrix> windows;
      std::vector<int> labels;
      dataset_tensors(set, windows, labels);
      if (windows.empty()) throw Error(Errc::EmptyDataset, train_dataset);
      neural::ModelParams model =
          neural::init_params(hp, set.feature_width, set.taxonomy.num_classes);
      neural::train(model, windows, labels, hp, [&](int epoch, double loss) {
        if (!train_quiet) {
          std::cerr << "epoch " << (epoch + 1) << "/" << hp.epochs << " loss " << loss << "\n";
        }
      });
      write_file_atomic(train_out, neural::save_model(model, hp));
      std::cerr << "wrote " << train_out << "\n";
      return 0;
    }

    if (eval->parsed()) {
      const auto [model, hp] = neural::load_model(read_file(eval_model));
      (void)hp;
      const ingest::SampleSet set = ingest::load_dataset(read_file(eval_dataset));
      if (set.samples.empty()) throw Error(Errc::EmptyDataset, eval_dataset);
      const metrics::MetricReport report = evaluate_model(model, set);
      if (eval_text) std::cerr << metrics::render_text(report, set.taxonomy.names);
      std::cout << metrics::render_json(report, set.taxonomy.names) << "\n";
      return 0;
    }

    if (classify->parsed()) {
      const auto [model, hp] = neural::load_model(read_file(cls_model));
      (void)hp;
      const ingest::SampleSet set = ingest::load_dataset(read_file(cls_dataset));
      nlohmann::json out = nlohmann::json::array();
      std::size_t n = set.samples.size();
      if (cls_limit > 0) n = std::min(n, cls_limit);
      for (std::size_t i = 0; i < n; ++i) {
        const ingest::TrafficSample& s = set.samples[i];
        const neural::Prediction p = neural::predict(model, s.window);
        out.push_back({{"junction", s.junction},
                       {"window_start", format_datetime(s.window_start)},
                       {"label", s.label},
                       {"predicted", p.label},
                       {"class", set.taxonomy.names[static_cast<std::size_t>(p.label)]},
                       {"probs", p.probs}});
      }
      std::cout << out.dump(2) << "\n";
      return 0;
    }

    if (patterns->parsed()) {
      const roadnet::RoadGraph graph = roadnet::graph_from_json(read_file(pat_graph));
      const auto [model, hp] = neural::load_model(read_file(pat_model));
      (void)hp;
      const ingest::SampleSet set = ingest::load_dataset(read_file(pat_dataset));
      std::vector<double> factors =
          pat_factors.empty() ? cfg.class_speed_factors : parse_double_list(pat_factors);
      if (static_cast<int>(factors.size()) != model.num_classes) {
        throw Error(Errc::BadRequest, "need one speed factor per class");
      }
      const routing::RouteDb db = build_route_db(graph, model, set, pat_windows, factors);
      db.validate();
      write_file_atomic(pat_out, routing::save_route_db(db));
      std::cerr << "wrote " << pat_out << " (" << db.patterns.size() << " patterns)\n";
      return 0;
    }

    if (route->parsed()) {
      const routing::RouteDb db = routing::load_route_db(read_file(route_db));
      const int depart = parse_time_of_day(route_depart);
      const routing::RoutePlan plan =
          routing::best_route(db, route_from, route_to, static_cast<double>(depart));
      std::cout << plan_json(plan).dump(2) << "\n";
      return 0;
    }

    if (compress->parsed()) {
      const routing::RouteDb db = routing::load_route_db(read_file(cmp_db));
      const routing::RouteDb compact = routing::compress_patterns(db, cmp_epsilon);
      write_file_atomic(cmp_out, routing::save_route_db(compact));
      std::cerr << "wrote " << cmp_out << " (" << compact.patterns.size() << " own + "
                << compact.representatives.size() << " representatives)\n";
      return 0;
    }

    if (serve->parsed()) {
      const std::size_t colon = serve_bind.rfind(':');
      if (colon == std::string::npos) {
        throw Error(Errc::BadRequest, "--bind expects host:port");
      }
      const std::string host = serve_bind.substr(0, colon);
      const int port = std::stoi(serve_bind.substr(colon + 1));
      routing::RouteDb db;
      try {
        db = routing::load_route_db(read_file(serve_db));
      } catch (const Error& e) {
        throw Error(Errc::DbLoadFailure, e.what());
      }
      Service service(std::move(db), cfg);
      if (!service.bind(host, port)) {
        throw Error(Errc::BindFailure, serve_bind);
      }
      g_service = &service;
      std::signal(SIGINT, handle_signal);
      std::signal(SIGTERM, handle_signal);
      std::cerr << "listening on " << host << ":" << port << "\n";
      service.serve_blocking();
      g_service = nullptr;
      service.flush(serve_db);
      std::cerr << "flushed " << serve_db << "\n";
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace tpc::gateway
