#include "cli.hpp"

#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "ppm/checkpoint.hpp"
#include "ppm/csv.hpp"
#include "ppm/errors.hpp"
#include "ppm/event_log.hpp"
#include "ppm/ontology.hpp"
#include "ppm/pos_encoding.hpp"
#include "ppm/synthgen.hpp"
#include "ppm/training.hpp"

namespace ppm::cli {

namespace fs = std::filesystem;
using nlohmann::json;

nlohmann::json default_config() {
  const ModelConfig model;
  const TrainConfig train;
  const SynthConfig synth;
  return {
      // paths
      {"log", ""},
      {"ontology", ""},
      {"out", "out"},
      {"checkpoint", ""},
      {"case_column", "case_id"},
      {"activity_column", "activity"},
      {"order_column", "order"},
      // model
      {"pe", "spe"},
      {"spe_k", 32},
      {"d_model", model.d_model},
      {"hidden", model.hidden},
      {"heads", model.heads},
      {"layers", model.layers},
      {"dropout", 0.216375},
      {"ffn_in_blocks", model.ffn_in_blocks},
      // training
      {"lr", train.lr},
      {"gamma", train.gamma},
      {"step_epochs", train.step_epochs},
      {"weight_decay", train.weight_decay},
      {"beta1", train.beta1},
      {"beta2", train.beta2},
      {"eps", train.eps},
      {"epochs", train.epochs},
      {"batch_size", train.batch_size},
      {"patience", train.patience},
      {"n_fits", 10},
      {"workers", 1},
      {"seed", 0},
      // tune / eval / encode-graph
      {"budget", 20},
      {"split", "test"},
      {"k", 32},
      // synth
      {"n_types", synth.n_types},
      {"activities_per_type", synth.activities_per_type},
      {"n_traces", synth.n_traces},
      {"min_length", synth.min_length},
      {"max_length", synth.max_length},
      {"length_mean", synth.length_mean},
      {"length_std", synth.length_std},
      {"length_outlier_fraction", synth.length_outlier_fraction},
      {"temperature", synth.temperature},
      {"type_affinity", synth.type_affinity},
  };
}

namespace {

/// Typed view over the merged configuration.
class Settings {
 public:
  explicit Settings(json values) : values_(std::move(values)) {}

  template <typename V>
  V get(const std::string& key) const {
    try {
      return values_.at(key).get<V>();
    } catch (const json::exception&) {
      throw Error(ErrorKind::Config, "config key '" + key + "' has the wrong type");
    }
  }
  std::string path(const std::string& key) const { return get<std::string>(key); }
  std::string require_path(const std::string& key) const {
    auto p = path(key);
    if (p.empty()) throw Error(ErrorKind::Config, "--" + key + " is required");
    return p;
  }
  const json& raw() const { return values_; }

  ModelConfig model(PeMode mode, int vocab_size) const {
    ModelConfig m;
    m.d_model = get<int>("d_model");
    m.hidden = get<int>("hidden");
    m.heads = get<int>("heads");
    m.layers = get<int>("layers");
    m.dropout = get<double>("dropout");
    m.ffn_in_blocks = get<bool>("ffn_in_blocks");
    m.pe = {mode, get<int>("spe_k")};
    m.vocab_size = vocab_size;
    m.validate();
    return m;
  }

  TrainConfig train() const {
    TrainConfig t;
    t.lr = get<double>("lr");
    t.gamma = get<double>("gamma");
    t.step_epochs = get<int>("step_epochs");
    t.weight_decay = get<double>("weight_decay");
    t.beta1 = get<double>("beta1");
    t.beta2 = get<double>("beta2");
    t.eps = get<double>("eps");
    t.epochs = get<int>("epochs");
    t.batch_size = get<int>("batch_size");
    t.patience = get<int>("patience");
    t.seed = get<std::uint64_t>("seed");
    t.validate();
    return t;
  }

  SynthConfig synth() const {
    SynthConfig s;
    s.n_types = get<int>("n_types");
    s.activities_per_type = get<int>("activities_per_type");
    s.n_traces = get<int>("n_traces");
    s.min_length = get<int>("min_length");
    s.max_length = get<int>("max_length");
    s.length_mean = get<double>("length_mean");
    s.length_std = get<double>("length_std");
    s.length_outlier_fraction = get<double>("length_outlier_fraction");
    s.temperature = get<double>("temperature");
    s.type_affinity = get<double>("type_affinity");
    s.seed = get<std::uint64_t>("seed");
    s.validate();
    return s;
  }

  CsvDescriptor csv_format() const {
    return {get<std::string>("case_column"), get<std::string>("activity_column"),
            get<std::string>("order_column")};
  }

  std::vector<PeMode> pe_modes() const {
    std::vector<PeMode> modes;
    std::stringstream list(get<std::string>("pe"));
    std::string item;
    while (std::getline(list, item, ',')) modes.push_back(parse_pe_mode(item));
    if (modes.empty()) throw Error(ErrorKind::Config, "--pe is empty");
    return modes;
  }

 private:
  json values_;
};

json parse_scalar(const std::string& text) {
  try {
    auto v = json::parse(text);
    if (v.is_number() || v.is_boolean()) return v;
  } catch (const json::exception&) {
  }
  return text;
}

json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Config, "cannot read config file " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Config, path + ": " + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorKind::Config, path + ": expected a JSON object");
  return doc;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::Io, "write failed: " + path.string());
}

std::string format_stats(const TraceStats& s) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "traces: %zu\nactivities: %zu\nlength mean: %.4f\nlength std: %.4f\n"
                "length min: %zu\nlength max: %zu\n",
                s.trace_count, s.activity_count, s.mean, s.stddev, s.min, s.max);
  return buf;
}

/// Spectral table for structural encoding, or empty when no mode needs it.
struct SpectralInputs {
  std::optional<NodeEmbeddingTable> table;
  Tensor<double> token_table;
};

SpectralInputs load_spectral(const Settings& s, const Vocabulary& vocab, bool needed, int k) {
  SpectralInputs out;
  if (!needed) return out;
  auto graph = parse_ontology(s.require_path("ontology"));
  out.table = node_embeddings(build_laplacian(graph), graph, k);
  out.token_table = token_spectral_table(*out.table, vocab);
  return out;
}

int cmd_synth(const Settings& s) {
  const auto config = s.synth();
  const fs::path out = s.path("out");
  ensure_dir(out);
  auto graph = gen_ontology(config);
  auto traces = gen_traces(config, graph);
  write_event_log(out / "log.csv", traces);
  graph.save(out / "ontology.json");
  std::cout << "wrote " << (out / "log.csv").string() << " and "
            << (out / "ontology.json").string() << '\n'
            << format_stats(dataset_stats(traces));
  return 0;
}

int cmd_stats(const Settings& s) {
  auto traces = parse_event_log(s.require_path("log"), s.csv_format());
  std::cout << format_stats(dataset_stats(traces));
  return 0;
}

json fit_metrics(const FitRecord& f) {
  const auto& acc = f.result.test.accuracy;
  return {{"fit", f.index},
          {"seed", f.seed},
          {"val_loss", f.result.best_val_loss},
          {"best_epoch", f.result.best_epoch},
          {"epochs_run", f.result.epochs_run},
          {"acc@1", acc.at(1)},
          {"acc@3", acc.at(3)},
          {"acc@5", acc.at(5)}};
}

int cmd_train(const Settings& s) {
  const fs::path out = s.path("out");
  ensure_dir(out);
  const auto modes = s.pe_modes();
  const bool needs_graph = std::count(modes.begin(), modes.end(), PeMode::Structural) > 0;

  auto traces = parse_event_log(s.require_path("log"), s.csv_format());
  const auto vocab = build_vocabulary(traces);
  const std::size_t max_length = default_max_length(traces);
  const auto encoded = encode_traces(traces, vocab, max_length);
  const auto spectral = load_spectral(s, vocab, needs_graph, s.get<int>("spe_k"));
  const TrainConfig train = s.train();
  const int n_fits = s.get<int>("n_fits");

  std::vector<ResultRow> rows;
  for (PeMode mode : modes) {
    const ModelConfig model = s.model(mode, static_cast<int>(vocab.size()));
    const std::string method(to_string(mode));
    spdlog::info("training {} x{} (d_model {}, {} traces)", method, n_fits, model.d_model,
                 encoded.size());
    RunSummary summary = run_many(n_fits, train.seed, encoded, model, train,
                                  mode == PeMode::Structural ? spectral.token_table
                                                             : Tensor<double>{},
                                  s.get<int>("workers"));

    const fs::path dir = out / method;
    ensure_dir(dir);
    json metrics = json::array();
    std::size_t best = 0;
    for (std::size_t i = 0; i < summary.fits.size(); ++i) {
      metrics.push_back(fit_metrics(summary.fits[i]));
      if (summary.fits[i].result.best_val_loss < summary.fits[best].result.best_val_loss) best = i;
    }
    write_text(dir / "metrics.json", metrics.dump(2) + "\n");

    const auto& chosen = summary.fits[best];
    Checkpoint ck{model, chosen.result.best_params, vocab,
                  mode == PeMode::Structural ? spectral.table : std::nullopt, max_length,
                  chosen.seed};
    save_checkpoint(dir / "checkpoint", ck);

    rows.push_back({method, model.d_model, summary.aggregate});
    for (const auto& [k, st] : summary.aggregate.accuracy) {
      std::printf("%s d=%d acc@%d %.4f +- %.4f\n", method.c_str(), model.d_model, k, st.mean,
                  st.std);
    }
  }
  write_table_csv(out / "aggregate.csv", rows);
  write_results_csv(out / "results.csv", rows);
  return 0;
}

int cmd_eval(const Settings& s) {
  const Checkpoint ck = load_checkpoint(s.require_path("checkpoint"));
  auto traces = parse_event_log(s.require_path("log"), s.csv_format());
  for (const auto& t : traces) {
    for (const auto& a : t.activities) {
      if (!ck.vocab.find(a)) {
        throw Error(ErrorKind::Compatibility,
                    "activity '" + a + "' is not in the checkpoint vocabulary");
      }
    }
  }
  auto encoded = encode_traces(traces, ck.vocab, ck.max_length);
  const std::string which = s.get<std::string>("split");
  std::vector<EncodedTrace> dataset;
  if (which == "all") {
    dataset = std::move(encoded);
  } else {
    auto split = split_dataset(std::move(encoded), ck.split_seed);
    if (which == "test") dataset = std::move(split.test);
    else if (which == "validation") dataset = std::move(split.validation);
    else if (which == "train") dataset = std::move(split.train);
    else throw Error(ErrorKind::Config, "--split must be train|validation|test|all");
  }

  const Model<float> model = ck.model();
  const EvalReport report = accuracy_at_k(model, dataset);

  const fs::path out = s.path("out");
  ensure_dir(out);
  {
    std::ofstream f(out / "eval.csv", std::ios::binary);
    if (!f) throw Error(ErrorKind::Io, "cannot write " + (out / "eval.csv").string());
    csv::write_row(f, {"k", "accuracy", "positions"});
    for (const auto& [k, acc] : report.accuracy) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.17g", acc);
      csv::write_row(f, {std::to_string(k), buf, std::to_string(report.positions)});
      std::printf("acc@%d %.4f\n", k, acc);
    }
  }
  {
    std::ofstream f(out / "eval_by_prefix.csv", std::ios::binary);
    if (!f) throw Error(ErrorKind::Io, "cannot write eval_by_prefix.csv");
    csv::write_row(f, {"prefix_activities", "positions", "acc@1"});
    for (const auto& [len, acc] : report.by_prefix_length) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.17g", acc);
      csv::write_row(f, {std::to_string(len), std::to_string(report.prefix_counts.at(len)), buf});
    }
  }
  return 0;
}

int cmd_tune(const Settings& s) {
  const int budget = s.get<int>("budget");
  if (budget < 1) throw Error(ErrorKind::Parameter, "--budget must be >= 1");
  const fs::path out = s.path("out");
  ensure_dir(out);
  const PeMode mode = s.pe_modes().front();

  auto traces = parse_event_log(s.require_path("log"), s.csv_format());
  const auto vocab = build_vocabulary(traces);
  const auto encoded = encode_traces(traces, vocab, default_max_length(traces));
  const SearchSpace space;
  const int widest_k = *std::max_element(space.spe_k.begin(), space.spe_k.end());
  const auto spectral = load_spectral(s, vocab, mode == PeMode::Structural, widest_k);

  const TrainConfig train = s.train();
  const ModelConfig model = s.model(mode, static_cast<int>(vocab.size()));
  auto split = split_dataset(encoded, train.seed);
  auto result = random_search(space, budget, train.seed, split, model, train,
                              spectral.token_table);
  write_trial_log(out / "trials.csv", result.trials);

  json best = s.raw();
  best["pe"] = std::string(to_string(mode));
  best["d_model"] = result.best_model.d_model;
  best["hidden"] = result.best_model.hidden;
  best["heads"] = result.best_model.heads;
  best["layers"] = result.best_model.layers;
  best["dropout"] = result.best_model.dropout;
  best["spe_k"] = result.best_model.pe.k;
  best["gamma"] = result.best_train.gamma;
  best["lr"] = result.best_train.lr;
  write_text(out / "best_config.json", best.dump(2) + "\n");
  std::printf("best trial %zu: val_loss %.5f\n", result.best,
              result.trials[result.best].val_loss);
  return 0;
}

int cmd_encode_graph(const Settings& s) {
  auto graph = parse_ontology(s.require_path("ontology"));
  auto table = node_embeddings(build_laplacian(graph), graph, s.get<int>("k"));
  const fs::path out = s.path("out");
  ensure_dir(out);
  table.save_csv(out / "embeddings.csv");
  std::cout << "wrote " << table.node_count() << " rows to "
            << (out / "embeddings.csv").string() << '\n';
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Next-activity prediction with structural positional encoding"};
  app.require_subcommand(1);
  app.fallthrough();

  const json defaults = default_config();
  std::string config_path;
  bool verbose = false;
  app.add_option("--config", config_path, "Flat JSON config; flags override its values");
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  std::map<std::string, std::string> flags;
  std::map<std::string, CLI::Option*> options;
  for (const auto& [key, value] : defaults.items()) {
    options[key] = app.add_option("--" + key, flags[key], "default: " + value.dump());
  }

  struct Command {
    const char* name;
    const char* help;
    int (*fn)(const Settings&);
  };
  const Command commands[] = {
      {"synth", "Generate a synthetic event log and ontology", cmd_synth},
      {"stats", "Print trace-length statistics of an event log", cmd_stats},
      {"train", "Train n_fits models per PE method and aggregate test accuracy", cmd_train},
      {"eval", "Evaluate a checkpoint on an event log", cmd_eval},
      {"tune", "Random hyperparameter search", cmd_tune},
      {"encode-graph", "Write spectral node embeddings of an ontology", cmd_encode_graph},
  };
  for (const auto& c : commands) app.add_subcommand(c.name, c.help);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    json merged = defaults;
    if (!config_path.empty()) {
      const json file = load_config_file(config_path);
      for (const auto& [key, value] : file.items()) {
        if (!defaults.contains(key)) throw Error(ErrorKind::Config, "unknown config key '" + key + "'");
        merged[key] = value;
      }
    }
    for (const auto& [key, opt] : options) {
      if (opt->count() > 0) merged[key] = parse_scalar(flags[key]);
    }
    if (merged["log"].is_string() == false || merged["ontology"].is_string() == false) {
      throw Error(ErrorKind::Config, "paths must be strings");
    }
    const Settings settings(merged);
    for (const auto& c : commands) {
      if (app.got_subcommand(c.name)) return c.fn(settings);
    }
    return 1;
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << '\n';
    return exit_code_for(e.kind());
  }
}

}  // namespace ppm::cli
