#include "cpsde/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <map>

#include "cpsde/changepoint.hpp"
#include "cpsde/checkpoint.hpp"
#include "cpsde/csv_io.hpp"
#include "cpsde/errors.hpp"

namespace cpsde {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kDataFile = "data.csv";
constexpr const char* kTruthFile = "truth.txt";
constexpr const char* kCheckpointFile = "checkpoint.json";
constexpr const char* kHistoryFile = "history.csv";
constexpr const char* kLogFile = "train_log.jsonl";
constexpr const char* kChangePointFile = "change_points.txt";
constexpr std::size_t kReportPaths = 16;

template <class T>
void read_field(const json& doc, const char* key, T& out) {
  if (auto it = doc.find(key); it != doc.end()) out = it->get<T>();
}

void reject_unknown(const json& doc, std::initializer_list<const char*> known, const std::string& where) {
  if (!doc.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& item : doc.items()) {
    const std::string& key = item.key();
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; }))
      throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

json segment_json(const OuSegment& s) { return {{"mu", s.mu}, {"theta", s.theta}, {"sigma", s.sigma}}; }

SyntheticSource synthetic_from_json(const json& doc) {
  SyntheticSource src;
  reject_unknown(doc, {"change_points", "segments", "n_paths", "n_steps", "t0", "dt", "x0"}, "data.synthetic");
  read_field(doc, "change_points", src.spec.change_points);
  if (auto it = doc.find("segments"); it != doc.end()) {
    src.spec.segments.clear();
    for (const json& s : *it) {
      reject_unknown(s, {"mu", "theta", "sigma"}, "data.synthetic.segments");
      OuSegment seg;
      read_field(s, "mu", seg.mu);
      read_field(s, "theta", seg.theta);
      read_field(s, "sigma", seg.sigma);
      src.spec.segments.push_back(seg);
    }
  }
  read_field(doc, "n_paths", src.n_paths);
  read_field(doc, "n_steps", src.n_steps);
  read_field(doc, "t0", src.t0);
  read_field(doc, "dt", src.dt);
  read_field(doc, "x0", src.x0);
  return src;
}

void ensure_out_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory '" + dir.string() + "'");
}

std::ofstream open_out(const fs::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot open '" + file.string() + "' for writing");
  return out;
}

void finish(std::ofstream& out, const fs::path& file) {
  out.flush();
  if (!out) throw IoError("failed writing '" + file.string() + "'");
}

TrainConfig effective_train(const ExperimentConfig& cfg) {
  TrainConfig t = cfg.train;
  t.seed = cfg.seed;
  return t;
}

TrainState load_state(const ExperimentConfig& cfg) {
  const fs::path file = cfg.out / kCheckpointFile;
  if (!fs::exists(file)) throw IoError("missing checkpoint '" + file.string() + "'; run train first");
  return TrainState::from_json(read_json_file(file));
}

void write_history(const fs::path& file, const TrainHistory& h) {
  std::ofstream out = open_out(file);
  out << "round,step,loss_g,loss_d\n";
  for (const StepRecord& s : h.steps)
    out << s.round << ',' << s.step << ',' << format_double(s.loss_g) << ',' << format_double(s.loss_d) << '\n';
  finish(out, file);
}

void write_log(const fs::path& file, const TrainHistory& h) {
  std::ofstream out = open_out(file);
  for (const RoundRecord& r : h.rounds) {
    double lg = 0.0, ld = 0.0;
    std::size_t n = 0;
    for (const StepRecord& s : h.steps)
      if (s.round == r.round) {
        lg += s.loss_g;
        ld += s.loss_d;
        ++n;
      }
    const json line = {{"round", r.round},
                       {"loss_g", n ? lg / double(n) : 0.0},
                       {"loss_d", n ? ld / double(n) : 0.0},
                       {"proposed", r.proposed},
                       {"accepted", r.accepted},
                       {"change_points", r.change_points}};
    out << line.dump() << '\n';
  }
  finish(out, file);
}

ScoreSequence as_sequence(std::vector<double> v, std::size_t window) { return ScoreSequence{std::move(v), window}; }

struct Detections {
  std::size_t window = 0;
  std::size_t k = 1;
  ScoreSequence cpsdegan, mean, mmd;
  std::vector<std::size_t> nu_cpsdegan, nu_mean, nu_mmd;
};

Detections run_detectors(TrainState& state, const PathBatch& data) {
  Detections d;
  d.window = state.config.window;
  d.k = std::max<std::size_t>(1, state.config.n_change_points);
  const PathBatch model_units = state.model.to_model_units(data);
  d.cpsdegan = window_scores(state.model.discriminator, state.model.disc_store, model_units, d.window);
  d.mean = as_sequence(window_means(data, d.window), d.window);
  d.mmd = as_sequence(window_mmd(data, d.window), d.window);
  if (d.k == 1) {
    d.nu_cpsdegan = {detect_offline(d.cpsdegan)};
    d.nu_mean = {detect_offline(d.mean)};
    d.nu_mmd = {baseline_mmd(data, d.window)};
  } else {
    d.nu_cpsdegan = detect_multi(d.cpsdegan, d.window, d.k).indices;
    d.nu_mean = detect_multi(d.mean, d.window, d.k).indices;
    d.nu_mmd = select_spaced(d.mmd.scores, d.window, d.k).indices;
  }
  return d;
}

std::optional<std::vector<std::size_t>> truth_of(const ExperimentConfig& cfg) {
  if (cfg.synthetic) return cfg.synthetic->spec.change_points;
  return std::nullopt;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

void ExperimentConfig::validate() const {
  if (synthetic.has_value() == csv.has_value()) throw ConfigError("exactly one data source (synthetic or csv) is required");
  if (synthetic) {
    if (synthetic->n_paths == 0) throw ConfigError("data.synthetic.n_paths must be positive");
    try {
      synthetic->spec.validate(TimeGrid(synthetic->t0, synthetic->dt, synthetic->n_steps));
    } catch (const SpecError& e) {
      throw ConfigError(std::string("data.synthetic: ") + e.what());
    }
  }
  if (metrics.seeds == 0) throw ConfigError("metrics.seeds must be positive");
  if (metrics.training.hidden == 0 || metrics.training.batch_size == 0)
    throw ConfigError("metrics.hidden and metrics.batch_size must be positive");
  if (!(metrics.training.lr > 0.0)) throw ConfigError("metrics.lr must be positive");
  if (out.empty()) throw ConfigError("out must name a directory");
}

ExperimentConfig default_experiment() {
  ExperimentConfig cfg;
  SyntheticSource src;
  src.spec.change_points = {32};
  src.spec.segments = {{0.04, 0.1, 0.4}, {-0.02, 0.1, 0.4}};
  cfg.synthetic = src;
  return cfg;
}

json to_json(const ExperimentConfig& cfg) {
  json data;
  if (cfg.synthetic) {
    json segs = json::array();
    for (const OuSegment& s : cfg.synthetic->spec.segments) segs.push_back(segment_json(s));
    data["synthetic"] = {{"change_points", cfg.synthetic->spec.change_points},
                         {"segments", segs},
                         {"n_paths", cfg.synthetic->n_paths},
                         {"n_steps", cfg.synthetic->n_steps},
                         {"t0", cfg.synthetic->t0},
                         {"dt", cfg.synthetic->dt},
                         {"x0", cfg.synthetic->x0}};
  }
  if (cfg.csv) data["csv"] = cfg.csv->string();
  json train = to_json(cfg.train);
  train.erase("seed");
  const MetricTraining& m = cfg.metrics.training;
  return {{"data", data},
          {"train", train},
          {"metrics",
           {{"seeds", cfg.metrics.seeds},
            {"n_samples", cfg.metrics.n_samples},
            {"hidden", m.hidden},
            {"epochs", m.epochs},
            {"batch_size", m.batch_size},
            {"lr", m.lr}}},
          {"out", cfg.out.string()},
          {"seed", cfg.seed}};
}

ExperimentConfig experiment_from_json(const json& doc, const fs::path& base_dir) {
  ExperimentConfig cfg = default_experiment();
  try {
    reject_unknown(doc, {"data", "train", "metrics", "out", "seed"}, "config");
    if (auto it = doc.find("data"); it != doc.end()) {
      reject_unknown(*it, {"synthetic", "csv"}, "data");
      cfg.synthetic.reset();
      if (auto s = it->find("synthetic"); s != it->end()) cfg.synthetic = synthetic_from_json(*s);
      if (auto c = it->find("csv"); c != it->end()) {
        fs::path p = c->get<std::string>();
        cfg.csv = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
      }
    }
    if (auto it = doc.find("train"); it != doc.end()) {
      if (it->contains("seed")) throw ConfigError("train.seed is not configurable; use the top-level seed");
      cfg.train = train_config_from_json(*it);
    }
    if (auto it = doc.find("metrics"); it != doc.end()) {
      reject_unknown(*it, {"seeds", "n_samples", "hidden", "epochs", "batch_size", "lr"}, "metrics");
      read_field(*it, "seeds", cfg.metrics.seeds);
      read_field(*it, "n_samples", cfg.metrics.n_samples);
      read_field(*it, "hidden", cfg.metrics.training.hidden);
      read_field(*it, "epochs", cfg.metrics.training.epochs);
      read_field(*it, "batch_size", cfg.metrics.training.batch_size);
      read_field(*it, "lr", cfg.metrics.training.lr);
    }
    if (auto it = doc.find("out"); it != doc.end()) cfg.out = it->get<std::string>();
    read_field(doc, "seed", cfg.seed);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config value: ") + e.what());
  }
  cfg.train.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

PathBatch load_data(const ExperimentConfig& cfg) {
  if (cfg.csv) return read_path_csv(*cfg.csv);
  if (!cfg.synthetic) throw ConfigError("no data source configured");
  const SyntheticSource& s = *cfg.synthetic;
  return simulate_ou(s.spec, TimeGrid(s.t0, s.dt, s.n_steps), s.n_paths, s.x0, cfg.seed);
}

void cmd_synth(const ExperimentConfig& cfg) {
  if (!cfg.synthetic) throw ConfigError("synth needs a synthetic data source");
  const PathBatch data = load_data(cfg);
  ensure_out_dir(cfg.out);
  write_path_csv(cfg.out / kDataFile, data);
  write_index_file(cfg.out / kTruthFile, cfg.synthetic->spec.change_points);
}

void cmd_train(const ExperimentConfig& cfg, bool resume) {
  const PathBatch data = load_data(cfg);
  const TrainConfig tc = effective_train(cfg);
  tc.validate(data.n_steps(), data.channels());
  ensure_out_dir(cfg.out);
  const fs::path checkpoint = cfg.out / kCheckpointFile;

  std::optional<TrainState> previous;
  if (resume && fs::exists(checkpoint)) {
    previous = TrainState::from_json(read_json_file(checkpoint));
    if (to_json(previous->config) != to_json(tc))
      throw ConfigError("checkpoint was written with a different train config; rerun without --resume");
  }

  FitHooks hooks;
  hooks.on_round = [&](const TrainState& s) {
    write_json_file(checkpoint, s.to_json());
    write_log(cfg.out / kLogFile, s.history);
    const RoundRecord& r = s.history.rounds.back();
    std::cerr << "round " << r.round << " change points " << json(r.change_points).dump() << '\n';
  };
  const TrainState state = fit(data, tc, hooks, std::move(previous));
  write_json_file(checkpoint, state.to_json());
  write_log(cfg.out / kLogFile, state.history);
  write_history(cfg.out / kHistoryFile, state.history);
  const fs::path cp_file = cfg.out / kChangePointFile;
  if (tc.n_change_points > 0) {
    write_index_file(cp_file, state.model.generator.change_points.indices);
  } else {
    std::error_code ec;
    fs::remove(cp_file, ec);
  }
}

void cmd_detect(const ExperimentConfig& cfg) {
  TrainState state = load_state(cfg);
  const PathBatch data = load_data(cfg);
  const Detections d = run_detectors(state, data);
  write_scores_csv(cfg.out / "scores_cpsdegan.csv", d.cpsdegan);
  write_scores_csv(cfg.out / "scores_mean.csv", d.mean);
  write_scores_csv(cfg.out / "scores_mmd.csv", d.mmd);
  json doc = {{"window", d.window},
              {"detectors", {{"cpsdegan", d.nu_cpsdegan}, {"mean", d.nu_mean}, {"mmd", d.nu_mmd}}}};
  if (auto truth = truth_of(cfg)) doc["truth"] = *truth;
  write_json_file(cfg.out / "detect.json", doc);
}

void cmd_eval(const ExperimentConfig& cfg) {
  TrainState state = load_state(cfg);
  const PathBatch data = load_data(cfg);
  const std::size_t n = cfg.metrics.n_samples ? cfg.metrics.n_samples : data.size();

  std::map<std::string, std::vector<double>> values;
  const fs::path rows_file = cfg.out / "metrics.csv";
  std::ofstream rows = open_out(rows_file);
  rows << "metric,seed,value\n";
  auto record = [&](const std::string& metric, std::size_t seed, double v) {
    values[metric].push_back(v);
    rows << metric << ',' << seed << ',' << format_double(v) << '\n';
  };
  for (std::size_t s = 0; s < cfg.metrics.seeds; ++s) {
    const std::uint64_t seed = derive_seed(cfg.seed, {0xE7A1, s});
    const PathBatch synth = state.model.sample(n, derive_seed(seed, {0}));
    record("mmd", s, mmd_metric(data, synth));
    record("tstr", s, tstr_prediction(synth, data, cfg.metrics.training, derive_seed(seed, {1})));
    record("classification", s, classification_score(data, synth, cfg.metrics.training, derive_seed(seed, {2})));
  }
  finish(rows, rows_file);

  const fs::path summary_file = cfg.out / "metrics_summary.csv";
  std::ofstream summary = open_out(summary_file);
  summary << "metric,mean,std\n";
  for (const char* metric : {"mmd", "tstr", "classification"}) {
    const std::vector<double>& v = values[metric];
    summary << metric << ',' << format_double(mean_of(v)) << ',' << format_double(sample_std(v)) << '\n';
  }
  finish(summary, summary_file);
}

void cmd_report(const ExperimentConfig& cfg) {
  TrainState state = load_state(cfg);
  const PathBatch data = load_data(cfg);
  const std::size_t shown = std::min(kReportPaths, data.size());
  std::vector<std::size_t> first(shown);
  for (std::size_t i = 0; i < shown; ++i) first[i] = i;
  write_path_csv(cfg.out / "report_real_paths.csv", data.select(first));
  write_path_csv(cfg.out / "report_generated_paths.csv", state.model.sample(shown, derive_seed(cfg.seed, {0x5E9})));

  const Detections d = run_detectors(state, data);
  const fs::path curves_file = cfg.out / "report_scores.csv";
  std::ofstream curves = open_out(curves_file);
  curves << "t_index,cpsdegan,mean,mmd\n";
  for (std::size_t t = 0; t < d.cpsdegan.scores.size(); ++t)
    curves << t << ',' << format_double(d.cpsdegan.scores[t]) << ',' << format_double(d.mean.scores[t]) << ','
           << format_double(d.mmd.scores[t]) << '\n';
  finish(curves, curves_file);

  const fs::path markers_file = cfg.out / "report_markers.csv";
  std::ofstream markers = open_out(markers_file);
  markers << "source,index\n";
  auto emit = [&](const char* source, const std::vector<std::size_t>& idx) {
    for (std::size_t i : idx) markers << source << ',' << i << '\n';
  };
  if (auto truth = truth_of(cfg)) emit("truth", *truth);
  emit("trained", state.model.generator.change_points.indices);
  emit("cpsdegan", d.nu_cpsdegan);
  emit("mean", d.nu_mean);
  emit("mmd", d.nu_mmd);
  finish(markers, markers_file);
}

int exit_code_for_current_exception() {
  try {
    throw;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const WindowError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DimensionError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const SpecError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const Error& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitNumerical;
  }
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Change point detection with segment-wise neural SDE GANs"};
  app.require_subcommand(1);
  app.footer("Default config (JSON; every key optional):\n" + to_json(default_experiment()).dump(2));

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  bool resume = false;
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--seed", seed, "Master seed; overrides the config");
  app.add_option("--out", out_dir, "Output directory; overrides the config");

  CLI::App* synth = app.add_subcommand("synth", "Simulate OU paths and write data.csv + truth.txt");
  CLI::App* train = app.add_subcommand("train", "Fit the model; writes checkpoint.json, history.csv, train_log.jsonl");
  train->add_flag("--resume", resume, "Continue from checkpoint.json in the output directory");
  CLI::App* detect = app.add_subcommand("detect", "Score sequences and change points for all detectors");
  CLI::App* eval = app.add_subcommand("eval", "MMD, TSTR and classification metrics over seeds");
  CLI::App* report = app.add_subcommand("report", "Plot-ready CSVs: sample paths, score curves, markers");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    ExperimentConfig cfg = default_experiment();
    if (!config_path.empty()) {
      const fs::path file = config_path;
      cfg = experiment_from_json(read_json_file(file), file.parent_path());
    }
    if (seed) cfg.seed = *seed;
    cfg.train.seed = cfg.seed;
    if (!out_dir.empty()) cfg.out = out_dir;
    cfg.validate();

    if (*synth) cmd_synth(cfg);
    if (*train) cmd_train(cfg, resume);
    if (*detect) cmd_detect(cfg);
    if (*eval) cmd_eval(cfg);
    if (*report) cmd_report(cfg);
    return kExitOk;
  } catch (...) {
    return exit_code_for_current_exception();
  }
}

}  // namespace cpsde
