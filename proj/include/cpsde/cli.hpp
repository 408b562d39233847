#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cpsde/metrics.hpp"
#include "cpsde/sde.hpp"
#include "cpsde/training.hpp"

namespace cpsde {

enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitIo = 2, kExitNumerical = 3 };

struct SyntheticSource {
  OuSpec spec;
  std::size_t n_paths = 256;
  std::size_t n_steps = 64;
  double t0 = 0.0;
  double dt = 1.0;
  double x0 = 0.0;
};

struct MetricSettings {
  std::size_t seeds = 3;
  /// Generated paths per seed; 0 uses the data size.
  std::size_t n_samples = 0;
  MetricTraining training;
};

/// Exactly one of `synthetic` / `csv` is set. `seed` overrides train.seed.
struct ExperimentConfig {
  std::optional<SyntheticSource> synthetic;
  std::optional<std::filesystem::path> csv;
  TrainConfig train;
  MetricSettings metrics;
  std::filesystem::path out = "out";
  std::uint64_t seed = 0;

  void validate() const;
};

/// One change at step 32 on a 64-step grid, 256 paths.
ExperimentConfig default_experiment();

nlohmann::json to_json(const ExperimentConfig& cfg);
/// Missing keys keep their defaults; unknown keys throw ConfigError.
/// A relative csv path is resolved against `base_dir`.
ExperimentConfig experiment_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});

/// Data named by the config: the CSV file, or the synthetic spec simulated with `seed`.
PathBatch load_data(const ExperimentConfig& cfg);

// Each command writes into cfg.out and throws cpsde::Error subclasses on failure.
void cmd_synth(const ExperimentConfig& cfg);
void cmd_train(const ExperimentConfig& cfg, bool resume);
void cmd_detect(const ExperimentConfig& cfg);
void cmd_eval(const ExperimentConfig& cfg);
void cmd_report(const ExperimentConfig& cfg);

/// Maps an in-flight exception to an exit code and prints it to stderr.
int exit_code_for_current_exception();

/// Entry point for the `cpsde` executable.
int run_cli(int argc, char** argv);

}  // namespace cpsde
