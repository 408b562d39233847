#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cpsde/discriminator.hpp"
#include "cpsde/generator.hpp"

namespace cpsde {

struct TrainConfig {
  std::size_t window = 8;
  double lr_g = 1e-3;
  double lr_d = 1e-3;
  double clip = 0.1;
  std::size_t d_steps_per_g = 5;
  std::size_t batch_size = 64;
  std::size_t rounds = 20;
  std::size_t steps_per_round = 20;
  std::uint64_t seed = 0;
  std::size_t n_change_points = 1;
  std::size_t min_segment = 8;
  /// Stop once the change points stay unchanged this many consecutive rounds; 0 disables.
  std::size_t patience = 3;
  GeneratorDims generator;
  DiscriminatorDims discriminator;

  /// Throws ConfigError naming the violated invariant.
  void validate(std::size_t n_steps, std::size_t channels) const;
};

nlohmann::json to_json(const TrainConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
TrainConfig train_config_from_json(const nlohmann::json& doc);

struct StepRecord {
  std::size_t round = 0;
  std::size_t step = 0;
  double loss_g = 0.0;  // E[D(fake)]
  double loss_d = 0.0;  // E[D(fake)] - E[D(real)]
};

struct RoundRecord {
  std::size_t round = 0;
  std::vector<std::size_t> proposed;
  std::vector<std::size_t> change_points;  // estimate in force after the round
  bool accepted = true;
};

struct TrainHistory {
  std::vector<StepRecord> steps;
  std::vector<RoundRecord> rounds;
  std::vector<std::string> events;
};

/// Generator, critic and the normalization the pair was trained under.
struct CpSdeGan {
  TimeGrid grid;
  std::vector<double> data_mean;
  std::vector<double> data_std;
  ParamStore gen_store;
  SegmentedGenerator generator;
  ParamStore disc_store;
  DiscriminatorParams discriminator;

  static CpSdeGan create(const TimeGrid& grid, std::vector<double> mean, std::vector<double> std,
                         const TrainConfig& cfg, ChangePointEstimate change_points);

  /// n generated paths in data units.
  PathBatch sample(std::size_t n, std::uint64_t seed);
  PathBatch to_model_units(const PathBatch& data) const;

  nlohmann::json to_json() const;
  static CpSdeGan from_json(const nlohmann::json& doc);
};

/// Everything needed to continue training after a round boundary.
struct TrainState {
  CpSdeGan model;
  TrainConfig config;
  TrainHistory history;
  std::size_t next_round = 0;
  std::size_t stable_rounds = 0;
  bool finished = false;

  nlohmann::json to_json() const;
  static TrainState from_json(const nlohmann::json& doc);
};

struct FitHooks {
  std::function<void(const StepRecord&)> on_step;
  std::function<void(const TrainState&)> on_round;
};

struct WganLosses {
  double loss_g = 0.0;
  double loss_d = 0.0;
};

/// Every discriminator parameter clamped to [-c, c].
void clip_weights(ParamStore& disc_store, double c);

/// d_steps_per_g critic ascents on E[D(fake)] - E[D(real)] (clipping after each),
/// then one generator descent on E[D(fake)]. `real` is in model units.
WganLosses wgan_step(CpSdeGan& model, const PathBatch& real, const TrainConfig& cfg, std::uint64_t step_seed);

/// Evenly spaced initial change points k*n_steps/(count+1), k = 1..count.
ChangePointEstimate initial_change_points(std::size_t n_steps, std::size_t count);

/// Real sub-paths per segment: segment j holds steps [cp_{j-1}, cp_j), the last one runs to the end.
std::vector<PathBatch> partition_segments(const PathBatch& data, const ChangePointEstimate& cps);

/// Every segment spans at least `min_segment` steps.
bool segments_long_enough(const std::vector<std::size_t>& cps, std::size_t n_steps, std::size_t min_segment);

/// Alternates WGAN training with fixed change points and change point updates
/// from the critic's window scores. Resumes from `resume` when given.
TrainState fit(const PathBatch& data, const TrainConfig& cfg, const FitHooks& hooks = {},
               std::optional<TrainState> resume = std::nullopt);

}  // namespace cpsde
