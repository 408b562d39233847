#include "cpsde/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cpsde/adam.hpp"
#include "cpsde/checkpoint.hpp"
#include "cpsde/errors.hpp"

namespace cpsde {
namespace {

constexpr int kModelFormatVersion = 1;

std::vector<std::size_t> sample_indices(Rng& rng, std::size_t population, std::size_t count) {
  std::vector<std::size_t> idx(population);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  count = std::min(count, population);
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, population - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(count);
  return idx;
}

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw TrainingError(std::string("non-finite ") + what);
}

nlohmann::json dims_json(const GeneratorDims& d) {
  return {{"v", d.v}, {"x", d.x}, {"w", d.w}, {"y", d.y}, {"hidden", d.hidden}, {"depth", d.depth}};
}

nlohmann::json dims_json(const DiscriminatorDims& d) {
  return {{"y", d.y}, {"h", d.h}, {"hidden", d.hidden}, {"depth", d.depth}};
}

template <typename T>
void read_field(const nlohmann::json& doc, const char* key, T& out) {
  if (auto it = doc.find(key); it != doc.end()) out = it->get<T>();
}

void reject_unknown(const nlohmann::json& doc, std::initializer_list<const char*> known, const std::string& where) {
  for (const auto& [key, value] : doc.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; }))
      throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

GeneratorDims generator_dims_from(const nlohmann::json& doc) {
  GeneratorDims d;
  reject_unknown(doc, {"v", "x", "w", "y", "hidden", "depth"}, "generator");
  read_field(doc, "v", d.v);
  read_field(doc, "x", d.x);
  read_field(doc, "w", d.w);
  read_field(doc, "y", d.y);
  read_field(doc, "hidden", d.hidden);
  read_field(doc, "depth", d.depth);
  return d;
}

DiscriminatorDims discriminator_dims_from(const nlohmann::json& doc) {
  DiscriminatorDims d;
  reject_unknown(doc, {"y", "h", "hidden", "depth"}, "discriminator");
  read_field(doc, "y", d.y);
  read_field(doc, "h", d.h);
  read_field(doc, "hidden", d.hidden);
  read_field(doc, "depth", d.depth);
  return d;
}

}  // namespace

void TrainConfig::validate(std::size_t n_steps, std::size_t channels) const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string(name) + " must be positive");
  };
  positive(window, "window");
  positive(d_steps_per_g, "d_steps_per_g");
  positive(batch_size, "batch_size");
  positive(rounds, "rounds");
  positive(steps_per_round, "steps_per_round");
  positive(min_segment, "min_segment");
  positive(generator.v, "generator.v");
  positive(generator.x, "generator.x");
  positive(generator.w, "generator.w");
  positive(generator.hidden, "generator.hidden");
  positive(discriminator.h, "discriminator.h");
  positive(discriminator.hidden, "discriminator.hidden");
  if (!(lr_g > 0.0) || !(lr_d > 0.0)) throw ConfigError("learning rates must be positive");
  if (!(clip > 0.0)) throw ConfigError("clip must be positive");
  if (window < 2) throw ConfigError("window must be at least 2");
  if (min_segment < window) throw ConfigError("min_segment must be >= window");
  if (window > n_steps) throw ConfigError("window exceeds the number of steps");
  if (n_steps < min_segment * (n_change_points + 1))
    throw ConfigError("data has " + std::to_string(n_steps) + " steps, fewer than min_segment * (n_change_points + 1)");
  if (generator.y != channels || discriminator.y != channels)
    throw ConfigError("generator.y and discriminator.y must equal the data channel count " + std::to_string(channels));
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"window", c.window},
          {"lr_g", c.lr_g},
          {"lr_d", c.lr_d},
          {"clip", c.clip},
          {"d_steps_per_g", c.d_steps_per_g},
          {"batch_size", c.batch_size},
          {"rounds", c.rounds},
          {"steps_per_round", c.steps_per_round},
          {"seed", c.seed},
          {"n_change_points", c.n_change_points},
          {"min_segment", c.min_segment},
          {"patience", c.patience},
          {"generator", dims_json(c.generator)},
          {"discriminator", dims_json(c.discriminator)}};
}

TrainConfig train_config_from_json(const nlohmann::json& doc) {
  TrainConfig c;
  try {
    reject_unknown(doc,
                   {"window", "lr_g", "lr_d", "clip", "d_steps_per_g", "batch_size", "rounds", "steps_per_round",
                    "seed", "n_change_points", "min_segment", "patience", "generator", "discriminator"},
                   "train");
    read_field(doc, "window", c.window);
    read_field(doc, "lr_g", c.lr_g);
    read_field(doc, "lr_d", c.lr_d);
    read_field(doc, "clip", c.clip);
    read_field(doc, "d_steps_per_g", c.d_steps_per_g);
    read_field(doc, "batch_size", c.batch_size);
    read_field(doc, "rounds", c.rounds);
    read_field(doc, "steps_per_round", c.steps_per_round);
    read_field(doc, "seed", c.seed);
    read_field(doc, "n_change_points", c.n_change_points);
    read_field(doc, "min_segment", c.min_segment);
    read_field(doc, "patience", c.patience);
    if (doc.contains("generator")) c.generator = generator_dims_from(doc.at("generator"));
    if (doc.contains("discriminator")) c.discriminator = discriminator_dims_from(doc.at("discriminator"));
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("bad train config: ") + ex.what());
  }
  return c;
}

CpSdeGan CpSdeGan::create(const TimeGrid& grid, std::vector<double> mean, std::vector<double> sd,
                          const TrainConfig& cfg, ChangePointEstimate change_points) {
  CpSdeGan m;
  m.grid = grid;
  m.data_mean = std::move(mean);
  m.data_std = std::move(sd);
  Rng gen_rng = make_rng(cfg.seed, {0xC0FFEE, 0});
  Rng disc_rng = make_rng(cfg.seed, {0xC0FFEE, 1});
  m.generator = SegmentedGenerator::create(m.gen_store, cfg.generator, std::move(change_points), gen_rng);
  m.discriminator = DiscriminatorParams::create(m.disc_store, cfg.discriminator, disc_rng);
  return m;
}

PathBatch CpSdeGan::sample(std::size_t n, std::uint64_t seed) {
  return denormalize(sample_generator(generator, gen_store, grid, n, seed), data_mean, data_std);
}

PathBatch CpSdeGan::to_model_units(const PathBatch& data) const {
  return apply_normalization(data, data_mean, data_std);
}

nlohmann::json CpSdeGan::to_json() const {
  return {{"format_version", kModelFormatVersion},
          {"grid", {{"t0", grid.t0}, {"dt", grid.dt}, {"n_steps", grid.n_steps}}},
          {"normalization", {{"mean", data_mean}, {"std", data_std}}},
          {"generator_dims", dims_json(generator.dims())},
          {"discriminator_dims", dims_json(discriminator.dims)},
          {"change_points", {{"indices", generator.change_points.indices}, {"spacing", generator.change_points.spacing}}},
          {"generator", store_to_json(gen_store)},
          {"discriminator", store_to_json(disc_store)}};
}

CpSdeGan CpSdeGan::from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("format_version").get<int>() != kModelFormatVersion) throw IoError("unsupported model format_version");
    CpSdeGan m;
    const auto& g = doc.at("grid");
    m.grid = TimeGrid(g.at("t0").get<double>(), g.at("dt").get<double>(), g.at("n_steps").get<std::size_t>());
    m.data_mean = doc.at("normalization").at("mean").get<std::vector<double>>();
    m.data_std = doc.at("normalization").at("std").get<std::vector<double>>();
    ChangePointEstimate cps;
    cps.indices = doc.at("change_points").at("indices").get<std::vector<std::size_t>>();
    cps.spacing = doc.at("change_points").at("spacing").get<std::size_t>();
    m.gen_store = store_from_json(doc.at("generator"));
    m.disc_store = store_from_json(doc.at("discriminator"));
    m.generator = SegmentedGenerator::bind(m.gen_store, generator_dims_from(doc.at("generator_dims")), std::move(cps));
    m.discriminator = DiscriminatorParams::bind(m.disc_store, discriminator_dims_from(doc.at("discriminator_dims")));
    m.generator.validate(m.grid.n_steps);
    return m;
  } catch (const nlohmann::json::exception& ex) {
    throw IoError(std::string("malformed model checkpoint: ") + ex.what());
  } catch (const ContractError& ex) {
    throw IoError(std::string("inconsistent model checkpoint: ") + ex.what());
  } catch (const DimensionError& ex) {
    throw IoError(std::string("inconsistent model checkpoint: ") + ex.what());
  }
}

nlohmann::json TrainState::to_json() const {
  nlohmann::json steps = nlohmann::json::array();
  for (const StepRecord& s : history.steps)
    steps.push_back({{"round", s.round}, {"step", s.step}, {"loss_g", s.loss_g}, {"loss_d", s.loss_d}});
  nlohmann::json rounds = nlohmann::json::array();
  for (const RoundRecord& r : history.rounds)
    rounds.push_back({{"round", r.round},
                      {"proposed", r.proposed},
                      {"change_points", r.change_points},
                      {"accepted", r.accepted}});
  return {{"model", model.to_json()},
          {"config", cpsde::to_json(config)},
          {"history", {{"steps", steps}, {"rounds", rounds}, {"events", history.events}}},
          {"next_round", next_round},
          {"stable_rounds", stable_rounds},
          {"finished", finished}};
}

TrainState TrainState::from_json(const nlohmann::json& doc) {
  try {
    TrainState s;
    s.model = CpSdeGan::from_json(doc.at("model"));
    s.config = train_config_from_json(doc.at("config"));
    for (const auto& r : doc.at("history").at("steps"))
      s.history.steps.push_back(StepRecord{r.at("round").get<std::size_t>(), r.at("step").get<std::size_t>(),
                                           r.at("loss_g").get<double>(), r.at("loss_d").get<double>()});
    for (const auto& r : doc.at("history").at("rounds"))
      s.history.rounds.push_back(RoundRecord{r.at("round").get<std::size_t>(),
                                             r.at("proposed").get<std::vector<std::size_t>>(),
                                             r.at("change_points").get<std::vector<std::size_t>>(),
                                             r.at("accepted").get<bool>()});
    s.history.events = doc.at("history").at("events").get<std::vector<std::string>>();
    s.next_round = doc.at("next_round").get<std::size_t>();
    s.stable_rounds = doc.at("stable_rounds").get<std::size_t>();
    s.finished = doc.at("finished").get<bool>();
    return s;
  } catch (const nlohmann::json::exception& ex) {
    throw IoError(std::string("malformed training checkpoint: ") + ex.what());
  }
}

void clip_weights(ParamStore& disc_store, double c) {
  if (!(c > 0.0)) throw ContractError("clip constant must be positive");
  for (auto& [name, e] : disc_store)
    for (auto& v : e.value.mutable_data()) v = std::clamp(v, -c, c);
}

WganLosses wgan_step(CpSdeGan& model, const PathBatch& real, const TrainConfig& cfg, std::uint64_t step_seed) {
  Rng rng = make_rng(step_seed, {0});
  const std::size_t batch = std::min(cfg.batch_size, real.size());
  WganLosses losses;

  for (std::size_t d = 0; d < cfg.d_steps_per_g; ++d) {
    const PathBatch real_batch = real.select(sample_indices(rng, real.size(), batch));
    const PathBatch fake_batch =
        sample_generator(model.generator, model.gen_store, model.grid, batch, derive_seed(step_seed, {1, d}));
    Tape tape;
    const Var d_real = mean(score_paths(model.discriminator, model.disc_store, batch_steps(tape, real_batch)));
    const Var d_fake = mean(score_paths(model.discriminator, model.disc_store, batch_steps(tape, fake_batch)));
    const Var objective = d_fake - d_real;
    losses.loss_d = objective.value().item();
    require_finite(losses.loss_d, "discriminator loss");
    tape.backward(-objective);
    adam_step(model.disc_store, cfg.lr_d);
    clip_weights(model.disc_store, cfg.clip);
  }

  const GeneratorDims& dims = model.generator.dims();
  const std::uint64_t gen_seed = derive_seed(step_seed, {2});
  Tape tape;
  const Var v = tape.constant(sample_initial_noise(batch, dims.v, derive_seed(gen_seed, {0})));
  const BrownianBatch w = sample_brownian_batch(model.grid, dims.w, batch, derive_seed(gen_seed, {1}));
  const GeneratorRun run = generate_full(model.generator, model.gen_store, model.grid, v, w);
  const Var d_fake = mean(score_paths(model.discriminator, model.disc_store, run.outputs));
  losses.loss_g = d_fake.value().item();
  require_finite(losses.loss_g, "generator loss");
  tape.backward(d_fake);
  model.disc_store.zero_grad();
  adam_step(model.gen_store, cfg.lr_g);
  return losses;
}

ChangePointEstimate initial_change_points(std::size_t n_steps, std::size_t count) {
  ChangePointEstimate cps;
  for (std::size_t k = 1; k <= count; ++k) cps.indices.push_back(k * n_steps / (count + 1));
  return cps;
}

std::vector<PathBatch> partition_segments(const PathBatch& data, const ChangePointEstimate& cps) {
  std::vector<PathBatch> parts;
  std::size_t start = 0;
  for (std::size_t j = 0; j <= cps.count(); ++j) {
    const std::size_t end = j < cps.count() ? cps.indices[j] : data.n_steps();
    if (end <= start) throw ContractError("change points must be strictly increasing");
    parts.push_back(data.steps(start, end - start));
    start = end;
  }
  return parts;
}

bool segments_long_enough(const std::vector<std::size_t>& cps, std::size_t n_steps, std::size_t min_segment) {
  std::size_t start = 0;
  for (std::size_t j = 0; j <= cps.size(); ++j) {
    const std::size_t end = j < cps.size() ? cps[j] : n_steps;
    if (end < start + min_segment) return false;
    start = end;
  }
  return true;
}

TrainState fit(const PathBatch& data, const TrainConfig& cfg, const FitHooks& hooks, std::optional<TrainState> resume) {
  cfg.validate(data.n_steps(), data.channels());
  const std::size_t k = cfg.n_change_points;

  TrainState state;
  if (resume) {
    state = std::move(*resume);
    if (!(state.model.grid == data.grid())) throw ConfigError("checkpoint grid differs from the data grid");
  } else {
    const Standardized norm = normalize(data);
    state.model = CpSdeGan::create(data.grid(), norm.mean, norm.std, cfg, initial_change_points(data.n_steps(), k));
  }
  state.config = cfg;
  const PathBatch real = state.model.to_model_units(data);

  for (std::size_t round = state.next_round; round < cfg.rounds && !state.finished; ++round) {
    for (std::size_t s = 0; s < cfg.steps_per_round; ++s) {
      const WganLosses l = wgan_step(state.model, real, cfg, derive_seed(cfg.seed, {round, s}));
      state.history.steps.push_back(StepRecord{round, s, l.loss_g, l.loss_d});
      if (hooks.on_step) hooks.on_step(state.history.steps.back());
    }

    RoundRecord rec;
    rec.round = round;
    ChangePointEstimate& current = state.model.generator.change_points;
    if (k > 0) {
      const ScoreSequence scores = window_scores(state.model.discriminator, state.model.disc_store, real, cfg.window);
      const ChangePointEstimate proposal =
          k == 1 ? ChangePointEstimate{{detect_offline(scores)}, cfg.window, true} : detect_multi(scores, cfg.window, k);
      rec.proposed = proposal.indices;
      rec.accepted = proposal.complete && segments_long_enough(proposal.indices, data.n_steps(), cfg.min_segment);
      if (!rec.accepted) {
        state.history.events.push_back("round " + std::to_string(round) + ": rejected change point proposal " +
                                       nlohmann::json(proposal.indices).dump() + " (segment shorter than min_segment" +
                                       (proposal.complete ? ")" : " or too few candidates)"));
        ++state.stable_rounds;
      } else if (proposal.indices == current.indices) {
        ++state.stable_rounds;
      } else {
        current = proposal;
        state.stable_rounds = 0;
      }
    }
    rec.change_points = current.indices;
    state.history.rounds.push_back(rec);
    state.next_round = round + 1;
    if (state.next_round >= cfg.rounds || (k > 0 && cfg.patience > 0 && state.stable_rounds >= cfg.patience))
      state.finished = true;
    if (hooks.on_round) hooks.on_round(state);
  }
  state.finished = true;
  return state;
}

}  // namespace cpsde
