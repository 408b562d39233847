#include "cpsde/sde.hpp"

#include <cmath>

#include "cpsde/errors.hpp"

namespace cpsde {

Tensor BrownianBatch::step(std::size_t k) const {
  const std::size_t n = size();
  const std::size_t w = w_dim();
  const std::size_t transitions = increments.dim(1);
  Tensor out({n, w});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < w; ++j) out.at(i, j) = increments[(i * transitions + k) * w + j];
  return out;
}

BrownianPath sample_brownian(const TimeGrid& grid, std::size_t w_dim, Rng& rng) {
  if (w_dim < 1) throw ContractError("brownian motion needs w_dim >= 1");
  std::normal_distribution<double> normal(0.0, std::sqrt(grid.dt));
  Tensor inc({grid.n_steps - 1, w_dim});
  for (auto& v : inc.mutable_data()) v = normal(rng);
  return BrownianPath{grid, std::move(inc)};
}

BrownianBatch sample_brownian_batch(const TimeGrid& grid, std::size_t w_dim, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw ContractError("brownian batch needs at least one path");
  const std::size_t per_path = (grid.n_steps - 1) * w_dim;
  std::vector<double> data;
  data.reserve(n * per_path);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = make_rng(seed, {i});
    BrownianPath p = sample_brownian(grid, w_dim, rng);
    data.insert(data.end(), p.increments.data().begin(), p.increments.data().end());
  }
  return BrownianBatch{grid, Tensor({n, grid.n_steps - 1, w_dim}, std::move(data))};
}

Var heun_step(const VectorField& drift, const VectorField& diffusion, double t, Var x, double dt, Var dw,
              std::size_t step) {
  const std::size_t x_dim = x.cols();
  const Var f0 = drift(t, x);
  const Var g0dw = batched_matvec(diffusion(t, x), dw, x_dim);
  const Var predictor = x + dt * f0 + g0dw;
  const Var f1 = drift(t + dt, predictor);
  const Var g1dw = batched_matvec(diffusion(t + dt, predictor), dw, x_dim);
  const Var next = x + (0.5 * dt) * (f0 + f1) + 0.5 * (g0dw + g1dw);
  if (!next.value().all_finite()) throw SimulationDiverged("non-finite state in Heun step", step);
  return next;
}

void OuSpec::validate(const TimeGrid& grid) const {
  if (segments.size() != change_points.size() + 1)
    throw SpecError("OU spec needs exactly one more segment than change points");
  std::size_t prev = 0;
  for (std::size_t cp : change_points) {
    if (cp <= prev || cp >= grid.n_steps)
      throw SpecError("change point " + std::to_string(cp) + " outside (0, " + std::to_string(grid.n_steps) +
                      ") or not strictly increasing");
    prev = cp;
  }
  for (const OuSegment& s : segments) {
    if (!(s.sigma >= 0.0)) throw SpecError("OU segment has negative sigma");
    if (!std::isfinite(s.mu) || !std::isfinite(s.theta) || !std::isfinite(s.sigma))
      throw SpecError("OU segment has non-finite coefficients");
  }
}

const OuSegment& OuSpec::segment_at(std::size_t step) const {
  std::size_t j = 0;
  while (j < change_points.size() && step >= change_points[j]) ++j;
  return segments[j];
}

PathBatch simulate_ou(const OuSpec& spec, const TimeGrid& grid, std::size_t n, double x0, std::uint64_t seed) {
  spec.validate(grid);
  if (n < 1) throw ContractError("simulate_ou needs n >= 1");
  const BrownianBatch noise = sample_brownian_batch(grid, 1, n, seed);

  Tensor values({n, grid.n_steps, 1});
  Tensor state({n, 1}, x0);
  for (std::size_t i = 0; i < n; ++i) values[i * grid.n_steps] = x0;

  for (std::size_t k = 0; k + 1 < grid.n_steps; ++k) {
    const OuSegment& seg = spec.segment_at(k);
    Tape tape;
    const Var sigma = tape.constant(Tensor({n, 1}, seg.sigma));
    const VectorField drift = [&](double t, Var x) { return (-seg.theta) * x + seg.mu * t; };
    const VectorField diffusion = [&](double, Var) { return sigma; };
    const Var next = heun_step(drift, diffusion, grid.time(k), tape.constant(state), grid.dt,
                               tape.constant(noise.step(k)), k);
    state = next.value();
    for (std::size_t i = 0; i < n; ++i) values[i * grid.n_steps + k + 1] = state[i];
  }
  return PathBatch(grid, std::move(values));
}

Standardized normalize(const PathBatch& batch) {
  const std::size_t ch = batch.channels();
  const double count = static_cast<double>(batch.size() * batch.n_steps());
  std::vector<double> mean(ch, 0.0), sd(ch, 0.0);
  for (std::size_t i = 0; i < batch.size(); ++i)
    for (std::size_t k = 0; k < batch.n_steps(); ++k)
      for (std::size_t c = 0; c < ch; ++c) mean[c] += batch.at(i, k, c);
  for (double& m : mean) m /= count;
  for (std::size_t i = 0; i < batch.size(); ++i)
    for (std::size_t k = 0; k < batch.n_steps(); ++k)
      for (std::size_t c = 0; c < ch; ++c) {
        const double d = batch.at(i, k, c) - mean[c];
        sd[c] += d * d;
      }
  for (std::size_t c = 0; c < ch; ++c) {
    sd[c] = std::sqrt(sd[c] / count);
    if (!(sd[c] > 0.0) || !std::isfinite(sd[c]))
      throw NormalizationError("channel " + std::to_string(c) + " has zero or non-finite variance");
  }
  return Standardized{apply_normalization(batch, mean, sd), mean, sd};
}

PathBatch apply_normalization(const PathBatch& batch, const std::vector<double>& mean, const std::vector<double>& sd) {
  if (mean.size() != batch.channels() || sd.size() != batch.channels())
    throw DimensionError("normalization statistics do not match channel count");
  PathBatch out = batch;
  for (std::size_t i = 0; i < out.size(); ++i)
    for (std::size_t k = 0; k < out.n_steps(); ++k)
      for (std::size_t c = 0; c < out.channels(); ++c) out.at(i, k, c) = (out.at(i, k, c) - mean[c]) / sd[c];
  return out;
}

PathBatch denormalize(const PathBatch& batch, const std::vector<double>& mean, const std::vector<double>& sd) {
  if (mean.size() != batch.channels() || sd.size() != batch.channels())
    throw DimensionError("normalization statistics do not match channel count");
  PathBatch out = batch;
  for (std::size_t i = 0; i < out.size(); ++i)
    for (std::size_t k = 0; k < out.n_steps(); ++k)
      for (std::size_t c = 0; c < out.channels(); ++c) out.at(i, k, c) = out.at(i, k, c) * sd[c] + mean[c];
  return out;
}

}  // namespace cpsde
