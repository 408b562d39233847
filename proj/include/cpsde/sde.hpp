#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "cpsde/paths.hpp"
#include "cpsde/rng.hpp"
#include "cpsde/tape.hpp"

namespace cpsde {

struct BrownianPath {
  TimeGrid grid;
  Tensor increments;  // (n_steps - 1, w_dim), each row ~ N(0, dt I)
};

/// Increments for a batch: (N, n_steps - 1, w_dim).
struct BrownianBatch {
  TimeGrid grid;
  Tensor increments;

  std::size_t size() const { return increments.dim(0); }
  std::size_t w_dim() const { return increments.dim(2); }
  /// Increments of transition k -> k+1 for every path: (N, w_dim).
  Tensor step(std::size_t k) const;
};

BrownianPath sample_brownian(const TimeGrid& grid, std::size_t w_dim, Rng& rng);
/// Path i draws from its own stream derived from (seed, i).
BrownianBatch sample_brownian_batch(const TimeGrid& grid, std::size_t w_dim, std::size_t n, std::uint64_t seed);

/// f(t, x) -> (B, x_dim) for the drift; (B, x_dim * w_dim) row-major for the diffusion.
using VectorField = std::function<Var(double t, Var x)>;

/// Stratonovich Heun predictor-corrector step driven by the increment `dw` (B, w_dim):
///   x~ = x + f(t,x) dt + g(t,x) dw
///   x' = x + (f(t,x) + f(t+dt,x~)) dt/2 + (g(t,x) + g(t+dt,x~)) dw/2
/// Throws SimulationDiverged carrying `step` if x' is not finite.
Var heun_step(const VectorField& drift, const VectorField& diffusion, double t, Var x, double dt, Var dw,
              std::size_t step = 0);

struct OuSegment {
  double mu = 0.0;     // slope of the time-linear drift term
  double theta = 0.0;  // mean-reversion rate
  double sigma = 0.0;  // noise scale
};

/// Piecewise coefficients for dX = (mu t - theta X) dt + sigma o dW.
/// Segment j governs transitions k -> k+1 with change_points[j-1] <= k < change_points[j].
struct OuSpec {
  std::vector<std::size_t> change_points;
  std::vector<OuSegment> segments;

  void validate(const TimeGrid& grid) const;
  const OuSegment& segment_at(std::size_t step) const;
};

PathBatch simulate_ou(const OuSpec& spec, const TimeGrid& grid, std::size_t n, double x0, std::uint64_t seed);

struct Standardized {
  PathBatch batch;
  std::vector<double> mean;  // per channel
  std::vector<double> std;   // per channel, population
};

/// Per-channel standardization over all paths and steps.
Standardized normalize(const PathBatch& batch);
PathBatch apply_normalization(const PathBatch& batch, const std::vector<double>& mean, const std::vector<double>& std);
PathBatch denormalize(const PathBatch& batch, const std::vector<double>& mean, const std::vector<double>& std);

}  // namespace cpsde
