#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cpsde/changepoint.hpp"
#include "cpsde/mlp.hpp"
#include "cpsde/sde.hpp"

namespace cpsde {

struct GeneratorDims {
  std::size_t v = 4;  // initial noise
  std::size_t x = 8;  // hidden SDE state
  std::size_t w = 4;  // Brownian motion
  std::size_t y = 1;  // observed channels
  std::size_t hidden = 32;
  std::size_t depth = 2;  // hidden layers per network
};

/// One neural SDE:  X0 = zeta(V),  dX = mu(t,X) dt + sigma(t,X) o dW,  Y = X alpha + beta.
/// `zeta` is absent for segments that continue from a previous segment's state.
struct GeneratorParams {
  GeneratorDims dims;
  std::string prefix;
  std::optional<Mlp> zeta;
  Mlp mu;
  Mlp sigma;
  std::string alpha;  // (x, y)
  std::string beta;   // (1, y)

  static GeneratorParams create(ParamStore& store, const std::string& prefix, const GeneratorDims& dims,
                                bool with_initial, Rng& rng);
  static GeneratorParams bind(const ParamStore& store, const std::string& prefix, const GeneratorDims& dims,
                              bool with_initial);
};

struct SegmentedGenerator {
  std::vector<GeneratorParams> segments;
  ChangePointEstimate change_points;

  /// Segments named "g0", "g1", ...; only g0 owns an initial network.
  static SegmentedGenerator create(ParamStore& store, const GeneratorDims& dims, ChangePointEstimate change_points,
                                   Rng& rng);
  static SegmentedGenerator bind(const ParamStore& store, const GeneratorDims& dims,
                                 ChangePointEstimate change_points);
  const GeneratorDims& dims() const { return segments.front().dims; }
  void validate(std::size_t n_steps) const;
};

/// States and readouts recorded on a tape, one entry per covered grid step.
struct GeneratorRun {
  std::vector<Var> states;   // (B, x)
  std::vector<Var> outputs;  // (B, y)
};

/// Integrates `theta` over steps [first, last] of `grid` (last inclusive).
/// The start state is `x_init` if given, otherwise zeta(v).
GeneratorRun generate_segment(const GeneratorParams& theta, ParamStore& store, const TimeGrid& grid, Var v,
                              const BrownianBatch& w, std::optional<Var> x_init = std::nullopt,
                              std::size_t first = 0, std::optional<std::size_t> last = std::nullopt);

/// Segment j covers steps [cp_{j-1}, cp_j); each later segment starts from the
/// previous segment's terminal state. Readouts use segment-local alpha, beta.
GeneratorRun generate_full(const SegmentedGenerator& model, ParamStore& store, const TimeGrid& grid, Var v,
                           const BrownianBatch& w);

/// Initial noise V ~ N(0, I_v) for n paths, one stream per path.
Tensor sample_initial_noise(std::size_t n, std::size_t v_dim, std::uint64_t seed);

/// Forward-only generation of n readout paths.
PathBatch sample_generator(const SegmentedGenerator& model, ParamStore& store, const TimeGrid& grid, std::size_t n,
                           std::uint64_t seed);

/// Collects per-step readout values into a batch.
PathBatch run_to_batch(const GeneratorRun& run, const TimeGrid& grid);

}  // namespace cpsde
