#include "cpsde/generator.hpp"

#include <cmath>

#include "cpsde/errors.hpp"

namespace cpsde {
namespace {

std::vector<std::size_t> net_widths(std::size_t in, std::size_t out, const GeneratorDims& d) {
  std::vector<std::size_t> widths{in};
  for (std::size_t i = 0; i < d.depth; ++i) widths.push_back(d.hidden);
  widths.push_back(out);
  return widths;
}

std::string segment_prefix(std::size_t k) { return "g" + std::to_string(k); }

Var time_column(Tape& tape, std::size_t rows, double unit_time) {
  return tape.constant(Tensor({rows, 1}, unit_time));
}

}  // namespace

GeneratorParams GeneratorParams::create(ParamStore& store, const std::string& prefix, const GeneratorDims& dims,
                                        bool with_initial, Rng& rng) {
  GeneratorParams p;
  p.dims = dims;
  p.prefix = prefix;
  if (with_initial) p.zeta = Mlp::create(store, prefix + ".zeta", net_widths(dims.v, dims.x, dims), rng);
  p.mu = Mlp::create(store, prefix + ".mu", net_widths(1 + dims.x, dims.x, dims), rng);
  p.sigma = Mlp::create(store, prefix + ".sigma", net_widths(1 + dims.x, dims.x * dims.w, dims), rng);
  p.alpha = prefix + ".alpha";
  p.beta = prefix + ".beta";
  const double bound = 1.0 / std::sqrt(static_cast<double>(dims.x));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor alpha({dims.x, dims.y});
  for (auto& v : alpha.mutable_data()) v = dist(rng);
  store.add(p.alpha, std::move(alpha));
  store.add(p.beta, Tensor({1, dims.y}));
  return p;
}

GeneratorParams GeneratorParams::bind(const ParamStore& store, const std::string& prefix, const GeneratorDims& dims,
                                      bool with_initial) {
  GeneratorParams p;
  p.dims = dims;
  p.prefix = prefix;
  if (with_initial) p.zeta = Mlp::bind(store, prefix + ".zeta", net_widths(dims.v, dims.x, dims));
  p.mu = Mlp::bind(store, prefix + ".mu", net_widths(1 + dims.x, dims.x, dims));
  p.sigma = Mlp::bind(store, prefix + ".sigma", net_widths(1 + dims.x, dims.x * dims.w, dims));
  p.alpha = prefix + ".alpha";
  p.beta = prefix + ".beta";
  if (store.at(p.alpha).value.shape() != Shape{dims.x, dims.y} || store.at(p.beta).value.shape() != Shape{1, dims.y})
    throw DimensionError("generator readout '" + prefix + "' has unexpected shape");
  return p;
}

SegmentedGenerator SegmentedGenerator::create(ParamStore& store, const GeneratorDims& dims,
                                              ChangePointEstimate change_points, Rng& rng) {
  SegmentedGenerator g;
  for (std::size_t k = 0; k <= change_points.count(); ++k)
    g.segments.push_back(GeneratorParams::create(store, segment_prefix(k), dims, k == 0, rng));
  g.change_points = std::move(change_points);
  return g;
}

SegmentedGenerator SegmentedGenerator::bind(const ParamStore& store, const GeneratorDims& dims,
                                            ChangePointEstimate change_points) {
  SegmentedGenerator g;
  for (std::size_t k = 0; k <= change_points.count(); ++k)
    g.segments.push_back(GeneratorParams::bind(store, segment_prefix(k), dims, k == 0));
  g.change_points = std::move(change_points);
  return g;
}

void SegmentedGenerator::validate(std::size_t n_steps) const {
  if (segments.size() != change_points.count() + 1)
    throw ContractError("segmented generator needs one more segment than change points");
  if (!segments.front().zeta) throw ContractError("first generator segment lacks an initial network");
  if (!change_points.valid_for(n_steps)) throw ContractError("change points invalid for the grid");
}

GeneratorRun generate_segment(const GeneratorParams& theta, ParamStore& store, const TimeGrid& grid, Var v,
                              const BrownianBatch& w, std::optional<Var> x_init, std::size_t first,
                              std::optional<std::size_t> last_opt) {
  const std::size_t last = last_opt.value_or(grid.n_steps - 1);
  if (last >= grid.n_steps || first > last) throw ContractError("generate_segment: step range outside the grid");
  if (w.grid.n_steps != grid.n_steps || w.w_dim() != theta.dims.w)
    throw DimensionError("generate_segment: Brownian increments incompatible with grid or w_dim");
  Tape& tape = *v.tape();
  const std::size_t batch = v.rows();
  if (w.size() != batch) throw DimensionError("generate_segment: noise batch sizes differ");

  Var x;
  if (x_init) {
    x = *x_init;
  } else {
    if (!theta.zeta) throw ContractError("generate_segment: segment has no initial network and no start state");
    x = mlp_apply(*theta.zeta, store, v);
  }
  if (x.cols() != theta.dims.x || x.rows() != batch) throw DimensionError("generate_segment: start state shape");

  const double span = grid.horizon() - grid.t0;
  auto unit = [&](double t) { return (t - grid.t0) / span; };
  const VectorField drift = [&](double t, Var s) {
    return mlp_apply(theta.mu, store, concat_cols(time_column(tape, batch, unit(t)), s));
  };
  const VectorField diffusion = [&](double t, Var s) {
    return mlp_apply(theta.sigma, store, concat_cols(time_column(tape, batch, unit(t)), s));
  };
  const Var alpha = tape.param(store, theta.alpha);
  const Var beta = tape.param(store, theta.beta);

  GeneratorRun run;
  for (std::size_t k = first;; ++k) {
    run.states.push_back(x);
    run.outputs.push_back(add_row(matmul(x, alpha), beta));
    if (k == last) break;
    x = heun_step(drift, diffusion, grid.time(k), x, grid.dt, tape.constant(w.step(k)), k);
  }
  return run;
}

GeneratorRun generate_full(const SegmentedGenerator& model, ParamStore& store, const TimeGrid& grid, Var v,
                           const BrownianBatch& w) {
  model.validate(grid.n_steps);
  GeneratorRun full;
  std::optional<Var> carry;
  std::size_t start = 0;
  const std::size_t n_seg = model.segments.size();
  for (std::size_t j = 0; j < n_seg; ++j) {
    const bool final_segment = j + 1 == n_seg;
    const std::size_t end = final_segment ? grid.n_steps - 1 : model.change_points.indices[j];
    GeneratorRun part = generate_segment(model.segments[j], store, grid, v, w, carry, start, end);
    const std::size_t keep = final_segment ? part.states.size() : part.states.size() - 1;
    for (std::size_t i = 0; i < keep; ++i) {
      full.states.push_back(part.states[i]);
      full.outputs.push_back(part.outputs[i]);
    }
    carry = part.states.back();
    start = end;
  }
  return full;
}

Tensor sample_initial_noise(std::size_t n, std::size_t v_dim, std::uint64_t seed) {
  Tensor v({n, v_dim});
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = make_rng(seed, {i});
    for (std::size_t j = 0; j < v_dim; ++j) v.at(i, j) = normal(rng);
  }
  return v;
}

PathBatch run_to_batch(const GeneratorRun& run, const TimeGrid& grid) {
  if (run.outputs.size() != grid.n_steps) throw DimensionError("generator run does not cover the grid");
  const std::size_t n = run.outputs.front().rows();
  const std::size_t y = run.outputs.front().cols();
  Tensor values({n, grid.n_steps, y});
  for (std::size_t k = 0; k < grid.n_steps; ++k) {
    const Tensor& out = run.outputs[k].value();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < y; ++c) values[(i * grid.n_steps + k) * y + c] = out.at(i, c);
  }
  return PathBatch(grid, std::move(values));
}

PathBatch sample_generator(const SegmentedGenerator& model, ParamStore& store, const TimeGrid& grid, std::size_t n,
                           std::uint64_t seed) {
  const GeneratorDims& d = model.dims();
  Tape tape;
  const Var v = tape.constant(sample_initial_noise(n, d.v, derive_seed(seed, {0})));
  const BrownianBatch w = sample_brownian_batch(grid, d.w, n, derive_seed(seed, {1}));
  return run_to_batch(generate_full(model, store, grid, v, w), grid);
}

}  // namespace cpsde
