#include "cpsde/discriminator.hpp"

#include <cmath>
#include <fstream>

#include "cpsde/csv_io.hpp"
#include "cpsde/errors.hpp"

namespace cpsde {
namespace {

std::vector<std::size_t> net_widths(std::size_t in, std::size_t out, const DiscriminatorDims& d) {
  std::vector<std::size_t> widths{in};
  for (std::size_t i = 0; i < d.depth; ++i) widths.push_back(d.hidden);
  widths.push_back(out);
  return widths;
}

}  // namespace

DiscriminatorParams DiscriminatorParams::create(ParamStore& store, const DiscriminatorDims& dims, Rng& rng) {
  DiscriminatorParams p;
  p.dims = dims;
  p.xi = Mlp::create(store, "d.xi", net_widths(dims.y, dims.h, dims), rng);
  p.f = Mlp::create(store, "d.f", net_widths(1 + dims.h, dims.h, dims), rng);
  p.g = Mlp::create(store, "d.g", net_widths(1 + dims.h, dims.h * dims.y, dims), rng);
  p.m = "d.m";
  const double bound = 1.0 / std::sqrt(static_cast<double>(dims.h));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor m({dims.h, 1});
  for (auto& v : m.mutable_data()) v = dist(rng);
  store.add(p.m, std::move(m));
  return p;
}

DiscriminatorParams DiscriminatorParams::bind(const ParamStore& store, const DiscriminatorDims& dims) {
  DiscriminatorParams p;
  p.dims = dims;
  p.xi = Mlp::bind(store, "d.xi", net_widths(dims.y, dims.h, dims));
  p.f = Mlp::bind(store, "d.f", net_widths(1 + dims.h, dims.h, dims));
  p.g = Mlp::bind(store, "d.g", net_widths(1 + dims.h, dims.h * dims.y, dims));
  p.m = "d.m";
  if (store.at(p.m).value.shape() != Shape{dims.h, 1}) throw DimensionError("discriminator readout has unexpected shape");
  return p;
}

Var score_paths(const DiscriminatorParams& phi, ParamStore& store, const std::vector<Var>& ys) {
  if (ys.size() < 2) throw ContractError("discriminator needs paths with at least 2 steps");
  Tape& tape = *ys.front().tape();
  const std::size_t batch = ys.front().rows();
  if (ys.front().cols() != phi.dims.y)
    throw DimensionError("discriminator expects " + std::to_string(phi.dims.y) + " channels");

  const double dt = 1.0 / static_cast<double>(ys.size() - 1);
  const VectorField drift = [&](double t, Var h) {
    return mlp_apply(phi.f, store, concat_cols(tape.constant(Tensor({batch, 1}, t)), h));
  };
  const VectorField diffusion = [&](double t, Var h) {
    return mlp_apply(phi.g, store, concat_cols(tape.constant(Tensor({batch, 1}, t)), h));
  };

  Var h = mlp_apply(phi.xi, store, ys.front());
  for (std::size_t k = 0; k + 1 < ys.size(); ++k) {
    const double t = static_cast<double>(k) * dt;
    h = heun_step(drift, diffusion, t, h, dt, ys[k + 1] - ys[k], k);
  }
  return matmul(h, tape.param(store, phi.m));
}

std::vector<Var> batch_steps(Tape& tape, const PathBatch& batch) {
  std::vector<Var> ys;
  ys.reserve(batch.n_steps());
  for (std::size_t k = 0; k < batch.n_steps(); ++k) ys.push_back(tape.constant(batch.step_values(k)));
  return ys;
}

double cde_score(const DiscriminatorParams& phi, ParamStore& store, const Path& path) {
  return score_batch(phi, store, PathBatch::from_paths({path})).front();
}

std::vector<double> score_batch(const DiscriminatorParams& phi, ParamStore& store, const PathBatch& batch) {
  Tape tape;
  const Var d = score_paths(phi, store, batch_steps(tape, batch));
  const auto values = d.value().data();
  return std::vector<double>(values.begin(), values.end());
}

ScoreSequence window_scores(const DiscriminatorParams& phi, ParamStore& store, const PathBatch& batch,
                            std::size_t window) {
  if (window < 2 || window > batch.n_steps())
    throw WindowError("window " + std::to_string(window) + " outside [2, " + std::to_string(batch.n_steps()) + "]");
  ScoreSequence out;
  out.window = window;
  const std::size_t count = batch.n_steps() - window + 1;
  out.scores.reserve(count);
  for (std::size_t t = 0; t < count; ++t) {
    const std::vector<double> s = score_batch(phi, store, batch.steps(t, window));
    double total = 0.0;
    for (double v : s) total += v;
    out.scores.push_back(total / static_cast<double>(s.size()));
  }
  return out;
}

void write_scores_csv(const std::filesystem::path& file, const ScoreSequence& s) {
  std::ofstream out(file);
  if (!out) throw IoError("cannot open '" + file.string() + "' for writing");
  out << "t_index,s_bar\n";
  for (std::size_t t = 0; t < s.scores.size(); ++t) out << t << ',' << format_double(s.scores[t]) << '\n';
  if (!out) throw IoError("failed writing '" + file.string() + "'");
}

}  // namespace cpsde
