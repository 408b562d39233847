#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "cpsde/mlp.hpp"
#include "cpsde/param_store.hpp"
#include "cpsde/rng.hpp"
#include "cpsde/tape.hpp"

namespace cpsde::testing {

inline Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = n(rng);
  return t;
}

struct GradCheck {
  double max_rel_error = 0.0;
  std::string worst;  // "name[index]"
  std::size_t checked = 0;
  std::map<std::string, double> per_entry;  // worst relative error per parameter name
};

/// Compares reverse-mode gradients of `loss` with central differences for every
/// value in `store`. Relative error uses max(|analytic|, |numeric|, floor) as denominator.
inline GradCheck gradient_check(ParamStore& store, const std::function<Var(Tape&)>& loss, double step = 1e-5,
                                double floor = 1e-6) {
  store.zero_grad();
  {
    Tape tape;
    tape.backward(loss(tape));
  }
  GradCheck out;
  for (auto& [name, entry] : store) {
    for (std::size_t i = 0; i < entry.value.size(); ++i) {
      const double orig = entry.value[i];
      entry.value[i] = orig + step;
      double up, down;
      {
        Tape t;
        up = loss(t).value().item();
      }
      entry.value[i] = orig - step;
      {
        Tape t;
        down = loss(t).value().item();
      }
      entry.value[i] = orig;
      const double numeric = (up - down) / (2.0 * step);
      const double analytic = entry.grad[i];
      const double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
      double& entry_worst = out.per_entry[name];
      entry_worst = std::max(entry_worst, rel);
      if (rel > out.max_rel_error) {
        out.max_rel_error = rel;
        out.worst = name + "[" + std::to_string(i) + "]";
      }
      ++out.checked;
    }
  }
  store.zero_grad();
  return out;
}

/// Straight-line forward pass of `mlp` on one input row, plain doubles, no tape.
inline std::vector<double> mlp_forward(const Mlp& mlp, const ParamStore& store, std::vector<double> x) {
  for (std::size_t l = 0; l < mlp.layer_count(); ++l) {
    const Tensor& w = store.at(mlp.weight_names[l]).value;
    const Tensor& b = store.at(mlp.bias_names[l]).value;
    std::vector<double> y(w.cols());
    for (std::size_t j = 0; j < w.cols(); ++j) {
      double acc = b[j];
      for (std::size_t i = 0; i < w.rows(); ++i) acc += x[i] * w.at(i, j);
      y[j] = mlp.activations[l] == Activation::Tanh ? std::tanh(acc) : acc;
    }
    x = std::move(y);
  }
  return x;
}

inline std::vector<double> with_time(double t, const std::vector<double>& x) {
  std::vector<double> out{t};
  out.insert(out.end(), x.begin(), x.end());
  return out;
}

/// One Stratonovich Heun step for a single path: f returns the drift, g the
/// row-major (x_dim x w_dim) diffusion.
template <class F, class G>
std::vector<double> heun_plain(const F& f, const G& g, double t, const std::vector<double>& x, double dt,
                               const std::vector<double>& dw) {
  const std::size_t n = x.size(), k = dw.size();
  auto gdw = [&](const std::vector<double>& gm) {
    std::vector<double> out(n, 0.0);
    for (std::size_t o = 0; o < n; ++o)
      for (std::size_t j = 0; j < k; ++j) out[o] += gm[o * k + j] * dw[j];
    return out;
  };
  const std::vector<double> f0 = f(t, x), g0 = gdw(g(t, x));
  std::vector<double> pred(n);
  for (std::size_t i = 0; i < n; ++i) pred[i] = x[i] + f0[i] * dt + g0[i];
  const std::vector<double> f1 = f(t + dt, pred), g1 = gdw(g(t + dt, pred));
  std::vector<double> next(n);
  for (std::size_t i = 0; i < n; ++i) next[i] = x[i] + 0.5 * dt * (f0[i] + f1[i]) + 0.5 * (g0[i] + g1[i]);
  return next;
}

}  // namespace cpsde::testing
