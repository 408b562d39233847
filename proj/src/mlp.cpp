#include "cpsde/mlp.hpp"

#include <cmath>

#include "cpsde/errors.hpp"

namespace cpsde {
namespace {

Mlp layout(const std::string& prefix, std::vector<std::size_t> widths, Activation hidden, Activation final) {
  if (widths.size() < 2) throw ContractError("mlp '" + prefix + "' needs at least input and output widths");
  for (std::size_t w : widths)
    if (w == 0) throw ContractError("mlp '" + prefix + "' has a zero-width layer");
  Mlp m;
  m.widths = std::move(widths);
  const std::size_t layers = m.widths.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    m.activations.push_back(l + 1 == layers ? final : hidden);
    m.weight_names.push_back(prefix + ".l" + std::to_string(l) + ".w");
    m.bias_names.push_back(prefix + ".l" + std::to_string(l) + ".b");
  }
  return m;
}

}  // namespace

Mlp Mlp::create(ParamStore& store, const std::string& prefix, std::vector<std::size_t> widths, Rng& rng,
                Activation hidden, Activation final) {
  Mlp m = layout(prefix, std::move(widths), hidden, final);
  for (std::size_t l = 0; l < m.layer_count(); ++l) {
    const std::size_t fan_in = m.widths[l];
    const std::size_t fan_out = m.widths[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor w({fan_in, fan_out});
    for (auto& v : w.mutable_data()) v = dist(rng);
    Tensor b({1, fan_out});
    for (auto& v : b.mutable_data()) v = dist(rng);
    store.add(m.weight_names[l], std::move(w));
    store.add(m.bias_names[l], std::move(b));
  }
  return m;
}

Mlp Mlp::bind(const ParamStore& store, const std::string& prefix, std::vector<std::size_t> widths,
              Activation hidden, Activation final) {
  Mlp m = layout(prefix, std::move(widths), hidden, final);
  for (std::size_t l = 0; l < m.layer_count(); ++l) {
    const Shape expect_w{m.widths[l], m.widths[l + 1]};
    const Shape expect_b{1, m.widths[l + 1]};
    if (store.at(m.weight_names[l]).value.shape() != expect_w || store.at(m.bias_names[l]).value.shape() != expect_b)
      throw DimensionError("mlp '" + prefix + "' layer " + std::to_string(l) + " has unexpected parameter shapes");
  }
  return m;
}

Var mlp_apply(const Mlp& mlp, ParamStore& store, Var x) {
  if (x.cols() != mlp.in_width())
    throw DimensionError("mlp input has " + std::to_string(x.cols()) + " columns, expected " +
                         std::to_string(mlp.in_width()));
  Tape& tape = *x.tape();
  Var h = x;
  for (std::size_t l = 0; l < mlp.layer_count(); ++l) {
    h = add_row(matmul(h, tape.param(store, mlp.weight_names[l])), tape.param(store, mlp.bias_names[l]));
    if (mlp.activations[l] == Activation::Tanh) h = tanh(h);
  }
  return h;
}

}  // namespace cpsde
