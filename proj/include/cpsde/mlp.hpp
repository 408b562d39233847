#pragma once

#include <string>
#include <vector>

#include "cpsde/param_store.hpp"
#include "cpsde/rng.hpp"
#include "cpsde/tape.hpp"

namespace cpsde {

enum class Activation { Identity, Tanh };

/// Fully connected network whose weights live in a ParamStore.
/// Layer l computes act_l(h W_l + b_l) with W_l of shape (in, out).
struct Mlp {
  std::vector<std::size_t> widths;
  std::vector<Activation> activations;
  std::vector<std::string> weight_names;
  std::vector<std::string> bias_names;

  std::size_t in_width() const { return widths.front(); }
  std::size_t out_width() const { return widths.back(); }
  std::size_t layer_count() const { return activations.size(); }

  /// Registers `prefix.l{i}.w` / `prefix.l{i}.b` in `store` with uniform
  /// +-1/sqrt(fan_in) initialization. Hidden layers use `hidden`, the last `final`.
  static Mlp create(ParamStore& store, const std::string& prefix, std::vector<std::size_t> widths,
                    Rng& rng, Activation hidden = Activation::Tanh, Activation final = Activation::Identity);

  /// Rebinds to parameters already present in `store` (e.g. after loading a checkpoint).
  static Mlp bind(const ParamStore& store, const std::string& prefix, std::vector<std::size_t> widths,
                  Activation hidden = Activation::Tanh, Activation final = Activation::Identity);
};

/// Forward pass on `x` (batch x in_width); every layer is recorded on x's tape.
Var mlp_apply(const Mlp& mlp, ParamStore& store, Var x);

}  // namespace cpsde
