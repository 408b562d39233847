#pragma once

#include <utility>

#include "cpsde/param_store.hpp"

namespace cpsde {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update of every entry, then zeroes the grads.
/// Throws TrainingError naming the first parameter with a non-finite grad;
/// in that case nothing is modified.
void adam_step(ParamStore& store, const AdamConfig& cfg);

inline void adam_step(ParamStore& store, double lr, std::pair<double, double> betas = {0.9, 0.999},
                      double eps = 1e-8) {
  adam_step(store, AdamConfig{lr, betas.first, betas.second, eps});
}

}  // namespace cpsde
