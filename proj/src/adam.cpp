#include "cpsde/adam.hpp"

#include <cmath>

#include "cpsde/errors.hpp"

namespace cpsde {

void adam_step(ParamStore& store, const AdamConfig& cfg) {
  for (const auto& [name, e] : store)
    if (!e.grad.all_finite()) throw TrainingError("non-finite gradient", name);

  const std::uint64_t t = store.step_count() + 1;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (auto& [name, e] : store) {
    for (std::size_t i = 0; i < e.value.size(); ++i) {
      const double g = e.grad[i];
      e.moment1[i] = cfg.beta1 * e.moment1[i] + (1.0 - cfg.beta1) * g;
      e.moment2[i] = cfg.beta2 * e.moment2[i] + (1.0 - cfg.beta2) * g * g;
      const double mhat = e.moment1[i] / c1;
      const double vhat = e.moment2[i] / c2;
      e.value[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
  store.set_step_count(t);
  store.zero_grad();
}

}  // namespace cpsde
