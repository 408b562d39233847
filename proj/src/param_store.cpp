#include "cpsde/param_store.hpp"

#include <algorithm>

#include "cpsde/errors.hpp"

namespace cpsde {

ParamEntry& ParamStore::add(const std::string& name, Tensor value) {
  if (contains(name)) throw ContractError("duplicate parameter name '" + name + "'");
  const Shape shape = value.shape();
  auto [it, inserted] = entries_.emplace(
      name, ParamEntry{std::move(value), Tensor(shape), Tensor(shape), Tensor(shape)});
  return it->second;
}

ParamEntry& ParamStore::at(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ContractError("unknown parameter '" + name + "'");
  return it->second;
}

const ParamEntry& ParamStore::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ContractError("unknown parameter '" + name + "'");
  return it->second;
}

std::size_t ParamStore::value_count() const noexcept {
  std::size_t n = 0;
  for (const auto& [name, e] : entries_) n += e.value.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& [name, e] : entries_) std::fill(e.grad.raw(), e.grad.raw() + e.grad.size(), 0.0);
}

}  // namespace cpsde
