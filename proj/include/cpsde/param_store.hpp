#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "cpsde/tensor.hpp"

namespace cpsde {

struct ParamEntry {
  Tensor value;
  Tensor grad;
  // Adam first and second moment estimates.
  Tensor moment1;
  Tensor moment2;
};

/// Named parameter arrays with gradient and optimizer slots.
/// Iteration order is sorted by name.
class ParamStore {
 public:
  using Map = std::map<std::string, ParamEntry>;

  ParamEntry& add(const std::string& name, Tensor value);
  ParamEntry& at(const std::string& name);
  const ParamEntry& at(const std::string& name) const;
  bool contains(const std::string& name) const { return entries_.count(name) != 0; }

  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t value_count() const noexcept;

  Map::iterator begin() noexcept { return entries_.begin(); }
  Map::iterator end() noexcept { return entries_.end(); }
  Map::const_iterator begin() const noexcept { return entries_.begin(); }
  Map::const_iterator end() const noexcept { return entries_.end(); }

  void zero_grad();

  /// Number of optimizer updates applied so far (drives Adam bias correction).
  std::uint64_t step_count() const noexcept { return steps_; }
  void set_step_count(std::uint64_t steps) noexcept { steps_ = steps; }

 private:
  Map entries_;
  std::uint64_t steps_ = 0;
};

}  // namespace cpsde
