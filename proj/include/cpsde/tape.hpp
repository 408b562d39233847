#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "cpsde/param_store.hpp"
#include "cpsde/tensor.hpp"

namespace cpsde {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  Tape* tape() const noexcept { return tape_; }
  std::uint32_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
};

enum class OpKind : std::uint8_t {
  Constant,
  Param,
  Add,
  Sub,
  Mul,
  Scale,
  AddScalar,
  MatMul,
  AddRow,
  Tanh,
  Sigmoid,
  Softplus,
  Sum,
  Mean,
  ConcatCols,
  SliceCols,
  BatchedMatVec,
};

/// Append-only record of 2-D tensor operations for reverse-mode differentiation.
/// Single-writer; build independent tapes for concurrent work.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  /// Leaf bound to a store entry; backward() accumulates into its grad slot.
  /// Repeated requests for the same entry return the same node.
  Var param(ParamStore& store, const std::string& name);

  const Tensor& value(Var v) const { return nodes_.at(v.id()).value; }
  OpKind kind(Var v) const { return nodes_.at(v.id()).op; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// d(root)/d(param) accumulated into every reachable parameter's grad.
  void backward(Var root);

  // Node construction; used by the free operator functions below.
  Var push(OpKind op, Tensor value, int a = -1, int b = -1, double k = 0.0, std::size_t aux = 0);

 private:
  struct Node {
    OpKind op;
    int a;
    int b;
    double k;
    std::size_t aux;
    Tensor value;
    ParamEntry* param = nullptr;
  };

  std::vector<Node> nodes_;
  std::unordered_map<const ParamEntry*, std::uint32_t> param_nodes_;
};

Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
/// Elementwise product of equal shapes.
Var operator*(Var a, Var b);
Var operator*(double k, Var a);
Var operator*(Var a, double k);
Var operator+(Var a, double k);
Var operator-(Var a);

Var matmul(Var a, Var b);
/// a (n x c) plus row vector b (1 x c) broadcast over rows.
Var add_row(Var a, Var row);
Var tanh(Var a);
Var sigmoid(Var a);
Var softplus(Var a);
Var square(Var a);
Var sum(Var a);
Var mean(Var a);
Var concat_cols(Var a, Var b);
Var slice_cols(Var a, std::size_t start, std::size_t count);
/// Per row b: reshape g[b] to (out x k) and multiply by v[b] (length k).
Var batched_matvec(Var g, Var v, std::size_t out);

}  // namespace cpsde
