#include "cpsde/tape.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "cpsde/errors.hpp"

namespace cpsde {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using ArrMap = Eigen::Map<Eigen::ArrayXd>;
using ConstArrMap = Eigen::Map<const Eigen::ArrayXd>;

MatMap mat(Tensor& t) { return MatMap(t.raw(), Eigen::Index(t.rows()), Eigen::Index(t.cols())); }
ConstMatMap mat(const Tensor& t) { return ConstMatMap(t.raw(), Eigen::Index(t.rows()), Eigen::Index(t.cols())); }
ArrMap arr(Tensor& t) { return ArrMap(t.raw(), Eigen::Index(t.size())); }
ConstArrMap arr(const Tensor& t) { return ConstArrMap(t.raw(), Eigen::Index(t.size())); }

Tape* same_tape(Var a, Var b) {
  if (!a.valid() || !b.valid()) throw ContractError("operation on an unbound Var");
  if (a.tape() != b.tape()) throw ContractError("operands recorded on different tapes");
  return a.tape();
}

Tape* tape_of(Var a) {
  if (!a.valid()) throw ContractError("operation on an unbound Var");
  return a.tape();
}

void require_2d(const Tensor& t, const char* op) {
  if (t.rank() != 2) throw DimensionError(std::string(op) + ": expected a 2-D tensor, got " + shape_string(t.shape()));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
}

double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus_scalar(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

}  // namespace

const Tensor& Var::value() const {
  if (!tape_) throw ContractError("value() on an unbound Var");
  return tape_->value(*this);
}

Var Tape::push(OpKind op, Tensor value, int a, int b, double k, std::size_t aux) {
  nodes_.push_back(Node{op, a, b, k, aux, std::move(value), nullptr});
  return Var(this, static_cast<std::uint32_t>(nodes_.size() - 1));
}

Var Tape::constant(Tensor value) {
  require_2d(value, "constant");
  return push(OpKind::Constant, std::move(value));
}

Var Tape::param(ParamStore& store, const std::string& name) {
  ParamEntry& entry = store.at(name);
  if (auto it = param_nodes_.find(&entry); it != param_nodes_.end()) return Var(this, it->second);
  require_2d(entry.value, "param");
  Var v = push(OpKind::Param, entry.value);
  nodes_.back().param = &entry;
  param_nodes_.emplace(&entry, v.id());
  return v;
}

void Tape::backward(Var root) {
  if (root.tape() != this) throw ContractError("backward: root belongs to another tape");
  if (nodes_.at(root.id()).value.size() != 1)
    throw ContractError("backward: root must be scalar, got shape " +
                        shape_string(nodes_[root.id()].value.shape()));

  std::vector<Tensor> grads(nodes_.size());
  std::vector<char> live(nodes_.size(), 0);
  auto grad = [&](int id) -> Tensor& {
    if (!live[id]) {
      grads[id] = Tensor(nodes_[id].value.shape());
      live[id] = 1;
    }
    return grads[id];
  };
  grad(static_cast<int>(root.id()))[0] = 1.0;

  for (int i = static_cast<int>(root.id()); i >= 0; --i) {
    if (!live[i]) continue;
    const Node& n = nodes_[i];
    const Tensor& g = grads[i];
    switch (n.op) {
      case OpKind::Constant:
        break;
      case OpKind::Param:
        arr(n.param->grad) += arr(g);
        break;
      case OpKind::Add:
        arr(grad(n.a)) += arr(g);
        arr(grad(n.b)) += arr(g);
        break;
      case OpKind::Sub:
        arr(grad(n.a)) += arr(g);
        arr(grad(n.b)) -= arr(g);
        break;
      case OpKind::Mul: {
        const Tensor& av = nodes_[n.a].value;
        const Tensor& bv = nodes_[n.b].value;
        arr(grad(n.a)) += arr(g) * arr(bv);
        arr(grad(n.b)) += arr(g) * arr(av);
        break;
      }
      case OpKind::Scale:
        arr(grad(n.a)) += n.k * arr(g);
        break;
      case OpKind::AddScalar:
        arr(grad(n.a)) += arr(g);
        break;
      case OpKind::MatMul: {
        const Tensor& av = nodes_[n.a].value;
        const Tensor& bv = nodes_[n.b].value;
        mat(grad(n.a)).noalias() += mat(g) * mat(bv).transpose();
        mat(grad(n.b)).noalias() += mat(av).transpose() * mat(g);
        break;
      }
      case OpKind::AddRow:
        arr(grad(n.a)) += arr(g);
        mat(grad(n.b)) += mat(g).colwise().sum();
        break;
      case OpKind::Tanh:
        arr(grad(n.a)) += arr(g) * (1.0 - arr(n.value).square());
        break;
      case OpKind::Sigmoid:
        arr(grad(n.a)) += arr(g) * arr(n.value) * (1.0 - arr(n.value));
        break;
      case OpKind::Softplus: {
        const Tensor& av = nodes_[n.a].value;
        Tensor& ga = grad(n.a);
        for (std::size_t j = 0; j < av.size(); ++j) ga[j] += g[j] * sigmoid_scalar(av[j]);
        break;
      }
      case OpKind::Sum:
        arr(grad(n.a)) += g[0];
        break;
      case OpKind::Mean: {
        Tensor& ga = grad(n.a);
        arr(ga) += g[0] / static_cast<double>(ga.size());
        break;
      }
      case OpKind::ConcatCols: {
        const std::size_t ca = nodes_[n.a].value.cols();
        const std::size_t cb = nodes_[n.b].value.cols();
        mat(grad(n.a)) += mat(g).leftCols(Eigen::Index(ca));
        mat(grad(n.b)) += mat(g).rightCols(Eigen::Index(cb));
        break;
      }
      case OpKind::SliceCols:
        mat(grad(n.a)).middleCols(Eigen::Index(n.aux), Eigen::Index(g.cols())) += mat(g);
        break;
      case OpKind::BatchedMatVec: {
        const Tensor& gv = nodes_[n.a].value;
        const Tensor& vv = nodes_[n.b].value;
        Tensor& dg = grad(n.a);
        Tensor& dv = grad(n.b);
        const std::size_t out = n.aux;
        const std::size_t k = vv.cols();
        for (std::size_t r = 0; r < gv.rows(); ++r) {
          const double* grow = gv.raw() + r * out * k;
          double* dgrow = dg.raw() + r * out * k;
          const double* vrow = vv.raw() + r * k;
          double* dvrow = dv.raw() + r * k;
          const double* up = g.raw() + r * out;
          for (std::size_t o = 0; o < out; ++o) {
            for (std::size_t j = 0; j < k; ++j) {
              dgrow[o * k + j] += up[o] * vrow[j];
              dvrow[j] += up[o] * grow[o * k + j];
            }
          }
        }
        break;
      }
    }
  }
}

Var operator+(Var a, Var b) {
  Tape* t = same_tape(a, b);
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  arr(out) += arr(b.value());
  return t->push(OpKind::Add, std::move(out), int(a.id()), int(b.id()));
}

Var operator-(Var a, Var b) {
  Tape* t = same_tape(a, b);
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  arr(out) -= arr(b.value());
  return t->push(OpKind::Sub, std::move(out), int(a.id()), int(b.id()));
}

Var operator*(Var a, Var b) {
  Tape* t = same_tape(a, b);
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  arr(out) *= arr(b.value());
  return t->push(OpKind::Mul, std::move(out), int(a.id()), int(b.id()));
}

Var operator*(double k, Var a) {
  Tape* t = tape_of(a);
  Tensor out = a.value();
  arr(out) *= k;
  return t->push(OpKind::Scale, std::move(out), int(a.id()), -1, k);
}

Var operator*(Var a, double k) { return k * a; }

Var operator+(Var a, double k) {
  Tape* t = tape_of(a);
  Tensor out = a.value();
  arr(out) += k;
  return t->push(OpKind::AddScalar, std::move(out), int(a.id()), -1, k);
}

Var operator-(Var a) { return -1.0 * a; }

Var matmul(Var a, Var b) {
  Tape* t = same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.rows())
    throw DimensionError("matmul: " + shape_string(av.shape()) + " x " + shape_string(bv.shape()));
  Tensor out({av.rows(), bv.cols()});
  mat(out).noalias() = mat(av) * mat(bv);
  return t->push(OpKind::MatMul, std::move(out), int(a.id()), int(b.id()));
}

Var add_row(Var a, Var row) {
  Tape* t = same_tape(a, row);
  const Tensor& av = a.value();
  const Tensor& rv = row.value();
  if (rv.rows() != 1 || rv.cols() != av.cols())
    throw DimensionError("add_row: " + shape_string(av.shape()) + " + " + shape_string(rv.shape()));
  Tensor out = av;
  mat(out).rowwise() += mat(rv).row(0);
  return t->push(OpKind::AddRow, std::move(out), int(a.id()), int(row.id()));
}

Var tanh(Var a) {
  Tape* t = tape_of(a);
  Tensor out = a.value();
  // 1 - 2/(e^{2x}+1) saturates cleanly to +-1 and vectorizes through exp.
  arr(out) = 1.0 - 2.0 / ((2.0 * arr(out)).exp() + 1.0);
  return t->push(OpKind::Tanh, std::move(out), int(a.id()));
}

Var sigmoid(Var a) {
  Tape* t = tape_of(a);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigmoid_scalar(out[i]);
  return t->push(OpKind::Sigmoid, std::move(out), int(a.id()));
}

Var softplus(Var a) {
  Tape* t = tape_of(a);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = softplus_scalar(out[i]);
  return t->push(OpKind::Softplus, std::move(out), int(a.id()));
}

Var square(Var a) { return a * a; }

Var sum(Var a) {
  Tape* t = tape_of(a);
  return t->push(OpKind::Sum, Tensor::scalar(arr(a.value()).sum()), int(a.id()));
}

Var mean(Var a) {
  Tape* t = tape_of(a);
  const Tensor& av = a.value();
  if (av.size() == 0) throw DimensionError("mean of an empty tensor");
  return t->push(OpKind::Mean, Tensor::scalar(arr(av).sum() / double(av.size())), int(a.id()));
}

Var concat_cols(Var a, Var b) {
  Tape* t = same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rows() != bv.rows())
    throw DimensionError("concat_cols: " + shape_string(av.shape()) + " | " + shape_string(bv.shape()));
  Tensor out({av.rows(), av.cols() + bv.cols()});
  mat(out).leftCols(Eigen::Index(av.cols())) = mat(av);
  mat(out).rightCols(Eigen::Index(bv.cols())) = mat(bv);
  return t->push(OpKind::ConcatCols, std::move(out), int(a.id()), int(b.id()));
}

Var slice_cols(Var a, std::size_t start, std::size_t count) {
  Tape* t = tape_of(a);
  const Tensor& av = a.value();
  if (start + count > av.cols() || count == 0)
    throw DimensionError("slice_cols: [" + std::to_string(start) + ", " + std::to_string(start + count) +
                         ") of " + shape_string(av.shape()));
  Tensor out({av.rows(), count});
  mat(out) = mat(av).middleCols(Eigen::Index(start), Eigen::Index(count));
  return t->push(OpKind::SliceCols, std::move(out), int(a.id()), -1, 0.0, start);
}

Var batched_matvec(Var g, Var v, std::size_t out) {
  Tape* t = same_tape(g, v);
  const Tensor& gv = g.value();
  const Tensor& vv = v.value();
  const std::size_t k = vv.cols();
  if (gv.rows() != vv.rows() || gv.cols() != out * k)
    throw DimensionError("batched_matvec: " + shape_string(gv.shape()) + " as (" + std::to_string(out) + " x " +
                         std::to_string(k) + ") times " + shape_string(vv.shape()));
  Tensor res({gv.rows(), out});
  for (std::size_t r = 0; r < gv.rows(); ++r) {
    const double* grow = gv.raw() + r * out * k;
    const double* vrow = vv.raw() + r * k;
    for (std::size_t o = 0; o < out; ++o) {
      double acc = 0.0;
      for (std::size_t j = 0; j < k; ++j) acc += grow[o * k + j] * vrow[j];
      res[r * out + o] = acc;
    }
  }
  return t->push(OpKind::BatchedMatVec, std::move(res), int(g.id()), int(v.id()), 0.0, out);
}

}  // namespace cpsde
