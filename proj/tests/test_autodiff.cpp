#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "cpsde/adam.hpp"
#include "cpsde/checkpoint.hpp"
#include "cpsde/errors.hpp"
#include "cpsde/mlp.hpp"
#include "support.hpp"

using namespace cpsde;
using cpsde::testing::gradient_check;
using cpsde::testing::random_tensor;

namespace {

// Contracts an arbitrary-shaped output with fixed random weights so every
// output element receives a distinct upstream gradient.
Var contract(Tape& tape, Var y, std::uint64_t seed = 99) {
  Rng rng = make_rng(seed, {y.rows(), y.cols()});
  return sum(y * tape.constant(random_tensor({y.rows(), y.cols()}, rng)));
}

ParamStore two_params(Shape a, Shape b, std::uint64_t seed = 1) {
  Rng rng = make_rng(seed);
  ParamStore s;
  s.add("a", random_tensor(std::move(a), rng));
  s.add("b", random_tensor(std::move(b), rng));
  return s;
}

void check_op(ParamStore& store, const std::function<Var(Tape&, Var, Var)>& op) {
  const auto result = gradient_check(store, [&](Tape& t) {
    return contract(t, op(t, t.param(store, "a"), t.param(store, "b")));
  });
  INFO("worst " << result.worst);
  CHECK(result.max_rel_error < 1e-4);
  CHECK(result.checked == store.value_count());
}

}  // namespace

TEST_CASE("tensor shape bookkeeping") {
  Tensor t({2, 3}, 1.5);
  CHECK(t.size() == 6);
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK_THROWS_AS(t.dim(2), DimensionError);
  CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1, 2, 3}), DimensionError);
  CHECK(t.reshaped({3, 2}).cols() == 2);
  CHECK_THROWS_AS(t.item(), DimensionError);
}

TEST_CASE("x*x at 3 has gradient 6") {
  ParamStore s;
  s.add("x", Tensor::scalar(3.0));
  Tape tape;
  const Var x = tape.param(s, "x");
  tape.backward(x * x);
  CHECK(s.at("x").grad.item() == doctest::Approx(6.0));
}

TEST_CASE("sum(Wx) gradient has the outer-product structure of x") {
  ParamStore s;
  s.add("w", Tensor::matrix(3, 2, {1, 2, 3, 4, 5, 6}));
  Tape tape;
  const Var x = tape.constant(Tensor::matrix(1, 3, {0.5, -1.0, 2.0}));
  tape.backward(sum(matmul(x, tape.param(s, "w"))));
  const Tensor& g = s.at("w").grad;
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 2; ++c) CHECK(g.at(r, c) == doctest::Approx(x.value().at(0, r)));
}

TEST_CASE("backward rejects a non-scalar root") {
  ParamStore s;
  s.add("x", Tensor({2, 2}, 1.0));
  Tape tape;
  CHECK_THROWS_AS(tape.backward(tape.param(s, "x")), ContractError);
}

TEST_CASE("unreached parameters keep their gradient") {
  ParamStore s;
  s.add("used", Tensor::scalar(2.0));
  s.add("unused", Tensor::scalar(5.0));
  s.at("unused").grad[0] = 0.25;
  Tape tape;
  const Var u = tape.param(s, "used");
  tape.param(s, "unused");
  tape.backward(u * u);
  CHECK(s.at("unused").grad[0] == 0.25);
  CHECK(s.at("used").grad[0] == doctest::Approx(4.0));
}

TEST_CASE("gradients accumulate across backward calls") {
  ParamStore s;
  s.add("x", Tensor::scalar(1.5));
  for (int i = 0; i < 2; ++i) {
    Tape tape;
    const Var x = tape.param(s, "x");
    tape.backward(3.0 * x);
  }
  CHECK(s.at("x").grad[0] == doctest::Approx(6.0));
}

TEST_CASE("operands from different tapes are rejected") {
  Tape t1, t2;
  const Var a = t1.constant(Tensor({1, 1}, 1.0));
  const Var b = t2.constant(Tensor({1, 1}, 1.0));
  CHECK_THROWS_AS(a + b, ContractError);
}

TEST_CASE("shape mismatches raise dimension errors") {
  Tape t;
  const Var a = t.constant(Tensor({2, 3}));
  const Var b = t.constant(Tensor({3, 2}));
  CHECK_THROWS_AS(a + b, DimensionError);
  CHECK_THROWS_AS(matmul(a, a), DimensionError);
  CHECK_THROWS_AS(add_row(a, b), DimensionError);
  CHECK_THROWS_AS(slice_cols(a, 2, 2), DimensionError);
  CHECK_THROWS_AS(concat_cols(a, b), DimensionError);
  CHECK_THROWS_AS(batched_matvec(a, b, 2), DimensionError);
  CHECK_THROWS_AS(t.constant(Tensor({2, 3, 1})), DimensionError);
}

TEST_CASE("gradient check for every op kind") {
  SUBCASE("add") {
    auto s = two_params({3, 4}, {3, 4});
    check_op(s, [](Tape&, Var a, Var b) { return a + b; });
  }
  SUBCASE("sub") {
    auto s = two_params({3, 4}, {3, 4});
    check_op(s, [](Tape&, Var a, Var b) { return a - b; });
  }
  SUBCASE("mul") {
    auto s = two_params({3, 4}, {3, 4});
    check_op(s, [](Tape&, Var a, Var b) { return a * b; });
  }
  SUBCASE("scale and add scalar") {
    auto s = two_params({3, 4}, {3, 4});
    check_op(s, [](Tape&, Var a, Var b) { return (-2.5 * a) + (b * 0.75 + 1.0) + (-b); });
  }
  SUBCASE("matmul") {
    auto s = two_params({3, 5}, {5, 2});
    check_op(s, [](Tape&, Var a, Var b) { return matmul(a, b); });
  }
  SUBCASE("add_row") {
    auto s = two_params({4, 3}, {1, 3});
    check_op(s, [](Tape&, Var a, Var b) { return add_row(a, b); });
  }
  SUBCASE("tanh") {
    auto s = two_params({3, 4}, {3, 4});
    check_op(s, [](Tape&, Var a, Var b) { return tanh(a * 2.0) * b; });
  }
  SUBCASE("sigmoid") {
    auto s = two_params({3, 4}, {3, 4});
    check_op(s, [](Tape&, Var a, Var b) { return sigmoid(a * 4.0) + b; });
  }
  SUBCASE("softplus") {
    auto s = two_params({3, 4}, {3, 4});
    check_op(s, [](Tape&, Var a, Var b) { return softplus(a * 5.0) * b; });
  }
  SUBCASE("square, sum and mean") {
    auto s = two_params({3, 4}, {2, 2});
    check_op(s, [](Tape& t, Var a, Var b) {
      return concat_cols(sum(square(a)) * t.constant(Tensor({1, 1}, 1.0)), mean(b * b * b));
    });
  }
  SUBCASE("concat and slice") {
    auto s = two_params({3, 2}, {3, 4});
    check_op(s, [](Tape&, Var a, Var b) { return slice_cols(concat_cols(a, b), 1, 4) * slice_cols(b, 0, 4); });
  }
  SUBCASE("batched matvec") {
    auto s = two_params({3, 6}, {3, 2});
    check_op(s, [](Tape&, Var a, Var b) { return batched_matvec(a, b, 3); });
  }
}

TEST_CASE("tanh is accurate and saturates") {
  Tape t;
  const Var x = t.constant(Tensor::matrix(1, 6, {-800.0, -3.0, -1e-9, 0.0, 0.7, 800.0}));
  const Tensor y = tanh(x).value();
  for (std::size_t i = 0; i < 6; ++i) CHECK(y[i] == doctest::Approx(std::tanh(x.value()[i])).epsilon(1e-14));
  CHECK(y[0] == -1.0);
  CHECK(y[5] == 1.0);
}

TEST_CASE("replaying a graph gives bit-identical values and gradients") {
  Rng rng = make_rng(5);
  ParamStore s;
  const Mlp net = Mlp::create(s, "n", {3, 8, 8, 2}, rng);
  const Tensor input = random_tensor({4, 3}, rng);
  auto run = [&] {
    s.zero_grad();
    Tape t;
    const Var y = mlp_apply(net, s, t.constant(input));
    const Var loss = mean(square(y));
    t.backward(loss);
    return std::make_pair(y.value(), s.at("n.l0.w").grad);
  };
  const auto first = run();
  const auto second = run();
  CHECK(first.first == second.first);
  CHECK(first.second == second.second);
}

TEST_CASE("mlp: identity single layer passes inputs through") {
  ParamStore s;
  Rng rng = make_rng(0);
  const Mlp net = Mlp::create(s, "id", {2, 2}, rng);
  s.at("id.l0.w").value = Tensor::matrix(2, 2, {1, 0, 0, 1});
  s.at("id.l0.b").value = Tensor({1, 2});
  Tape t;
  const Tensor y = mlp_apply(net, s, t.constant(Tensor::matrix(1, 2, {1, 2}))).value();
  CHECK(y == Tensor::matrix(1, 2, {1, 2}));
}

TEST_CASE("mlp: zero weights output the final bias") {
  ParamStore s;
  Rng rng = make_rng(0);
  const Mlp net = Mlp::create(s, "z", {3, 5, 2}, rng);
  for (auto& [name, e] : s) std::fill(e.value.mutable_data().begin(), e.value.mutable_data().end(), 0.0);
  s.at("z.l1.b").value = Tensor::matrix(1, 2, {0.3, -0.7});
  Tape t;
  const Tensor y = mlp_apply(net, s, t.constant(Tensor::matrix(2, 3, {1, 2, 3, -4, 5, 9}))).value();
  CHECK(y == Tensor::matrix(2, 2, {0.3, -0.7, 0.3, -0.7}));
}

TEST_CASE("mlp: 2-16-1 tanh net matches a hand-rolled forward pass") {
  ParamStore s;
  Rng rng = make_rng(17);
  const Mlp net = Mlp::create(s, "h", {2, 16, 1}, rng);
  const double x0 = 0.4, x1 = -1.3;
  const Tensor& w0 = s.at("h.l0.w").value;
  const Tensor& b0 = s.at("h.l0.b").value;
  const Tensor& w1 = s.at("h.l1.w").value;
  const Tensor& b1 = s.at("h.l1.b").value;
  double expected = b1[0];
  for (std::size_t j = 0; j < 16; ++j) expected += std::tanh(x0 * w0.at(0, j) + x1 * w0.at(1, j) + b0[j]) * w1.at(j, 0);
  Tape t;
  const double got = mlp_apply(net, s, t.constant(Tensor::matrix(1, 2, {x0, x1}))).value().item();
  CHECK(got == doctest::Approx(expected).epsilon(1e-13));
}

TEST_CASE("mlp: input width mismatch and bind checks") {
  ParamStore s;
  Rng rng = make_rng(0);
  const Mlp net = Mlp::create(s, "m", {3, 4, 1}, rng);
  Tape t;
  CHECK_THROWS_AS(mlp_apply(net, s, t.constant(Tensor({2, 2}))), DimensionError);
  CHECK_NOTHROW(Mlp::bind(s, "m", {3, 4, 1}));
  CHECK_THROWS(Mlp::bind(s, "m", {3, 5, 1}));
  CHECK_THROWS(s.add("m.l0.w", Tensor({1, 1})));
}

TEST_CASE("adam: zero gradients leave parameters unchanged") {
  ParamStore s;
  s.add("p", Tensor::matrix(1, 3, {1, -2, 3}));
  adam_step(s, 0.1);
  CHECK(s.at("p").value == Tensor::matrix(1, 3, {1, -2, 3}));
}

TEST_CASE("adam: first step moves by -lr*sign(g)") {
  ParamStore s;
  s.add("p", Tensor::matrix(1, 2, {0.5, 0.5}));
  s.at("p").grad = Tensor::matrix(1, 2, {3.0, -0.01});
  adam_step(s, 0.01);
  CHECK(s.at("p").value[0] == doctest::Approx(0.49).epsilon(1e-7));
  CHECK(s.at("p").value[1] == doctest::Approx(0.51).epsilon(1e-5));
  CHECK(s.at("p").grad == Tensor({1, 2}));
}

TEST_CASE("adam: ten steps on w^2 decrease |w| monotonically") {
  ParamStore s;
  s.add("w", Tensor::scalar(1.0));
  // Independent scalar recursion of the same update.
  double w = 1.0, m = 0.0, v = 0.0;
  double previous = 1.0;
  for (int k = 1; k <= 10; ++k) {
    s.at("w").grad[0] = 2.0 * s.at("w").value[0];
    adam_step(s, 0.1);
    const double g = 2.0 * w;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    w -= 0.1 * (m / (1 - std::pow(0.9, k))) / (std::sqrt(v / (1 - std::pow(0.999, k))) + 1e-8);
    const double now = std::abs(s.at("w").value[0]);
    CHECK(now < previous);
    CHECK(s.at("w").value[0] == doctest::Approx(w).epsilon(1e-12));
    previous = now;
  }
}

TEST_CASE("adam: non-finite gradient names the parameter") {
  ParamStore s;
  s.add("alpha", Tensor::scalar(1.0));
  s.add("beta", Tensor::scalar(1.0));
  s.at("beta").grad[0] = std::nan("");
  try {
    adam_step(s, 0.1);
    FAIL("expected TrainingError");
  } catch (const TrainingError& e) {
    CHECK(e.param() == "beta");
  }
  CHECK(s.at("alpha").value[0] == 1.0);
}

TEST_CASE("checkpoint round-trips values and optimizer state") {
  ParamStore s;
  Rng rng = make_rng(3);
  Mlp::create(s, "net", {2, 3, 1}, rng);
  s.at("net.l0.w").grad = random_tensor({2, 3}, rng);
  adam_step(s, 0.01);
  const auto file = std::filesystem::temp_directory_path() / "cpsde_ckpt_test.json";
  save_checkpoint(file, s);
  const ParamStore back = load_checkpoint(file);
  CHECK(back.step_count() == s.step_count());
  for (const auto& [name, e] : s) {
    CHECK(back.at(name).value == e.value);
    CHECK(back.at(name).moment1 == e.moment1);
    CHECK(back.at(name).moment2 == e.moment2);
  }
  auto doc = store_to_json(s);
  CHECK(doc.at("format_version") == kCheckpointFormatVersion);
  doc["format_version"] = 999;
  CHECK_THROWS_AS(store_from_json(doc), IoError);
  CHECK_THROWS_AS(load_checkpoint(file.string() + ".missing"), IoError);
  std::filesystem::remove(file);
}

TEST_CASE("param store iterates in name order") {
  ParamStore s;
  s.add("zeta", Tensor::scalar(1));
  s.add("alpha", Tensor::scalar(2));
  s.add("mu", Tensor::scalar(3));
  std::vector<std::string> names;
  for (const auto& [name, e] : s) names.push_back(name);
  CHECK(names == std::vector<std::string>{"alpha", "mu", "zeta"});
}
