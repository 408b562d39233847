#include <doctest.h>

#include <cmath>

#include "cpsde/errors.hpp"
#include "cpsde/metrics.hpp"
#include "cpsde/mmd.hpp"
#include "cpsde/sde.hpp"
#include "support.hpp"

using namespace cpsde;
using namespace cpsde::testing;

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::vector<double> row_of(const Tensor& t, std::size_t r) {
  return std::vector<double>(t.raw() + r * t.cols(), t.raw() + (r + 1) * t.cols());
}

// Plain-double GRU step for one input row, same gate layout as GruCell.
std::vector<double> gru_plain(const ParamStore& s, const GruCell& c, const std::vector<double>& x,
                              const std::vector<double>& h) {
  const Tensor& wx = s.at(c.prefix + ".wx").value;
  const Tensor& wh = s.at(c.prefix + ".wh").value;
  const Tensor& wn = s.at(c.prefix + ".wn").value;
  const Tensor& b = s.at(c.prefix + ".b").value;
  const std::size_t n = c.hidden;
  std::vector<double> gx(3 * n), out(n);
  for (std::size_t j = 0; j < 3 * n; ++j) {
    gx[j] = b[j];
    for (std::size_t i = 0; i < c.in; ++i) gx[j] += x[i] * wx.at(i, j);
  }
  std::vector<double> z(n), r(n);
  for (std::size_t j = 0; j < n; ++j) {
    double az = gx[j], ar = gx[n + j];
    for (std::size_t i = 0; i < n; ++i) {
      az += h[i] * wh.at(i, j);
      ar += h[i] * wh.at(i, n + j);
    }
    z[j] = sigmoid(az);
    r[j] = sigmoid(ar);
  }
  for (std::size_t j = 0; j < n; ++j) {
    double an = gx[2 * n + j];
    for (std::size_t i = 0; i < n; ++i) an += r[i] * h[i] * wn.at(i, j);
    const double cand = std::tanh(an);
    out[j] = cand + z[j] * (h[j] - cand);
  }
  return out;
}

PathBatch brownian_batch(std::size_t n, std::size_t steps, double dt, std::uint64_t seed) {
  const OuSpec spec{{}, {{0.0, 0.0, 1.0}}};
  return simulate_ou(spec, TimeGrid(0, dt, steps), n, 0.0, seed);
}

PathBatch shifted(const PathBatch& b, double by) {
  Tensor v = b.values();
  for (double& x : v.mutable_data()) x += by;
  return PathBatch(b.grid(), v);
}

MetricTraining quick() {
  MetricTraining m;
  m.hidden = 8;
  m.epochs = 10;
  return m;
}

}  // namespace

TEST_CASE("median bandwidth on hand-sized samples") {
  const Tensor a({2, 1}, std::vector<double>{0.0, 1.0});
  const Tensor odd({1, 1}, std::vector<double>{3.0});
  CHECK(median_bandwidth(a, odd) == 2.0);  // distances 1, 3, 2
  const Tensor even({2, 1}, std::vector<double>{3.0, 6.0});
  CHECK(median_bandwidth(a, even) == 3.0);  // 1 2 3 3 5 6
  const Tensor same({2, 1}, 4.0);
  CHECK(median_bandwidth(same, same) == 1.0);
  CHECK_THROWS_AS(median_bandwidth(a, Tensor({2, 2})), DimensionError);
}

TEST_CASE("MMD estimators match explicit kernel sums") {
  Rng rng = make_rng(31);
  const Tensor a = random_tensor({5, 3}, rng), b = random_tensor({4, 3}, rng, 2.0);
  const double h = 1.3;
  auto k = [&](const Tensor& p, std::size_t i, const Tensor& q, std::size_t j) {
    double d = 0.0;
    for (std::size_t c = 0; c < 3; ++c) d += (p.at(i, c) - q.at(j, c)) * (p.at(i, c) - q.at(j, c));
    return std::exp(-d / (2 * h * h));
  };
  double xx = 0, xx_off = 0, yy = 0, yy_off = 0, xy = 0;
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) (i == j ? xx : xx_off) += k(a, i, a, j);
  xx += xx_off;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) (i == j ? yy : yy_off) += k(b, i, b, j);
  yy += yy_off;
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 4; ++j) xy += k(a, i, b, j);
  CHECK(mmd2_biased(a, b, h) == doctest::Approx(xx / 25 + yy / 16 - 2 * xy / 20).epsilon(1e-13));
  CHECK(mmd2_unbiased(a, b, h) == doctest::Approx(xx_off / 20 + yy_off / 12 - 2 * xy / 20).epsilon(1e-13));
  CHECK(mmd2_biased(a, a, h) == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
}

TEST_CASE("path MMD: symmetry, permutation invariance, identical batches") {
  Rng rng = make_rng(32);
  const PathBatch a(TimeGrid(0, 1, 6), random_tensor({20, 6, 2}, rng));
  const PathBatch b(TimeGrid(0, 1, 6), random_tensor({15, 6, 2}, rng, 1.5));
  const double ab = mmd_metric(a, b);
  CHECK(mmd_metric(b, a) == doctest::Approx(ab).epsilon(1e-13));
  std::vector<std::size_t> perm(20);
  for (std::size_t i = 0; i < 20; ++i) perm[i] = (7 * i + 3) % 20;
  CHECK(mmd_metric(a.select(perm), b) == doctest::Approx(ab).epsilon(1e-12));
  CHECK(mmd_metric(a, a) <= 1e-12);
  CHECK_THROWS_AS(mmd_metric(a.select({0}), b), MetricError);
  CHECK_THROWS_AS(mmd_metric(a, PathBatch(TimeGrid(0, 1, 5), random_tensor({4, 5, 2}, rng))), DimensionError);
}

TEST_CASE("path MMD separates shifted distributions") {
  const PathBatch a = brownian_batch(100, 10, 0.1, 33), b = brownian_batch(100, 10, 0.1, 34);
  const double same = mmd_metric(a, b);
  const double apart = mmd_metric(a, shifted(b, 1.0));
  CHECK(std::abs(same) < 0.05);
  CHECK(apart > 10 * std::abs(same));
}

TEST_CASE("last-value error") {
  const PathBatch tiny(TimeGrid(0, 1, 3), Tensor({1, 3, 1}, std::vector<double>{0.0, 1.0, 3.0}));
  CHECK(last_value_error(tiny) == doctest::Approx(2.5));  // (1 + 4) / 2
  // Brownian increments have variance dt.
  const PathBatch w = brownian_batch(2000, 21, 0.5, 35);
  const double e = last_value_error(w);
  CHECK(e == doctest::Approx(0.5).epsilon(0.03));
}

TEST_CASE("GRU cell matches a plain evaluation and has correct gradients") {
  ParamStore s;
  Rng rng = make_rng(36);
  const GruCell cell = GruCell::create(s, "g", 2, 3, rng);
  const Tensor x = random_tensor({4, 2}, rng), h = random_tensor({4, 3}, rng, 0.5);
  Tape tape;
  const Var out = cell.step(s, tape.constant(x), tape.constant(h));
  for (std::size_t r = 0; r < 4; ++r) {
    const std::vector<double> want = gru_plain(s, cell, row_of(x, r), row_of(h, r));
    for (std::size_t j = 0; j < 3; ++j) CHECK(out.value().at(r, j) == doctest::Approx(want[j]).epsilon(1e-13));
  }

  ParamStore ps;
  const RecurrentPredictor pred = RecurrentPredictor::create(ps, "p", 1, 3, 1, rng);
  std::vector<Tensor> xs;
  for (int k = 0; k < 4; ++k) xs.push_back(random_tensor({2, 1}, rng));
  const GradCheck r = gradient_check(ps, [&](Tape& t) {
    std::vector<Var> in;
    for (const Tensor& v : xs) in.push_back(t.constant(v));
    const std::vector<Var> outs = pred.unroll(ps, in);
    Var total = sum(outs[0] * outs[0]);
    for (std::size_t k = 1; k < outs.size(); ++k) total = total + sum(outs[k] * outs[k]);
    return total;
  });
  INFO("worst " << r.worst);
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("TSTR on constant paths is essentially exact") {
  const PathBatch c(TimeGrid(0, 1, 12), Tensor({40, 12, 1}, 2.5));
  const double e = tstr_prediction(c, c, quick(), 1);
  CHECK(e < 1e-3);
  CHECK(e >= 0.0);
}

TEST_CASE("TSTR on a random walk stays near the last-value error and is deterministic") {
  const PathBatch train = brownian_batch(200, 16, 0.25, 37), test = brownian_batch(200, 16, 0.25, 38);
  const double e = tstr_prediction(train, test, quick(), 2);
  CHECK(e == tstr_prediction(train, test, quick(), 2));
  const double base = last_value_error(test);
  CHECK(e > 0.8 * base);
  CHECK(e < 1.3 * base);
}

TEST_CASE("classification score: separable versus indistinguishable") {
  const PathBatch a = brownian_batch(120, 10, 0.1, 39), b = brownian_batch(120, 10, 0.1, 40);
  const double apart = classification_score(a, shifted(b, 3.0), quick(), 3);
  CHECK(apart < 0.1);
  const double same = classification_score(a, b, quick(), 3);
  CHECK(same == classification_score(a, b, quick(), 3));
  CHECK(same > 0.5);
  CHECK(same < 0.9);
}
