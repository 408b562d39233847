#include "cpsde/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cpsde/adam.hpp"
#include "cpsde/errors.hpp"
#include "cpsde/mmd.hpp"

namespace cpsde {
namespace {

void add_uniform(ParamStore& store, const std::string& name, Shape shape, double bound, Rng& rng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  Tensor t(shape);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = u(rng);
  store.add(name, std::move(t));
}

void require_same_layout(const PathBatch& a, const PathBatch& b, const char* what) {
  if (!(a.grid() == b.grid()) || a.channels() != b.channels())
    throw DimensionError(std::string(what) + ": batches differ in grid or channel count");
}

Tensor flatten(const PathBatch& b) { return b.values().reshaped({b.size(), b.n_steps() * b.channels()}); }

struct Scaling {
  std::vector<double> mean;
  std::vector<double> std;
};

Scaling channel_scaling(const PathBatch& b) {
  const std::size_t c = b.channels();
  Scaling s{std::vector<double>(c, 0.0), std::vector<double>(c, 0.0)};
  const double n = static_cast<double>(b.size() * b.n_steps());
  for (std::size_t i = 0; i < b.size(); ++i)
    for (std::size_t k = 0; k < b.n_steps(); ++k)
      for (std::size_t j = 0; j < c; ++j) s.mean[j] += b.at(i, k, j) / n;
  for (std::size_t i = 0; i < b.size(); ++i)
    for (std::size_t k = 0; k < b.n_steps(); ++k)
      for (std::size_t j = 0; j < c; ++j) {
        const double d = b.at(i, k, j) - s.mean[j];
        s.std[j] += d * d / n;
      }
  for (double& v : s.std) v = v > 0.0 ? std::sqrt(v) : 1.0;
  return s;
}

/// Step inputs (rows = selected paths, cols = channels) in scaled units.
std::vector<Tensor> step_inputs(const PathBatch& b, const std::vector<std::size_t>& rows, const Scaling& s) {
  std::vector<Tensor> out;
  out.reserve(b.n_steps());
  for (std::size_t k = 0; k < b.n_steps(); ++k) {
    Tensor t({rows.size(), b.channels()});
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (std::size_t j = 0; j < b.channels(); ++j) t.at(r, j) = (b.at(rows[r], k, j) - s.mean[j]) / s.std[j];
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<Var> as_constants(Tape& tape, const std::vector<Tensor>& xs) {
  std::vector<Var> out;
  out.reserve(xs.size());
  for (const Tensor& x : xs) out.push_back(tape.constant(x));
  return out;
}

std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

void shuffle_indices(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(v[i - 1], v[pick(rng)]);
  }
}

std::vector<std::vector<std::size_t>> minibatches(std::vector<std::size_t> order, std::size_t size, Rng& rng) {
  shuffle_indices(order, rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < order.size(); i += size)
    out.emplace_back(order.begin() + std::ptrdiff_t(i), order.begin() + std::ptrdiff_t(std::min(order.size(), i + size)));
  return out;
}

void metric_step(ParamStore& store, double lr) {
  try {
    adam_step(store, lr);
  } catch (const TrainingError& e) {
    throw MetricError(std::string("metric network diverged: ") + e.what());
  }
}

/// Mean one-step squared error (scaled units) of the increment predictor on `rows`.
Var prediction_loss(const RecurrentPredictor& net, ParamStore& store, Tape& tape, const std::vector<Tensor>& xs) {
  const std::vector<Var> in = as_constants(tape, std::vector<Tensor>(xs.begin(), xs.end() - 1));
  const std::vector<Var> heads = net.unroll(store, in);
  Var total;
  for (std::size_t k = 0; k + 1 < xs.size(); ++k) {
    const Var err = in[k] + heads[k] - tape.constant(xs[k + 1]);
    const Var term = mean(square(err));
    total = k == 0 ? term : total + term;
  }
  return (1.0 / static_cast<double>(xs.size() - 1)) * total;
}

Var classifier_loss(const RecurrentPredictor& net, ParamStore& store, Tape& tape, const std::vector<Tensor>& xs,
                    const Tensor& labels) {
  const std::vector<Var> heads = net.unroll(store, as_constants(tape, xs));
  const Var logit = heads.back();
  // label 1: softplus(-z); label 0: softplus(z). Equivalently softplus((1 - 2y) z).
  Tensor sign(labels.shape());
  for (std::size_t i = 0; i < labels.size(); ++i) sign[i] = 1.0 - 2.0 * labels[i];
  return mean(softplus(tape.constant(std::move(sign)) * logit));
}

}  // namespace

GruCell GruCell::create(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t hidden, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  add_uniform(store, prefix + ".wx", {in, 3 * hidden}, bound, rng);
  add_uniform(store, prefix + ".wh", {hidden, 2 * hidden}, bound, rng);
  add_uniform(store, prefix + ".wn", {hidden, hidden}, bound, rng);
  add_uniform(store, prefix + ".b", {1, 3 * hidden}, bound, rng);
  return GruCell{prefix, in, hidden};
}

Var GruCell::step(ParamStore& store, Var x, Var h) const {
  Tape& tape = *x.tape();
  const Var gx = add_row(matmul(x, tape.param(store, prefix + ".wx")), tape.param(store, prefix + ".b"));
  const Var gh = matmul(h, tape.param(store, prefix + ".wh"));
  const Var z = sigmoid(slice_cols(gx, 0, hidden) + slice_cols(gh, 0, hidden));
  const Var r = sigmoid(slice_cols(gx, hidden, hidden) + slice_cols(gh, hidden, hidden));
  const Var n = tanh(slice_cols(gx, 2 * hidden, hidden) + matmul(r * h, tape.param(store, prefix + ".wn")));
  return n + z * (h - n);
}

RecurrentPredictor RecurrentPredictor::create(ParamStore& store, const std::string& prefix, std::size_t in,
                                              std::size_t hidden, std::size_t out, Rng& rng) {
  RecurrentPredictor p;
  p.lower = GruCell::create(store, prefix + ".gru0", in, hidden, rng);
  p.upper = GruCell::create(store, prefix + ".gru1", hidden, hidden, rng);
  p.head_w = prefix + ".head.w";
  p.head_b = prefix + ".head.b";
  p.out = out;
  add_uniform(store, p.head_w, {hidden, out}, 1.0 / std::sqrt(static_cast<double>(hidden)), rng);
  store.add(p.head_b, Tensor({1, out}));
  return p;
}

std::vector<Var> RecurrentPredictor::unroll(ParamStore& store, const std::vector<Var>& inputs) const {
  if (inputs.empty()) throw DimensionError("unroll: empty input sequence");
  Tape& tape = *inputs.front().tape();
  const std::size_t rows = inputs.front().rows();
  Var h0 = tape.constant(Tensor({rows, lower.hidden}));
  Var h1 = tape.constant(Tensor({rows, upper.hidden}));
  const Var w = tape.param(store, head_w);
  const Var b = tape.param(store, head_b);
  std::vector<Var> out;
  out.reserve(inputs.size());
  for (const Var& x : inputs) {
    if (x.cols() != lower.in) throw DimensionError("unroll: input width differs from the cell input width");
    h0 = lower.step(store, x, h0);
    h1 = upper.step(store, h0, h1);
    out.push_back(add_row(matmul(h1, w), b));
  }
  return out;
}

double mmd_metric(const PathBatch& a, const PathBatch& b) {
  require_same_layout(a, b, "mmd_metric");
  if (a.size() < 2 || b.size() < 2) throw MetricError("mmd_metric needs at least two paths per batch");
  const Tensor fa = flatten(a);
  const Tensor fb = flatten(b);
  return mmd2_unbiased(fa, fb, median_bandwidth(fa, fb));
}

double last_value_error(const PathBatch& batch) {
  if (batch.n_steps() < 2 || batch.size() == 0) throw MetricError("last_value_error needs paths with two steps");
  double s = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i)
    for (std::size_t k = 0; k + 1 < batch.n_steps(); ++k)
      for (std::size_t j = 0; j < batch.channels(); ++j) {
        const double d = batch.at(i, k + 1, j) - batch.at(i, k, j);
        s += d * d;
      }
  return s / static_cast<double>(batch.size() * (batch.n_steps() - 1) * batch.channels());
}

double tstr_prediction(const PathBatch& train, const PathBatch& test, const MetricTraining& opts, std::uint64_t seed) {
  require_same_layout(train, test, "tstr_prediction");
  if (train.size() == 0 || test.size() == 0 || train.n_steps() < 2)
    throw MetricError("tstr_prediction needs non-empty batches with two steps");
  const std::size_t c = train.channels();
  // One shared scale keeps the squared error convertible back to data units.
  Scaling s = channel_scaling(train);
  const double scale = *std::max_element(s.std.begin(), s.std.end());
  std::fill(s.std.begin(), s.std.end(), scale);

  Rng init = make_rng(seed, {0});
  ParamStore store;
  const RecurrentPredictor net = RecurrentPredictor::create(store, "tstr", c, opts.hidden, c, init);

  Rng order = make_rng(seed, {1});
  for (std::size_t e = 0; e < opts.epochs; ++e)
    for (const auto& rows : minibatches(iota_indices(train.size()), opts.batch_size, order)) {
      Tape tape;
      const Var loss = prediction_loss(net, store, tape, step_inputs(train, rows, s));
      if (!std::isfinite(loss.value().item())) throw MetricError("tstr_prediction: non-finite training loss");
      tape.backward(loss);
      metric_step(store, opts.lr);
    }

  Tape tape;
  const double loss = prediction_loss(net, store, tape, step_inputs(test, iota_indices(test.size()), s)).value().item();
  if (!std::isfinite(loss)) throw MetricError("tstr_prediction: non-finite test loss");
  return loss * scale * scale;
}

double classification_score(const PathBatch& real, const PathBatch& synth, const MetricTraining& opts,
                            std::uint64_t seed) {
  require_same_layout(real, synth, "classification_score");
  if (real.size() == 0 || synth.size() == 0) throw MetricError("classification_score needs non-empty batches");
  const PathBatch pooled = PathBatch::concat(real, synth);
  std::vector<double> label(pooled.size(), 0.0);
  std::fill(label.begin(), label.begin() + std::ptrdiff_t(real.size()), 1.0);

  Rng split_rng = make_rng(seed, {2});
  std::vector<std::size_t> order = iota_indices(pooled.size());
  shuffle_indices(order, split_rng);
  const std::size_t n_train = std::max<std::size_t>(1, (7 * pooled.size()) / 10);
  if (n_train >= pooled.size()) throw MetricError("classification_score: too few paths for a held-out split");
  const std::vector<std::size_t> train_rows(order.begin(), order.begin() + std::ptrdiff_t(n_train));
  const std::vector<std::size_t> test_rows(order.begin() + std::ptrdiff_t(n_train), order.end());

  const Scaling s = channel_scaling(pooled.select(train_rows));
  auto labels_of = [&](const std::vector<std::size_t>& rows) {
    Tensor t({rows.size(), 1});
    for (std::size_t r = 0; r < rows.size(); ++r) t[r] = label[rows[r]];
    return t;
  };

  Rng init = make_rng(seed, {0});
  ParamStore store;
  const RecurrentPredictor net = RecurrentPredictor::create(store, "cls", pooled.channels(), opts.hidden, 1, init);

  Rng batch_rng = make_rng(seed, {1});
  for (std::size_t e = 0; e < opts.epochs; ++e)
    for (const auto& rows : minibatches(train_rows, opts.batch_size, batch_rng)) {
      Tape tape;
      const Var loss = classifier_loss(net, store, tape, step_inputs(pooled, rows, s), labels_of(rows));
      if (!std::isfinite(loss.value().item())) throw MetricError("classification_score: non-finite training loss");
      tape.backward(loss);
      metric_step(store, opts.lr);
    }

  Tape tape;
  const double loss =
      classifier_loss(net, store, tape, step_inputs(pooled, test_rows, s), labels_of(test_rows)).value().item();
  if (!std::isfinite(loss)) throw MetricError("classification_score: non-finite test loss");
  return loss;
}

}  // namespace cpsde
