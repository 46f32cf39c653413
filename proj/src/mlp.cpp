#include "posesynth/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "posesynth/errors.hpp"
#include "posesynth/random.hpp"

namespace posesynth {

namespace {

Dense make_dense(int in, int out) { return {in, out, std::vector<double>(std::size_t(in) * out, 0.0), std::vector<double>(std::size_t(out), 0.0)}; }

BatchNorm make_bn(int n) {
  return {n, std::vector<double>(std::size_t(n), 1.0), std::vector<double>(std::size_t(n), 0.0),
          std::vector<double>(std::size_t(n), 0.0), std::vector<double>(std::size_t(n), 1.0)};
}

MlpModel zero_shaped() {
  MlpModel m;
  m.l1 = make_dense(kNumFeatures, kHidden1);
  m.bn1 = make_bn(kHidden1);
  m.l2 = make_dense(kHidden1, kHidden2);
  m.bn2 = make_bn(kHidden2);
  m.l3 = make_dense(kHidden2, kNumCategories);
  return m;
}

Matrix affine(const Dense& d, const Matrix& x) {
  Matrix z(x.rows, d.out);
  for (int n = 0; n < x.rows; ++n) {
    const double* xr = &x.data[std::size_t(n) * x.cols];
    for (int o = 0; o < d.out; ++o) {
      const double* wr = &d.w[std::size_t(o) * d.in];
      double s = d.b[std::size_t(o)];
      for (int i = 0; i < d.in; ++i) s += wr[i] * xr[i];
      z(n, o) = s;
    }
  }
  return z;
}

struct BlockCache {
  Matrix z, xhat, y, mask, h;
  std::vector<double> mean, var;
};

// affine -> BN -> ReLU -> dropout
Matrix hidden_block(const Dense& d, const BatchNorm& bn, const Matrix& x, Mode mode, double p, Rng& rng,
                    BlockCache& c) {
  c.z = affine(d, x);
  const int n = x.rows, k = d.out;
  if (mode == Mode::kTrain) {
    c.mean.assign(std::size_t(k), 0.0);
    c.var.assign(std::size_t(k), 0.0);
    for (int r = 0; r < n; ++r)
      for (int j = 0; j < k; ++j) c.mean[std::size_t(j)] += c.z(r, j);
    for (auto& v : c.mean) v /= n;
    for (int r = 0; r < n; ++r)
      for (int j = 0; j < k; ++j) {
        const double e = c.z(r, j) - c.mean[std::size_t(j)];
        c.var[std::size_t(j)] += e * e;
      }
    for (auto& v : c.var) v /= n;
  } else {
    c.mean = bn.running_mean;
    c.var = bn.running_var;
  }
  c.xhat = Matrix(n, k);
  c.y = Matrix(n, k);
  c.mask = Matrix(n, k);
  c.h = Matrix(n, k);
  const double keep_scale = p > 0.0 ? 1.0 / (1.0 - p) : 1.0;
  for (int r = 0; r < n; ++r)
    for (int j = 0; j < k; ++j) {
      const std::size_t u = std::size_t(j);
      const double xh = (c.z(r, j) - c.mean[u]) / std::sqrt(c.var[u] + kBnEpsilon);
      c.xhat(r, j) = xh;
      c.y(r, j) = bn.gamma[u] * xh + bn.beta[u];
      double mask = 1.0;
      if (mode == Mode::kTrain && p > 0.0) mask = rng.uniform() < p ? 0.0 : keep_scale;
      c.mask(r, j) = mask;
      c.h(r, j) = std::max(0.0, c.y(r, j)) * mask;
    }
  return c.h;
}

struct Cache {
  BlockCache b1, b2;
  Matrix logits;
};

Matrix run(const MlpModel& m, const Matrix& x, Mode mode, std::uint64_t seed, Cache& c) {
  if (x.cols != kNumFeatures) throw ModelError("input must have " + std::to_string(kNumFeatures) + " features");
  if (mode == Mode::kTrain && x.rows < 2) throw ModelError("train-mode forward needs a batch of at least 2");
  Rng rng(seed);
  const Matrix& h1 = hidden_block(m.l1, m.bn1, x, mode, m.dropout, rng, c.b1);
  const Matrix& h2 = hidden_block(m.l2, m.bn2, h1, mode, m.dropout, rng, c.b2);
  c.logits = affine(m.l3, h2);
  return c.logits;
}

void affine_backward(const Dense& d, const Matrix& x, const Matrix& dz, Dense& g, Matrix* dx) {
  for (int n = 0; n < dz.rows; ++n)
    for (int o = 0; o < d.out; ++o) {
      const double v = dz(n, o);
      if (v == 0.0) continue;
      g.b[std::size_t(o)] += v;
      double* gw = &g.w[std::size_t(o) * d.in];
      for (int i = 0; i < d.in; ++i) gw[i] += v * x(n, i);
    }
  if (!dx) return;
  *dx = Matrix(dz.rows, d.in);
  for (int n = 0; n < dz.rows; ++n)
    for (int o = 0; o < d.out; ++o) {
      const double v = dz(n, o);
      if (v == 0.0) continue;
      const double* wr = &d.w[std::size_t(o) * d.in];
      for (int i = 0; i < d.in; ++i) (*dx)(n, i) += v * wr[i];
    }
}

// Gradient w.r.t. the block's pre-BN activations z, given dL/dh.
Matrix block_backward(const BatchNorm& bn, const BlockCache& c, const Matrix& dh, Mode mode, BatchNorm& g) {
  const int n = dh.rows, k = dh.cols;
  Matrix dxhat(n, k);
  for (int r = 0; r < n; ++r)
    for (int j = 0; j < k; ++j) {
      const std::size_t u = std::size_t(j);
      const double dy = c.y(r, j) > 0.0 ? dh(r, j) * c.mask(r, j) : 0.0;
      g.gamma[u] += dy * c.xhat(r, j);
      g.beta[u] += dy;
      dxhat(r, j) = dy * bn.gamma[u];
    }
  Matrix dz(n, k);
  for (int j = 0; j < k; ++j) {
    const std::size_t u = std::size_t(j);
    const double inv = 1.0 / std::sqrt(c.var[u] + kBnEpsilon);
    if (mode == Mode::kEval) {
      for (int r = 0; r < n; ++r) dz(r, j) = dxhat(r, j) * inv;
      continue;
    }
    double s1 = 0.0, s2 = 0.0;
    for (int r = 0; r < n; ++r) {
      s1 += dxhat(r, j);
      s2 += dxhat(r, j) * c.xhat(r, j);
    }
    for (int r = 0; r < n; ++r) dz(r, j) = inv / n * (n * dxhat(r, j) - s1 - c.xhat(r, j) * s2);
  }
  return dz;
}

void zero_fill(MlpModel& m) {
  for (auto* t : parameter_tensors(m)) std::fill(t->begin(), t->end(), 0.0);
}

std::vector<double> row(const Matrix& x, int r) {
  return {x.data.begin() + std::ptrdiff_t(r) * x.cols, x.data.begin() + std::ptrdiff_t(r + 1) * x.cols};
}

void check_labels(const Matrix& x, const std::vector<int>& y) {
  if (std::size_t(x.rows) != y.size()) throw ModelError("feature and label counts differ");
  for (std::size_t i = 0; i < x.data.size(); ++i)
    if (!std::isfinite(x.data[i]))
      throw ModelError("non-finite feature " + std::to_string(i % kNumFeatures) + " in sample " +
                       std::to_string(i / kNumFeatures));
  for (int v : y)
    if (v < 0 || v >= kNumCategories) throw ModelError("label " + std::to_string(v) + " outside [0, 9]");
}

ojson vec_json(const std::vector<double>& v) { return ojson(v); }

std::vector<double> vec_from(const ojson& j, const char* key, std::size_t n) {
  if (!j.contains(key) || !j[key].is_array() || j[key].size() != n)
    throw ModelError(std::string("model file: '") + key + "' must be an array of " + std::to_string(n) + " numbers");
  return j[key].get<std::vector<double>>();
}

std::int8_t quantize_value(double x, const ActivationQuant& a) {
  const long q = std::lround(x / a.scale) + a.zero_point;
  return std::int8_t(std::clamp(q, -128L, 127L));
}

}  // namespace

Matrix to_matrix(const std::vector<FeatureVector>& features) {
  Matrix x(int(features.size()), kNumFeatures);
  for (std::size_t n = 0; n < features.size(); ++n)
    std::copy(features[n].begin(), features[n].end(), x.data.begin() + std::ptrdiff_t(n * kNumFeatures));
  return x;
}

long MlpModel::param_count() const {
  long n = 0;
  for (const auto* t : parameter_tensors(*this)) n += long(t->size());
  return n;
}

void MlpModel::validate() const {
  const MlpModel ref = zero_shaped();
  const auto a = parameter_tensors(*this), b = parameter_tensors(ref);
  const auto names = parameter_names();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i]->size() != b[i]->size())
      throw ModelError(std::string("tensor ") + names[i] + " has " + std::to_string(a[i]->size()) +
                       " values, expected " + std::to_string(b[i]->size()));
    for (double v : *a[i])
      if (!std::isfinite(v)) throw ModelError(std::string("tensor ") + names[i] + " holds a non-finite value");
  }
  if (param_count() != kParamCount) throw ModelError("parameter count " + std::to_string(param_count()));
  for (const BatchNorm* bn : {&bn1, &bn2}) {
    if (bn->running_mean.size() != std::size_t(bn->size) || bn->running_var.size() != std::size_t(bn->size))
      throw ModelError("batch-norm running statistics have the wrong size");
    for (double v : bn->running_var)
      if (!(v > 0.0) || !std::isfinite(v)) throw ModelError("batch-norm running variance must be positive");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ModelError("dropout must be in [0, 1)");
}

std::vector<std::vector<double>*> parameter_tensors(MlpModel& m) {
  return {&m.l1.w, &m.l1.b, &m.bn1.gamma, &m.bn1.beta, &m.l2.w, &m.l2.b,
          &m.bn2.gamma, &m.bn2.beta, &m.l3.w, &m.l3.b};
}

std::vector<const std::vector<double>*> parameter_tensors(const MlpModel& m) {
  return {&m.l1.w, &m.l1.b, &m.bn1.gamma, &m.bn1.beta, &m.l2.w, &m.l2.b,
          &m.bn2.gamma, &m.bn2.beta, &m.l3.w, &m.l3.b};
}

std::vector<const char*> parameter_names() {
  return {"l1.w", "l1.b", "bn1.gamma", "bn1.beta", "l2.w", "l2.b", "bn2.gamma", "bn2.beta", "l3.w", "l3.b"};
}

MlpModel init_model(std::uint64_t seed) {
  MlpModel m = zero_shaped();
  Rng rng(seed);
  for (Dense* d : {&m.l1, &m.l2, &m.l3}) {
    const double limit = std::sqrt(6.0 / d->in);
    for (auto& w : d->w) w = rng.uniform(-limit, limit);
  }
  m.validate();
  return m;
}

Matrix forward(const MlpModel& m, const Matrix& x, Mode mode, std::uint64_t dropout_seed) {
  Cache c;
  return run(m, x, mode, dropout_seed, c);
}

std::vector<double> softmax(const std::vector<double>& logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) sum += p[i] = std::exp(logits[i] - mx);
  for (auto& v : p) v /= sum;
  return p;
}

double cross_entropy(const Matrix& logits, const std::vector<int>& labels) {
  double loss = 0.0;
  for (int n = 0; n < logits.rows; ++n) {
    double mx = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < logits.cols; ++k) mx = std::max(mx, logits(n, k));
    double sum = 0.0;
    for (int k = 0; k < logits.cols; ++k) sum += std::exp(logits(n, k) - mx);
    loss += mx + std::log(sum) - logits(n, labels[std::size_t(n)]);
  }
  return loss / logits.rows;
}

LossAndGradient loss_and_gradient(const MlpModel& m, const Matrix& x, const std::vector<int>& labels, Mode mode,
                                  std::uint64_t dropout_seed) {
  check_labels(x, labels);
  Cache c;
  const Matrix logits = run(m, x, mode, dropout_seed, c);
  LossAndGradient out;
  out.loss = cross_entropy(logits, labels);
  out.grad = zero_shaped();
  zero_fill(out.grad);

  const int n = x.rows;
  Matrix dlogits(n, kNumCategories);
  for (int r = 0; r < n; ++r) {
    const auto p = softmax(row(logits, r));
    for (int k = 0; k < kNumCategories; ++k)
      dlogits(r, k) = (p[std::size_t(k)] - (labels[std::size_t(r)] == k ? 1.0 : 0.0)) / n;
  }
  Matrix dh2, dh1;
  affine_backward(m.l3, c.b2.h, dlogits, out.grad.l3, &dh2);
  const Matrix dz2 = block_backward(m.bn2, c.b2, dh2, mode, out.grad.bn2);
  affine_backward(m.l2, c.b1.h, dz2, out.grad.l2, &dh1);
  const Matrix dz1 = block_backward(m.bn1, c.b1, dh1, mode, out.grad.bn1);
  affine_backward(m.l1, x, dz1, out.grad.l1, nullptr);
  if (mode == Mode::kTrain) {
    out.batch_mean1 = c.b1.mean;
    out.batch_var1 = c.b1.var;
    out.batch_mean2 = c.b2.mean;
    out.batch_var2 = c.b2.var;
  }
  return out;
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (batch_size < 2) throw ConfigError("batch size must be at least 2");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && epsilon > 0.0))
    throw ConfigError("Adam betas must be in [0, 1) and epsilon positive");
}

TrainHistory train(MlpModel& m, const Matrix& x, const std::vector<int>& y, const Matrix& val_x,
                   const std::vector<int>& val_y, const TrainConfig& cfg) {
  cfg.validate();
  m.validate();
  check_labels(x, y);
  check_labels(val_x, val_y);
  if (x.rows < 2) throw ModelError("training needs at least 2 samples");

  TrainHistory hist;
  hist.initial_loss = cross_entropy(forward(m, x, Mode::kEval), y);

  auto params = parameter_tensors(m);
  std::vector<std::vector<double>> m1, m2;
  for (auto* t : params) {
    m1.emplace_back(t->size(), 0.0);
    m2.emplace_back(t->size(), 0.0);
  }
  long step = 0;
  std::vector<int> order(std::size_t(x.rows));
  for (int e = 0; e < cfg.epochs; ++e) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = int(i);
    Rng shuffle(derive_seed(cfg.seed, {std::uint64_t(e)}));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += std::size_t(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + std::size_t(cfg.batch_size));
      if (end - start < 2) continue;
      Matrix bx(int(end - start), kNumFeatures);
      std::vector<int> by(end - start);
      for (std::size_t i = start; i < end; ++i) {
        std::copy_n(&x.data[std::size_t(order[i]) * kNumFeatures], kNumFeatures,
                    &bx.data[(i - start) * kNumFeatures]);
        by[i - start] = y[std::size_t(order[i])];
      }
      const auto lg = loss_and_gradient(m, bx, by, Mode::kTrain,
                                        derive_seed(cfg.seed, {std::uint64_t(e), std::uint64_t(batches), 0xd0u}));
      if (!std::isfinite(lg.loss))
        throw ModelError("non-finite loss at epoch " + std::to_string(e + 1) + ", batch " + std::to_string(batches));
      loss_sum += lg.loss;
      ++batches;

      ++step;
      const double c1 = 1.0 - std::pow(cfg.beta1, double(step)), c2 = 1.0 - std::pow(cfg.beta2, double(step));
      const auto grads = parameter_tensors(lg.grad);
      for (std::size_t t = 0; t < params.size(); ++t)
        for (std::size_t i = 0; i < params[t]->size(); ++i) {
          const double g = (*grads[t])[i];
          m1[t][i] = cfg.beta1 * m1[t][i] + (1.0 - cfg.beta1) * g;
          m2[t][i] = cfg.beta2 * m2[t][i] + (1.0 - cfg.beta2) * g * g;
          (*params[t])[i] -= cfg.lr * (m1[t][i] / c1) / (std::sqrt(m2[t][i] / c2) + cfg.epsilon);
        }
      const double mom = m.bn_momentum;
      for (std::size_t j = 0; j < std::size_t(kHidden1); ++j) {
        m.bn1.running_mean[j] = mom * m.bn1.running_mean[j] + (1.0 - mom) * lg.batch_mean1[j];
        m.bn1.running_var[j] = mom * m.bn1.running_var[j] + (1.0 - mom) * lg.batch_var1[j];
      }
      for (std::size_t j = 0; j < std::size_t(kHidden2); ++j) {
        m.bn2.running_mean[j] = mom * m.bn2.running_mean[j] + (1.0 - mom) * lg.batch_mean2[j];
        m.bn2.running_var[j] = mom * m.bn2.running_var[j] + (1.0 - mom) * lg.batch_var2[j];
      }
    }
    EpochMetrics em;
    em.epoch = e + 1;
    em.train_loss = batches ? loss_sum / batches : 0.0;
    em.train_accuracy = accuracy(m, x, y);
    if (val_x.rows > 0) {
      em.val_loss = cross_entropy(forward(m, val_x, Mode::kEval), val_y);
      em.val_accuracy = accuracy(m, val_x, val_y);
    }
    hist.epochs.push_back(em);
  }
  return hist;
}

Prediction predict_from_logits(const std::vector<double>& logits) {
  const auto p = softmax(logits);
  std::size_t best = 0;
  for (std::size_t k = 1; k < logits.size(); ++k)
    if (logits[k] > logits[best]) best = k;
  return {int(best), p[best]};
}

Prediction predict(const MlpModel& m, const FeatureVector& f) {
  const Matrix logits = forward(m, to_matrix({f}), Mode::kEval);
  return predict_from_logits(row(logits, 0));
}

double accuracy(const MlpModel& m, const Matrix& x, const std::vector<int>& y) {
  if (x.rows == 0) return 0.0;
  const Matrix logits = forward(m, x, Mode::kEval);
  long hits = 0;
  for (int r = 0; r < x.rows; ++r) hits += predict_from_logits(row(logits, r)).category == y[std::size_t(r)];
  return double(hits) / x.rows;
}

ojson model_to_json(const MlpModel& m) {
  ojson j;
  j["architecture"] = {kNumFeatures, kHidden1, kHidden2, kNumCategories};
  j["dropout"] = m.dropout;
  j["bn_momentum"] = m.bn_momentum;
  j["bn_epsilon"] = kBnEpsilon;
  auto dense = [](const Dense& d) { return ojson{{"w", vec_json(d.w)}, {"b", vec_json(d.b)}}; };
  auto bn = [](const BatchNorm& b) {
    return ojson{{"gamma", vec_json(b.gamma)},
                 {"beta", vec_json(b.beta)},
                 {"running_mean", vec_json(b.running_mean)},
                 {"running_var", vec_json(b.running_var)}};
  };
  j["l1"] = dense(m.l1);
  j["bn1"] = bn(m.bn1);
  j["l2"] = dense(m.l2);
  j["bn2"] = bn(m.bn2);
  j["l3"] = dense(m.l3);
  return j;
}

MlpModel model_from_json(const ojson& j) {
  MlpModel m = zero_shaped();
  try {
    if (j.at("architecture") != ojson({kNumFeatures, kHidden1, kHidden2, kNumCategories}))
      throw ModelError("model file: unsupported architecture " + j.at("architecture").dump());
    m.dropout = j.at("dropout").get<double>();
    m.bn_momentum = j.at("bn_momentum").get<double>();
    auto dense = [](const ojson& d, Dense& out) {
      out.w = vec_from(d, "w", out.w.size());
      out.b = vec_from(d, "b", out.b.size());
    };
    auto bn = [](const ojson& b, BatchNorm& out) {
      const std::size_t n = std::size_t(out.size);
      out.gamma = vec_from(b, "gamma", n);
      out.beta = vec_from(b, "beta", n);
      out.running_mean = vec_from(b, "running_mean", n);
      out.running_var = vec_from(b, "running_var", n);
    };
    dense(j.at("l1"), m.l1);
    bn(j.at("bn1"), m.bn1);
    dense(j.at("l2"), m.l2);
    bn(j.at("bn2"), m.bn2);
    dense(j.at("l3"), m.l3);
  } catch (const ojson::exception& e) {
    throw ModelError(std::string("model file: ") + e.what());
  }
  m.validate();
  return m;
}

// ---- INT8 ----

QuantizedTensor quantize_symmetric(const std::vector<double>& values, double max_abs) {
  QuantizedTensor t;
  t.scale = max_abs > 0.0 ? max_abs / 127.0 : 1.0;
  t.q.reserve(values.size());
  for (double v : values) t.q.push_back(std::int8_t(std::clamp(std::lround(v / t.scale), -127L, 127L)));
  return t;
}

std::vector<double> dequantize(const QuantizedTensor& t) {
  std::vector<double> out;
  out.reserve(t.q.size());
  for (auto q : t.q) out.push_back(q * t.scale);
  return out;
}

ActivationQuant calibrate_activation(double min, double max) {
  min = std::min(min, 0.0);
  max = std::max(max, 0.0);
  if (max == min) return {1.0, 0};
  ActivationQuant a;
  a.scale = (max - min) / 255.0;
  a.zero_point = int(std::clamp(std::lround(-128.0 - min / a.scale), -128L, 127L));
  return a;
}

FixedPointMultiplier make_multiplier(double real) {
  if (!(real > 0.0)) return {0, 0};
  int exp = 0;
  const double mant = std::frexp(real, &exp);
  std::int64_t m0 = std::llround(mant * double(1LL << 31));
  if (m0 == (1LL << 31)) {
    m0 /= 2;
    ++exp;
  }
  return {std::int32_t(m0), exp};
}

std::int32_t apply_multiplier(std::int64_t acc, const FixedPointMultiplier& m) {
  const std::int64_t prod = acc * std::int64_t(m.m0);
  const int right = 31 - m.shift;
  if (right <= 0) return std::int32_t(prod << -right);
  const std::int64_t half = std::int64_t(1) << (right - 1);
  // Round half away from zero.
  const std::int64_t r = prod >= 0 ? (prod + half) >> right : -((-prod + half) >> right);
  return std::int32_t(std::clamp<std::int64_t>(r, INT32_MIN, INT32_MAX));
}

FoldedModel fold_batch_norm(const MlpModel& m) {
  FoldedModel f{m.l1, m.l2, m.l3};
  auto fold = [](Dense& d, const BatchNorm& bn) {
    for (int o = 0; o < d.out; ++o) {
      const std::size_t u = std::size_t(o);
      const double g = bn.gamma[u] / std::sqrt(bn.running_var[u] + kBnEpsilon);
      for (int i = 0; i < d.in; ++i) d.w[u * std::size_t(d.in) + std::size_t(i)] *= g;
      d.b[u] = (d.b[u] - bn.running_mean[u]) * g + bn.beta[u];
    }
  };
  fold(f.l1, m.bn1);
  fold(f.l2, m.bn2);
  return f;
}

namespace {

std::vector<double> dense_forward(const Dense& d, const std::vector<double>& x, bool relu) {
  std::vector<double> out(std::size_t(d.out));
  for (int o = 0; o < d.out; ++o) {
    double s = d.b[std::size_t(o)];
    for (int i = 0; i < d.in; ++i) s += d.w[std::size_t(o) * std::size_t(d.in) + std::size_t(i)] * x[std::size_t(i)];
    out[std::size_t(o)] = relu ? std::max(0.0, s) : s;
  }
  return out;
}

}  // namespace

std::vector<double> forward_folded(const FoldedModel& f, const FeatureVector& x) {
  const std::vector<double> in(x.begin(), x.end());
  return dense_forward(f.l3, dense_forward(f.l2, dense_forward(f.l1, in, true), true), false);
}

QuantizedModel quantize_int8(const MlpModel& m, const std::vector<FeatureVector>& calibration) {
  if (calibration.empty()) throw ModelError("INT8 calibration set is empty");
  m.validate();
  const FoldedModel f = fold_batch_norm(m);
  double in_lo = 0, in_hi = 0, h1_lo = 0, h1_hi = 0, h2_lo = 0, h2_hi = 0;
  for (const auto& x : calibration) {
    const std::vector<double> in(x.begin(), x.end());
    const auto h1 = dense_forward(f.l1, in, true);
    const auto h2 = dense_forward(f.l2, h1, true);
    for (double v : in) in_lo = std::min(in_lo, v), in_hi = std::max(in_hi, v);
    for (double v : h1) h1_lo = std::min(h1_lo, v), h1_hi = std::max(h1_hi, v);
    for (double v : h2) h2_lo = std::min(h2_lo, v), h2_hi = std::max(h2_hi, v);
  }
  const ActivationQuant acts[3] = {calibrate_activation(in_lo, in_hi), calibrate_activation(h1_lo, h1_hi),
                                   calibrate_activation(h2_lo, h2_hi)};
  const Dense* dense[3] = {&f.l1, &f.l2, &f.l3};
  QuantizedModel q;
  for (int l = 0; l < 3; ++l) {
    const Dense& d = *dense[l];
    QuantizedLayer ql;
    ql.in = d.in;
    ql.out = d.out;
    double max_abs = 0.0;
    for (double w : d.w) max_abs = std::max(max_abs, std::abs(w));
    ql.w = quantize_symmetric(d.w, max_abs);
    ql.input = acts[l];
    const double acc_scale = ql.w.scale * ql.input.scale;
    for (double b : d.b) ql.bias.push_back(std::int32_t(std::llround(b / acc_scale)));
    if (l < 2) {
      ql.output = acts[l + 1];
      ql.requant = make_multiplier(acc_scale / ql.output.scale);
    }
    q.layers.push_back(std::move(ql));
  }
  return q;
}

std::vector<double> forward_quantized(const QuantizedModel& q, const FeatureVector& x) {
  if (q.layers.size() != 3) throw ModelError("quantized model must have 3 layers");
  std::vector<std::int8_t> act;
  act.reserve(x.size());
  for (double v : x) act.push_back(quantize_value(v, q.layers[0].input));
  for (std::size_t l = 0; l < 3; ++l) {
    const QuantizedLayer& ql = q.layers[l];
    std::vector<std::int32_t> acc(std::size_t(ql.out));
    for (int o = 0; o < ql.out; ++o) {
      std::int32_t s = ql.bias[std::size_t(o)];
      const std::int8_t* w = &ql.w.q[std::size_t(o) * std::size_t(ql.in)];
      for (int i = 0; i < ql.in; ++i) s += std::int32_t(w[i]) * (std::int32_t(act[std::size_t(i)]) - ql.input.zero_point);
      acc[std::size_t(o)] = s;
    }
    if (l == 2) {
      std::vector<double> logits;
      for (auto a : acc) logits.push_back(a * ql.w.scale * ql.input.scale);
      return logits;
    }
    act.assign(acc.size(), 0);
    for (std::size_t o = 0; o < acc.size(); ++o) {
      // ReLU: real 0 sits at the zero point.
      const std::int64_t v = std::int64_t(apply_multiplier(acc[o], ql.requant)) + ql.output.zero_point;
      act[o] = std::int8_t(std::clamp<std::int64_t>(v, ql.output.zero_point, 127));
    }
  }
  return {};
}

Prediction predict(const QuantizedModel& q, const FeatureVector& f) { return predict_from_logits(forward_quantized(q, f)); }

ojson quantized_to_json(const QuantizedModel& q) {
  ojson layers = ojson::array();
  for (const auto& l : q.layers) {
    ojson j;
    j["in"] = l.in;
    j["out"] = l.out;
    j["weight_scale"] = l.w.scale;
    std::vector<int> w(l.w.q.begin(), l.w.q.end());
    j["weights"] = w;
    j["bias"] = l.bias;
    j["input"] = {{"scale", l.input.scale}, {"zero_point", l.input.zero_point}};
    j["output"] = {{"scale", l.output.scale}, {"zero_point", l.output.zero_point}};
    j["requant"] = {{"m0", l.requant.m0}, {"shift", l.requant.shift}};
    layers.push_back(j);
  }
  return ojson{{"format", "int8-per-tensor"}, {"layers", layers}};
}

QuantizedModel quantized_from_json(const ojson& j) {
  QuantizedModel q;
  try {
    for (const auto& lj : j.at("layers")) {
      QuantizedLayer l;
      l.in = lj.at("in").get<int>();
      l.out = lj.at("out").get<int>();
      l.w.scale = lj.at("weight_scale").get<double>();
      for (int v : lj.at("weights").get<std::vector<int>>()) {
        if (v < -127 || v > 127) throw ModelError("quantized weight out of range");
        l.w.q.push_back(std::int8_t(v));
      }
      l.bias = lj.at("bias").get<std::vector<std::int32_t>>();
      l.input = {lj.at("input").at("scale").get<double>(), lj.at("input").at("zero_point").get<int>()};
      l.output = {lj.at("output").at("scale").get<double>(), lj.at("output").at("zero_point").get<int>()};
      l.requant = {lj.at("requant").at("m0").get<std::int32_t>(), lj.at("requant").at("shift").get<int>()};
      if (l.w.q.size() != std::size_t(l.in) * std::size_t(l.out) || l.bias.size() != std::size_t(l.out))
        throw ModelError("quantized layer tensor sizes do not match its shape");
      q.layers.push_back(std::move(l));
    }
  } catch (const ojson::exception& e) {
    throw ModelError(std::string("quantized model file: ") + e.what());
  }
  if (q.layers.size() != 3) throw ModelError("quantized model must have 3 layers");
  return q;
}

}  // namespace posesynth
