#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "mio/errors.hpp"
#include "mio/geometry.hpp"
#include "mio/rng.hpp"

namespace mio {

// ============================================================================
// Tensor - n-d array of f64 with an attached gradient buffer
// ============================================================================

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;
  std::vector<double> grad;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s)
      : shape(std::move(s)),
        data(std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>()),
             0.0),
        grad(data.size(), 0.0) {}

  std::size_t size() const { return data.size(); }
};

using TensorPtr = std::shared_ptr<Tensor>;

inline TensorPtr make_tensor(std::vector<std::size_t> shape) {
  return std::make_shared<Tensor>(std::move(shape));
}

inline TensorPtr make_tensor(std::vector<std::size_t> shape, std::vector<double> values) {
  auto t = make_tensor(std::move(shape));
  if (values.size() != t->size()) throw ShapeMismatch("make_tensor: value count != shape product");
  t->data = std::move(values);
  return t;
}

// ============================================================================
// Tape - reverse-mode recording
// ============================================================================

// Records one closure per forward op. backward() zeroes every touched grad
// buffer, seeds d(loss)=1 and replays the closures in reverse. Single shot:
// the recording is consumed by backward().
class Tape {
 public:
  void watch(const TensorPtr& t) { touched_.push_back(t); }

  void record(std::function<void()> op) { ops_.push_back(std::move(op)); }

  bool recorded() const { return !ops_.empty(); }

  void backward(const TensorPtr& loss) {
    if (ops_.empty()) throw GraphNotRecorded("backward: no forward pass recorded");
    if (loss->size() != 1) throw ShapeMismatch("backward: loss must be scalar");
    for (const TensorPtr& t : touched_) std::fill(t->grad.begin(), t->grad.end(), 0.0);
    loss->grad[0] = 1.0;
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
    clear();
  }

  void clear() {
    ops_.clear();
    touched_.clear();
  }

 private:
  std::vector<std::function<void()>> ops_;
  std::vector<TensorPtr> touched_;
};

// ============================================================================
// Ops. `tape == nullptr` runs forward-only (inference path).
// ============================================================================

namespace nn {

inline void check(bool ok, const char* msg) {
  if (!ok) throw ShapeMismatch(msg);
}

// y = W x + b over the flattened input; W is [M, N], b is [M] (optional).
inline TensorPtr linear(Tape* tape, const TensorPtr& x, const TensorPtr& w, const TensorPtr& b) {
  check(w->shape.size() == 2, "linear: W must be 2-d");
  const std::size_t m = w->shape[0];
  const std::size_t n = w->shape[1];
  check(x->size() == n, "linear: input length mismatch");
  if (b) check(b->size() == m, "linear: bias length mismatch");

  auto y = make_tensor({m});
  for (std::size_t i = 0; i < m; ++i) {
    double acc = b ? b->data[i] : 0.0;
    const double* wrow = &w->data[i * n];
    for (std::size_t j = 0; j < n; ++j) acc += wrow[j] * x->data[j];
    y->data[i] = acc;
  }

  if (tape) {
    tape->watch(x);
    tape->watch(w);
    if (b) tape->watch(b);
    tape->watch(y);
    tape->record([x, w, b, y, m, n] {
      for (std::size_t i = 0; i < m; ++i) {
        const double g = y->grad[i];
        if (g == 0.0) continue;
        if (b) b->grad[i] += g;
        const double* wrow = &w->data[i * n];
        double* dwrow = &w->grad[i * n];
        for (std::size_t j = 0; j < n; ++j) {
          dwrow[j] += g * x->data[j];
          x->grad[j] += g * wrow[j];
        }
      }
    });
  }
  return y;
}

// 2-d convolution, NCHW single sample: x [C,H,W], w [OC,C,KH,KW], b [OC].
inline TensorPtr conv2d(Tape* tape, const TensorPtr& x, const TensorPtr& w, const TensorPtr& b,
                        int stride, int pad) {
  check(x->shape.size() == 3, "conv2d: input must be [C,H,W]");
  check(w->shape.size() == 4, "conv2d: weight must be [OC,C,KH,KW]");
  const int c = static_cast<int>(x->shape[0]);
  const int h = static_cast<int>(x->shape[1]);
  const int iw = static_cast<int>(x->shape[2]);
  const int oc = static_cast<int>(w->shape[0]);
  check(static_cast<int>(w->shape[1]) == c, "conv2d: channel mismatch");
  const int kh = static_cast<int>(w->shape[2]);
  const int kw = static_cast<int>(w->shape[3]);
  check(b == nullptr || b->size() == static_cast<std::size_t>(oc), "conv2d: bias mismatch");
  const int oh = (h + 2 * pad - kh) / stride + 1;
  const int ow = (iw + 2 * pad - kw) / stride + 1;
  check(oh > 0 && ow > 0, "conv2d: output would be empty");

  auto y = make_tensor({static_cast<std::size_t>(oc), static_cast<std::size_t>(oh),
                        static_cast<std::size_t>(ow)});
  auto xat = [&](int ci, int yi, int xi) { return x->data[(ci * h + yi) * iw + xi]; };
  for (int o = 0; o < oc; ++o)
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        double acc = b ? b->data[o] : 0.0;
        for (int ci = 0; ci < c; ++ci)
          for (int ky = 0; ky < kh; ++ky) {
            const int yi = oy * stride - pad + ky;
            if (yi < 0 || yi >= h) continue;
            for (int kx = 0; kx < kw; ++kx) {
              const int xi = ox * stride - pad + kx;
              if (xi < 0 || xi >= iw) continue;
              acc += xat(ci, yi, xi) * w->data[((o * c + ci) * kh + ky) * kw + kx];
            }
          }
        y->data[(o * oh + oy) * ow + ox] = acc;
      }

  if (tape) {
    tape->watch(x);
    tape->watch(w);
    if (b) tape->watch(b);
    tape->watch(y);
    tape->record([x, w, b, y, c, h, iw, oc, kh, kw, oh, ow, stride, pad] {
      for (int o = 0; o < oc; ++o)
        for (int oy = 0; oy < oh; ++oy)
          for (int ox = 0; ox < ow; ++ox) {
            const double g = y->grad[(o * oh + oy) * ow + ox];
            if (g == 0.0) continue;
            if (b) b->grad[o] += g;
            for (int ci = 0; ci < c; ++ci)
              for (int ky = 0; ky < kh; ++ky) {
                const int yi = oy * stride - pad + ky;
                if (yi < 0 || yi >= h) continue;
                for (int kx = 0; kx < kw; ++kx) {
                  const int xi = ox * stride - pad + kx;
                  if (xi < 0 || xi >= iw) continue;
                  const std::size_t wi = ((o * c + ci) * kh + ky) * kw + kx;
                  w->grad[wi] += g * x->data[(ci * h + yi) * iw + xi];
                  x->grad[(ci * h + yi) * iw + xi] += g * w->data[wi];
                }
              }
          }
    });
  }
  return y;
}

namespace detail {

template <class Fwd, class Dfe>
TensorPtr unary_elementwise(Tape* tape, const TensorPtr& x, Fwd f, Dfe df_of_y) {
  auto y = make_tensor(x->shape);
  for (std::size_t i = 0; i < x->size(); ++i) y->data[i] = f(x->data[i]);
  if (tape) {
    tape->watch(x);
    tape->watch(y);
    tape->record([x, y, df_of_y] {
      for (std::size_t i = 0; i < x->size(); ++i)
        x->grad[i] += y->grad[i] * df_of_y(x->data[i], y->data[i]);
    });
  }
  return y;
}

}  // namespace detail

inline TensorPtr relu(Tape* tape, const TensorPtr& x) {
  return detail::unary_elementwise(
      tape, x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

inline TensorPtr tanh(Tape* tape, const TensorPtr& x) {
  return detail::unary_elementwise(
      tape, x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

inline TensorPtr sigmoid(Tape* tape, const TensorPtr& x) {
  return detail::unary_elementwise(
      tape, x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double, double y) { return y * (1.0 - y); });
}

inline TensorPtr add(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
  check(a->size() == b->size(), "add: size mismatch");
  auto y = make_tensor(a->shape);
  for (std::size_t i = 0; i < a->size(); ++i) y->data[i] = a->data[i] + b->data[i];
  if (tape) {
    tape->watch(a);
    tape->watch(b);
    tape->watch(y);
    tape->record([a, b, y] {
      for (std::size_t i = 0; i < a->size(); ++i) {
        a->grad[i] += y->grad[i];
        b->grad[i] += y->grad[i];
      }
    });
  }
  return y;
}

inline TensorPtr mul(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
  check(a->size() == b->size(), "mul: size mismatch");
  auto y = make_tensor(a->shape);
  for (std::size_t i = 0; i < a->size(); ++i) y->data[i] = a->data[i] * b->data[i];
  if (tape) {
    tape->watch(a);
    tape->watch(b);
    tape->watch(y);
    tape->record([a, b, y] {
      for (std::size_t i = 0; i < a->size(); ++i) {
        a->grad[i] += y->grad[i] * b->data[i];
        b->grad[i] += y->grad[i] * a->data[i];
      }
    });
  }
  return y;
}

inline TensorPtr concat(Tape* tape, const std::vector<TensorPtr>& parts) {
  check(!parts.empty(), "concat: no inputs");
  std::size_t total = 0;
  for (const auto& p : parts) total += p->size();
  auto y = make_tensor({total});
  std::size_t off = 0;
  for (const auto& p : parts) {
    std::copy(p->data.begin(), p->data.end(), y->data.begin() + off);
    off += p->size();
  }
  if (tape) {
    for (const auto& p : parts) tape->watch(p);
    tape->watch(y);
    tape->record([parts, y] {
      std::size_t off = 0;
      for (const auto& p : parts) {
        for (std::size_t i = 0; i < p->size(); ++i) p->grad[i] += y->grad[off + i];
        off += p->size();
      }
    });
  }
  return y;
}

inline TensorPtr sum(Tape* tape, const TensorPtr& x) {
  auto y = make_tensor({1});
  for (double v : x->data) y->data[0] += v;
  if (tape) {
    tape->watch(x);
    tape->watch(y);
    tape->record([x, y] {
      for (std::size_t i = 0; i < x->size(); ++i) x->grad[i] += y->grad[0];
    });
  }
  return y;
}

// Wraps an angle residual to (-pi, pi].
inline double wrap_angle(double a) {
  a = std::fmod(a, 2.0 * M_PI);
  if (a <= -M_PI) a += 2.0 * M_PI;
  if (a > M_PI) a -= 2.0 * M_PI;
  return a;
}

// L = |t_pred - t_gt|^2 + lambda * |wrap(e_pred - e_gt)|^2 on a 6-vector
// (tx,ty,tz,roll,pitch,yaw). wrap has unit derivative a.e., so the backward
// pass treats the euler residual as linear.
inline TensorPtr pose_loss(Tape* tape, const TensorPtr& pred, const SixDof& target,
                           double lambda) {
  check(pred->size() == 6, "pose_loss: prediction must have 6 entries");
  const double tgt[6] = {target.translation.x, target.translation.y, target.translation.z,
                         target.euler.x,       target.euler.y,       target.euler.z};
  double residual[6];
  double sum = 0.0;
  for (int i = 0; i < 6; ++i) {
    const double raw = pred->data[i] - tgt[i];
    residual[i] = i < 3 ? raw : wrap_angle(raw);
    sum += (i < 3 ? 1.0 : lambda) * residual[i] * residual[i];
  }
  auto loss = make_tensor({1});
  loss->data[0] = sum;
  if (tape) {
    tape->watch(pred);
    tape->watch(loss);
    const double r0 = residual[0], r1 = residual[1], r2 = residual[2];
    const double r3 = residual[3], r4 = residual[4], r5 = residual[5];
    tape->record([pred, loss, lambda, r0, r1, r2, r3, r4, r5] {
      const double g = loss->grad[0];
      const double r[6] = {r0, r1, r2, r3, r4, r5};
      for (int i = 0; i < 6; ++i)
        pred->grad[i] += g * 2.0 * (i < 3 ? 1.0 : lambda) * r[i];
    });
  }
  return loss;
}

// Uniform(-s, s) with s = 1/sqrt(fan_in).
inline void init_uniform(Tensor& t, std::size_t fan_in, Rng& rng) {
  const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& v : t.data) v = rng.uniform(-s, s);
}

}  // namespace nn

// Scalar form of the training loss, shared with non-tensor callers.
inline double pose_loss_value(const SixDof& pred, const SixDof& target, double lambda) {
  const Vec3 dt = pred.translation - target.translation;
  const Vec3 de = pred.euler - target.euler;
  const double wr = nn::wrap_angle(de.x);
  const double wp = nn::wrap_angle(de.y);
  const double wy = nn::wrap_angle(de.z);
  return dt.squared_norm() + lambda * (wr * wr + wp * wp + wy * wy);
}

}  // namespace mio
