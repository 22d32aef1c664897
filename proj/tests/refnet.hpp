#pragma once

// Test-only long-double reference of the fusion forward pass. Written
// independently of mio/tensor.hpp so finite-difference gradient checks have
// an oracle that (a) does not share code with the implementation under test
// and (b) evaluates far below the double roundoff floor, which matters when
// the analytic gradient entry is near zero.

#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "mio/model.hpp"

namespace refnet {

using ld = long double;

struct RefParams {
  std::map<std::string, std::vector<ld>> tensors;
  std::map<std::string, std::vector<std::size_t>> shapes;
};

inline RefParams extract(const mio::FusionModel& m) {
  RefParams p;
  for (const auto& [name, t] : m.named_params()) {
    p.tensors[name] = std::vector<ld>(t->data.begin(), t->data.end());
    p.shapes[name] = t->shape;
  }
  return p;
}

namespace detail {

inline std::vector<ld> conv3x3_s2_p1_relu(const std::vector<ld>& in, int c, int h, int w,
                                          const std::vector<ld>& kernel,
                                          const std::vector<ld>& bias, int oc, int& oh, int& ow) {
  oh = (h + 2 - 3) / 2 + 1;
  ow = (w + 2 - 3) / 2 + 1;
  std::vector<ld> out(static_cast<std::size_t>(oc) * oh * ow, 0.0L);
  for (int o = 0; o < oc; ++o)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        ld acc = bias[o];
        for (int ci = 0; ci < c; ++ci)
          for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
              const int iy = 2 * y - 1 + ky;
              const int ix = 2 * x - 1 + kx;
              if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
              acc += in[(static_cast<std::size_t>(ci) * h + iy) * w + ix] *
                     kernel[((static_cast<std::size_t>(o) * c + ci) * 3 + ky) * 3 + kx];
            }
        out[(static_cast<std::size_t>(o) * oh + y) * ow + x] = acc > 0.0L ? acc : 0.0L;
      }
  return out;
}

inline std::vector<ld> matvec(const std::vector<ld>& w, std::size_t rows, std::size_t cols,
                              const std::vector<ld>& x, const std::vector<ld>* bias) {
  std::vector<ld> out(rows, 0.0L);
  for (std::size_t r = 0; r < rows; ++r) {
    ld acc = bias ? (*bias)[r] : 0.0L;
    for (std::size_t cidx = 0; cidx < cols; ++cidx) acc += w[r * cols + cidx] * x[cidx];
    out[r] = acc;
  }
  return out;
}

inline constexpr ld kPi = 3.141592653589793238462643383279502884L;

inline ld wrap_pi(ld a) {
  a = std::fmod(a, 2.0L * kPi);
  if (a <= -kPi) a += 2.0L * kPi;
  if (a > kPi) a -= 2.0L * kPi;
  return a;
}

}  // namespace detail

// Full forward chain to the scalar training loss.
inline ld forward_loss(const RefParams& p, const mio::ModelConfig& cfg,
                       const std::vector<ld>& image, const std::vector<std::vector<ld>>& imu_steps,
                       const std::vector<ld>& hidden, const mio::SixDof& target, ld lambda) {
  const auto& T = p.tensors;
  // radar encoder
  int h = cfg.image_height, w = cfg.image_width, oh = 0, ow = 0;
  auto a = detail::conv3x3_s2_p1_relu(image, 2, h, w, T.at("conv1_w"), T.at("conv1_b"), 8, oh, ow);
  a = detail::conv3x3_s2_p1_relu(a, 8, oh, ow, T.at("conv2_w"), T.at("conv2_b"), 16, oh, ow);
  a = detail::conv3x3_s2_p1_relu(a, 16, oh, ow, T.at("conv3_w"), T.at("conv3_b"), 32, oh, ow);

  // imu encoder
  const auto ih = static_cast<std::size_t>(cfg.imu_hidden);
  std::vector<ld> b(ih, 0.0L);
  for (const auto& x : imu_steps) {
    auto pre = detail::matvec(T.at("imu_wx"), ih, 6, x, &T.at("imu_b"));
    auto rec = detail::matvec(T.at("imu_wh"), ih, ih, b, nullptr);
    for (std::size_t i = 0; i < ih; ++i) b[i] = std::tanh(pre[i] + rec[i]);
  }

  // cross-modal gating
  const auto fr = static_cast<std::size_t>(cfg.radar_feature_len());
  auto ga = detail::matvec(T.at("attn_wa"), fr, ih, b, &T.at("attn_ba"));
  auto gb = detail::matvec(T.at("attn_wb"), ih, fr, a, &T.at("attn_bb"));
  std::vector<ld> fused(fr + ih);
  for (std::size_t i = 0; i < fr; ++i) fused[i] = a[i] / (1.0L + std::exp(-ga[i]));
  for (std::size_t i = 0; i < ih; ++i) fused[fr + i] = b[i] / (1.0L + std::exp(-gb[i]));

  // temporal cell
  const auto th = static_cast<std::size_t>(cfg.temporal_hidden);
  auto pre = detail::matvec(T.at("temp_wx"), th, fr + ih, fused, &T.at("temp_b"));
  auto rec = detail::matvec(T.at("temp_wh"), th, th, hidden, nullptr);
  std::vector<ld> hnew(th);
  for (std::size_t i = 0; i < th; ++i) hnew[i] = std::tanh(pre[i] + rec[i]);

  // regression head
  auto f1 = detail::matvec(T.at("fc1_w"), th, th, hnew, &T.at("fc1_b"));
  for (ld& v : f1) v = v > 0.0L ? v : 0.0L;
  auto f2 = detail::matvec(T.at("fc2_w"), 32, th, f1, &T.at("fc2_b"));
  for (ld& v : f2) v = v > 0.0L ? v : 0.0L;
  auto out = detail::matvec(T.at("fc3_w"), 6, 32, f2, &T.at("fc3_b"));

  const ld tgt[6] = {(ld)target.translation.x, (ld)target.translation.y, (ld)target.translation.z,
                     (ld)target.euler.x,       (ld)target.euler.y,       (ld)target.euler.z};
  ld loss = 0.0L;
  for (int i = 0; i < 6; ++i) {
    ld r = out[i] - tgt[i];
    if (i >= 3) r = detail::wrap_pi(r);
    loss += (i < 3 ? 1.0L : lambda) * r * r;
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Model-level FD harness shared by unit and acceptance tests.
// ---------------------------------------------------------------------------

struct FdInputs {
  std::vector<ld> image;                  // 2*H*W
  std::vector<std::vector<ld>> imu_steps; // each length 6
  std::vector<ld> hidden;                 // temporal_hidden
  mio::SixDof target;
  double lambda = 100.0;
};

struct FdReport {
  double worst_rel = 0.0;
  std::string worst_tensor;
  double worst_analytic = 0.0;
  double worst_fd = 0.0;
  std::size_t entries_checked = 0;
};

// Analytic gradients from the double-precision tape vs central finite
// differences of the long-double reference. Checks every parameter tensor
// and the input tensors; large tensors may be entry-subsampled via cap.
inline FdReport fd_check_model(const mio::FusionModel& m, const FdInputs& in,
                               std::size_t max_entries_per_tensor = 0, double step = 1e-5) {
  using namespace mio;
  const ModelConfig& cfg = m.config();

  auto image_t = make_tensor({2, static_cast<std::size_t>(cfg.image_height),
                              static_cast<std::size_t>(cfg.image_width)});
  for (std::size_t i = 0; i < in.image.size(); ++i) image_t->data[i] = (double)in.image[i];
  std::vector<TensorPtr> step_ts;
  for (const auto& s : in.imu_steps) {
    auto t = make_tensor({6});
    for (int i = 0; i < 6; ++i) t->data[i] = (double)s[i];
    step_ts.push_back(t);
  }
  auto hidden_t = make_tensor({static_cast<std::size_t>(cfg.temporal_hidden)});
  for (std::size_t i = 0; i < in.hidden.size(); ++i) hidden_t->data[i] = (double)in.hidden[i];

  Tape tape;
  auto af = m.radar_encoder(&tape, image_t);
  auto bf = m.imu_encoder_steps(&tape, step_ts);
  auto fused = m.mixed_attention_fuse(&tape, af, bf);
  auto hn = m.temporal_step(&tape, fused, hidden_t);
  auto loss = nn::pose_loss(&tape, m.regress(&tape, hn), in.target, in.lambda);
  tape.backward(loss);

  RefParams ref = extract(m);
  FdInputs work = in;

  auto eval = [&] { return forward_loss(ref, cfg, work.image, work.imu_steps, work.hidden,
                                        work.target, (ld)work.lambda); };

  FdReport report;
  auto check_entries = [&](const std::string& label, std::vector<ld>& values,
                           const std::vector<double>& analytic) {
    const std::size_t n = values.size();
    const std::size_t stride =
        (max_entries_per_tensor > 0 && n > max_entries_per_tensor) ? n / max_entries_per_tensor
                                                                   : 1;
    for (std::size_t i = 0; i < n; i += stride) {
      const ld saved = values[i];
      values[i] = saved + (ld)step;
      const ld up = eval();
      values[i] = saved - (ld)step;
      const ld down = eval();
      values[i] = saved;
      const double fd = (double)((up - down) / (2.0L * (ld)step));
      const double rel = std::abs(analytic[i] - fd) / (std::abs(analytic[i]) + 1e-8);
      ++report.entries_checked;
      if (rel > report.worst_rel) {
        report.worst_rel = rel;
        report.worst_tensor = label;
        report.worst_analytic = analytic[i];
        report.worst_fd = fd;
      }
    }
  };

  for (const auto& [name, t] : m.named_params()) check_entries(name, ref.tensors[name], t->grad);
  check_entries("input:image", work.image, image_t->grad);
  for (std::size_t s = 0; s < step_ts.size(); ++s)
    check_entries("input:imu" + std::to_string(s), work.imu_steps[s], step_ts[s]->grad);
  check_entries("input:hidden", work.hidden, hidden_t->grad);
  return report;
}

}  // namespace refnet
