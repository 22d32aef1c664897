#pragma once

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mio/csvio.hpp"
#include "mio/errors.hpp"
#include "mio/imaging.hpp"
#include "mio/tensor.hpp"
#include "mio/world.hpp"

namespace mio {

// ============================================================================
// Toy mmWave-inertial fusion network
//
// radar pair --conv x3--> a --+
//                             +--> cross-modal gating --> RNN --> FC x3 --> 6-DoF
// imu window --RNN--> b ------+
// ============================================================================

struct ModelConfig {
  int image_height = 16;
  int image_width = 64;
  int imu_input = 6;
  int imu_hidden = 32;
  int temporal_hidden = 64;

  static constexpr int conv_channels[4] = {2, 8, 16, 32};

  int radar_feature_len() const {
    auto ceil_div = [](int v, int d) { return (v + d - 1) / d; };
    return conv_channels[3] * ceil_div(image_height, 8) * ceil_div(image_width, 8);
  }
  int fused_len() const { return radar_feature_len() + imu_hidden; }

  bool operator==(const ModelConfig&) const = default;
};

struct TrainingConfig {
  double learning_rate = 0.01;
  int epochs = 100;
  int batch_size = 1;       // TBPTT windows averaged per parameter update
  double lambda = 100.0;    // rotation loss weight
  std::uint64_t rng_seed = 1;
  int tbptt_window = 4;     // frame pairs per truncated-backprop window
  double momentum = 0.9;
};

// One supervised frame pair: network inputs plus the ground-truth relative
// motion (previous-frame body frame).
struct FramePairSample {
  ImagePairTensor images;
  std::vector<ImuSample> imu_window;
  SixDof target;
  double t = 0.0;
};

using SequenceSamples = std::vector<FramePairSample>;
using Dataset = std::vector<SequenceSamples>;

class FusionModel {
 public:
  FusionModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    allocate();
    Rng rng(seed, 0x6d6f64656cULL);
    for (auto& [name, t, fan_in] : layout()) nn::init_uniform(*t, fan_in, rng);
  }

  static FusionModel zeros(const ModelConfig& cfg) {
    FusionModel m(cfg, 0);
    for (auto& [name, t] : m.named_params()) std::fill(t->data.begin(), t->data.end(), 0.0);
    return m;
  }

  const ModelConfig& config() const { return cfg_; }

  // --- forward stages -------------------------------------------------------

  // 3x (conv 3x3, stride 2, pad 1, ReLU), flattened.
  TensorPtr radar_encoder(Tape* tape, const TensorPtr& input) const {
    const std::vector<std::size_t> expected = {2, static_cast<std::size_t>(cfg_.image_height),
                                               static_cast<std::size_t>(cfg_.image_width)};
    if (input->shape != expected)
      throw ShapeMismatch("radar_encoder: input must be 2 x H x W per model config");
    auto x = nn::relu(tape, nn::conv2d(tape, input, p_.conv1_w, p_.conv1_b, 2, 1));
    x = nn::relu(tape, nn::conv2d(tape, x, p_.conv2_w, p_.conv2_b, 2, 1));
    x = nn::relu(tape, nn::conv2d(tape, x, p_.conv3_w, p_.conv3_b, 2, 1));
    return x;  // size == radar_feature_len()
  }

  TensorPtr radar_encoder(Tape* tape, const ImagePairTensor& pair) const {
    if (pair.height != cfg_.image_height || pair.width != cfg_.image_width)
      throw ShapeMismatch("radar_encoder: image pair dims do not match model config");
    return radar_encoder(tape, make_tensor({2, static_cast<std::size_t>(pair.height),
                                            static_cast<std::size_t>(pair.width)},
                                           pair.data));
  }

  // Single tanh recurrent cell over per-step 6-vectors in timestamp order;
  // the final hidden state is the inertial feature.
  TensorPtr imu_encoder_steps(Tape* tape, const std::vector<TensorPtr>& steps) const {
    if (steps.empty()) throw EmptyWindow("imu_encoder: empty window");
    TensorPtr h = make_tensor({static_cast<std::size_t>(cfg_.imu_hidden)});
    for (const TensorPtr& x : steps)
      h = nn::tanh(tape, nn::add(tape, nn::linear(tape, x, p_.imu_wx, p_.imu_b),
                                 nn::linear(tape, h, p_.imu_wh, nullptr)));
    return h;
  }

  TensorPtr imu_encoder(Tape* tape, const std::vector<ImuSample>& window) const {
    std::vector<TensorPtr> steps;
    steps.reserve(window.size());
    for (const ImuSample& s : window)
      steps.push_back(
          make_tensor({6}, {s.gyro.x, s.gyro.y, s.gyro.z, s.accel.x, s.accel.y, s.accel.z}));
    return imu_encoder_steps(tape, steps);
  }

  // Cross-modal gating: each modality is re-weighted by a sigmoid mask
  // computed from the other one.
  TensorPtr mixed_attention_fuse(Tape* tape, const TensorPtr& radar_feat,
                                 const TensorPtr& imu_feat) const {
    if (radar_feat->size() != static_cast<std::size_t>(cfg_.radar_feature_len()) ||
        imu_feat->size() != static_cast<std::size_t>(cfg_.imu_hidden))
      throw ShapeMismatch("mixed_attention_fuse: feature lengths do not match params");
    auto mask_a = nn::sigmoid(tape, nn::linear(tape, imu_feat, p_.attn_wa, p_.attn_ba));
    auto mask_b = nn::sigmoid(tape, nn::linear(tape, radar_feat, p_.attn_wb, p_.attn_bb));
    auto gated_a = nn::mul(tape, radar_feat, mask_a);
    auto gated_b = nn::mul(tape, imu_feat, mask_b);
    return nn::concat(tape, {gated_a, gated_b});
  }

  // One tanh update of the motion-dynamics state. Output == new hidden.
  TensorPtr temporal_step(Tape* tape, const TensorPtr& fused, const TensorPtr& hidden) const {
    if (hidden->size() != static_cast<std::size_t>(cfg_.temporal_hidden))
      throw ShapeMismatch("temporal_step: hidden length mismatch");
    return nn::tanh(tape, nn::add(tape, nn::linear(tape, fused, p_.temp_wx, p_.temp_b),
                                  nn::linear(tape, hidden, p_.temp_wh, nullptr)));
  }

  // FC 64 -> 64 -> 32 -> 6 (ReLU, ReLU, linear).
  TensorPtr regress(Tape* tape, const TensorPtr& hidden) const {
    auto x = nn::relu(tape, nn::linear(tape, hidden, p_.fc1_w, p_.fc1_b));
    x = nn::relu(tape, nn::linear(tape, x, p_.fc2_w, p_.fc2_b));
    return nn::linear(tape, x, p_.fc3_w, p_.fc3_b);
  }

  TensorPtr initial_hidden() const {
    return make_tensor({static_cast<std::size_t>(cfg_.temporal_hidden)});
  }

  TensorPtr zero_imu_feature() const {
    return make_tensor({static_cast<std::size_t>(cfg_.imu_hidden)});
  }

  // Full chain on one frame pair. The imu window may be empty only via
  // forward_pair_tolerant; here it throws.
  TensorPtr forward_pair(Tape* tape, const ImagePairTensor& pair,
                         const std::vector<ImuSample>& window, const TensorPtr& hidden,
                         TensorPtr* new_hidden) const {
    auto a = radar_encoder(tape, pair);
    auto b = imu_encoder(tape, window);
    auto fused = mixed_attention_fuse(tape, a, b);
    auto h = temporal_step(tape, fused, hidden);
    if (new_hidden) *new_hidden = h;
    return regress(tape, h);
  }

  // Same, substituting a zero inertial feature when the window is empty
  // (flagged synchronizer gaps).
  TensorPtr forward_pair_tolerant(Tape* tape, const ImagePairTensor& pair,
                                  const std::vector<ImuSample>& window, const TensorPtr& hidden,
                                  TensorPtr* new_hidden) const {
    auto a = radar_encoder(tape, pair);
    auto b = window.empty() ? zero_imu_feature() : imu_encoder(tape, window);
    auto fused = mixed_attention_fuse(tape, a, b);
    auto h = temporal_step(tape, fused, hidden);
    if (new_hidden) *new_hidden = h;
    return regress(tape, h);
  }

  static SixDof to_sixdof(const TensorPtr& out6) {
    return {{out6->data[0], out6->data[1], out6->data[2]},
            {out6->data[3], out6->data[4], out6->data[5]}};
  }

  std::pair<SixDof, TensorPtr> infer_pair(const PanoramicImage& prev, const PanoramicImage& curr,
                                          const std::vector<ImuSample>& window,
                                          const TensorPtr& hidden) const {
    TensorPtr h;
    auto out = forward_pair_tolerant(nullptr, image_pair(prev, curr), window, hidden, &h);
    return {to_sixdof(out), h};
  }

  // --- parameters ------------------------------------------------------------

  std::vector<std::pair<std::string, TensorPtr>> named_params() const {
    std::vector<std::pair<std::string, TensorPtr>> out;
    for (const auto& [name, t, fan_in] : const_cast<FusionModel*>(this)->layout())
      out.emplace_back(name, t);
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, t] : named_params()) n += t->size();
    return n;
  }

  // --- checkpoint io ----------------------------------------------------------
  // magic "MIOM" | version u32 LE | header bytes u32 LE | JSON header |
  // raw f64 LE payload in header-declared tensor order.

  void save(const std::filesystem::path& path) const {
    nlohmann::json header;
    header["config"] = {{"image_height", cfg_.image_height},
                        {"image_width", cfg_.image_width},
                        {"imu_input", cfg_.imu_input},
                        {"imu_hidden", cfg_.imu_hidden},
                        {"temporal_hidden", cfg_.temporal_hidden}};
    nlohmann::json tensors = nlohmann::json::array();
    for (const auto& [name, t] : named_params())
      tensors.push_back({{"name", name}, {"shape", t->shape}});
    header["tensors"] = tensors;
    const std::string hs = header.dump();

    auto f = open_out(path);
    f.write("MIOM", 4);
    const std::uint32_t version = 1;
    const std::uint32_t hlen = static_cast<std::uint32_t>(hs.size());
    f.write(reinterpret_cast<const char*>(&version), 4);
    f.write(reinterpret_cast<const char*>(&hlen), 4);
    f.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const auto& [name, t] : named_params())
      f.write(reinterpret_cast<const char*>(t->data.data()),
              static_cast<std::streamsize>(t->data.size() * sizeof(double)));
    if (!f) throw IoError("checkpoint write failed: " + path.string());
  }

  static FusionModel load(const std::filesystem::path& path) {
    auto f = open_in(path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, "MIOM", 4) != 0)
      throw CheckpointMismatch("checkpoint: bad magic");
    std::uint32_t version = 0, hlen = 0;
    f.read(reinterpret_cast<char*>(&version), 4);
    f.read(reinterpret_cast<char*>(&hlen), 4);
    if (!f || version != 1) throw CheckpointMismatch("checkpoint: unsupported version");
    std::string hs(hlen, '\0');
    f.read(hs.data(), hlen);
    if (!f) throw CheckpointMismatch("checkpoint: truncated header");
    nlohmann::json header;
    try {
      header = nlohmann::json::parse(hs);
    } catch (const nlohmann::json::exception&) {
      throw CheckpointMismatch("checkpoint: malformed header JSON");
    }
    ModelConfig cfg;
    const auto& jc = header.at("config");
    cfg.image_height = jc.at("image_height").get<int>();
    cfg.image_width = jc.at("image_width").get<int>();
    cfg.imu_input = jc.at("imu_input").get<int>();
    cfg.imu_hidden = jc.at("imu_hidden").get<int>();
    cfg.temporal_hidden = jc.at("temporal_hidden").get<int>();

    FusionModel m = FusionModel::zeros(cfg);
    auto params = m.named_params();
    const auto& jt = header.at("tensors");
    if (jt.size() != params.size()) throw CheckpointMismatch("checkpoint: tensor count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (jt[i].at("name").get<std::string>() != params[i].first)
        throw CheckpointMismatch("checkpoint: tensor order mismatch");
      const auto shp = jt[i].at("shape").get<std::vector<std::size_t>>();
      if (shp != params[i].second->shape) throw CheckpointMismatch("checkpoint: shape mismatch");
      f.read(reinterpret_cast<char*>(params[i].second->data.data()),
             static_cast<std::streamsize>(params[i].second->size() * sizeof(double)));
      if (!f) throw CheckpointMismatch("checkpoint: truncated payload");
    }
    return m;
  }

 private:
  struct Params {
    TensorPtr conv1_w, conv1_b, conv2_w, conv2_b, conv3_w, conv3_b;
    TensorPtr imu_wx, imu_wh, imu_b;
    TensorPtr attn_wa, attn_ba, attn_wb, attn_bb;
    TensorPtr temp_wx, temp_wh, temp_b;
    TensorPtr fc1_w, fc1_b, fc2_w, fc2_b, fc3_w, fc3_b;
  };

  struct Entry {
    const char* name;
    TensorPtr t;
    std::size_t fan_in;
  };

  void allocate() {
    const auto fr = static_cast<std::size_t>(cfg_.radar_feature_len());
    const auto fused = static_cast<std::size_t>(cfg_.fused_len());
    const auto ih = static_cast<std::size_t>(cfg_.imu_hidden);
    const auto th = static_cast<std::size_t>(cfg_.temporal_hidden);
    p_.conv1_w = make_tensor({8, 2, 3, 3});
    p_.conv1_b = make_tensor({8});
    p_.conv2_w = make_tensor({16, 8, 3, 3});
    p_.conv2_b = make_tensor({16});
    p_.conv3_w = make_tensor({32, 16, 3, 3});
    p_.conv3_b = make_tensor({32});
    p_.imu_wx = make_tensor({ih, 6});
    p_.imu_wh = make_tensor({ih, ih});
    p_.imu_b = make_tensor({ih});
    p_.attn_wa = make_tensor({fr, ih});
    p_.attn_ba = make_tensor({fr});
    p_.attn_wb = make_tensor({ih, fr});
    p_.attn_bb = make_tensor({ih});
    p_.temp_wx = make_tensor({th, fused});
    p_.temp_wh = make_tensor({th, th});
    p_.temp_b = make_tensor({th});
    p_.fc1_w = make_tensor({th, th});
    p_.fc1_b = make_tensor({th});
    p_.fc2_w = make_tensor({32, th});
    p_.fc2_b = make_tensor({32});
    p_.fc3_w = make_tensor({6, 32});
    p_.fc3_b = make_tensor({6});
  }

  std::vector<Entry> layout() {
    const auto fr = static_cast<std::size_t>(cfg_.radar_feature_len());
    const auto fused = static_cast<std::size_t>(cfg_.fused_len());
    const auto ih = static_cast<std::size_t>(cfg_.imu_hidden);
    const auto th = static_cast<std::size_t>(cfg_.temporal_hidden);
    return {
        {"conv1_w", p_.conv1_w, 2 * 9}, {"conv1_b", p_.conv1_b, 2 * 9},
        {"conv2_w", p_.conv2_w, 8 * 9}, {"conv2_b", p_.conv2_b, 8 * 9},
        {"conv3_w", p_.conv3_w, 16 * 9}, {"conv3_b", p_.conv3_b, 16 * 9},
        {"imu_wx", p_.imu_wx, 6},       {"imu_wh", p_.imu_wh, ih},
        {"imu_b", p_.imu_b, 6},         {"attn_wa", p_.attn_wa, ih},
        {"attn_ba", p_.attn_ba, ih},    {"attn_wb", p_.attn_wb, fr},
        {"attn_bb", p_.attn_bb, fr},    {"temp_wx", p_.temp_wx, fused},
        {"temp_wh", p_.temp_wh, th},    {"temp_b", p_.temp_b, fused},
        {"fc1_w", p_.fc1_w, th},        {"fc1_b", p_.fc1_b, th},
        {"fc2_w", p_.fc2_w, th},        {"fc2_b", p_.fc2_b, th},
        {"fc3_w", p_.fc3_w, 32},        {"fc3_b", p_.fc3_b, 32},
    };
  }

  ModelConfig cfg_;
  Params p_;
};

// ============================================================================
// Training: SGD with momentum, hidden state threaded within each sequence,
// truncated backprop over fixed-size windows.
// ============================================================================

struct TrainResult {
  std::vector<double> epoch_mean_loss;
};

inline void write_loss_curve(const std::filesystem::path& path,
                             const std::vector<double>& losses) {
  auto f = open_out(path);
  f << "epoch,mean_loss\n";
  for (std::size_t i = 0; i < losses.size(); ++i) f << (i + 1) << ',' << fmt9(losses[i]) << '\n';
}

inline TrainResult train(FusionModel& model, const Dataset& dataset, const TrainingConfig& cfg) {
  std::size_t total_samples = 0;
  for (const auto& seq : dataset) total_samples += seq.size();
  if (total_samples == 0) throw EmptyDataset("train: dataset has no frame pairs");

  auto params = model.named_params();
  std::vector<std::vector<double>> velocity(params.size());
  std::vector<std::vector<double>> grad_acc(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    velocity[i].assign(params[i].second->size(), 0.0);
    grad_acc[i].assign(params[i].second->size(), 0.0);
  }

  TrainResult result;
  Tape tape;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    int pending = 0;

    auto apply_step = [&] {
      if (pending == 0) return;
      const double scale = 1.0 / pending;
      for (std::size_t i = 0; i < params.size(); ++i) {
        auto& t = *params[i].second;
        for (std::size_t j = 0; j < t.size(); ++j) {
          velocity[i][j] =
              cfg.momentum * velocity[i][j] - cfg.learning_rate * grad_acc[i][j] * scale;
          t.data[j] += velocity[i][j];
          grad_acc[i][j] = 0.0;
        }
      }
      pending = 0;
    };

    for (const auto& seq : dataset) {
      TensorPtr hidden = model.initial_hidden();
      std::size_t k = 0;
      while (k < seq.size()) {
        const std::size_t end = std::min(k + static_cast<std::size_t>(cfg.tbptt_window),
                                         seq.size());
        TensorPtr window_loss;
        TensorPtr h = hidden;
        for (std::size_t s = k; s < end; ++s) {
          const FramePairSample& sample = seq[s];
          TensorPtr next_h;
          auto out = model.forward_pair_tolerant(&tape, sample.images, sample.imu_window, h,
                                                 &next_h);
          auto l = nn::pose_loss(&tape, out, sample.target, cfg.lambda);
          if (!std::isfinite(l->data[0]))
            throw DivergedLoss("train: non-finite loss at epoch " + std::to_string(epoch + 1));
          loss_sum += l->data[0];
          window_loss = window_loss ? nn::add(&tape, window_loss, l) : l;
          h = next_h;
        }
        const double inv = 1.0 / static_cast<double>(end - k);
        // mean over the window so the step size is window-length independent
        auto scaled = nn::mul(&tape, window_loss, make_tensor({1}, {inv}));
        tape.backward(scaled);
        for (std::size_t i = 0; i < params.size(); ++i) {
          const auto& g = params[i].second->grad;
          for (std::size_t j = 0; j < g.size(); ++j) grad_acc[i][j] += g[j];
        }
        ++pending;
        if (pending >= cfg.batch_size) apply_step();
        // detach: carry values only across window boundaries
        auto detached = model.initial_hidden();
        detached->data = h->data;
        hidden = detached;
        k = end;
      }
    }
    apply_step();
    result.epoch_mean_loss.push_back(loss_sum / static_cast<double>(total_samples));
  }
  return result;
}

}  // namespace mio
