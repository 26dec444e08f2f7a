// Copyright 2026 The har-audit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Late-fusion convolutional classifier over multi-channel windows, written
// directly on contiguous buffers. Channels are partitioned into branches;
// each branch applies a stack of valid temporal convolutions with ReLU, one
// temporal max-pool (size 2, stride 2), and a fully connected layer. Branch
// outputs are concatenated and fused by FC + ReLU + dropout + FC, trained
// with softmax cross-entropy under RMSProp with momentum.
//
// Everything is templated on the scalar type: float for experiments, double
// for finite-difference gradient verification.

#ifndef HARAUDIT_CLASSIFIER_HPP_
#define HARAUDIT_CLASSIFIER_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "haraudit/errors.hpp"
#include "haraudit/rng.hpp"
#include "haraudit/segmentation.hpp"

namespace haraudit {

struct ModelConfig {
  std::vector<std::vector<int>> branches;  // channel indices, a partition
  int conv_layers = 4;
  int filters = 64;
  int kernel_frames = 5;
  int fc_units = 256;
  int n_classes = 0;
  double dropout_p = 0.5;

  int total_channels() const {
    int t = 0;
    for (const auto& b : branches) t += static_cast<int>(b.size());
    return t;
  }

  void validate() const {
    if (branches.empty()) throw ConfigError("model has no branches");
    std::set<int> seen;
    int max_idx = -1;
    for (const auto& br : branches) {
      if (br.empty()) throw ConfigError("empty branch channel list");
      for (int c : br) {
        if (c < 0) throw ConfigError("negative channel index");
        if (!seen.insert(c).second)
          throw ConfigError("channel " + std::to_string(c) +
                            " appears in more than one branch");
        max_idx = std::max(max_idx, c);
      }
    }
    if (max_idx + 1 != static_cast<int>(seen.size()))
      throw ConfigError("branches must partition channels 0..C-1 with no gaps");
    if (conv_layers < 1) throw ConfigError("conv_layers must be >= 1");
    if (filters < 1) throw ConfigError("filters must be >= 1");
    if (kernel_frames < 1) throw ConfigError("kernel_frames must be >= 1");
    if (fc_units < 1) throw ConfigError("fc_units must be >= 1");
    if (n_classes < 2) throw ConfigError("n_classes must be >= 2");
    if (dropout_p < 0.0 || dropout_p >= 1.0)
      throw ConfigError("dropout_p must be in [0, 1)");
  }
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"branches", c.branches},
                     {"conv_layers", c.conv_layers},
                     {"filters", c.filters},
                     {"kernel_frames", c.kernel_frames},
                     {"fc_units", c.fc_units},
                     {"n_classes", c.n_classes},
                     {"dropout_p", c.dropout_p}};
}

// Every key is optional: omitted branches / n_classes stay empty and are
// derived from the dataset via effective_model_config.
inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  c = ModelConfig{};
  if (j.contains("branches")) j.at("branches").get_to(c.branches);
  if (j.contains("conv_layers")) j.at("conv_layers").get_to(c.conv_layers);
  if (j.contains("filters")) j.at("filters").get_to(c.filters);
  if (j.contains("kernel_frames")) j.at("kernel_frames").get_to(c.kernel_frames);
  if (j.contains("fc_units")) j.at("fc_units").get_to(c.fc_units);
  if (j.contains("n_classes")) j.at("n_classes").get_to(c.n_classes);
  if (j.contains("dropout_p")) j.at("dropout_p").get_to(c.dropout_p);
}

namespace detail {

// Orthonormalizes the rows of an r x c matrix (r <= c) with modified
// Gram-Schmidt, run twice for numerical orthogonality well below 1e-5.
inline void orthonormalize_rows(std::vector<double>& m, std::size_t r,
                                std::size_t c, Rng& rng) {
  for (std::size_t i = 0; i < r; ++i) {
    double* vi = m.data() + i * c;
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t j = 0; j < i; ++j) {
        const double* vj = m.data() + j * c;
        double dot = 0.0;
        for (std::size_t k = 0; k < c; ++k) dot += vi[k] * vj[k];
        for (std::size_t k = 0; k < c; ++k) vi[k] -= dot * vj[k];
      }
    }
    double norm = 0.0;
    for (std::size_t k = 0; k < c; ++k) norm += vi[k] * vi[k];
    norm = std::sqrt(norm);
    if (norm < 1e-12) {
      // Vanishingly unlikely with Gaussian entries; redraw and retry.
      for (std::size_t k = 0; k < c; ++k) vi[k] = rng.normal();
      --i;
      continue;
    }
    for (std::size_t k = 0; k < c; ++k) vi[k] /= norm;
  }
}

// Random matrix with orthonormal rows when rows <= cols, orthonormal
// columns otherwise. Computed in double regardless of the model scalar.
inline std::vector<double> orthogonal_matrix(std::size_t rows,
                                             std::size_t cols, Rng& rng) {
  const bool wide = rows <= cols;
  const std::size_t r = wide ? rows : cols;
  const std::size_t c = wide ? cols : rows;
  std::vector<double> m(r * c);
  for (auto& x : m) x = rng.normal();
  orthonormalize_rows(m, r, c, rng);
  if (wide) return m;
  std::vector<double> t(rows * cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) t[i * cols + j] = m[j * rows + i];
  return t;
}

}  // namespace detail

// Named parameter block with its gradient.
template <typename S>
struct Tensor {
  std::string name;
  std::size_t rows = 0;  // output dimension
  std::size_t cols = 0;  // flattened input dimension (1 for biases)
  std::vector<S> v;
  std::vector<S> g;

  std::size_t size() const { return v.size(); }
};

template <typename S>
class Network {
 public:
  Network(const ModelConfig& cfg, std::size_t window_size, std::uint64_t seed)
      : cfg_(cfg), window_size_(window_size), init_seed_(seed) {
    cfg_.validate();
    if (static_cast<std::size_t>(cfg_.kernel_frames) > window_size)
      throw ConfigError("kernel_frames (" + std::to_string(cfg_.kernel_frames) +
                        ") exceeds window_size (" + std::to_string(window_size) +
                        ")");
    const long shrink =
        static_cast<long>(cfg_.conv_layers) * (cfg_.kernel_frames - 1);
    conv_t_ = static_cast<long>(window_size) - shrink;
    if (conv_t_ < 2)
      throw ConfigError("window of " + std::to_string(window_size) +
                        " frames is too short for " +
                        std::to_string(cfg_.conv_layers) + " conv layers of " +
                        std::to_string(cfg_.kernel_frames) + " frames");
    pool_t_ = conv_t_ / 2;
    build_params();
  }

  const ModelConfig& config() const { return cfg_; }
  std::size_t window_size() const { return window_size_; }
  std::uint64_t init_seed() const { return init_seed_; }
  std::vector<Tensor<S>>& params() { return params_; }
  const std::vector<Tensor<S>>& params() const { return params_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : params_) n += t.size();
    return n;
  }

  // Forward + backward over one batch; fills gradients (overwriting any
  // previous ones) and returns the mean cross-entropy loss. Indices are
  // processed in ascending order internally, so the result is invariant to
  // their ordering. Per-window noise streams are keyed by (noise_seed,
  // epoch, window index), making them independent of batch composition.
  double train_batch(const WindowSet& ws, std::vector<std::size_t> indices,
                     long epoch, double noise_sigma, std::uint64_t noise_seed,
                     Rng& dropout_rng) {
    std::sort(indices.begin(), indices.end());
    load_input(ws, indices, epoch, noise_sigma, noise_seed);
    forward(indices.size(), /*training=*/true, &dropout_rng);
    zero_grads();
    const double loss = loss_and_logit_grad(ws, indices);
    backward(indices.size());
    return loss;
  }

  // Mean loss without noise, dropout, or gradient computation.
  double eval_loss(const WindowSet& ws, const std::vector<std::size_t>& order) {
    if (order.empty()) throw ArgumentError("eval_loss: empty index list");
    double total = 0.0;
    std::size_t done = 0;
    while (done < order.size()) {
      const std::size_t take = std::min(kEvalBatch, order.size() - done);
      std::vector<std::size_t> chunk(order.begin() + done,
                                     order.begin() + done + take);
      std::sort(chunk.begin(), chunk.end());
      load_input(ws, chunk, 0, 0.0, 0);
      forward(take, /*training=*/false, nullptr);
      total += batch_loss(ws, chunk) * static_cast<double>(take);
      done += take;
    }
    return total / static_cast<double>(order.size());
  }

  // Argmax class per window; ties resolve to the smallest class id.
  std::vector<int> predict(const WindowSet& ws) {
    std::vector<int> out(ws.size());
    std::vector<std::size_t> chunk;
    std::size_t done = 0;
    while (done < ws.size()) {
      const std::size_t take = std::min(kEvalBatch, ws.size() - done);
      chunk.resize(take);
      for (std::size_t i = 0; i < take; ++i) chunk[i] = done + i;
      load_input(ws, chunk, 0, 0.0, 0);
      forward(take, /*training=*/false, nullptr);
      for (std::size_t i = 0; i < take; ++i) {
        const S* row = buf_.logits.data() + i * cfg_.n_classes;
        int best = 0;
        for (int k = 1; k < cfg_.n_classes; ++k)
          if (row[k] > row[best]) best = k;
        out[done + i] = best;
      }
      done += take;
    }
    return out;
  }

  // Softmax probabilities for one batch of windows (diagnostics/tests).
  std::vector<double> predict_proba(const WindowSet& ws,
                                    const std::vector<std::size_t>& order) {
    std::vector<std::size_t> chunk(order);
    std::sort(chunk.begin(), chunk.end());
    load_input(ws, chunk, 0, 0.0, 0);
    forward(chunk.size(), /*training=*/false, nullptr);
    std::vector<double> probs(chunk.size() * cfg_.n_classes);
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      const S* row = buf_.logits.data() + i * cfg_.n_classes;
      double m = static_cast<double>(row[0]);
      for (int k = 1; k < cfg_.n_classes; ++k)
        m = std::max(m, static_cast<double>(row[k]));
      double z = 0.0;
      for (int k = 0; k < cfg_.n_classes; ++k)
        z += std::exp(static_cast<double>(row[k]) - m);
      for (int k = 0; k < cfg_.n_classes; ++k)
        probs[i * cfg_.n_classes + k] =
            std::exp(static_cast<double>(row[k]) - m) / z;
    }
    return probs;
  }

  void snapshot_weights(std::vector<std::vector<S>>& out) const {
    out.resize(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) out[i] = params_[i].v;
  }

  void restore_weights(const std::vector<std::vector<S>>& in) {
    if (in.size() != params_.size())
      throw ShapeError("restore_weights: parameter count mismatch");
    for (std::size_t i = 0; i < params_.size(); ++i) {
      if (in[i].size() != params_[i].v.size())
        throw ShapeError("restore_weights: size mismatch at " + params_[i].name);
      params_[i].v = in[i];
    }
  }

 private:
  static constexpr std::size_t kEvalBatch = 512;

  struct BranchParams {
    std::vector<int> channels;
    std::vector<std::size_t> conv_w;  // indices into params_
    std::vector<std::size_t> conv_b;
    std::size_t fc_w = 0;
    std::size_t fc_b = 0;
  };

  // Activations and their gradients for the current batch.
  struct Buffers {
    std::size_t batch = 0;
    std::vector<S> full_in;  // [B][T][C_all]
    // Per branch: input gather, conv outputs per layer (post-ReLU), pool
    // output + argmax, fc output (post-ReLU).
    std::vector<std::vector<S>> branch_in;
    std::vector<std::vector<std::vector<S>>> conv_out;
    std::vector<std::vector<S>> pool_out;
    std::vector<std::vector<std::uint8_t>> pool_arg;
    std::vector<std::vector<S>> fc_out;
    std::vector<S> concat;
    std::vector<S> fusion_out;
    std::vector<S> drop_mask;  // multiplicative factors, empty in eval
    std::vector<S> dropped;
    std::vector<S> logits;
    std::vector<S> logit_grad;
    // Gradient scratch, mirroring the forward shapes.
    std::vector<std::vector<S>> g_branch_in;
    std::vector<std::vector<std::vector<S>>> g_conv_out;
    std::vector<std::vector<S>> g_pool_out;
    std::vector<std::vector<S>> g_fc_out;
    std::vector<S> g_concat;
    std::vector<S> g_fusion_out;
    std::vector<S> g_dropped;
  };

  void build_params() {
    const std::size_t K = static_cast<std::size_t>(cfg_.kernel_frames);
    const std::size_t F = static_cast<std::size_t>(cfg_.filters);
    const std::size_t FC = static_cast<std::size_t>(cfg_.fc_units);
    for (std::size_t b = 0; b < cfg_.branches.size(); ++b) {
      BranchParams bp;
      bp.channels = cfg_.branches[b];
      const std::string prefix = "branch" + std::to_string(b);
      for (int l = 0; l < cfg_.conv_layers; ++l) {
        const std::size_t cin = l == 0 ? bp.channels.size() : F;
        bp.conv_w.push_back(add_param(
            prefix + ".conv" + std::to_string(l) + ".w", F, K * cin));
        bp.conv_b.push_back(
            add_param(prefix + ".conv" + std::to_string(l) + ".b", F, 1));
      }
      const std::size_t flat = static_cast<std::size_t>(pool_t_) * F;
      bp.fc_w = add_param(prefix + ".fc.w", FC, flat);
      bp.fc_b = add_param(prefix + ".fc.b", FC, 1);
      branches_.push_back(std::move(bp));
    }
    fusion_w_ = add_param("fusion.w", FC, branches_.size() * FC);
    fusion_b_ = add_param("fusion.b", FC, 1);
    out_w_ = add_param("output.w", static_cast<std::size_t>(cfg_.n_classes), FC);
    out_b_ = add_param("output.b", static_cast<std::size_t>(cfg_.n_classes), 1);
    initialize();
  }

  std::size_t add_param(const std::string& name, std::size_t rows,
                        std::size_t cols) {
    Tensor<S> t;
    t.name = name;
    t.rows = rows;
    t.cols = cols;
    t.v.assign(rows * cols, S(0));
    t.g.assign(rows * cols, S(0));
    params_.push_back(std::move(t));
    return params_.size() - 1;
  }

  // Weight matrices get orthogonal init (drawn in double, then cast);
  // biases start at zero. Each tensor uses its own stream keyed by name, so
  // initialization does not depend on parameter ordering.
  void initialize() {
    for (auto& t : params_) {
      if (t.cols == 1) continue;
      Rng rng(stable_hash(init_seed_, "init", t.name));
      const auto m = detail::orthogonal_matrix(t.rows, t.cols, rng);
      for (std::size_t i = 0; i < t.v.size(); ++i)
        t.v[i] = static_cast<S>(m[i]);
    }
  }

  void zero_grads() {
    for (auto& t : params_) std::fill(t.g.begin(), t.g.end(), S(0));
  }

  // Copies the selected windows into full_in (casting to S) and adds fresh
  // per-window Gaussian noise when sigma > 0.
  void load_input(const WindowSet& ws, const std::vector<std::size_t>& indices,
                  long epoch, double noise_sigma, std::uint64_t noise_seed) {
    if (ws.window_size != window_size_)
      throw ShapeError("window size " + std::to_string(ws.window_size) +
                       " does not match model window " +
                       std::to_string(window_size_));
    if (static_cast<int>(ws.channels) != cfg_.total_channels())
      throw ShapeError("window has " + std::to_string(ws.channels) +
                       " channels, model expects " +
                       std::to_string(cfg_.total_channels()));
    const std::size_t B = indices.size();
    const std::size_t wv = ws.window_values();
    resize_buffers(B);
    for (std::size_t i = 0; i < B; ++i) {
      const float* src = ws.window(indices[i]);
      S* dst = buf_.full_in.data() + i * wv;
      for (std::size_t v = 0; v < wv; ++v) dst[v] = static_cast<S>(src[v]);
      if (noise_sigma > 0.0) {
        Rng rng(stable_hash(noise_seed, "noise", static_cast<std::uint64_t>(epoch),
                            static_cast<std::uint64_t>(indices[i])));
        for (std::size_t v = 0; v < wv; ++v)
          dst[v] += static_cast<S>(rng.normal() * noise_sigma);
      }
    }
  }

  void resize_buffers(std::size_t B) {
    buf_.batch = B;
    const std::size_t T = window_size_;
    const std::size_t C = static_cast<std::size_t>(cfg_.total_channels());
    const std::size_t F = static_cast<std::size_t>(cfg_.filters);
    const std::size_t FC = static_cast<std::size_t>(cfg_.fc_units);
    const std::size_t nb = branches_.size();
    buf_.full_in.resize(B * T * C);
    buf_.branch_in.resize(nb);
    buf_.conv_out.resize(nb);
    buf_.pool_out.resize(nb);
    buf_.pool_arg.resize(nb);
    buf_.fc_out.resize(nb);
    buf_.g_branch_in.resize(nb);
    buf_.g_conv_out.resize(nb);
    buf_.g_pool_out.resize(nb);
    buf_.g_fc_out.resize(nb);
    for (std::size_t b = 0; b < nb; ++b) {
      const std::size_t cb = branches_[b].channels.size();
      buf_.branch_in[b].resize(B * T * cb);
      buf_.g_branch_in[b].resize(B * T * cb);
      buf_.conv_out[b].resize(static_cast<std::size_t>(cfg_.conv_layers));
      buf_.g_conv_out[b].resize(static_cast<std::size_t>(cfg_.conv_layers));
      for (int l = 0; l < cfg_.conv_layers; ++l) {
        const std::size_t tl = layer_t(l + 1);
        buf_.conv_out[b][l].resize(B * tl * F);
        buf_.g_conv_out[b][l].resize(B * tl * F);
      }
      buf_.pool_out[b].resize(B * static_cast<std::size_t>(pool_t_) * F);
      buf_.pool_arg[b].resize(B * static_cast<std::size_t>(pool_t_) * F);
      buf_.g_pool_out[b].resize(B * static_cast<std::size_t>(pool_t_) * F);
      buf_.fc_out[b].resize(B * FC);
      buf_.g_fc_out[b].resize(B * FC);
    }
    buf_.concat.resize(B * nb * FC);
    buf_.g_concat.resize(B * nb * FC);
    buf_.fusion_out.resize(B * FC);
    buf_.g_fusion_out.resize(B * FC);
    buf_.dropped.resize(B * FC);
    buf_.g_dropped.resize(B * FC);
    buf_.drop_mask.resize(B * FC);
    buf_.logits.resize(B * static_cast<std::size_t>(cfg_.n_classes));
    buf_.logit_grad.resize(B * static_cast<std::size_t>(cfg_.n_classes));
  }

  // Temporal length after l conv layers.
  std::size_t layer_t(int l) const {
    return window_size_ - static_cast<std::size_t>(l) *
                              (static_cast<std::size_t>(cfg_.kernel_frames) - 1);
  }

  void forward(std::size_t B, bool training, Rng* dropout_rng) {
    const std::size_t T = window_size_;
    const std::size_t C = static_cast<std::size_t>(cfg_.total_channels());
    const std::size_t F = static_cast<std::size_t>(cfg_.filters);
    const std::size_t FC = static_cast<std::size_t>(cfg_.fc_units);
    const std::size_t K = static_cast<std::size_t>(cfg_.kernel_frames);
    const std::size_t nb = branches_.size();

    for (std::size_t b = 0; b < nb; ++b) {
      const auto& bp = branches_[b];
      const std::size_t cb = bp.channels.size();
      // Gather this branch's channels.
      for (std::size_t i = 0; i < B; ++i) {
        const S* src = buf_.full_in.data() + i * T * C;
        S* dst = buf_.branch_in[b].data() + i * T * cb;
        for (std::size_t t = 0; t < T; ++t)
          for (std::size_t c = 0; c < cb; ++c)
            dst[t * cb + c] = src[t * C + static_cast<std::size_t>(bp.channels[c])];
      }
      // Conv stack with ReLU.
      const S* in = buf_.branch_in[b].data();
      std::size_t t_in = T;
      std::size_t cin = cb;
      for (int l = 0; l < cfg_.conv_layers; ++l) {
        const std::size_t t_out = layer_t(l + 1);
        const Tensor<S>& w = params_[bp.conv_w[l]];
        const Tensor<S>& bias = params_[bp.conv_b[l]];
        S* out = buf_.conv_out[b][l].data();
        for (std::size_t i = 0; i < B; ++i) {
          const S* xin = in + i * t_in * cin;
          S* xout = out + i * t_out * F;
          for (std::size_t t = 0; t < t_out; ++t) {
            for (std::size_t f = 0; f < F; ++f) {
              S acc = bias.v[f];
              const S* wf = w.v.data() + f * K * cin;
              const S* xrow = xin + t * cin;
              for (std::size_t kc = 0; kc < K * cin; ++kc)
                acc += wf[kc] * xrow[kc];
              xout[t * F + f] = acc > S(0) ? acc : S(0);
            }
          }
        }
        in = out;
        t_in = t_out;
        cin = F;
      }
      // Max pool, size 2, stride 2.
      {
        const std::size_t t_in_p = layer_t(cfg_.conv_layers);
        const std::size_t pt = static_cast<std::size_t>(pool_t_);
        const S* xin = buf_.conv_out[b].back().data();
        S* xout = buf_.pool_out[b].data();
        std::uint8_t* arg = buf_.pool_arg[b].data();
        for (std::size_t i = 0; i < B; ++i) {
          for (std::size_t t = 0; t < pt; ++t) {
            const S* a = xin + (i * t_in_p + 2 * t) * F;
            const S* brow = a + F;
            S* o = xout + (i * pt + t) * F;
            std::uint8_t* ar = arg + (i * pt + t) * F;
            for (std::size_t f = 0; f < F; ++f) {
              if (brow[f] > a[f]) {
                o[f] = brow[f];
                ar[f] = 1;
              } else {
                o[f] = a[f];
                ar[f] = 0;
              }
            }
          }
        }
      }
      // Branch FC + ReLU.
      dense_forward(params_[bp.fc_w], params_[bp.fc_b], buf_.pool_out[b].data(),
                    buf_.fc_out[b].data(), B, /*relu=*/true);
      // Copy into the concatenation buffer.
      for (std::size_t i = 0; i < B; ++i)
        std::memcpy(buf_.concat.data() + (i * nb + b) * FC,
                    buf_.fc_out[b].data() + i * FC, FC * sizeof(S));
    }

    dense_forward(params_[fusion_w_], params_[fusion_b_], buf_.concat.data(),
                  buf_.fusion_out.data(), B, /*relu=*/true);

    // Inverted dropout. Eval mode is the identity.
    if (training && cfg_.dropout_p > 0.0) {
      const S scale = static_cast<S>(1.0 / (1.0 - cfg_.dropout_p));
      for (std::size_t i = 0; i < B * FC; ++i) {
        const bool keep = dropout_rng->uniform() >= cfg_.dropout_p;
        buf_.drop_mask[i] = keep ? scale : S(0);
        buf_.dropped[i] = buf_.fusion_out[i] * buf_.drop_mask[i];
      }
    } else {
      std::fill(buf_.drop_mask.begin(), buf_.drop_mask.end(), S(1));
      std::memcpy(buf_.dropped.data(), buf_.fusion_out.data(),
                  B * FC * sizeof(S));
    }

    dense_forward(params_[out_w_], params_[out_b_], buf_.dropped.data(),
                  buf_.logits.data(), B, /*relu=*/false);
  }

  void dense_forward(const Tensor<S>& w, const Tensor<S>& bias, const S* in,
                     S* out, std::size_t B, bool relu) {
    const std::size_t rows = w.rows, cols = w.cols;
    for (std::size_t i = 0; i < B; ++i) {
      const S* x = in + i * cols;
      S* y = out + i * rows;
      for (std::size_t o = 0; o < rows; ++o) {
        S acc = bias.v[o];
        const S* wrow = w.v.data() + o * cols;
        for (std::size_t k = 0; k < cols; ++k) acc += wrow[k] * x[k];
        y[o] = relu && acc < S(0) ? S(0) : acc;
      }
    }
  }

  // Mean cross-entropy via logsumexp, in double for a stable value.
  double batch_loss(const WindowSet& ws, const std::vector<std::size_t>& idx) {
    const int Kc = cfg_.n_classes;
    double total = 0.0;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const int y = ws.labels[idx[i]];
      if (y < 0 || y >= Kc)
        throw ArgumentError("label out of range: " + std::to_string(y));
      const S* row = buf_.logits.data() + i * Kc;
      double m = static_cast<double>(row[0]);
      for (int k = 1; k < Kc; ++k) m = std::max(m, static_cast<double>(row[k]));
      double z = 0.0;
      for (int k = 0; k < Kc; ++k)
        z += std::exp(static_cast<double>(row[k]) - m);
      total += m + std::log(z) - static_cast<double>(row[y]);
    }
    return total / static_cast<double>(idx.size());
  }

  // Fills logit_grad = (softmax - onehot) / B and returns the mean loss.
  double loss_and_logit_grad(const WindowSet& ws,
                             const std::vector<std::size_t>& idx) {
    const int Kc = cfg_.n_classes;
    const double invB = 1.0 / static_cast<double>(idx.size());
    double total = 0.0;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const int y = ws.labels[idx[i]];
      if (y < 0 || y >= Kc)
        throw ArgumentError("label out of range: " + std::to_string(y));
      const S* row = buf_.logits.data() + i * Kc;
      S* grow = buf_.logit_grad.data() + i * Kc;
      double m = static_cast<double>(row[0]);
      for (int k = 1; k < Kc; ++k) m = std::max(m, static_cast<double>(row[k]));
      double z = 0.0;
      for (int k = 0; k < Kc; ++k)
        z += std::exp(static_cast<double>(row[k]) - m);
      for (int k = 0; k < Kc; ++k) {
        const double p = std::exp(static_cast<double>(row[k]) - m) / z;
        grow[k] = static_cast<S>((p - (k == y ? 1.0 : 0.0)) * invB);
      }
      total += m + std::log(z) - static_cast<double>(row[y]);
    }
    return total * invB;
  }

  void backward(std::size_t B) {
    const std::size_t F = static_cast<std::size_t>(cfg_.filters);
    const std::size_t FC = static_cast<std::size_t>(cfg_.fc_units);
    const std::size_t K = static_cast<std::size_t>(cfg_.kernel_frames);
    const std::size_t nb = branches_.size();

    dense_backward(params_[out_w_], params_[out_b_], buf_.dropped.data(),
                   buf_.logit_grad.data(), buf_.g_dropped.data(), B);
    for (std::size_t i = 0; i < B * FC; ++i)
      buf_.g_fusion_out[i] = buf_.g_dropped[i] * buf_.drop_mask[i];
    relu_mask(buf_.fusion_out.data(), buf_.g_fusion_out.data(), B * FC);
    dense_backward(params_[fusion_w_], params_[fusion_b_], buf_.concat.data(),
                   buf_.g_fusion_out.data(), buf_.g_concat.data(), B);

    for (std::size_t b = 0; b < nb; ++b) {
      const auto& bp = branches_[b];
      const std::size_t cb = bp.channels.size();
      for (std::size_t i = 0; i < B; ++i)
        std::memcpy(buf_.g_fc_out[b].data() + i * FC,
                    buf_.g_concat.data() + (i * nb + b) * FC, FC * sizeof(S));
      relu_mask(buf_.fc_out[b].data(), buf_.g_fc_out[b].data(), B * FC);
      dense_backward(params_[bp.fc_w], params_[bp.fc_b], buf_.pool_out[b].data(),
                     buf_.g_fc_out[b].data(), buf_.g_pool_out[b].data(), B);

      // Pool backward: route each gradient to the argmax frame.
      const std::size_t t_conv = layer_t(cfg_.conv_layers);
      const std::size_t pt = static_cast<std::size_t>(pool_t_);
      auto& g_last = buf_.g_conv_out[b][static_cast<std::size_t>(cfg_.conv_layers) - 1];
      std::fill(g_last.begin(), g_last.end(), S(0));
      for (std::size_t i = 0; i < B; ++i) {
        for (std::size_t t = 0; t < pt; ++t) {
          const S* g = buf_.g_pool_out[b].data() + (i * pt + t) * F;
          const std::uint8_t* ar = buf_.pool_arg[b].data() + (i * pt + t) * F;
          for (std::size_t f = 0; f < F; ++f)
            g_last[(i * t_conv + 2 * t + ar[f]) * F + f] += g[f];
        }
      }

      // Conv stack backward, last layer first.
      for (int l = cfg_.conv_layers - 1; l >= 0; --l) {
        const std::size_t t_out = layer_t(l + 1);
        const std::size_t t_in = layer_t(l);
        const std::size_t cin = l == 0 ? cb : F;
        const S* in = l == 0 ? buf_.branch_in[b].data()
                             : buf_.conv_out[b][static_cast<std::size_t>(l) - 1].data();
        S* g_in = l == 0 ? buf_.g_branch_in[b].data()
                         : buf_.g_conv_out[b][static_cast<std::size_t>(l) - 1].data();
        std::vector<S>& g_out_v = buf_.g_conv_out[b][static_cast<std::size_t>(l)];
        relu_mask(buf_.conv_out[b][static_cast<std::size_t>(l)].data(),
                  g_out_v.data(), B * t_out * F);
        Tensor<S>& w = params_[bp.conv_w[l]];
        Tensor<S>& bias = params_[bp.conv_b[l]];
        std::fill_n(g_in, B * t_in * cin, S(0));
        for (std::size_t i = 0; i < B; ++i) {
          const S* xin = in + i * t_in * cin;
          S* gxin = g_in + i * t_in * cin;
          const S* gout = g_out_v.data() + i * t_out * F;
          for (std::size_t t = 0; t < t_out; ++t) {
            const S* xrow = xin + t * cin;
            S* gxrow = gxin + t * cin;
            for (std::size_t f = 0; f < F; ++f) {
              const S g = gout[t * F + f];
              if (g == S(0)) continue;
              bias.g[f] += g;
              S* gw = w.g.data() + f * K * cin;
              const S* wf = w.v.data() + f * K * cin;
              for (std::size_t kc = 0; kc < K * cin; ++kc) {
                gw[kc] += g * xrow[kc];
                gxrow[kc] += g * wf[kc];
              }
            }
          }
        }
      }
    }
  }

  void relu_mask(const S* out, S* grad, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
      if (out[i] <= S(0)) grad[i] = S(0);
  }

  void dense_backward(Tensor<S>& w, Tensor<S>& bias, const S* in,
                      const S* g_out, S* g_in, std::size_t B) {
    const std::size_t rows = w.rows, cols = w.cols;
    std::fill_n(g_in, B * cols, S(0));
    for (std::size_t i = 0; i < B; ++i) {
      const S* x = in + i * cols;
      const S* go = g_out + i * rows;
      S* gx = g_in + i * cols;
      for (std::size_t o = 0; o < rows; ++o) {
        const S g = go[o];
        if (g == S(0)) continue;
        bias.g[o] += g;
        S* gw = w.g.data() + o * cols;
        const S* wrow = w.v.data() + o * cols;
        for (std::size_t k = 0; k < cols; ++k) {
          gw[k] += g * x[k];
          gx[k] += g * wrow[k];
        }
      }
    }
  }

  ModelConfig cfg_;
  std::size_t window_size_;
  std::uint64_t init_seed_;
  long conv_t_ = 0;
  long pool_t_ = 0;
  std::vector<Tensor<S>> params_;
  std::vector<BranchParams> branches_;
  std::size_t fusion_w_ = 0, fusion_b_ = 0, out_w_ = 0, out_b_ = 0;
  Buffers buf_;
};

// RMSProp with momentum:
//   g   = grad + weight_decay * w
//   sq  = alpha * sq + (1 - alpha) * g^2
//   buf = momentum * buf + g / (sqrt(sq) + eps)
//   w  -= lr * buf
template <typename S>
class RMSProp {
 public:
  struct Config {
    double lr = 1e-4;
    double alpha = 0.99;
    double eps = 1e-8;
    double momentum = 0.9;
    double weight_decay = 5e-4;
  };

  RMSProp(Network<S>& net, const Config& cfg) : net_(net), cfg_(cfg) {
    if (cfg.lr <= 0.0) throw ConfigError("learning rate must be positive");
    for (const auto& t : net.params()) {
      sq_.emplace_back(t.size(), S(0));
      buf_.emplace_back(t.size(), S(0));
    }
  }

  void step() {
    auto& params = net_.params();
    for (std::size_t p = 0; p < params.size(); ++p) {
      auto& t = params[p];
      auto& sq = sq_[p];
      auto& mb = buf_[p];
      const S alpha = static_cast<S>(cfg_.alpha);
      const S one_m_alpha = static_cast<S>(1.0 - cfg_.alpha);
      const S eps = static_cast<S>(cfg_.eps);
      const S mom = static_cast<S>(cfg_.momentum);
      const S wd = static_cast<S>(cfg_.weight_decay);
      const S lr = static_cast<S>(cfg_.lr);
      for (std::size_t i = 0; i < t.size(); ++i) {
        const S g = t.g[i] + wd * t.v[i];
        sq[i] = alpha * sq[i] + one_m_alpha * g * g;
        mb[i] = mom * mb[i] + g / (std::sqrt(sq[i]) + eps);
        t.v[i] -= lr * mb[i];
      }
    }
  }

 private:
  Network<S>& net_;
  Config cfg_;
  std::vector<std::vector<S>> sq_;
  std::vector<std::vector<S>> buf_;
};

struct TrainConfig {
  double lr = 1e-4;
  int batch_size = 100;
  int epochs = 32;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double noise_sigma = 0.01;
  int patience = 5;
  double val_fraction = 0.1;

  void validate() const {
    if (lr <= 0.0) throw ConfigError("lr must be positive");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (noise_sigma < 0.0) throw ConfigError("noise_sigma must be >= 0");
    if (patience < 0) throw ConfigError("patience must be >= 0");
    if (val_fraction < 0.0 || val_fraction >= 1.0)
      throw ConfigError("val_fraction must be in [0, 1)");
  }
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"lr", c.lr},
                     {"batch_size", c.batch_size},
                     {"epochs", c.epochs},
                     {"momentum", c.momentum},
                     {"weight_decay", c.weight_decay},
                     {"noise_sigma", c.noise_sigma},
                     {"patience", c.patience},
                     {"val_fraction", c.val_fraction}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  c = TrainConfig{};
  if (j.contains("lr")) j.at("lr").get_to(c.lr);
  if (j.contains("batch_size")) j.at("batch_size").get_to(c.batch_size);
  if (j.contains("epochs")) j.at("epochs").get_to(c.epochs);
  if (j.contains("momentum")) j.at("momentum").get_to(c.momentum);
  if (j.contains("weight_decay")) j.at("weight_decay").get_to(c.weight_decay);
  if (j.contains("noise_sigma")) j.at("noise_sigma").get_to(c.noise_sigma);
  if (j.contains("patience")) j.at("patience").get_to(c.patience);
  if (j.contains("val_fraction")) j.at("val_fraction").get_to(c.val_fraction);
}

struct EpochStats {
  double train_loss = 0.0;
  double val_loss = 0.0;  // NaN when no validation split exists
};

struct TrainResult {
  std::vector<EpochStats> history;
  int best_epoch = -1;     // epoch whose weights the model ended with
  int epochs_run = 0;
  bool early_stopped = false;
};

namespace detail {

// Validation split stratified by (subject, class): a fixed fraction of each
// bucket, rounded down, chosen by seeded shuffle. Small buckets contribute
// nothing, so sparse subject/class combinations stay in training.
inline void split_validation(const WindowSet& ws, double fraction,
                             std::uint64_t seed,
                             std::vector<std::size_t>& train_idx,
                             std::vector<std::size_t>& val_idx) {
  std::map<std::pair<std::string, int>, std::vector<std::size_t>> buckets;
  for (std::size_t i = 0; i < ws.size(); ++i)
    buckets[{ws.sources[i].subject_id, ws.labels[i]}].push_back(i);
  for (auto& [key, idx] : buckets) {
    const std::size_t take =
        static_cast<std::size_t>(fraction * static_cast<double>(idx.size()));
    Rng rng(stable_hash(seed, "valsplit", key.first,
                        static_cast<std::uint64_t>(key.second)));
    rng.shuffle(idx);
    for (std::size_t i = 0; i < idx.size(); ++i)
      (i < take ? val_idx : train_idx).push_back(idx[i]);
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(val_idx.begin(), val_idx.end());
}

}  // namespace detail

// Full training loop: RMSProp with momentum over shuffled mini-batches,
// fresh Gaussian noise on the training windows each epoch, and early
// stopping on validation loss (patience in epochs) with the best weights
// restored. All randomness derives from `seed`; the model's own weights
// come from the seed it was built with.
template <typename S>
TrainResult train(Network<S>& net, const WindowSet& train_ws,
                  const TrainConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::set<int> distinct(train_ws.labels.begin(), train_ws.labels.end());
  if (distinct.size() < 2)
    throw TrainError(TrainError::Code::degenerate_labels,
                     "training set has " + std::to_string(distinct.size()) +
                         " distinct classes; need at least 2");

  std::vector<std::size_t> train_idx, val_idx;
  detail::split_validation(train_ws, cfg.val_fraction, seed, train_idx, val_idx);
  if (train_idx.empty())
    throw TrainError(TrainError::Code::degenerate_labels,
                     "validation split left no training windows");

  typename RMSProp<S>::Config opt_cfg;
  opt_cfg.lr = cfg.lr;
  opt_cfg.momentum = cfg.momentum;
  opt_cfg.weight_decay = cfg.weight_decay;
  RMSProp<S> opt(net, opt_cfg);

  TrainResult res;
  const bool has_val = !val_idx.empty();
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<std::vector<S>> best_weights;
  int since_best = 0;

  Rng order_rng(stable_hash(seed, "order"));
  Rng dropout_rng(stable_hash(seed, "dropout"));

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order = train_idx;
    order_rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t done = 0;
    while (done < order.size()) {
      const std::size_t take =
          std::min(static_cast<std::size_t>(cfg.batch_size), order.size() - done);
      std::vector<std::size_t> batch(order.begin() + done,
                                     order.begin() + done + take);
      const double loss = net.train_batch(train_ws, batch, epoch,
                                          cfg.noise_sigma, seed, dropout_rng);
      opt.step();
      loss_sum += loss * static_cast<double>(take);
      done += take;
    }

    EpochStats stats;
    stats.train_loss = loss_sum / static_cast<double>(order.size());
    stats.val_loss = std::numeric_limits<double>::quiet_NaN();
    res.history.push_back(stats);
    res.epochs_run = epoch + 1;

    if (has_val) {
      const double vl = net.eval_loss(train_ws, val_idx);
      res.history.back().val_loss = vl;
      if (vl < best_val) {
        best_val = vl;
        res.best_epoch = epoch;
        net.snapshot_weights(best_weights);
        since_best = 0;
      } else if (++since_best >= cfg.patience && cfg.patience > 0) {
        res.early_stopped = true;
        break;
      }
    }
  }

  if (has_val && !best_weights.empty()) {
    net.restore_weights(best_weights);
  } else {
    res.best_epoch = res.epochs_run - 1;
  }
  return res;
}

// Checkpoint layout: magic, little-endian u32 header length, JSON header
// (config, window size, scalar width, tensor shapes), raw parameter data in
// declaration order.
inline constexpr char kModelMagic[8] = {'H', 'A', 'M', 'O', 'D', 'E', 'L', '1'};

template <typename S>
void save_model(const Network<S>& net, const std::filesystem::path& path) {
  nlohmann::json header;
  header["format"] = 1;
  header["scalar"] = sizeof(S) == 4 ? "f32" : "f64";
  header["config"] = net.config();
  header["window_size"] = net.window_size();
  header["init_seed"] = net.init_seed();
  auto tensors = nlohmann::json::array();
  for (const auto& t : net.params())
    tensors.push_back({{"name", t.name}, {"rows", t.rows}, {"cols", t.cols}});
  header["tensors"] = tensors;
  const std::string h = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open for writing: " + path.string());
  out.write(kModelMagic, sizeof(kModelMagic));
  const std::uint32_t len = static_cast<std::uint32_t>(h.size());
  char lenb[4] = {static_cast<char>(len & 0xff),
                  static_cast<char>((len >> 8) & 0xff),
                  static_cast<char>((len >> 16) & 0xff),
                  static_cast<char>((len >> 24) & 0xff)};
  out.write(lenb, 4);
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  for (const auto& t : net.params())
    out.write(reinterpret_cast<const char*>(t.v.data()),
              static_cast<std::streamsize>(t.v.size() * sizeof(S)));
  if (!out) throw Error("failed to write model to " + path.string());
}

template <typename S>
Network<S> load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open model file: " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kModelMagic, 8) != 0)
    throw ConfigError(path.string() + ": not a model checkpoint");
  char lenb[4];
  in.read(lenb, 4);
  const std::uint32_t len = static_cast<std::uint32_t>(
      static_cast<unsigned char>(lenb[0]) |
      (static_cast<unsigned char>(lenb[1]) << 8) |
      (static_cast<unsigned char>(lenb[2]) << 16) |
      (static_cast<unsigned char>(lenb[3]) << 24));
  std::string h(len, '\0');
  in.read(h.data(), len);
  if (!in) throw ConfigError(path.string() + ": truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(h);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": bad header: " + e.what());
  }
  const std::string scalar = header.at("scalar").get<std::string>();
  const std::string expect = sizeof(S) == 4 ? "f32" : "f64";
  if (scalar != expect)
    throw ConfigError(path.string() + ": checkpoint scalar is " + scalar +
                      ", expected " + expect);
  ModelConfig cfg = header.at("config").get<ModelConfig>();
  const std::size_t window_size = header.at("window_size").get<std::size_t>();
  const std::uint64_t seed = header.at("init_seed").get<std::uint64_t>();
  Network<S> net(cfg, window_size, seed);
  const auto& tensors = header.at("tensors");
  if (tensors.size() != net.params().size())
    throw ConfigError(path.string() + ": tensor list mismatch");
  for (std::size_t i = 0; i < net.params().size(); ++i) {
    auto& t = net.params()[i];
    if (tensors[i].at("name").get<std::string>() != t.name ||
        tensors[i].at("rows").get<std::size_t>() != t.rows ||
        tensors[i].at("cols").get<std::size_t>() != t.cols)
      throw ConfigError(path.string() + ": tensor layout mismatch at " + t.name);
    in.read(reinterpret_cast<char*>(t.v.data()),
            static_cast<std::streamsize>(t.v.size() * sizeof(S)));
  }
  if (!in) throw ConfigError(path.string() + ": truncated weights");
  return net;
}

}  // namespace haraudit

#endif  // HARAUDIT_CLASSIFIER_HPP_
