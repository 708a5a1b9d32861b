#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "exitnet/errors.hpp"
#include "exitnet/ops.hpp"

namespace exitnet {

enum class IscTransform { identity, linear };

/// How forward treats the logit transfer paths between adjacent exits.
/// `train` stops gradients along the transfer; `infer` produces the same
/// values without recording stop nodes; `off` disables the paths entirely.
enum class IscMode { off, train, infer };

struct ModelConfig {
  int input_dim = 0;
  int num_classes = 0;
  int k = 0;
  std::vector<int> block_widths;
  int head_hidden = 0;  // 0 = affine-only heads
  bool isc_enabled = false;
  IscTransform isc_transform = IscTransform::identity;

  void validate() const {
    if (input_dim < 1) throw ConfigError("ModelConfig: input_dim must be >= 1");
    if (num_classes < 2)
      throw ConfigError("ModelConfig: num_classes must be >= 2");
    if (k < 2) throw ConfigError("ModelConfig: k must be >= 2");
    if (static_cast<int>(block_widths.size()) != k)
      throw ConfigError("ModelConfig: block_widths must have k entries");
    for (int w : block_widths)
      if (w < 1) throw ConfigError("ModelConfig: block widths must be >= 1");
    if (head_hidden < 0)
      throw ConfigError("ModelConfig: head_hidden must be >= 0");
  }
};

/// Analytic multiply-accumulate counts for the prefix ending at each exit:
/// blocks 1..i plus every head up to i (the sequential early-exit protocol
/// evaluates all of them), plus linear transfer paths when configured.
inline std::vector<long long> count_macs(const ModelConfig& cfg) {
  std::vector<long long> prefix;
  prefix.reserve(static_cast<std::size_t>(cfg.k));
  long long acc = 0;
  int prev = cfg.input_dim;
  for (int i = 0; i < cfg.k; ++i) {
    int w = cfg.block_widths[static_cast<std::size_t>(i)];
    acc += static_cast<long long>(prev) * w;
    if (cfg.head_hidden > 0)
      acc += static_cast<long long>(w) * cfg.head_hidden +
             static_cast<long long>(cfg.head_hidden) * cfg.num_classes;
    else
      acc += static_cast<long long>(w) * cfg.num_classes;
    if (cfg.isc_enabled && cfg.isc_transform == IscTransform::linear && i > 0)
      acc += static_cast<long long>(cfg.num_classes) * cfg.num_classes;
    prefix.push_back(acc);
    prev = w;
  }
  return prefix;
}

struct DenseLayer {
  Tensor weight;  // [in x out]
  Tensor bias;    // [out]
};

struct ForwardOutputs {
  std::vector<Tensor> logits;           // k tensors, batch x classes
  std::vector<Tensor> features;         // k tensors, batch x width_i
  std::vector<long long> cost_prefix;   // MACs to compute exits 1..i
};

/// k-exit feed-forward model: shared backbone of dense+ReLU blocks, one
/// classifier head per block, and optional logit transfer paths between
/// adjacent exits. Exit i depends only on blocks/heads 1..i.
class MultiExitModel {
 public:
  struct Head {
    bool has_hidden = false;
    DenseLayer hidden;
    DenseLayer out;
    bool has_isc = false;  // linear transfer feeding this head's logits
    DenseLayer isc;
  };

  struct NamedParam {
    std::string name;
    Tensor tensor;
  };

  MultiExitModel() = default;

  static MultiExitModel build(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    MultiExitModel m;
    m.cfg_ = cfg;
    std::mt19937_64 rng(seed);
    int prev = cfg.input_dim;
    for (int i = 0; i < cfg.k; ++i) {
      int w = cfg.block_widths[static_cast<std::size_t>(i)];
      DenseLayer blk;
      blk.weight = init_uniform({prev, w}, prev, rng);
      blk.bias = init_uniform({w}, prev, rng);
      m.register_param("block" + std::to_string(i + 1) + ".weight", blk.weight);
      m.register_param("block" + std::to_string(i + 1) + ".bias", blk.bias);
      m.blocks_.push_back(blk);
      prev = w;
    }
    prev = cfg.input_dim;
    for (int i = 0; i < cfg.k; ++i) {
      int w = cfg.block_widths[static_cast<std::size_t>(i)];
      Head h;
      std::string base = "head" + std::to_string(i + 1);
      int head_in = w;
      if (cfg.head_hidden > 0) {
        h.has_hidden = true;
        h.hidden.weight = init_uniform({w, cfg.head_hidden}, w, rng);
        h.hidden.bias = init_uniform({cfg.head_hidden}, w, rng);
        m.register_param(base + ".hidden.weight", h.hidden.weight);
        m.register_param(base + ".hidden.bias", h.hidden.bias);
        head_in = cfg.head_hidden;
      }
      h.out.weight = init_uniform({head_in, cfg.num_classes}, head_in, rng);
      h.out.bias = init_uniform({cfg.num_classes}, head_in, rng);
      m.register_param(base + ".out.weight", h.out.weight);
      m.register_param(base + ".out.bias", h.out.bias);
      if (cfg.isc_enabled && cfg.isc_transform == IscTransform::linear &&
          i > 0) {
        // Zero-initialized so the path starts as a no-op on top of the
        // residual identity prior; learned during head fine-tuning.
        h.has_isc = true;
        h.isc.weight = Tensor({cfg.num_classes, cfg.num_classes}, true);
        h.isc.bias = Tensor({cfg.num_classes}, true);
        m.register_param(base + ".isc.weight", h.isc.weight);
        m.register_param(base + ".isc.bias", h.isc.bias);
      }
      m.heads_.push_back(h);
    }
    m.cost_prefix_ = count_macs(cfg);
    return m;
  }

  const ModelConfig& config() const { return cfg_; }
  const std::vector<NamedParam>& params() const { return params_; }
  const std::vector<DenseLayer>& blocks() const { return blocks_; }
  const std::vector<Head>& heads() const { return heads_; }
  const std::vector<long long>& cost_prefix() const { return cost_prefix_; }

  Tensor param(const std::string& name) const {
    for (const auto& p : params_)
      if (p.name == name) return p.tensor;
    throw std::invalid_argument("MultiExitModel: no parameter named " + name);
  }

  long long parameter_count() const {
    long long n = 0;
    for (const auto& p : params_) n += p.tensor.size();
    return n;
  }

  void zero_grad() const {
    for (const auto& p : params_) {
      Tensor t = p.tensor;
      t.zero_grad();
    }
  }

  /// Dense+ReLU block i (0-based); maps features of width i-1 to width i.
  Tensor apply_block(int i, const Tensor& h, Tape* tape = nullptr) const {
    const DenseLayer& b = blocks_[static_cast<std::size_t>(i)];
    return ops::relu(ops::add_bias(ops::matmul(h, b.weight, tape), b.bias, tape),
                     tape);
  }

  /// Head i (0-based) on its feature input; plain logits, no transfer.
  Tensor apply_head(int i, const Tensor& h, Tape* tape = nullptr) const {
    const Head& hd = heads_[static_cast<std::size_t>(i)];
    Tensor z = h;
    if (hd.has_hidden)
      z = ops::relu(
          ops::add_bias(ops::matmul(z, hd.hidden.weight, tape), hd.hidden.bias, tape),
          tape);
    return ops::add_bias(ops::matmul(z, hd.out.weight, tape), hd.out.bias, tape);
  }

  /// Transfer transform on the logits bypassed from exit i to exit i+1
  /// (0-based i). Identity returns its input unchanged.
  Tensor apply_isc_transform(int i, const Tensor& prev_logits,
                             Tape* tape = nullptr) const {
    if (cfg_.isc_transform == IscTransform::identity) return prev_logits;
    const Head& hd = heads_[static_cast<std::size_t>(i) + 1];
    return ops::add_bias(ops::matmul(prev_logits, hd.isc.weight, tape),
                         hd.isc.bias, tape);
  }

  ForwardOutputs forward_all(const Tensor& x, IscMode mode,
                             Tape* tape = nullptr) const {
    check_input(x);
    ForwardOutputs out;
    out.cost_prefix = cost_prefix_;
    Tensor h = x;
    Tensor prev;
    for (int i = 0; i < cfg_.k; ++i) {
      h = apply_block(i, h, tape);
      out.features.push_back(h);
      Tensor lg = apply_head(i, h, tape);
      if (use_isc(mode) && i > 0) {
        Tensor t = prev;
        if (mode == IscMode::train) t = ops::stop_gradient(t, tape);
        t = apply_isc_transform(i - 1, t, tape);
        lg = ops::add(lg, t, tape);
      }
      out.logits.push_back(lg);
      prev = lg;
    }
    return out;
  }

  struct ExitResult {
    Tensor logits;
    long long cost = 0;
  };

  /// Computes only what exit j (1-based) needs: blocks 1..j, head j, and the
  /// transfer chain heads 1..j-1 when the paths are enabled.
  ExitResult forward_until(const Tensor& x, int j, Tape* tape = nullptr) const {
    if (j < 1 || j > cfg_.k)
      throw std::invalid_argument("forward_until: exit index out of range");
    check_input(x);
    Tensor h = x;
    Tensor prev;
    Tensor logits;
    for (int i = 0; i < j; ++i) {
      h = apply_block(i, h, tape);
      bool need_head = (i == j - 1) || cfg_.isc_enabled;
      if (!need_head) continue;
      Tensor lg = apply_head(i, h, tape);
      if (cfg_.isc_enabled && i > 0)
        lg = ops::add(lg, apply_isc_transform(i - 1, prev, tape), tape);
      prev = lg;
      if (i == j - 1) logits = lg;
    }
    return {logits, cost_prefix_[static_cast<std::size_t>(j) - 1]};
  }

  /// Final affine stage of every classifier: the head output layer plus, when
  /// present, the linear transfer map feeding the same logits.
  std::vector<std::string> last_layer_params() const {
    std::vector<std::string> names;
    for (int i = 0; i < cfg_.k; ++i) {
      std::string base = "head" + std::to_string(i + 1);
      names.push_back(base + ".out.weight");
      names.push_back(base + ".out.bias");
      if (heads_[static_cast<std::size_t>(i)].has_isc) {
        names.push_back(base + ".isc.weight");
        names.push_back(base + ".isc.bias");
      }
    }
    return names;
  }

 private:
  bool use_isc(IscMode mode) const {
    return cfg_.isc_enabled && mode != IscMode::off;
  }

  void check_input(const Tensor& x) const {
    if (x.rank() != 2 || x.dim(1) != cfg_.input_dim)
      throw std::invalid_argument(
          "MultiExitModel: input must be batch x input_dim");
  }

  static Tensor init_uniform(std::vector<int> shape, int fan_in,
                             std::mt19937_64& rng) {
    Tensor t(std::move(shape), true);
    double a = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-a, a);
    double* v = t.data();
    for (int i = 0; i < t.size(); ++i) v[i] = dist(rng);
    return t;
  }

  void register_param(std::string name, const Tensor& t) {
    params_.push_back({std::move(name), t});
  }

  ModelConfig cfg_;
  std::vector<DenseLayer> blocks_;
  std::vector<Head> heads_;
  std::vector<NamedParam> params_;
  std::vector<long long> cost_prefix_;
};

}  // namespace exitnet
