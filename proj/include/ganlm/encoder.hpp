#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "ganlm/data.hpp"
#include "ganlm/errors.hpp"
#include "ganlm/ops.hpp"
#include "ganlm/optim.hpp"
#include "ganlm/rng.hpp"
#include "ganlm/tensor.hpp"

namespace ganlm {

struct EncoderConfig {
  std::size_t vocab_size = 0;
  std::size_t model_dim = 128;
  std::size_t n_layers = 2;
  std::size_t n_heads = 4;
  std::size_t ffn_dim = 0;  // 0 means 4 * model_dim
  std::size_t max_len = 64;
  double dropout = 0.1;

  std::size_t ffn() const { return ffn_dim ? ffn_dim : 4 * model_dim; }

  void validate() const {
    if (vocab_size < 1 || model_dim < 1 || n_layers < 1 || n_heads < 1 || max_len < 2) {
      throw ConfigError("encoder dimensions must be >= 1 (max_len >= 2)");
    }
    if (model_dim % n_heads != 0) {
      throw ConfigError("model_dim " + std::to_string(model_dim) + " is not divisible by n_heads " + std::to_string(n_heads));
    }
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("encoder dropout must lie in [0, 1)");
  }

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

// V*d + L*d + layers * (4*(d*d + d) + 2*d*f + f + d + 4*d) + 2*d
inline std::size_t encoder_parameter_count(const EncoderConfig& c) {
  const std::size_t d = c.model_dim, f = c.ffn();
  return c.vocab_size * d + c.max_len * d + c.n_layers * (4 * (d * d + d) + 2 * d * f + f + d + 4 * d) + 2 * d;
}

// Token/position embeddings, then per layer:
//   ln1.gain ln1.bias q.w q.b k.w k.b v.w v.b o.w o.b ln2.gain ln2.bias ffn1.w ffn1.b ffn2.w ffn2.b
// then the final layer norm. Weights are stored [in x out].
class EncoderParams {
 public:
  static constexpr std::size_t kPerLayer = 16;

  EncoderParams() = default;

  EncoderParams(const EncoderConfig& config, Rng& rng) : config_(config) {
    config_.validate();
    const std::size_t d = config_.model_dim, f = config_.ffn();
    constexpr double kStd = 0.02;
    params_.add("tok_emb", truncated_normal({config_.vocab_size, d}, kStd, rng));
    params_.add("pos_emb", truncated_normal({config_.max_len, d}, kStd, rng));
    for (std::size_t l = 0; l < config_.n_layers; ++l) {
      const std::string p = "layer" + std::to_string(l) + ".";
      params_.add(p + "ln1.gain", Tensor({d}, 1.0));
      params_.add(p + "ln1.bias", Tensor({d}));
      for (const char* m : {"q", "k", "v", "o"}) {
        params_.add(p + m + ".w", truncated_normal({d, d}, kStd, rng));
        params_.add(p + m + ".b", Tensor({d}));
      }
      params_.add(p + "ln2.gain", Tensor({d}, 1.0));
      params_.add(p + "ln2.bias", Tensor({d}));
      params_.add(p + "ffn1.w", truncated_normal({d, f}, kStd, rng));
      params_.add(p + "ffn1.b", Tensor({f}));
      params_.add(p + "ffn2.w", truncated_normal({f, d}, kStd, rng));
      params_.add(p + "ffn2.b", Tensor({d}));
    }
    params_.add("final_ln.gain", Tensor({d}, 1.0));
    params_.add("final_ln.bias", Tensor({d}));
  }

  // Rebuilds from stored tensors; shapes are checked against the config.
  EncoderParams(const EncoderConfig& config, ParamSet params) : config_(config), params_(std::move(params)) {
    config_.validate();
    Rng scratch(0);
    EncoderParams reference(config_, scratch);
    if (params_.size() != reference.params_.size()) {
      throw DimensionError("encoder checkpoint holds " + std::to_string(params_.size()) + " tensors, config needs " +
                           std::to_string(reference.params_.size()));
    }
    for (std::size_t i = 0; i < params_.size(); ++i) {
      if (params_[i].var.shape() != reference.params_[i].var.shape()) {
        throw DimensionError("encoder tensor '" + reference.params_[i].name + "' has shape " +
                             shape_str(params_[i].var.shape()) + ", config needs " +
                             shape_str(reference.params_[i].var.shape()));
      }
      params_[i].name = reference.params_[i].name;
    }
  }

  const EncoderConfig& config() const noexcept { return config_; }
  ParamSet& params() noexcept { return params_; }
  const ParamSet& params() const noexcept { return params_; }

  const Var& tok_emb() const { return params_[0].var; }
  const Var& pos_emb() const { return params_[1].var; }
  const Var& layer(std::size_t l, std::size_t slot) const { return params_[2 + l * kPerLayer + slot].var; }
  const Var& final_gain() const { return params_[params_.size() - 2].var; }
  const Var& final_bias() const { return params_[params_.size() - 1].var; }

  EncoderParams clone() const {
    EncoderParams out;
    out.config_ = config_;
    out.params_ = params_.clone();
    return out;
  }

 private:
  EncoderConfig config_;
  ParamSet params_;
};

// Final hidden states of every position, [rows*max_len x d].
inline Var encode_sequence(const EncodedBatch& batch, const EncoderParams& enc, Mode mode, Rng& rng) {
  const auto& cfg = enc.config();
  const std::size_t b = batch.rows, len = batch.max_len, d = cfg.model_dim;
  const std::size_t heads = cfg.n_heads, dh = d / heads;
  if (b == 0) throw ContractError("encode_sequence on an empty batch");
  if (len > cfg.max_len) {
    throw DimensionError("batch length " + std::to_string(len) + " exceeds encoder max_len " + std::to_string(cfg.max_len));
  }
  for (int id : batch.token_ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= cfg.vocab_size) {
      throw IndexError("token id " + std::to_string(id) + " out of range for vocabulary of " + std::to_string(cfg.vocab_size));
    }
  }

  std::vector<int> positions(b * len);
  for (std::size_t r = 0; r < b; ++r)
    for (std::size_t t = 0; t < len; ++t) positions[r * len + t] = static_cast<int>(t);

  // Additive key mask: -1e9 on [PAD] keys, so their weights underflow to 0.
  Tensor mask_values({b * heads, len, len});
  for (std::size_t r = 0; r < b; ++r)
    for (std::size_t h = 0; h < heads; ++h)
      for (std::size_t q = 0; q < len; ++q)
        for (std::size_t k = 0; k < len; ++k)
          mask_values[((r * heads + h) * len + q) * len + k] = batch.attention_mask[r * len + k] ? 0.0 : -1e9;
  const Var key_mask(std::move(mask_values));
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

  auto split_heads = [&](const Var& x) {
    return reshape(permute(reshape(x, {b, len, heads, dh}), {0, 2, 1, 3}), {b * heads, len, dh});
  };

  Var x = add(embedding(enc.tok_emb(), batch.token_ids), embedding(enc.pos_emb(), positions));
  x = dropout(x, cfg.dropout, rng, mode);
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    auto P = [&](std::size_t slot) -> const Var& { return enc.layer(l, slot); };
    const Var h = layer_norm(x, P(0), P(1));
    const Var q = split_heads(linear(h, P(2), P(3)));
    const Var k = split_heads(linear(h, P(4), P(5)));
    const Var v = split_heads(linear(h, P(6), P(7)));
    const Var probs = softmax(add(scale(bmm(q, k, true), inv_sqrt_dh), key_mask));
    const Var ctx = reshape(permute(reshape(bmm(probs, v), {b, heads, len, dh}), {0, 2, 1, 3}), {b * len, d});
    x = add(x, dropout(linear(ctx, P(8), P(9)), cfg.dropout, rng, mode));
    const Var h2 = layer_norm(x, P(10), P(11));
    const Var ff = linear(gelu(linear(h2, P(12), P(13))), P(14), P(15));
    x = add(x, dropout(ff, cfg.dropout, rng, mode));
  }
  return layer_norm(x, enc.final_gain(), enc.final_bias());
}

// Sentence embeddings: final hidden state at each row's [CLS] position, [rows x d].
inline Var encode_batch(const EncodedBatch& batch, const EncoderParams& enc, Mode mode, Rng& rng) {
  const Var hidden = encode_sequence(batch, enc, mode, rng);
  std::vector<std::size_t> cls_rows(batch.rows);
  for (std::size_t r = 0; r < batch.rows; ++r) cls_rows[r] = r * batch.max_len;
  return gather_rows(hidden, cls_rows);
}

// ---------------------------------------------------------------------------
// Masked language modelling.

struct MaskedBatch {
  EncodedBatch corrupted;
  std::vector<int> targets;  // original id at selected positions, -1 elsewhere
};

// Selects non-[PAD], non-[CLS] positions with probability mask_rate; of those
// 80% become [MASK], 10% a uniformly random non-reserved token, 10% stay.
inline MaskedBatch mask_tokens(const EncodedBatch& batch, Rng& rng, std::size_t vocab_size, double mask_rate = 0.15) {
  if (batch.rows == 0) throw ContractError("mask_tokens on an empty batch");
  MaskedBatch out{batch, std::vector<int>(batch.token_ids.size(), -1)};
  const bool can_randomize = vocab_size > static_cast<std::size_t>(Vocab::kReserved);
  for (std::size_t i = 0; i < batch.token_ids.size(); ++i) {
    const int id = batch.token_ids[i];
    if (id == Vocab::kPad || id == Vocab::kCls || !batch.attention_mask[i]) continue;
    if (!(rng.uniform() < mask_rate)) continue;
    out.targets[i] = id;
    const double u = rng.uniform();
    if (u < 0.8) {
      out.corrupted.token_ids[i] = Vocab::kMask;
    } else if (u < 0.9 && can_randomize) {
      out.corrupted.token_ids[i] =
          Vocab::kReserved + static_cast<int>(rng.uniform_int(vocab_size - static_cast<std::size_t>(Vocab::kReserved)));
    }
  }
  return out;
}

// Output projection d -> vocab used only for pretraining.
struct MlmHead {
  ParamSet params;

  MlmHead() = default;
  MlmHead(std::size_t model_dim, std::size_t vocab_size, Rng& rng) {
    params.add("mlm.w", truncated_normal({model_dim, vocab_size}, 0.02, rng));
    params.add("mlm.b", Tensor({vocab_size}));
  }
  const Var& weight() const { return params[0].var; }
  const Var& bias() const { return params[1].var; }
};

// Mean cross-entropy at the selected positions; nullopt when none selected.
inline std::optional<Var> mlm_loss(const MaskedBatch& masked, const EncoderParams& enc, const MlmHead& head, Mode mode,
                                   Rng& rng) {
  std::vector<std::size_t> rows;
  std::vector<int> targets;
  for (std::size_t i = 0; i < masked.targets.size(); ++i)
    if (masked.targets[i] >= 0) {
      rows.push_back(i);
      targets.push_back(masked.targets[i]);
    }
  if (rows.empty()) return std::nullopt;
  const Var hidden = encode_sequence(masked.corrupted, enc, mode, rng);
  const Var logits = linear(gather_rows(hidden, rows), head.weight(), head.bias());
  return cross_entropy_from_logits(logits, targets, std::vector<bool>(targets.size(), true));
}

struct PretrainConfig {
  std::size_t epochs = 5;
  std::size_t batch_size = 16;
  double learning_rate = 1e-3;
  double mask_rate = 0.15;
  double weight_decay = 0.01;
};

struct PretrainResult {
  EncoderParams encoder;
  MlmHead head;
  std::vector<double> epoch_loss;  // mean batch loss per epoch
};

// Trains copies of the given encoder and head; the inputs are not modified.
inline PretrainResult mlm_pretrain(const EncodedBatch& data, const EncoderParams& init, const MlmHead& head_init,
                                   const PretrainConfig& cfg, Rng& rng) {
  if (data.rows == 0) throw ContractError("mlm_pretrain needs a non-empty corpus");
  PretrainResult res{init.clone(), MlmHead{}, {}};
  res.head.params = head_init.params.clone();
  if (cfg.epochs == 0) return res;
  std::vector<Var> trainable = res.encoder.params().vars();
  for (const auto& v : res.head.params.vars()) trainable.push_back(v);
  AdamW opt(trainable, AdamWConfig{cfg.learning_rate, 0.9, 0.999, 1e-8, cfg.weight_decay});
  std::vector<std::size_t> order(data.rows);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const std::size_t vocab = init.config().vocab_size;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const auto batch = data.select(std::span<const std::size_t>(order).subspan(start, end - start));
      const auto masked = mask_tokens(batch, rng, vocab, cfg.mask_rate);
      opt.zero_grad();
      auto loss = mlm_loss(masked, res.encoder, res.head, Mode::kTrain, rng);
      if (!loss) continue;
      if (!std::isfinite(loss->value().item())) throw NumericError("non-finite MLM loss");
      total += loss->value().item();
      ++batches;
      backward(*loss);
      opt.step();
    }
    active_tape().clear();
    res.epoch_loss.push_back(batches ? total / static_cast<double>(batches) : 0.0);
  }
  return res;
}

// exp(mean masked-token cross-entropy) in eval mode, with masking drawn from
// a fresh stream of the given seed so that different models see identical masks.
inline double masked_perplexity(const EncodedBatch& data, const EncoderParams& enc, const MlmHead& head,
                                std::uint64_t mask_seed, double mask_rate = 0.15, std::size_t batch_size = 64) {
  NoGradGuard no_grad;
  Rng mask_rng(mask_seed);
  Rng unused(0);
  double nll = 0.0;
  std::size_t count = 0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.rows; start += batch_size) {
    idx.clear();
    for (std::size_t r = start; r < std::min(data.rows, start + batch_size); ++r) idx.push_back(r);
    const auto masked = mask_tokens(data.select(idx), mask_rng, enc.config().vocab_size, mask_rate);
    std::size_t n = 0;
    for (int t : masked.targets) n += t >= 0;
    auto loss = mlm_loss(masked, enc, head, Mode::kEval, unused);
    if (!loss) continue;
    nll += loss->value().item() * static_cast<double>(n);
    count += n;
  }
  if (count == 0) throw ContractError("no masked positions to score");
  return std::exp(nll / static_cast<double>(count));
}

}  // namespace ganlm
