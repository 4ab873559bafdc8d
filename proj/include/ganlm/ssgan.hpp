#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ganlm/data.hpp"
#include "ganlm/encoder.hpp"
#include "ganlm/errors.hpp"
#include "ganlm/metrics.hpp"
#include "ganlm/ops.hpp"
#include "ganlm/optim.hpp"
#include "ganlm/rng.hpp"
#include "ganlm/trainlog.hpp"

namespace ganlm {

struct MlpConfig {
  std::size_t in = 0;
  std::size_t hidden = 0;
  std::size_t out = 0;
  double slope = 0.2;
  double dropout = 0.1;
  friend bool operator==(const MlpConfig&, const MlpConfig&) = default;
};

// One hidden layer: hidden = dropout(leaky_relu(x W1 + b1)), out = hidden W2 + b2.
// Weights and biases start uniform in +-1/sqrt(fan_in).
class Mlp {
 public:
  struct Output {
    Var out;
    Var hidden;
  };

  Mlp() = default;

  Mlp(const MlpConfig& config, Rng& rng) : config_(config) {
    if (!config.in || !config.hidden || !config.out) throw ConfigError("MLP dimensions must be >= 1");
    auto uniform = [&](Shape shape, std::size_t fan_in) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      Tensor t(std::move(shape));
      for (auto& v : t.values()) v = (2.0 * rng.uniform() - 1.0) * bound;
      return t;
    };
    params_.add("fc1.w", uniform({config.in, config.hidden}, config.in));
    params_.add("fc1.b", uniform({config.hidden}, config.in));
    params_.add("fc2.w", uniform({config.hidden, config.out}, config.hidden));
    params_.add("fc2.b", uniform({config.out}, config.hidden));
  }

  Mlp(const MlpConfig& config, ParamSet params) : config_(config), params_(std::move(params)) {
    const Shape expected[] = {{config.in, config.hidden}, {config.hidden}, {config.hidden, config.out}, {config.out}};
    const char* names[] = {"fc1.w", "fc1.b", "fc2.w", "fc2.b"};
    if (params_.size() != 4) throw DimensionError("MLP checkpoint must hold 4 tensors");
    for (std::size_t i = 0; i < 4; ++i) {
      if (params_[i].var.shape() != expected[i]) {
        throw DimensionError(std::string("MLP tensor ") + names[i] + " has shape " + shape_str(params_[i].var.shape()) +
                             ", expected " + shape_str(expected[i]));
      }
      params_[i].name = names[i];
    }
  }

  static Mlp zeros(const MlpConfig& config) {
    ParamSet p;
    p.add("fc1.w", Tensor({config.in, config.hidden}));
    p.add("fc1.b", Tensor({config.hidden}));
    p.add("fc2.w", Tensor({config.hidden, config.out}));
    p.add("fc2.b", Tensor({config.out}));
    return Mlp(config, std::move(p));
  }

  Output forward(const Var& x, Mode mode, Rng& rng) const {
    if (x.shape().size() != 2 || x.shape()[1] != config_.in) {
      throw DimensionError("MLP expects [n x " + std::to_string(config_.in) + "] input, got " + shape_str(x.shape()));
    }
    const Var h = dropout(leaky_relu(linear(x, params_[0].var, params_[1].var), config_.slope), config_.dropout, rng, mode);
    return {linear(h, params_[2].var, params_[3].var), h};
  }

  const MlpConfig& config() const noexcept { return config_; }
  ParamSet& params() noexcept { return params_; }
  const ParamSet& params() const noexcept { return params_; }

  Mlp clone() const { return Mlp(config_, params_.clone()); }

 private:
  MlpConfig config_;
  ParamSet params_;
};

struct SsganConfig {
  std::size_t batch_size = 16;
  double lr_d = 5e-5;
  double lr_g = 5e-5;
  double weight_decay = 0.01;
  std::size_t epochs = 7;
  std::size_t noise_dim = 100;
  std::size_t hidden_dim = 0;  // 0 means the embedding width d
  std::size_t k = 2;
  std::uint64_t seed = 0;
  double slope = 0.2;
  double dropout = 0.1;

  void validate() const {
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(lr_d > 0.0) || !(lr_g > 0.0)) throw ConfigError("learning rates must be > 0");
    if (k < 2) throw ConfigError("k must be >= 2");
    if (noise_dim < 1) throw ConfigError("noise_dim must be >= 1");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
  }
};

// Generator maps noise -> fake embeddings of width d; the discriminator maps
// embeddings -> k task logits plus the fake logit at index k. Without an
// encoder the real side is precomputed embeddings (frozen mode).
struct GanNetworks {
  std::optional<EncoderParams> encoder;
  Mlp generator;
  Mlp discriminator;
  std::size_t k = 2;

  static GanNetworks create(std::optional<EncoderParams> encoder, std::size_t embed_dim, const SsganConfig& cfg,
                            Rng& rng) {
    cfg.validate();
    if (encoder && encoder->config().model_dim != embed_dim) throw DimensionError("embedding width disagrees with encoder");
    const std::size_t hidden = cfg.hidden_dim ? cfg.hidden_dim : embed_dim;
    GanNetworks net;
    net.encoder = std::move(encoder);
    net.k = cfg.k;
    net.generator = Mlp({cfg.noise_dim, hidden, embed_dim, cfg.slope, cfg.dropout}, rng);
    net.discriminator = Mlp({embed_dim, hidden, cfg.k + 1, cfg.slope, cfg.dropout}, rng);
    return net;
  }

  std::size_t embed_dim() const { return discriminator.config().in; }
};

// G(z) for n standard-normal noise vectors drawn from rng.
inline Var generate_fake(Rng& rng, std::size_t n, const Mlp& generator, Mode mode) {
  if (n < 1) throw ContractError("generate_fake needs n >= 1");
  const Var z(sample_gaussian(rng, {n, generator.config().in}));
  return generator.forward(z, mode, rng).out;
}

struct Discrimination {
  Var logits;    // [n x (k+1)]
  Var features;  // [n x h]
};

inline Discrimination discriminate(const Var& embeddings, const Mlp& disc, Mode mode, Rng& rng) {
  auto o = disc.forward(embeddings, mode, rng);
  return {o.out, o.hidden};
}

struct LossTerm {
  Var total;
  LossBreakdown parts;
};

// L_D = L_sup + L_unsup.
//   L_sup   = masked mean of -log p(y | x) under the full (k+1)-way softmax
//   L_unsup = -mean log(1 - p(k | real)) - mean log p(k | fake)
inline LossTerm discriminator_loss(const Var& logits_real, std::span<const int> labels,
                                   const std::vector<bool>& labeled_mask, const Var& logits_fake) {
  const std::size_t width = logits_real.shape().at(1);
  if (logits_fake.shape().size() != 2 || logits_fake.shape()[1] != width) {
    throw DimensionError("real and fake logits differ in width");
  }
  const std::size_t fake_class = width - 1;
  const Var sup = cross_entropy_from_logits(logits_real, labels, labeled_mask);
  const Var unsup_real = scale(mean(log_prob_not_class(logits_real, fake_class)), -1.0);
  const Var unsup_fake = scale(mean(log_prob_of_class(logits_fake, fake_class)), -1.0);
  LossTerm out{add(add(sup, unsup_real), unsup_fake), {}};
  out.parts.d_supervised = sup.value().item();
  out.parts.d_unsup_real = unsup_real.value().item();
  out.parts.d_unsup_fake = unsup_fake.value().item();
  return out;
}

// L_G = ||mean(f_real) - mean(f_fake)||^2 - mean log(1 - p(k | fake)).
inline LossTerm generator_loss(const Var& features_real, const Var& features_fake, const Var& logits_fake) {
  if (features_real.shape().size() != 2 || features_fake.shape().size() != 2 ||
      features_real.shape()[1] != features_fake.shape()[1]) {
    throw DimensionError("feature widths differ: " + shape_str(features_real.shape()) + " vs " +
                         shape_str(features_fake.shape()));
  }
  const std::size_t fake_class = logits_fake.shape().at(1) - 1;
  const Var feat = l2_norm_sq(sub(mean_rows(features_real), mean_rows(features_fake)));
  const Var unsup = scale(mean(log_prob_not_class(logits_fake, fake_class)), -1.0);
  LossTerm out{add(feat, unsup), {}};
  out.parts.g_feature_matching = feat.value().item();
  out.parts.g_unsup = unsup.value().item();
  return out;
}

// Real inputs: token rows (encoded on the fly) or precomputed embeddings.
struct RealData {
  std::optional<EncodedBatch> tokens;
  std::optional<Tensor> embeddings;  // [n x d]
  std::vector<int> labels;
  std::vector<bool> labeled_mask;

  static RealData from_tokens(EncodedBatch batch) {
    RealData r;
    r.labels = batch.labels;
    r.labeled_mask = batch.labeled_mask;
    r.tokens = std::move(batch);
    return r;
  }

  static RealData from_embeddings(Tensor embeddings, std::vector<int> labels) {
    if (embeddings.rank() != 2 || embeddings.dim(0) != labels.size()) {
      throw DimensionError("embedding rows and labels disagree");
    }
    RealData r;
    r.embeddings = std::move(embeddings);
    r.labeled_mask.reserve(labels.size());
    for (int l : labels) r.labeled_mask.push_back(l >= 0);
    r.labels = std::move(labels);
    return r;
  }

  std::size_t size() const { return labels.size(); }

  RealData select(std::span<const std::size_t> rows) const {
    RealData out;
    if (tokens) out.tokens = tokens->select(rows);
    if (embeddings) {
      const std::size_t d = embeddings->dim(1);
      Tensor e({rows.size(), d});
      for (std::size_t i = 0; i < rows.size(); ++i)
        std::copy_n(embeddings->data() + rows[i] * d, d, e.data() + i * d);
      out.embeddings = std::move(e);
    }
    for (auto r : rows) {
      out.labels.push_back(labels.at(r));
      out.labeled_mask.push_back(labeled_mask.at(r));
    }
    return out;
  }

  // Sentence embeddings; through the encoder when token rows are held.
  Var embed(const std::optional<EncoderParams>& encoder, Mode mode, Rng& rng) const {
    if (tokens) {
      if (!encoder) throw ContractError("token data needs an encoder");
      return encode_batch(*tokens, *encoder, mode, rng);
    }
    if (!embeddings) throw ContractError("empty RealData");
    return Var(*embeddings);
  }
};

struct GanOptimizers {
  AdamW discriminator;  // discriminator + encoder (when present)
  AdamW generator;

  static GanOptimizers create(GanNetworks& net, const SsganConfig& cfg) {
    std::vector<Var> d_params = net.discriminator.params().vars();
    if (net.encoder)
      for (const auto& v : net.encoder->params().vars()) d_params.push_back(v);
    return GanOptimizers{AdamW(d_params, {cfg.lr_d, 0.9, 0.999, 1e-8, cfg.weight_decay}),
                         AdamW(net.generator.params().vars(), {cfg.lr_g, 0.9, 0.999, 1e-8, cfg.weight_decay})};
  }
};

// One alternating update on a real batch:
//  1. embed the real batch (train mode);
//  2. generate an equally sized fake batch;
//  3. L_D, backward, step discriminator and encoder;
//  4. recompute real features (no gradient) and the fake batch from the same
//     noise, L_G, backward, step the generator only.
inline LossBreakdown train_step(const RealData& batch, GanNetworks& net, GanOptimizers& opt, Rng& rng) {
  const std::size_t n = batch.size();
  if (n == 0) throw ContractError("train_step on an empty batch");
  active_tape().clear();
  opt.discriminator.zero_grad();
  opt.generator.zero_grad();

  const Tensor noise = sample_gaussian(rng, {n, net.generator.config().in});
  LossBreakdown parts;
  {
    const Var real = batch.embed(net.encoder, Mode::kTrain, rng);
    if (real.shape().at(1) != net.embed_dim()) throw DimensionError("real embedding width disagrees with the discriminator");
    Var fake;
    {
      NoGradGuard no_grad;
      fake = net.generator.forward(Var(noise), Mode::kTrain, rng).out;
    }
    const auto dr = discriminate(real, net.discriminator, Mode::kTrain, rng);
    const auto df = discriminate(fake, net.discriminator, Mode::kTrain, rng);
    const auto d_loss = discriminator_loss(dr.logits, batch.labels, batch.labeled_mask, df.logits);
    parts = d_loss.parts;
    if (!parts.all_finite()) {
      active_tape().clear();
      throw DivergenceError("non-finite discriminator loss", parts);
    }
    backward(d_loss.total);
    opt.discriminator.step();
  }
  opt.discriminator.zero_grad();
  {
    Var real_features;
    {
      NoGradGuard no_grad;
      const Var real = batch.embed(net.encoder, Mode::kTrain, rng);
      real_features = discriminate(real, net.discriminator, Mode::kTrain, rng).features;
    }
    const Var fake = net.generator.forward(Var(noise), Mode::kTrain, rng).out;
    const auto df = discriminate(fake, net.discriminator, Mode::kTrain, rng);
    const auto g_loss = generator_loss(real_features, df.features, df.logits);
    parts.g_feature_matching = g_loss.parts.g_feature_matching;
    parts.g_unsup = g_loss.parts.g_unsup;
    if (!parts.all_finite()) {
      active_tape().clear();
      throw DivergenceError("non-finite generator loss", parts);
    }
    backward(g_loss.total);
    opt.generator.step();
  }
  opt.discriminator.zero_grad();
  opt.generator.zero_grad();
  return parts;
}

struct Prediction {
  int label = 0;
  std::vector<double> probabilities;  // over the k task classes
};

// Argmax over the first k logits (lowest index wins ties); probabilities are
// the softmax over those k logits. The fake logit is ignored.
inline Prediction predict_from_logits(std::span<const double> logits, std::size_t k) {
  if (logits.size() < k || k == 0) throw DimensionError("logit row narrower than k");
  Prediction p;
  std::size_t best = 0;
  for (std::size_t j = 1; j < k; ++j)
    if (logits[j] > logits[best]) best = j;
  p.label = static_cast<int>(best);
  double z = 0.0;
  p.probabilities.resize(k);
  for (std::size_t j = 0; j < k; ++j) {
    p.probabilities[j] = std::exp(logits[j] - logits[best]);
    z += p.probabilities[j];
  }
  for (auto& v : p.probabilities) v /= z;
  return p;
}

// Classifier view used for inference: an optional encoder plus a head whose
// first k outputs are the task logits. The generator is never consulted.
inline std::vector<Prediction> predict(const RealData& data, const std::optional<EncoderParams>& encoder,
                                       const Mlp& head, std::size_t k, std::size_t batch_size = 64) {
  NoGradGuard no_grad;
  Rng unused(0);
  std::vector<Prediction> out;
  out.reserve(data.size());
  std::vector<std::size_t> rows;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    rows.clear();
    for (std::size_t r = start; r < std::min(data.size(), start + batch_size); ++r) rows.push_back(r);
    const Var emb = data.select(rows).embed(encoder, Mode::kEval, unused);
    if (emb.shape()[1] != head.config().in) {
      throw DimensionError("embedding width " + std::to_string(emb.shape()[1]) + " does not match classifier input " +
                           std::to_string(head.config().in));
    }
    const Var logits = head.forward(emb, Mode::kEval, unused).out;
    const std::size_t width = logits.shape()[1];
    for (std::size_t i = 0; i < rows.size(); ++i)
      out.push_back(predict_from_logits(logits.value().values().subspan(i * width, width), k));
  }
  return out;
}

inline MetricsReport evaluate(const RealData& test, const std::optional<EncoderParams>& encoder, const Mlp& head,
                              const ClassSet& classes, int positive) {
  const auto preds = predict(test, encoder, head, classes.size());
  std::vector<int> p;
  p.reserve(preds.size());
  for (const auto& pr : preds) p.push_back(pr.label);
  return compute_metrics(p, test.labels, positive, classes);
}

namespace ssgan_detail {
template <typename Step>
TrainLog run_epochs(std::size_t n_train, std::size_t epochs, std::size_t batch_size, Rng& rng, Step step,
                    const std::function<MetricsReport()>& eval) {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (n_train == 0) throw ContractError("no training rows");
  TrainLog log;
  std::vector<std::size_t> order(n_train);
  for (std::size_t i = 0; i < n_train; ++i) order[i] = i;
  for (std::size_t epoch = 1; epoch <= epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    LossBreakdown sum;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < n_train; start += batch_size) {
      const std::size_t end = std::min(n_train, start + batch_size);
      try {
        sum += step(std::span<const std::size_t>(order).subspan(start, end - start));
      } catch (const DivergenceError& e) {
        throw DivergenceError(e.what(), e.losses(), log);
      }
      ++steps;
    }
    log.push_back(EpochRecord{epoch, sum.scaled(1.0 / static_cast<double>(steps)), eval()});
  }
  return log;
}
}  // namespace ssgan_detail

// Per epoch: shuffle the training rows (labeled and unlabeled together), run
// train_step on each batch, then evaluate on the test rows.
inline TrainLog train(GanNetworks& net, const RealData& train_rows, const RealData& test_rows, const ClassSet& classes,
                      int positive, const SsganConfig& cfg, Rng& rng) {
  cfg.validate();
  if (classes.size() != net.k) throw DimensionError("class count disagrees with the discriminator");
  auto opt = GanOptimizers::create(net, cfg);
  return ssgan_detail::run_epochs(
      train_rows.size(), cfg.epochs, cfg.batch_size, rng,
      [&](std::span<const std::size_t> rows) { return train_step(train_rows.select(rows), net, opt, rng); },
      [&] { return evaluate(test_rows, net.encoder, net.discriminator, classes, positive); });
}

inline RealData real_data_from_split(const DataSplit& split, const Vocab& vocab, std::size_t max_len,
                                     const ClassSet& classes) {
  Corpus train_rows = split.labeled;
  train_rows.insert(train_rows.end(), split.unlabeled.begin(), split.unlabeled.end());
  return RealData::from_tokens(encode_reviews(train_rows, vocab, max_len, classes));
}

// ---------------------------------------------------------------------------
// Supervised baseline: the same encoder with a plain k-way head trained by
// cross-entropy on labeled rows only.

struct SupervisedNetworks {
  std::optional<EncoderParams> encoder;
  Mlp head;
  std::size_t k = 2;

  static SupervisedNetworks create(std::optional<EncoderParams> encoder, std::size_t embed_dim, const SsganConfig& cfg,
                                   Rng& rng) {
    cfg.validate();
    const std::size_t hidden = cfg.hidden_dim ? cfg.hidden_dim : embed_dim;
    return SupervisedNetworks{std::move(encoder), Mlp({embed_dim, hidden, cfg.k, cfg.slope, cfg.dropout}, rng), cfg.k};
  }
};

inline double supervised_step(const RealData& batch, SupervisedNetworks& net, AdamW& opt, Rng& rng) {
  active_tape().clear();
  opt.zero_grad();
  const Var emb = batch.embed(net.encoder, Mode::kTrain, rng);
  const Var logits = net.head.forward(emb, Mode::kTrain, rng).out;
  const Var loss = cross_entropy_from_logits(logits, batch.labels, batch.labeled_mask);
  const double value = loss.value().item();
  if (!std::isfinite(value)) {
    active_tape().clear();
    LossBreakdown parts;
    parts.d_supervised = value;
    throw DivergenceError("non-finite supervised loss", parts);
  }
  backward(loss);
  opt.step();
  opt.zero_grad();
  return value;
}

// Only labeled rows of train_rows are used.
inline TrainLog train_supervised(SupervisedNetworks& net, const RealData& train_rows, const RealData& test_rows,
                                 const ClassSet& classes, int positive, const SsganConfig& cfg, Rng& rng) {
  cfg.validate();
  std::vector<std::size_t> labeled;
  for (std::size_t i = 0; i < train_rows.size(); ++i)
    if (train_rows.labeled_mask[i]) labeled.push_back(i);
  const RealData rows = train_rows.select(labeled);
  std::vector<Var> params = net.head.params().vars();
  if (net.encoder)
    for (const auto& v : net.encoder->params().vars()) params.push_back(v);
  AdamW opt(params, {cfg.lr_d, 0.9, 0.999, 1e-8, cfg.weight_decay});
  return ssgan_detail::run_epochs(
      rows.size(), cfg.epochs, cfg.batch_size, rng,
      [&](std::span<const std::size_t> idx) {
        LossBreakdown parts;
        parts.d_supervised = supervised_step(rows.select(idx), net, opt, rng);
        return parts;
      },
      [&] { return evaluate(test_rows, net.encoder, net.head, classes, positive); });
}

}  // namespace ganlm
