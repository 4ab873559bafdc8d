#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numeric>

#include "ganlm/ssgan.hpp"
#include "gradcheck.hpp"

using namespace ganlm;
using gradcheck::random_var;

namespace {

const ClassSet kClasses({"fake", "authentic"});

MlpConfig mlp(std::size_t in, std::size_t hidden, std::size_t out, double dropout = 0.1) {
  return {in, hidden, out, 0.2, dropout};
}

Tensor row_softmax(const Tensor& logits, std::size_t i) {
  const std::size_t w = logits.dim(1);
  Tensor p({w});
  double z = 0.0;
  for (std::size_t j = 0; j < w; ++j) z += std::exp(logits.at(i, j));
  for (std::size_t j = 0; j < w; ++j) p[j] = std::exp(logits.at(i, j)) / z;
  return p;
}

// -- generator and discriminator -----------------------------------------------------

TEST(Generator, ShapeAndDeterminism) {
  Rng init(1);
  const Mlp g(mlp(100, 128, 128), init);
  Rng a(5), b(5);
  const Tensor x = generate_fake(a, 16, g, Mode::kTrain).value();
  EXPECT_EQ(x.shape(), (Shape{16, 128}));
  EXPECT_EQ(x, generate_fake(b, 16, g, Mode::kTrain).value());
  EXPECT_THROW(generate_fake(a, 0, g, Mode::kEval), ContractError);
}

TEST(Generator, ZeroWeightsGiveZeroOutput) {
  const Mlp g = Mlp::zeros(mlp(10, 6, 4));
  Rng r(2);
  for (double v : generate_fake(r, 5, g, Mode::kEval).value().values()) EXPECT_EQ(v, 0.0);
}

TEST(Discriminator, ShapesRowsAndWidthCheck) {
  Rng r(3);
  const Mlp d(mlp(8, 5, 3), r);
  Tensor e({4, 8});
  for (auto& v : e.values()) v = r.normal();
  // row 3 duplicates row 1
  for (std::size_t j = 0; j < 8; ++j) e.at(3, j) = e.at(1, j);
  const auto out = discriminate(Var(e), d, Mode::kEval, r);
  EXPECT_EQ(out.logits.shape(), (Shape{4, 3}));
  EXPECT_EQ(out.features.shape(), (Shape{4, 5}));
  for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(out.logits.value().at(3, j), out.logits.value().at(1, j));
  for (std::size_t i = 0; i < 4; ++i) {
    const Tensor p = row_softmax(out.logits.value(), i);
    EXPECT_NEAR(p[0] + p[1] + p[2], 1.0, 1e-12);
  }
  EXPECT_THROW(discriminate(Var(Tensor({2, 7})), d, Mode::kEval, r), DimensionError);
}

TEST(Networks, OutputWidthIsKPlusOne) {
  for (std::size_t k : {2u, 3u, 5u}) {
    SsganConfig cfg;
    cfg.k = k;
    cfg.noise_dim = 7;
    Rng r(4);
    const auto net = GanNetworks::create(std::nullopt, 12, cfg, r);
    EXPECT_EQ(net.discriminator.config().out, k + 1);
    EXPECT_EQ(net.generator.config().out, 12u);
    EXPECT_EQ(net.generator.config().in, 7u);
    EXPECT_EQ(net.discriminator.config().hidden, 12u);
  }
  SsganConfig bad;
  bad.k = 1;
  Rng r(4);
  EXPECT_THROW(GanNetworks::create(std::nullopt, 12, bad, r), ConfigError);
}

// -- losses ----------------------------------------------------------------------

TEST(DiscriminatorLoss, PerfectSeparationIsNearZero) {
  const Var real(Tensor::matrix({{0.0, 0.0, -50.0}, {0.0, 0.0, -50.0}}));
  const Var fake(Tensor::matrix({{-50.0, -50.0, 50.0}}));
  const std::vector<int> labels{-1, -1};
  const std::vector<bool> mask{false, false};
  const auto l = discriminator_loss(real, labels, mask, fake);
  EXPECT_NEAR(l.parts.d_unsup_real + l.parts.d_unsup_fake, 0.0, 1e-15);
  EXPECT_EQ(l.parts.d_supervised, 0.0);
}

TEST(DiscriminatorLoss, UniformLogitsClosedForm) {
  const Var real(Tensor({3, 3}, 0.25)), fake(Tensor({2, 3}, -1.0));
  const std::vector<int> labels{0, 1, -1};
  const std::vector<bool> mask{true, true, false};
  const auto l = discriminator_loss(real, labels, mask, fake);
  const double expected_unsup = -std::log(2.0 / 3.0) - std::log(1.0 / 3.0);
  EXPECT_NEAR(l.parts.d_unsup_real + l.parts.d_unsup_fake, expected_unsup, 1e-12);
  EXPECT_NEAR(expected_unsup, 1.5041, 1e-4);
  // supervised term over the full (k+1)-way softmax
  EXPECT_NEAR(l.parts.d_supervised, std::log(3.0), 1e-12);
  EXPECT_NEAR(l.total.value().item(), std::log(3.0) + expected_unsup, 1e-12);
}

TEST(DiscriminatorLoss, FakeWidthMismatch) {
  const std::vector<int> labels{0};
  const std::vector<bool> mask{true};
  EXPECT_THROW(discriminator_loss(Var(Tensor({1, 3})), labels, mask, Var(Tensor({1, 4}))), DimensionError);
}

TEST(GeneratorLoss, FeatureMatchingIdentities) {
  Rng r(5);
  auto f = random_var(r, {4, 6});
  const Var logits(Tensor::matrix({{0.0, 0.0, -60.0}}));
  const auto same = generator_loss(f, f, logits);
  EXPECT_EQ(same.parts.g_feature_matching, 0.0);
  EXPECT_NEAR(same.parts.g_unsup, 0.0, 1e-20);

  Tensor shift({6});
  double norm_sq = 0.0;
  for (auto& v : shift.values()) {
    v = r.normal();
    norm_sq += v * v;
  }
  Tensor moved = f.value();
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 6; ++j) moved.at(i, j) += shift[j];
  EXPECT_NEAR(generator_loss(f, Var(moved), logits).parts.g_feature_matching, norm_sq, 1e-12);
}

TEST(Losses, ComponentsNeverNegative) {
  Rng r(6);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + r.uniform_int(5), k = 2 + r.uniform_int(3);
    const double spread = trial % 3 == 0 ? 40.0 : 3.0;
    auto lr = random_var(r, {n, k + 1}, spread), lf = random_var(r, {n, k + 1}, spread);
    auto fr = random_var(r, {n, 4}), ff = random_var(r, {n, 4});
    std::vector<int> labels;
    std::vector<bool> mask;
    for (std::size_t i = 0; i < n; ++i) {
      mask.push_back(r.bernoulli(0.5));
      labels.push_back(mask.back() ? static_cast<int>(r.uniform_int(k)) : -1);
    }
    const auto d = discriminator_loss(lr, labels, mask, lf).parts;
    const auto g = generator_loss(fr, ff, lf).parts;
    ASSERT_GE(d.d_supervised, 0.0);
    ASSERT_GE(d.d_unsup_real, 0.0);
    ASSERT_GE(d.d_unsup_fake, 0.0);
    ASSERT_GE(g.g_feature_matching, 0.0);
    ASSERT_GE(g.g_unsup, 0.0);
  }
}

// Both composed objectives on a toy net: d=4, h=4, k=2, batch 2.
TEST(Losses, ComposedGradientsMatchFiniteDifferences) {
  Rng r(7);
  const Mlp gen(mlp(3, 4, 4, 0.0), r);
  const Mlp disc(mlp(4, 4, 3, 0.0), r);
  auto real = random_var(r, {2, 4});
  const Var noise(sample_gaussian(r, {2, 3}));
  const std::vector<int> labels{1, -1};
  const std::vector<bool> mask{true, false};
  std::vector<Var> inputs = gen.params().vars();
  for (const auto& v : disc.params().vars()) inputs.push_back(v);
  inputs.push_back(real);
  const auto d_res = gradcheck::check(
      [&] {
        Rng unused(0);
        const Var fake = gen.forward(noise, Mode::kEval, unused).out;
        return discriminator_loss(disc.forward(real, Mode::kEval, unused).out, labels, mask,
                                  disc.forward(fake, Mode::kEval, unused).out)
            .total;
      },
      inputs);
  EXPECT_LT(d_res.worst, 1e-4) << "L_D input " << d_res.worst_input;
  const auto g_res = gradcheck::check(
      [&] {
        Rng unused(0);
        const auto dr = disc.forward(real, Mode::kEval, unused);
        const auto df = disc.forward(gen.forward(noise, Mode::kEval, unused).out, Mode::kEval, unused);
        return generator_loss(dr.hidden, df.hidden, df.out).total;
      },
      inputs);
  EXPECT_LT(g_res.worst, 1e-4) << "L_G input " << g_res.worst_input;
}

// -- training ----------------------------------------------------------------------

struct TinyWorld {
  Vocab vocab;
  DataSplit split;
  EncoderConfig enc_cfg;
  SsganConfig cfg;
};

TinyWorld tiny_world(std::uint64_t seed = 1) {
  Rng r(seed);
  const auto spec = make_synthetic_spec(kClasses.names(), 60, 5, 0.4, 6, 10);
  const auto corpus = generate_synthetic_corpus(r, 40, spec);
  TinyWorld w;
  w.vocab = build_vocab(corpus, 200);
  w.split = make_split(corpus, {8, 40, 16, seed, true}, kClasses);
  w.enc_cfg.vocab_size = w.vocab.size();
  w.enc_cfg.model_dim = 8;
  w.enc_cfg.n_layers = 1;
  w.enc_cfg.n_heads = 2;
  w.enc_cfg.max_len = 11;
  w.cfg.noise_dim = 10;
  w.cfg.batch_size = 8;
  w.cfg.lr_d = w.cfg.lr_g = 1e-3;
  w.cfg.epochs = 2;
  return w;
}

bool differs(const ParamSet& a, const ParamSet& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].var.value() != b[i].var.value()) return true;
  return false;
}

TEST(TrainStep, UpdatesEveryNetwork) {
  auto w = tiny_world();
  Rng r(8);
  auto net = GanNetworks::create(EncoderParams(w.enc_cfg, r), 8, w.cfg, r);
  const auto enc0 = net.encoder->params().clone();
  const auto d0 = net.discriminator.params().clone();
  const auto g0 = net.generator.params().clone();
  auto opt = GanOptimizers::create(net, w.cfg);
  const auto data = real_data_from_split(w.split, w.vocab, 11, kClasses);
  const std::vector<std::size_t> rows{0, 1, 2, 40, 41, 42};
  const auto parts = train_step(data.select(rows), net, opt, r);
  EXPECT_TRUE(parts.all_finite());
  EXPECT_TRUE(differs(net.encoder->params(), enc0));
  EXPECT_TRUE(differs(net.discriminator.params(), d0));
  EXPECT_TRUE(differs(net.generator.params(), g0));
}

TEST(TrainStep, FrozenModeLeavesEncoderUntouched) {
  auto w = tiny_world();
  Rng r(9);
  const EncoderParams enc(w.enc_cfg, r);
  const auto snapshot = enc.params().clone();
  const auto tokens = encode_reviews(w.split.labeled, w.vocab, 11, kClasses);
  Rng unused(0);
  Tensor emb;
  {
    NoGradGuard g;
    emb = encode_batch(tokens, enc, Mode::kEval, unused).value();
  }
  auto net = GanNetworks::create(std::nullopt, 8, w.cfg, r);
  const auto d0 = net.discriminator.params().clone();
  auto opt = GanOptimizers::create(net, w.cfg);
  train_step(RealData::from_embeddings(emb, tokens.labels), net, opt, r);
  EXPECT_FALSE(differs(enc.params(), snapshot));
  EXPECT_TRUE(differs(net.discriminator.params(), d0));
}

TEST(TrainStep, ReplaysBitwise) {
  auto run = [] {
    auto w = tiny_world();
    Rng r(10);
    auto net = GanNetworks::create(EncoderParams(w.enc_cfg, r), 8, w.cfg, r);
    auto opt = GanOptimizers::create(net, w.cfg);
    const auto data = real_data_from_split(w.split, w.vocab, 11, kClasses);
    std::vector<LossBreakdown> seq;
    for (std::size_t s = 0; s < 4; ++s) {
      std::vector<std::size_t> rows(8);
      std::iota(rows.begin(), rows.end(), s * 8);
      seq.push_back(train_step(data.select(rows), net, opt, r));
    }
    return seq;
  };
  EXPECT_EQ(run(), run());
}

TEST(Train, LabeledMaskFollowsTheSplit) {
  const auto w = tiny_world();
  const auto data = real_data_from_split(w.split, w.vocab, 11, kClasses);
  ASSERT_EQ(data.size(), 48u);
  for (std::size_t i = 0; i < data.size(); ++i) {
    EXPECT_EQ(data.labeled_mask[i], i < 8);
    EXPECT_EQ(data.labels[i] >= 0, i < 8);
  }
}

TEST(Train, OneRecordPerEpoch) {
  auto w = tiny_world();
  w.cfg.epochs = 7;
  Rng r(11);
  auto net = GanNetworks::create(EncoderParams(w.enc_cfg, r), 8, w.cfg, r);
  const auto train_rows = real_data_from_split(w.split, w.vocab, 11, kClasses);
  const auto test_rows = RealData::from_tokens(encode_reviews(w.split.test, w.vocab, 11, kClasses));
  const auto log = train(net, train_rows, test_rows, kClasses, 0, w.cfg, r);
  ASSERT_EQ(log.size(), 7u);
  for (std::size_t e = 0; e < 7; ++e) {
    EXPECT_EQ(log[e].epoch, e + 1);
    EXPECT_EQ(log[e].test.n_test, 16u);
    EXPECT_TRUE(log[e].losses.all_finite());
  }
  w.cfg.epochs = 0;
  EXPECT_THROW(train(net, train_rows, test_rows, kClasses, 0, w.cfg, r), ConfigError);
}

TEST(Train, NonFiniteInputAbortsWithDiagnostics) {
  auto w = tiny_world();
  Rng r(12);
  auto net = GanNetworks::create(std::nullopt, 8, w.cfg, r);
  Tensor emb({4, 8}, 0.5);
  emb.at(2, 3) = std::numeric_limits<double>::quiet_NaN();
  const auto data = RealData::from_embeddings(emb, {0, 1, -1, -1});
  try {
    train(net, data, data, kClasses, 0, w.cfg, r);
    FAIL() << "expected DivergenceError";
  } catch (const DivergenceError& e) {
    EXPECT_FALSE(e.losses().all_finite());
    EXPECT_TRUE(e.partial_log().empty());
  }
}

TEST(Train, SupervisedBaselineUsesLabeledRowsOnly) {
  auto w = tiny_world();
  Rng r(13);
  auto net = SupervisedNetworks::create(EncoderParams(w.enc_cfg, r), 8, w.cfg, r);
  EXPECT_EQ(net.head.config().out, 2u);
  const auto train_rows = real_data_from_split(w.split, w.vocab, 11, kClasses);
  const auto test_rows = RealData::from_tokens(encode_reviews(w.split.test, w.vocab, 11, kClasses));
  const auto log = train_supervised(net, train_rows, test_rows, kClasses, 0, w.cfg, r);
  ASSERT_EQ(log.size(), 2u);
  for (const auto& e : log) {
    EXPECT_GT(e.losses.d_supervised, 0.0);
    EXPECT_EQ(e.losses.d_unsup_real, 0.0);
    EXPECT_EQ(e.losses.g_feature_matching, 0.0);
  }
}

// -- inference ---------------------------------------------------------------------

TEST(Predict, FakeClassNeverWinsAndTiesGoLow) {
  const std::vector<double> a{2.0, 1.0, 5.0}, b{1.0, 1.0, 0.0};
  EXPECT_EQ(predict_from_logits(a, 2).label, 0);
  const auto pb = predict_from_logits(b, 2);
  EXPECT_EQ(pb.label, 0);
  EXPECT_DOUBLE_EQ(pb.probabilities[0], 0.5);
  const auto pa = predict_from_logits(a, 2);
  EXPECT_NEAR(pa.probabilities[0], 1.0 / (1.0 + std::exp(-1.0)), 1e-15);
  EXPECT_NEAR(pa.probabilities[0] + pa.probabilities[1], 1.0, 1e-15);
  EXPECT_THROW(predict_from_logits(std::vector<double>{1.0}, 2), DimensionError);
}

TEST(Predict, ArgmaxStaysBelowK) {
  Rng r(14);
  const Mlp d(mlp(6, 6, 4), r);
  Tensor e({200, 6});
  for (auto& v : e.values()) v = 5.0 * r.normal();
  const auto preds = predict(RealData::from_embeddings(e, std::vector<int>(200, -1)), std::nullopt, d, 3);
  ASSERT_EQ(preds.size(), 200u);
  for (const auto& p : preds) {
    EXPECT_LT(p.label, 3);
    EXPECT_NEAR(std::accumulate(p.probabilities.begin(), p.probabilities.end(), 0.0), 1.0, 1e-12);
  }
}

TEST(Predict, GeneratorIsNotNeeded) {
  auto w = tiny_world();
  Rng r(15);
  auto net = GanNetworks::create(EncoderParams(w.enc_cfg, r), 8, w.cfg, r);
  const auto train_rows = real_data_from_split(w.split, w.vocab, 11, kClasses);
  const auto test_rows = RealData::from_tokens(encode_reviews(w.split.test, w.vocab, 11, kClasses));
  train(net, train_rows, test_rows, kClasses, 0, w.cfg, r);
  const auto before = predict(test_rows, net.encoder, net.discriminator, 2);
  net.generator = Mlp();
  const auto after = predict(test_rows, net.encoder, net.discriminator, 2);
  ASSERT_EQ(before.size(), after.size());
  for (std::size_t i = 0; i < before.size(); ++i) {
    EXPECT_EQ(before[i].label, after[i].label);
    EXPECT_EQ(before[i].probabilities, after[i].probabilities);
  }
  Tensor wrong({2, 5});
  EXPECT_THROW(predict(RealData::from_embeddings(wrong, {-1, -1}), std::nullopt, net.discriminator, 2), DimensionError);
}

}  // namespace
