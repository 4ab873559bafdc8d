#pragma once

// Command-line pipeline. Every artifact lands under the output directory:
//
//   <out>/corpus.jsonl, <out>/vocab.txt
//   <out>/splits/{labeled,unlabeled,test}.jsonl
//   <out>/checkpoints/{pretrained,ssgan_<n>,supervised_<n>}.ckpt
//   <out>/logs/{pretrain.csv, ssgan_<n>.csv, supervised_<n>.csv}
//   <out>/reports/{results.csv, metrics_<model>_<n>.csv, curve_<model>_<n>.csv}
//
// Exit codes: 0 ok, 1 usage, 2 data or validation error, 3 training divergence.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ganlm/checkpoint.hpp"
#include "ganlm/config.hpp"
#include "ganlm/data.hpp"
#include "ganlm/encoder.hpp"
#include "ganlm/errors.hpp"
#include "ganlm/metrics.hpp"
#include "ganlm/ssgan.hpp"
#include "ganlm/textnorm.hpp"
#include "ganlm/trainlog.hpp"

namespace ganlm {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitDivergence = 3;

namespace cli_detail {

namespace fs = std::filesystem;

// Random streams per command, forked from the run seed.
enum Stream : std::uint64_t { kSynth = 11, kPretrain = 21, kSsgan = 31, kSupervised = 41 };

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string corpus, vocab;
};

struct Args {
  Common common;
  std::string preset;
  std::string input, output, checkpoint, init, embeddings;
};

inline RunConfig resolve(const Common& c) {
  RunConfig cfg = c.config.empty() ? RunConfig{} : load_config(c.config);
  if (c.seed) {
    cfg.seed = *c.seed;
    cfg.split.seed = cfg.ssgan.seed = *c.seed;
  }
  if (!c.out.empty()) cfg.paths.out_dir = c.out;
  if (!c.corpus.empty()) cfg.paths.corpus = c.corpus;
  if (!c.vocab.empty()) cfg.paths.vocab = c.vocab;
  return cfg;
}

inline fs::path out_dir(const RunConfig& cfg, const char* sub = nullptr) {
  fs::path p = cfg.paths.out_dir;
  if (sub) p /= sub;
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw DataError("cannot create directory '" + p.string() + "': " + ec.message());
  return p;
}

inline std::string corpus_path(const RunConfig& cfg) {
  return cfg.paths.corpus.empty() ? (out_dir(cfg) / "corpus.jsonl").string() : cfg.paths.corpus;
}
inline std::string vocab_path(const RunConfig& cfg) {
  return cfg.paths.vocab.empty() ? (out_dir(cfg) / "vocab.txt").string() : cfg.paths.vocab;
}

inline ClassSet classes_of(const RunConfig& cfg) { return ClassSet(cfg.data.classes); }

inline DataSplit load_split(const RunConfig& cfg) {
  const auto dir = out_dir(cfg, "splits");
  const auto cls = classes_of(cfg);
  return {load_corpus((dir / "labeled.jsonl").string(), cls, cfg.normalizer),
          load_corpus((dir / "unlabeled.jsonl").string(), cls, cfg.normalizer),
          load_corpus((dir / "test.jsonl").string(), cls, cfg.normalizer)};
}

inline EncoderConfig encoder_config(const RunConfig& cfg, const Vocab& vocab) {
  EncoderConfig e = cfg.encoder;
  e.vocab_size = vocab.size();
  e.max_len = std::max(e.max_len, cfg.data.max_len);
  return e;
}

inline void check_vocab(const EncoderParams& enc, const Vocab& vocab) {
  if (enc.config().vocab_size != vocab.size()) {
    throw DimensionError("dimension mismatch: checkpoint encoder has a " + std::to_string(enc.config().vocab_size) +
                         "-token embedding table but the vocabulary holds " + std::to_string(vocab.size()) + " tokens");
  }
}

inline std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += (s.empty() ? "" : ",") + x;
  return s;
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

// Frozen mode reads <dir>/{labeled,unlabeled,test}.emb.
inline RealData embeddings_as_rows(const std::string& path, const ClassSet& classes, std::size_t& dim) {
  std::size_t d = 0;
  const auto recs = load_embeddings(path, &d);
  if (dim && d != dim) throw DimensionError("embedding file '" + path + "' has dim " + std::to_string(d) +
                                            ", expected " + std::to_string(dim));
  dim = d;
  Tensor t({recs.size(), d});
  std::vector<int> labels;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    std::copy(recs[i].vector.begin(), recs[i].vector.end(), t.data() + i * d);
    labels.push_back(recs[i].label ? classes.require(*recs[i].label) : -1);
  }
  return RealData::from_embeddings(std::move(t), std::move(labels));
}

struct TrainInputs {
  RealData train_rows, test_rows;
  std::optional<EncoderParams> encoder;
  std::size_t embed_dim = 0;
  std::size_t n_labeled = 0;
  bool frozen = false;
};

inline TrainInputs training_inputs(const RunConfig& cfg, const Args& a, std::ostream& out) {
  const auto cls = classes_of(cfg);
  TrainInputs in;
  if (!a.embeddings.empty()) {
    in.frozen = true;
    const fs::path dir = a.embeddings;
    auto lab = embeddings_as_rows((dir / "labeled.emb").string(), cls, in.embed_dim);
    auto unl = embeddings_as_rows((dir / "unlabeled.emb").string(), cls, in.embed_dim);
    in.test_rows = embeddings_as_rows((dir / "test.emb").string(), cls, in.embed_dim);
    in.n_labeled = lab.size();
    for (auto& l : unl.labels) l = -1;
    Tensor all({lab.size() + unl.size(), in.embed_dim});
    std::copy(lab.embeddings->values().begin(), lab.embeddings->values().end(), all.data());
    std::copy(unl.embeddings->values().begin(), unl.embeddings->values().end(),
              all.data() + lab.size() * in.embed_dim);
    auto labels = lab.labels;
    labels.insert(labels.end(), unl.labels.begin(), unl.labels.end());
    in.train_rows = RealData::from_embeddings(std::move(all), std::move(labels));
    return in;
  }
  const auto vocab = Vocab::load(vocab_path(cfg));
  const auto split = load_split(cfg);
  in.n_labeled = split.labeled.size();
  in.train_rows = real_data_from_split(split, vocab, cfg.data.max_len, cls);
  in.test_rows = RealData::from_tokens(encode_reviews(split.test, vocab, cfg.data.max_len, cls));
  const std::string init = !a.init.empty() ? a.init : cfg.paths.checkpoint;
  if (!init.empty()) {
    in.encoder = encoder_from(load_checkpoint(init).at("encoder"));
    check_vocab(*in.encoder, vocab);
    if (in.encoder->config().max_len < cfg.data.max_len)
      throw DimensionError("checkpoint encoder supports " + std::to_string(in.encoder->config().max_len) +
                           " positions, data.max_len is " + std::to_string(cfg.data.max_len));
  } else {
    Rng r = Rng(cfg.seed).fork(kPretrain);
    in.encoder = EncoderParams(encoder_config(cfg, vocab), r);
    out << "note: no encoder checkpoint given, starting from random initialisation\n";
  }
  in.embed_dim = in.encoder->config().model_dim;
  return in;
}

inline std::vector<std::pair<std::string, std::string>> meta_entries(const RunConfig& cfg, const std::string& model,
                                                                      const TrainInputs& in) {
  return {{"model", model},
          {"classes", join(cfg.data.classes)},
          {"positive_class", cfg.data.positive_class},
          {"max_len", std::to_string(cfg.data.max_len)},
          {"n_labeled", std::to_string(in.n_labeled)},
          {"frozen", in.frozen ? "true" : "false"},
          {"seed", std::to_string(cfg.seed)}};
}

inline int finish_training(const RunConfig& cfg, const std::string& model, std::size_t n_labeled,
                           const std::function<TrainLog()>& run, const std::function<Checkpoint()>& snapshot,
                           std::ostream& out, std::ostream& err) {
  const auto logs = out_dir(cfg, "logs"), reports = out_dir(cfg, "reports"), ckpts = out_dir(cfg, "checkpoints");
  const std::string tag = model + "_" + std::to_string(n_labeled);
  TrainLog log;
  try {
    log = run();
  } catch (const DivergenceError& e) {
    save_train_log((logs / (tag + ".csv")).string(), e.partial_log());
    const auto& l = e.losses();
    err << "error: training diverged: " << e.what() << " (d_sup=" << l.d_supervised << " d_unsup_real=" << l.d_unsup_real
        << " d_unsup_fake=" << l.d_unsup_fake << " g_feat=" << l.g_feature_matching << " g_unsup=" << l.g_unsup
        << ") after " << e.partial_log().size() << " complete epochs\n";
    return kExitDivergence;
  }
  save_train_log((logs / (tag + ".csv")).string(), log);
  emit_curves((reports / curve_file_name(model, n_labeled)).string(), log);
  save_checkpoint((ckpts / (tag + ".ckpt")).string(), snapshot());
  out << model << ": " << log.size() << " epochs, final test accuracy " << format_metric(log.back().test.accuracy)
      << "\ncheckpoint " << (ckpts / (tag + ".ckpt")).string() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

inline int cmd_normalize(const RunConfig& cfg, const Args& a, std::ostream& out) {
  std::ifstream file;
  if (!a.input.empty()) {
    file.open(a.input);
    if (!file) throw DataError("cannot open '" + a.input + "'");
  }
  std::istream& in = a.input.empty() ? std::cin : file;
  std::string line;
  while (std::getline(in, line)) out << normalize_text(line, cfg.normalizer) << '\n';
  return kExitOk;
}

inline int cmd_synth(const RunConfig& cfg, const Args&, std::ostream& out) {
  const auto& s = cfg.synth;
  const auto spec = make_synthetic_spec(cfg.data.classes, s.vocab_size, s.markers_per_class, s.marker_rate, s.min_len,
                                        s.max_len);
  Rng r = Rng(cfg.seed).fork(kSynth);
  const auto corpus = generate_synthetic_corpus(r, s.n_per_class, spec);
  const auto path = corpus_path(cfg);
  save_corpus(path, corpus);
  out << "wrote " << corpus.size() << " records to " << path << '\n';
  return kExitOk;
}

inline int cmd_build_vocab(const RunConfig& cfg, const Args&, std::ostream& out) {
  const auto corpus = load_corpus(corpus_path(cfg), classes_of(cfg), cfg.normalizer);
  const auto vocab = build_vocab(corpus, cfg.data.max_vocab, cfg.data.min_freq);
  const auto path = vocab_path(cfg);
  vocab.save(path);
  out << "wrote " << vocab.size() << " tokens to " << path << '\n';
  return kExitOk;
}

inline int cmd_split(RunConfig cfg, const Args& a, std::ostream& out) {
  if (!a.preset.empty()) apply_preset(cfg, a.preset);
  const auto corpus = load_corpus(corpus_path(cfg), classes_of(cfg), cfg.normalizer);
  const auto split = make_split(corpus, cfg.split, classes_of(cfg));
  const auto dir = out_dir(cfg, "splits");
  save_corpus((dir / "labeled.jsonl").string(), split.labeled);
  save_corpus((dir / "unlabeled.jsonl").string(), split.unlabeled);
  save_corpus((dir / "test.jsonl").string(), split.test);
  out << "split sizes labeled=" << split.labeled.size() << " unlabeled=" << split.unlabeled.size()
      << " test=" << split.test.size() << " in " << dir.string() << '\n';
  return kExitOk;
}

inline int cmd_pretrain(const RunConfig& cfg, const Args&, std::ostream& out) {
  const auto vocab = Vocab::load(vocab_path(cfg));
  const auto split = load_split(cfg);
  const auto cls = classes_of(cfg);
  // Pretraining sees training texts only; labels are irrelevant to the objective.
  Corpus texts = split.labeled;
  texts.insert(texts.end(), split.unlabeled.begin(), split.unlabeled.end());
  const auto data = encode_reviews(texts, vocab, cfg.data.max_len, cls);
  const auto held = encode_reviews(split.test, vocab, cfg.data.max_len, cls);
  Rng r = Rng(cfg.seed).fork(kPretrain);
  EncoderParams init(encoder_config(cfg, vocab), r);
  MlmHead head(init.config().model_dim, vocab.size(), r);
  const double before = masked_perplexity(held, init, head, cfg.seed);
  const auto res = mlm_pretrain(data, init, head, cfg.pretrain, r);
  const double after = masked_perplexity(held, res.encoder, res.head, cfg.seed);

  const auto logs = out_dir(cfg, "logs"), ckpts = out_dir(cfg, "checkpoints");
  std::ofstream log(logs / "pretrain.csv");
  if (!log) throw DataError("cannot write pretrain log");
  log << "epoch,mlm_loss\n";
  for (std::size_t e = 0; e < res.epoch_loss.size(); ++e) log << e + 1 << ',' << format_fixed5(res.epoch_loss[e]) << '\n';
  Checkpoint ck;
  ck.components.push_back(meta_component({{"model", "pretrained"}, {"seed", std::to_string(cfg.seed)}}));
  ck.components.push_back(to_component(res.encoder));
  ck.components.push_back({"mlm_head", "mlm_head", {{"vocab_size", std::to_string(vocab.size())}}, res.head.params.clone()});
  save_checkpoint((ckpts / "pretrained.ckpt").string(), ck);
  out << "held-out masked perplexity " << format_fixed5(before) << " -> " << format_fixed5(after) << "\ncheckpoint "
      << (ckpts / "pretrained.ckpt").string() << '\n';
  return kExitOk;
}

inline int cmd_train_ssgan(const RunConfig& cfg, const Args& a, std::ostream& out, std::ostream& err) {
  auto in = training_inputs(cfg, a, out);
  const auto cls = classes_of(cfg);
  const int positive = cls.require(cfg.data.positive_class);
  Rng r = Rng(cfg.seed).fork(kSsgan);
  auto net = GanNetworks::create(in.encoder, in.embed_dim, cfg.ssgan, r);
  return finish_training(
      cfg, "ssgan", in.n_labeled, [&] { return train(net, in.train_rows, in.test_rows, cls, positive, cfg.ssgan, r); },
      [&] {
        Checkpoint ck;
        ck.components.push_back(meta_component(meta_entries(cfg, "ssgan", in)));
        if (net.encoder) ck.components.push_back(to_component(*net.encoder));
        ck.components.push_back(to_component("discriminator", net.discriminator));
        ck.components.push_back(to_component("generator", net.generator));
        return ck;
      },
      out, err);
}

inline int cmd_train_supervised(const RunConfig& cfg, const Args& a, std::ostream& out, std::ostream& err) {
  auto in = training_inputs(cfg, a, out);
  const auto cls = classes_of(cfg);
  const int positive = cls.require(cfg.data.positive_class);
  Rng r = Rng(cfg.seed).fork(kSupervised);
  auto net = SupervisedNetworks::create(in.encoder, in.embed_dim, cfg.ssgan, r);
  return finish_training(
      cfg, "supervised", in.n_labeled,
      [&] { return train_supervised(net, in.train_rows, in.test_rows, cls, positive, cfg.ssgan, r); },
      [&] {
        Checkpoint ck;
        ck.components.push_back(meta_component(meta_entries(cfg, "supervised", in)));
        if (net.encoder) ck.components.push_back(to_component(*net.encoder));
        ck.components.push_back(to_component("head", net.head));
        return ck;
      },
      out, err);
}

struct LoadedClassifier {
  std::string model;
  ClassSet classes;
  std::string positive_class;
  std::size_t max_len = 0;
  std::size_t n_labeled = 0;
  std::optional<EncoderParams> encoder;
  Mlp head;
};

inline LoadedClassifier load_classifier(const std::string& path) {
  if (path.empty()) throw DataError("--checkpoint is required");
  const auto ck = load_checkpoint(path);
  const auto& meta = ck.at("meta");
  LoadedClassifier c;
  c.model = meta.get("model");
  if (c.model != "ssgan" && c.model != "supervised")
    throw FormatError("checkpoint '" + path + "' holds no classifier (model " + c.model + ")");
  c.classes = ClassSet(split_list(meta.get("classes")));
  c.positive_class = meta.get("positive_class");
  c.max_len = meta.get_size("max_len");
  c.n_labeled = meta.get_size("n_labeled");
  if (ck.has("encoder")) c.encoder = encoder_from(ck.at("encoder"));
  // Inference needs the discriminator (or head) only; a generator, if present, is ignored.
  c.head = mlp_from(ck.at(c.model == "ssgan" ? "discriminator" : "head"));
  return c;
}

inline RealData inference_rows(const LoadedClassifier& c, const RunConfig& cfg, const std::string& input,
                               std::vector<std::string>* ids) {
  if (!c.encoder) {
    std::size_t dim = c.head.config().in;
    const auto recs = load_embeddings(input);
    if (ids)
      for (const auto& r : recs) ids->push_back(r.id);
    return embeddings_as_rows(input, c.classes, dim);
  }
  const auto vocab = Vocab::load(vocab_path(cfg));
  check_vocab(*c.encoder, vocab);
  const auto corpus = load_corpus(input, c.classes, cfg.normalizer);
  if (ids)
    for (const auto& r : corpus) ids->push_back(r.id);
  return RealData::from_tokens(encode_reviews(corpus, vocab, c.max_len, c.classes));
}

inline int cmd_eval(const RunConfig& cfg, const Args& a, std::ostream& out) {
  const auto c = load_classifier(a.checkpoint);
  std::string input = a.input;
  if (input.empty()) {
    if (!c.encoder) throw DataError("frozen checkpoints need --input <test.emb>");
    input = (out_dir(cfg, "splits") / "test.jsonl").string();
  }
  const auto rows = inference_rows(c, cfg, input, nullptr);
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (!rows.labeled_mask[i]) throw LabelError("evaluation row " + std::to_string(i + 1) + " has no gold label");
  const auto report = evaluate(rows, c.encoder, c.head, c.classes, c.classes.require(c.positive_class));

  const auto reports = out_dir(cfg, "reports");
  const ResultRow row{c.model, c.n_labeled, report};
  emit_results_table((reports / ("metrics_" + c.model + "_" + std::to_string(c.n_labeled) + ".csv")).string(), {row});
  // results.csv accumulates one row per (model, n_labeled).
  const auto results = reports / "results.csv";
  std::vector<ResultRow> rows_out;
  if (fs::exists(results)) {
    std::ifstream in(results);
    for (auto& r : parse_results_table(in))
      if (!(r.model == c.model && r.n_labeled == c.n_labeled)) rows_out.push_back(std::move(r));
  }
  rows_out.push_back(row);
  emit_results_table(results.string(), rows_out);
  out << "positive class: " << report.positive_class << '\n';
  emit_results_table(out, {row});
  return kExitOk;
}

inline int cmd_predict(const RunConfig& cfg, const Args& a, std::ostream& out) {
  if (a.input.empty()) throw DataError("--input is required");
  const auto c = load_classifier(a.checkpoint);
  std::vector<std::string> ids;
  const auto rows = inference_rows(c, cfg, a.input, &ids);
  const auto preds = predict(rows, c.encoder, c.head, c.classes.size());
  std::ofstream file;
  if (!a.output.empty()) {
    file.open(a.output);
    if (!file) throw DataError("cannot write '" + a.output + "'");
  }
  std::ostream& dst = a.output.empty() ? out : file;
  dst << "id\tlabel";
  for (const auto& n : c.classes.names()) dst << "\tp_" << n;
  dst << '\n';
  for (std::size_t i = 0; i < preds.size(); ++i) {
    dst << ids[i] << '\t' << c.classes.name(static_cast<std::size_t>(preds[i].label));
    for (double p : preds[i].probabilities) dst << '\t' << format_fixed5(p);
    dst << '\n';
  }
  return kExitOk;
}

inline int cmd_export_embeddings(const RunConfig& cfg, const Args& a, std::ostream& out) {
  if (a.input.empty() || a.output.empty()) throw DataError("--input and --output are required");
  if (a.checkpoint.empty()) throw DataError("--checkpoint is required");
  const auto ck = load_checkpoint(a.checkpoint);
  if (!ck.has("encoder")) throw FormatError("checkpoint '" + a.checkpoint + "' has no encoder");
  const auto enc = encoder_from(ck.at("encoder"));
  const auto vocab = Vocab::load(vocab_path(cfg));
  check_vocab(enc, vocab);
  const auto cls = classes_of(cfg);
  const auto corpus = load_corpus(a.input, cls, cfg.normalizer);
  const auto batch = encode_reviews(corpus, vocab, cfg.data.max_len, cls);
  NoGradGuard no_grad;
  Rng unused(0);
  const Var emb = encode_batch(batch, enc, Mode::kEval, unused);
  const std::size_t d = enc.config().model_dim;
  std::vector<EmbeddingRecord> recs;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto* row = emb.value().data() + i * d;
    recs.push_back({corpus[i].id, corpus[i].label, std::vector<double>(row, row + d)});
  }
  save_embeddings(a.output, recs, d);
  out << "wrote " << recs.size() << " embeddings of dim " << d << " to " << a.output << '\n';
  return kExitOk;
}

}  // namespace cli_detail

// Parses args (without the program name) and runs one subcommand.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  using namespace cli_detail;
  CLI::App app{"Semi-supervised GAN fine-tuning for fake review detection", "ganlm"};
  app.require_subcommand(1);
  Args a;
  std::uint64_t seed = 0;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", a.common.config, "configuration file")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "random seed (overrides the config)");
    sub->add_option("--out", a.common.out, "output directory (overrides paths.out_dir)");
    sub->add_option("--corpus", a.common.corpus, "corpus JSONL (default <out>/corpus.jsonl)");
    sub->add_option("--vocab", a.common.vocab, "vocabulary file (default <out>/vocab.txt)");
  };
  auto* normalize = app.add_subcommand("normalize", "normalize text lines from --input or stdin");
  auto* synth = app.add_subcommand("synth", "generate the synthetic review corpus");
  auto* vocab = app.add_subcommand("build-vocab", "build the vocabulary from the corpus");
  auto* split = app.add_subcommand("split", "write labeled/unlabeled/test splits");
  auto* pretrain = app.add_subcommand("pretrain", "masked-token pretraining of the encoder");
  auto* ssgan = app.add_subcommand("train-ssgan", "semi-supervised GAN fine-tuning");
  auto* sup = app.add_subcommand("train-supervised", "supervised baseline on labeled rows only");
  auto* eval = app.add_subcommand("eval", "evaluate a classifier checkpoint on labeled data");
  auto* predict_cmd = app.add_subcommand("predict", "label records with a classifier checkpoint");
  auto* exportc = app.add_subcommand("export-embeddings", "write encoder sentence embeddings");
  for (auto* s : {normalize, synth, vocab, split, pretrain, ssgan, sup, eval, predict_cmd, exportc}) common(s);

  normalize->add_option("--input", a.input, "text file, one review per line");
  split->add_option("--preset", a.preset, "table2-32 ... table2-1024");
  for (auto* s : {ssgan, sup}) {
    s->add_option("--init", a.init, "encoder checkpoint to start from");
    s->add_option("--embeddings", a.embeddings, "frozen mode: directory with labeled/unlabeled/test .emb files");
  }
  for (auto* s : {eval, predict_cmd, exportc}) {
    s->add_option("--checkpoint", a.checkpoint, "checkpoint file")->required();
    s->add_option("--input", a.input, "corpus JSONL (or .emb for frozen checkpoints)");
  }
  predict_cmd->add_option("--output", a.output, "TSV destination (default stdout)");
  exportc->add_option("--output", a.output, "embedding file destination");
  for (auto* s : {ssgan, sup}) s->get_option("--embeddings")->excludes(s->get_option("--init"));

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    CLI::App* chosen = app.get_subcommands().front();
    if (chosen->count("--seed")) a.common.seed = seed;
    const RunConfig cfg = resolve(a.common);
    if (chosen == normalize) return cmd_normalize(cfg, a, out);
    if (chosen == synth) return cmd_synth(cfg, a, out);
    if (chosen == vocab) return cmd_build_vocab(cfg, a, out);
    if (chosen == split) return cmd_split(cfg, a, out);
    if (chosen == pretrain) return cmd_pretrain(cfg, a, out);
    if (chosen == ssgan) return cmd_train_ssgan(cfg, a, out, err);
    if (chosen == sup) return cmd_train_supervised(cfg, a, out, err);
    if (chosen == eval) return cmd_eval(cfg, a, out);
    if (chosen == predict_cmd) return cmd_predict(cfg, a, out);
    if (chosen == exportc) return cmd_export_embeddings(cfg, a, out);
    return kExitUsage;
  } catch (const DivergenceError& e) {
    err << "error: training diverged: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
}

}  // namespace ganlm
