#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qrnn/ansatz.hpp"
#include "qrnn/config.hpp"
#include "qrnn/diagnostics.hpp"
#include "qrnn/model.hpp"
#include "qrnn/rng.hpp"
#include "qrnn/tasks.hpp"
#include "qrnn/training.hpp"

using namespace qrnn;

namespace {

// Error with a decided exit code: 1 validation, 2 runtime (NaN halt, I/O).
struct ExitError {
  int code;
  std::string message;
};

// Runs setup-phase code; anything it throws is a validation failure.
template <typename Fn>
auto setup_phase(Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ExitError&) {
    throw;
  } catch (const std::exception& ex) {
    throw ExitError{1, ex.what()};
  }
}

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> sets;
  std::string out_dir = "out";
  std::int64_t seed = -1;  // < 0 keeps the config's seed
};

void add_config_opts(CLI::App* cmd, CommonOpts& opts, bool with_out = true) {
  cmd->add_option("--config", opts.config_path, "Config file (key=value lines)");
  cmd->add_option("--set", opts.sets, "Override a config key, e.g. --set lr=0.01")
      ->type_name("KEY=VALUE");
  cmd->add_option("--seed", opts.seed, "Override the config seed");
  if (with_out) cmd->add_option("--out", opts.out_dir, "Output directory (default: out)");
}

RunConfig resolve_config(const CommonOpts& opts) {
  return setup_phase([&] {
    std::vector<std::string> overrides = opts.sets;
    if (opts.seed >= 0) overrides.push_back("seed=" + std::to_string(opts.seed));
    if (!opts.config_path.empty()) return RunConfig::from_file(opts.config_path, overrides);
    std::string text;
    for (const auto& o : overrides) text += o + "\n";
    return RunConfig::from_map(ConfigMap::parse_text(text));
  });
}

void write_snapshot(const std::string& out_dir, const std::string& text) {
  std::filesystem::create_directories(out_dir);
  const std::string path = out_dir + "/resolved.cfg";
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << text;
}

// ---------------------------------------------------------------------------
// Data plumbing shared by train / eval / gradprofile.

struct DataFiles {
  std::string data, labels, tgt;
};

TaskData load_task_files(TaskKind task, const DataFiles& files) {
  TaskData d;
  d.inputs = load_int_lines(files.data);
  if (task == TaskKind::Parity) {
    if (files.labels.empty())
      throw std::invalid_argument("parity data needs a labels file (--*labels)");
    d.labels = load_int_scalars(files.labels);
    if (d.labels.size() != d.inputs.size())
      throw std::invalid_argument("labels count does not match sequences");
  }
  if (task == TaskKind::Seq2Seq) {
    if (files.tgt.empty())
      throw std::invalid_argument("seq2seq data needs a target file (--*tgt)");
    d.targets = load_int_lines(files.tgt);
    if (d.targets.size() != d.inputs.size())
      throw std::invalid_argument("target count does not match sources");
  }
  return d;
}

CopySpec copy_spec_from(const RunConfig& cfg) {
  CopySpec spec;
  spec.T = cfg.copy_t;
  spec.k = cfg.copy_k;
  spec.n_digits = cfg.copy_digits;
  spec.count_train = cfg.count_train;
  spec.count_test = cfg.count_test;
  spec.seed = cfg.seed;
  return spec;
}

// Synthetic splits for the generator-backed tasks; lm/seq2seq must come from
// files prepared with gen-data.
void synth_splits(const RunConfig& cfg, TaskKind task, TaskData& train, TaskData& test) {
  if (task == TaskKind::Copy) {
    CopySplits s = gen_copy_splits(copy_spec_from(cfg));
    train.inputs = std::move(s.train.inputs);
    test.inputs = std::move(s.test.inputs);
    return;
  }
  if (task == TaskKind::Parity) {
    ParityDataset tr =
        gen_parity_dataset(cfg.parity_length, cfg.count_train, mix_seed(cfg.seed, 0x70617269, 0));
    ParityDataset te =
        gen_parity_dataset(cfg.parity_length, cfg.count_test, mix_seed(cfg.seed, 0x70617269, 1));
    train.inputs = std::move(tr.sequences);
    train.labels = std::move(tr.labels);
    test.inputs = std::move(te.sequences);
    test.labels = std::move(te.labels);
    return;
  }
  throw std::invalid_argument("task '" + cfg.task +
                              "' has no synthetic generator; pass data files from gen-data");
}

int max_token(const TaskData& d) {
  int top = -1;
  for (const auto& seq : d.inputs)
    for (int t : seq) top = std::max(top, t);
  return top;
}

int max_target_token(const TaskData& d) {
  int top = -1;
  for (const auto& seq : d.targets)
    for (int t : seq) top = std::max(top, t);
  return top;
}

// Vocabulary sizes for model construction. Fixed-alphabet tasks ignore these
// (the model forces them); id-based tasks infer from the data.
void infer_vocabs(TaskKind task, const TaskData& a, const TaskData& b, int& vocab,
                  int& vocab_tgt) {
  vocab = 0;
  vocab_tgt = 0;
  if (task == TaskKind::Lm) vocab = std::max({max_token(a), max_token(b)}) + 1;
  if (task == TaskKind::Seq2Seq) {
    vocab = std::max({max_token(a), max_token(b)}) + 1;
    vocab_tgt = std::max({max_target_token(a), max_target_token(b), TokenCorpus::kEos}) + 1;
  }
  vocab = std::max(vocab, 0);
  vocab_tgt = std::max(vocab_tgt, 0);
}

// Model construction from a checkpoint: the embedded config is authoritative
// for architecture; overrides are applied on top (data or diagnostics keys;
// architectural edits surface as shape mismatches at restore).
struct LoadedModel {
  RunConfig cfg;
  Checkpoint ck;
  std::unique_ptr<QrnnModel> model;
};

LoadedModel model_from_checkpoint(const std::string& path,
                                  const std::vector<std::string>& sets, std::int64_t seed) {
  LoadedModel lm;
  lm.ck = load_checkpoint(path);
  std::string text = lm.ck.config_text;
  for (const auto& o : sets) text += "\n" + o;
  if (seed >= 0) text += "\nseed=" + std::to_string(seed);
  lm.cfg = RunConfig::from_map(ConfigMap::parse_text(text));

  int vocab = 0, vocab_tgt = 0;
  if (const CheckpointSection* s = lm.ck.find("param/embed"); s && s->dims.size() == 2)
    vocab = s->dims[0];
  if (const CheckpointSection* s = lm.ck.find("param/embed_tgt"); s && s->dims.size() == 2)
    vocab_tgt = s->dims[0];
  lm.model = std::make_unique<QrnnModel>(lm.cfg, vocab, vocab_tgt);
  restore_from_checkpoint(lm.ck, *lm.model, nullptr);
  return lm;
}

void print_epoch(int epoch, const EpochStats& tr, const EpochStats& te) {
  std::fprintf(stderr,
               "epoch %3d  train loss %.6f metric %.4f  test loss %.6f metric %.4f  (%.1fs)\n",
               epoch, tr.loss, tr.metric, te.loss, te.metric, tr.seconds + te.seconds);
}

// ---------------------------------------------------------------------------
// Subcommands.

struct GenDataOpts {
  CommonOpts common;
  std::string corpus, test_corpus, tgt_corpus, test_tgt_corpus;
};

void write_vocab(const std::string& path, const TokenCorpus& corpus) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path);
  for (const auto& tok : corpus.id_to_token) f << tok << "\n";
}

std::vector<std::vector<int>> wrap_bos_eos(const std::vector<std::vector<int>>& seqs) {
  std::vector<std::vector<int>> out;
  out.reserve(seqs.size());
  for (const auto& s : seqs) {
    std::vector<int> w;
    w.reserve(s.size() + 2);
    w.push_back(TokenCorpus::kBos);
    w.insert(w.end(), s.begin(), s.end());
    w.push_back(TokenCorpus::kEos);
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<std::vector<int>> append_eos(const std::vector<std::vector<int>>& seqs) {
  std::vector<std::vector<int>> out = seqs;
  for (auto& s : out) s.push_back(TokenCorpus::kEos);
  return out;
}

int cmd_gen_data(const GenDataOpts& opts) {
  RunConfig cfg = resolve_config(opts.common);
  TaskKind task = setup_phase([&] { return task_from_name(cfg.task); });
  const std::string& out = opts.common.out_dir;
  write_snapshot(out, cfg.to_text());

  if (task == TaskKind::Copy) {
    CopySplits s = gen_copy_splits(copy_spec_from(cfg));
    save_int_lines(out + "/train.txt", s.train.inputs);
    save_int_lines(out + "/test.txt", s.test.inputs);
    std::printf("wrote %zu train / %zu test copy sequences under %s\n", s.train.inputs.size(),
                s.test.inputs.size(), out.c_str());
    return 0;
  }
  if (task == TaskKind::Parity) {
    TaskData train, test;
    synth_splits(cfg, task, train, test);
    save_int_lines(out + "/train.txt", train.inputs);
    save_int_scalars(out + "/train_labels.txt", train.labels);
    save_int_lines(out + "/test.txt", test.inputs);
    save_int_scalars(out + "/test_labels.txt", test.labels);
    std::printf("wrote %zu train / %zu test parity sequences under %s\n", train.inputs.size(),
                test.inputs.size(), out.c_str());
    return 0;
  }
  if (task == TaskKind::Lm) {
    if (opts.corpus.empty())
      throw ExitError{1, "gen-data for lm needs --corpus (plain text, one sequence per line)"};
    TokenCorpus corpus = setup_phase(
        [&] { return load_token_corpus(opts.corpus, cfg.vocab_limit); });
    save_int_lines(out + "/train_ids.txt", wrap_bos_eos(corpus.sequences));
    write_vocab(out + "/vocab.txt", corpus);
    if (!opts.test_corpus.empty()) {
      auto test_ids = encode_file(corpus, opts.test_corpus);
      save_int_lines(out + "/test_ids.txt", wrap_bos_eos(test_ids));
    }
    std::printf("wrote %zu sequences, vocab %d, under %s\n", corpus.sequences.size(),
                corpus.vocab_size(), out.c_str());
    return 0;
  }
  // seq2seq: separate source and target vocabularies.
  if (opts.corpus.empty() || opts.tgt_corpus.empty())
    throw ExitError{1, "gen-data for seq2seq needs --corpus and --tgt-corpus"};
  TokenCorpus src = setup_phase([&] { return load_token_corpus(opts.corpus, cfg.vocab_limit); });
  TokenCorpus tgt =
      setup_phase([&] { return load_token_corpus(opts.tgt_corpus, cfg.vocab_limit); });
  if (src.sequences.size() != tgt.sequences.size())
    throw ExitError{1, "source and target corpora have different line counts"};
  save_int_lines(out + "/train_src.txt", src.sequences);
  save_int_lines(out + "/train_tgt.txt", append_eos(tgt.sequences));
  write_vocab(out + "/vocab_src.txt", src);
  write_vocab(out + "/vocab_tgt.txt", tgt);
  if (!opts.test_corpus.empty() && !opts.test_tgt_corpus.empty()) {
    save_int_lines(out + "/test_src.txt", encode_file(src, opts.test_corpus));
    save_int_lines(out + "/test_tgt.txt", append_eos(encode_file(tgt, opts.test_tgt_corpus)));
  }
  std::printf("wrote %zu pairs, vocab %d/%d, under %s\n", src.sequences.size(), src.vocab_size(),
              tgt.vocab_size(), out.c_str());
  return 0;
}

struct TrainOpts {
  CommonOpts common;
  DataFiles train_files, test_files;
};

int cmd_train(const TrainOpts& opts) {
  RunConfig cfg = resolve_config(opts.common);
  TaskKind task = setup_phase([&] { return task_from_name(cfg.task); });
  const std::string& out = opts.common.out_dir;
  write_snapshot(out, cfg.to_text());

  TaskData train, test;
  int vocab = 0, vocab_tgt = 0;
  setup_phase([&] {
    if (!opts.train_files.data.empty()) {
      train = load_task_files(task, opts.train_files);
      if (opts.test_files.data.empty())
        throw std::invalid_argument("--train-data needs --test-data for evaluation");
      test = load_task_files(task, opts.test_files);
    } else {
      synth_splits(cfg, task, train, test);
    }
    infer_vocabs(task, train, test, vocab, vocab_tgt);
    return 0;
  });

  auto model = setup_phase([&] { return std::make_unique<QrnnModel>(cfg, vocab, vocab_tgt); });
  AdamOptimizer opt(model->params(), AdamConfig::from_run(cfg));
  std::fprintf(stderr, "training %s: %zu train / %zu test samples, %zu parameters\n",
               cfg.task.c_str(), train.size(), test.size(), model->params().total_size());

  TrainOutcome outcome =
      train_model(*model, opt, train, test, cfg, out + "/metrics.csv", print_epoch);
  save_checkpoint(out + "/model.ckpt", cfg, model->params(), &opt);

  const EpochStats& last = outcome.test_history.back();
  std::printf("epochs=%d early_stopped=%d final_test_loss=%.10g final_test_metric=%.10g\n",
              outcome.epochs_run, outcome.early_stopped ? 1 : 0, last.loss, last.metric);
  return 0;
}

struct EvalOpts {
  CommonOpts common;
  std::string checkpoint;
  DataFiles files;
};

int cmd_eval(const EvalOpts& opts) {
  LoadedModel lm = setup_phase(
      [&] { return model_from_checkpoint(opts.checkpoint, opts.common.sets, opts.common.seed); });
  TaskKind task = lm.model->task();
  write_snapshot(opts.common.out_dir, lm.cfg.to_text());

  TaskData data;
  setup_phase([&] {
    if (!opts.files.data.empty()) {
      data = load_task_files(task, opts.files);
    } else {
      TaskData train_unused;
      synth_splits(lm.cfg, task, train_unused, data);
    }
    return 0;
  });

  EpochStats s = evaluate(*lm.model, data);
  std::printf("samples=%zu loss=%.10g metric=%.10g\n", data.size(), s.loss, s.metric);
  return 0;
}

struct GradProfileOpts {
  CommonOpts common;
  std::string checkpoint;
  DataFiles files;
  int batch = 16;
};

int cmd_gradprofile(const GradProfileOpts& opts) {
  LoadedModel lm = setup_phase(
      [&] { return model_from_checkpoint(opts.checkpoint, opts.common.sets, opts.common.seed); });
  TaskKind task = lm.model->task();
  write_snapshot(opts.common.out_dir, lm.cfg.to_text());

  TaskData batch;
  setup_phase([&] {
    if (opts.batch < 1) throw std::invalid_argument("--batch must be >= 1");
    if (!opts.files.data.empty()) {
      batch = load_task_files(task, opts.files);
      if (int(batch.size()) > opts.batch) {
        batch.inputs.resize(std::size_t(opts.batch));
        if (!batch.labels.empty()) batch.labels.resize(std::size_t(opts.batch));
        if (!batch.targets.empty()) batch.targets.resize(std::size_t(opts.batch));
      }
    } else {
      RunConfig data_cfg = lm.cfg;
      data_cfg.count_train = opts.batch;
      data_cfg.count_test = opts.batch;
      TaskData unused;
      synth_splits(data_cfg, task, batch, unused);
    }
    return 0;
  });

  GradProfile profile = grad_profile(*lm.model, batch);
  const std::string csv = opts.common.out_dir + "/grad_profile.csv";
  save_grad_profile_csv(csv, profile);
  std::printf("steps=%zu batch=%d first_normalized=%.10g final_normalized=%.10g\n",
              profile.normalized.size(), profile.batch, profile.normalized.front(),
              profile.normalized.back());
  return 0;
}

struct ExpressibilityOpts {
  CommonOpts common;
  int n_qubits = 4;
  int pairs = 5000;
  int bins = 75;
  int depth = 1;
  std::string circuit = "ansatz14";
  bool pool = false;
};

int cmd_expressibility(const ExpressibilityOpts& opts) {
  ExpressibilitySpec spec;
  spec.n_qubits = opts.n_qubits;
  spec.pairs = opts.pairs;
  spec.bins = opts.bins;
  spec.seed = opts.common.seed >= 0 ? std::uint64_t(opts.common.seed) : 1;
  spec.pool_mode = opts.pool;

  CircuitLayout layout = setup_phase([&] {
    spec.validate();
    if (opts.circuit == "ansatz14") return build_ansatz14(opts.n_qubits, opts.depth);
    if (opts.circuit == "ry_layer") return build_ry_layer(opts.n_qubits);
    throw std::invalid_argument("unknown circuit '" + opts.circuit +
                                "' (expected ansatz14 or ry_layer)");
  });

  ExpressibilityResult r = expressibility_kl(spec, layout);

  char snapshot[256];
  std::snprintf(snapshot, sizeof(snapshot),
                "n_qubits=%d\npairs=%d\nbins=%d\nseed=%llu\ncircuit=%s\ndepth=%d\npool=%d\n",
                opts.n_qubits, opts.pairs, opts.bins,
                static_cast<unsigned long long>(spec.seed), opts.circuit.c_str(), opts.depth,
                opts.pool ? 1 : 0);
  write_snapshot(opts.common.out_dir, snapshot);
  save_expressibility_csv(opts.common.out_dir + "/expressibility.csv", r);
  std::printf("kl=%.10g fidelities=%zu\n", r.kl, r.fidelity_count);
  return 0;
}

struct GradCheckOpts {
  int n_qubits = 4;
  int t = 5;
  std::int64_t seed = 1;
};

int cmd_gradcheck(const GradCheckOpts& opts) {
  RunConfig cfg = setup_phase([&] {
    RunConfig c;
    c.task = "copy";
    c.seed = std::uint64_t(opts.seed);
    c.n_qubits = opts.n_qubits;
    c.embed_dim = 5;
    c.hidden_dim = 6;
    c.copy_t = opts.t;
    c.copy_k = 2;
    c.batch_size = 1;
    c.validate();
    return c;
  });

  QrnnModel model(cfg);
  CopySpec spec = copy_spec_from(cfg);
  std::vector<int> sample = gen_copy_dataset(spec, 1, cfg.seed).inputs[0];

  auto loss_value = [&] {
    Tape tape;
    return model.run_copy(tape, sample, false, 0).loss->values[0];
  };

  Tape tape;
  RunResult res = model.run_copy(tape, sample, false, 0);
  tape.backward(res.loss);

  const double h = 1e-5;
  double max_rel = 0.0;
  for (const auto& [name, tensor] : model.params().entries()) {
    const std::vector<double>* grad = tape.find_grad(*tensor);
    for (std::size_t j = 0; j < tensor->size(); ++j) {
      const double g = grad ? (*grad)[j] : 0.0;
      const double keep = tensor->values[j];
      tensor->values[j] = keep + h;
      const double up = loss_value();
      tensor->values[j] = keep - h;
      const double down = loss_value();
      tensor->values[j] = keep;
      const double fd = (up - down) / (2.0 * h);
      const double rel = std::abs(g - fd) / std::max(1.0, std::abs(fd));
      max_rel = std::max(max_rel, rel);
    }
  }

  std::printf("max relative error: %.6g over %zu parameters (n=%d, %d steps)\n", max_rel,
              model.params().total_size(), opts.n_qubits, spec.seq_len());
  return max_rel < 1e-5 ? 0 : 1;
}

struct NormAuditOpts {
  int n_qubits = 8;
  int t = 400;
  double tol = 1e-9;
  std::int64_t seed = 1;
};

int cmd_norm_audit(const NormAuditOpts& opts) {
  RunConfig cfg = setup_phase([&] {
    RunConfig c;
    c.task = "parity";
    c.seed = std::uint64_t(opts.seed);
    c.n_qubits = opts.n_qubits;
    c.embed_dim = 4;
    c.hidden_dim = 8;
    c.parity_length = opts.t;
    if (opts.t < 1) throw std::invalid_argument("--t must be >= 1");
    if (!(opts.tol > 0)) throw std::invalid_argument("--tol must be positive");
    c.validate();
    return c;
  });

  QrnnModel model(cfg);
  auto rng = make_rng(mix_seed(cfg.seed, 0x61756474));
  std::vector<int> seq(std::size_t(opts.t));
  for (int& b : seq) b = int(uniform_index(rng, 2));

  NormAuditResult r = norm_audit(model, seq);
  std::printf("max deviation %.6g at step %d over %d steps (tolerance %.3g)\n", r.max_dev,
              r.worst_t, r.steps, opts.tol);
  return r.max_dev < opts.tol ? 0 : 1;
}

struct InfoOpts {
  CommonOpts common;
};

int cmd_info(const InfoOpts& opts) {
  RunConfig cfg = resolve_config(opts.common);
  TaskKind task = setup_phase([&] { return task_from_name(cfg.task); });

  // Id-based tasks size their embeddings from data; report at the configured
  // vocabulary cap so the accounting is well defined.
  int vocab = 0, vocab_tgt = 0;
  if (task == TaskKind::Lm) vocab = cfg.vocab_limit;
  if (task == TaskKind::Seq2Seq) vocab = vocab_tgt = cfg.vocab_limit;
  auto model = setup_phase([&] { return std::make_unique<QrnnModel>(cfg, vocab, vocab_tgt); });

  CircuitLayout layout = build_ansatz14(cfg.n_qubits, cfg.circuit_depth);
  std::printf("task:            %s\n", cfg.task.c_str());
  std::printf("qubits:          %d (state dimension %zu)\n", cfg.n_qubits,
              std::size_t(1) << cfg.n_qubits);
  std::printf("circuit:         ansatz-14 depth %d, %d parametrized gates per step\n",
              cfg.circuit_depth, layout.param_count());
  std::printf("readout width:   %d\n", model->readout_dim());
  std::printf("feedback:        %s (%d values)\n",
              model->transformed_feedback() ? "transformed_y" : "raw_z", model->feedback_dim());
  if (task == TaskKind::Lm || task == TaskKind::Seq2Seq)
    std::printf("vocab (cap):     %d\n", cfg.vocab_limit);
  std::printf("\n%s", model->parameter_report().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qrnn: hybrid quantum-classical recurrent network toolkit"};
  app.require_subcommand(1);
  std::function<int()> action;

  GenDataOpts gen_opts;
  CLI::App* gen = app.add_subcommand("gen-data", "Generate or encode task datasets");
  add_config_opts(gen, gen_opts.common);
  gen->add_option("--corpus", gen_opts.corpus, "Plain-text corpus (lm source, seq2seq source)");
  gen->add_option("--test-corpus", gen_opts.test_corpus, "Held-out corpus encoded with the same vocab");
  gen->add_option("--tgt-corpus", gen_opts.tgt_corpus, "Target-side corpus (seq2seq)");
  gen->add_option("--test-tgt-corpus", gen_opts.test_tgt_corpus, "Held-out target corpus (seq2seq)");
  gen->callback([&] { action = [&] { return cmd_gen_data(gen_opts); }; });

  TrainOpts train_opts;
  CLI::App* train = app.add_subcommand("train", "Train a model and save a checkpoint");
  add_config_opts(train, train_opts.common);
  train->add_option("--train-data", train_opts.train_files.data, "Training sequences (int lines)");
  train->add_option("--train-labels", train_opts.train_files.labels, "Training labels (parity)");
  train->add_option("--train-tgt", train_opts.train_files.tgt, "Training targets (seq2seq)");
  train->add_option("--test-data", train_opts.test_files.data, "Test sequences (int lines)");
  train->add_option("--test-labels", train_opts.test_files.labels, "Test labels (parity)");
  train->add_option("--test-tgt", train_opts.test_files.tgt, "Test targets (seq2seq)");
  train->callback([&] { action = [&] { return cmd_train(train_opts); }; });

  EvalOpts eval_opts;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_config_opts(eval_cmd, eval_opts.common);
  eval_cmd->add_option("--checkpoint", eval_opts.checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--data", eval_opts.files.data, "Sequences to evaluate (int lines)");
  eval_cmd->add_option("--labels", eval_opts.files.labels, "Labels (parity)");
  eval_cmd->add_option("--tgt-data", eval_opts.files.tgt, "Targets (seq2seq)");
  eval_cmd->callback([&] { action = [&] { return cmd_eval(eval_opts); }; });

  ExpressibilityOpts ex_opts;
  CLI::App* ex = app.add_subcommand("expressibility",
                                    "Fidelity-histogram KL divergence against Haar");
  add_config_opts(ex, ex_opts.common);
  ex->add_option("--n-qubits", ex_opts.n_qubits, "Qubit count (default 4)");
  ex->add_option("--pairs", ex_opts.pairs, "Fidelity sample pairs (default 5000)");
  ex->add_option("--bins", ex_opts.bins, "Histogram bins (default 75)");
  ex->add_option("--depth", ex_opts.depth, "Ansatz repetitions (default 1)");
  ex->add_option("--circuit", ex_opts.circuit, "ansatz14 or ry_layer");
  ex->add_flag("--pool", ex_opts.pool, "All-pairs over a shared state pool");
  ex->callback([&] { action = [&] { return cmd_expressibility(ex_opts); }; });

  GradProfileOpts gp_opts;
  CLI::App* gp = app.add_subcommand("gradprofile",
                                    "Per-timestep readout gradient norms for a checkpoint");
  add_config_opts(gp, gp_opts.common);
  gp->add_option("--checkpoint", gp_opts.checkpoint, "Checkpoint file")->required();
  gp->add_option("--batch", gp_opts.batch, "Batch size (default 16)");
  gp->add_option("--data", gp_opts.files.data, "Sequences (int lines; generated if omitted)");
  gp->add_option("--labels", gp_opts.files.labels, "Labels (parity)");
  gp->add_option("--tgt-data", gp_opts.files.tgt, "Targets (seq2seq)");
  gp->callback([&] { action = [&] { return cmd_gradprofile(gp_opts); }; });

  GradCheckOpts gc_opts;
  CLI::App* gc = app.add_subcommand("gradcheck",
                                    "Adjoint vs finite-difference gradients on a small model");
  gc->add_option("--n-qubits", gc_opts.n_qubits, "Qubit count (default 4)");
  gc->add_option("--t", gc_opts.t, "Filler length of the probe sequence (default 5)");
  gc->add_option("--seed", gc_opts.seed, "Seed (default 1)");
  gc->callback([&] { action = [&] { return cmd_gradcheck(gc_opts); }; });

  NormAuditOpts na_opts;
  CLI::App* na = app.add_subcommand("norm-audit", "Recurrent state norm preservation check");
  na->add_option("--n-qubits", na_opts.n_qubits, "Qubit count (default 8)");
  na->add_option("--t", na_opts.t, "Steps to run (default 400)");
  na->add_option("--tol", na_opts.tol, "Maximum allowed |norm^2 - 1| (default 1e-9)");
  na->add_option("--seed", na_opts.seed, "Seed (default 1)");
  na->callback([&] { action = [&] { return cmd_norm_audit(na_opts); }; });

  InfoOpts info_opts;
  CLI::App* info = app.add_subcommand("info", "Print architecture and parameter accounting");
  add_config_opts(info, info_opts.common, /*with_out=*/false);
  info->callback([&] { action = [&] { return cmd_info(info_opts); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "ERROR 1: " << e.what() << "\n";
    return 1;
  }

  try {
    return action();
  } catch (const ExitError& e) {
    std::cerr << "ERROR " << e.code << ": " << e.message << "\n";
    return e.code;
  } catch (const TrainingHalt& e) {
    std::cerr << "ERROR 2: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "ERROR 1: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "ERROR 2: " << e.what() << "\n";
    return 2;
  }
}
