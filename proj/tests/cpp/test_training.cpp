#include "qrnn/training.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "doctest.h"
#include "qrnn/rng.hpp"
#include "qrnn/tasks.hpp"

using namespace qrnn;

namespace {

RunConfig tiny_copy_cfg() {
  RunConfig cfg;
  cfg.task = "copy";
  cfg.seed = 11;
  cfg.n_qubits = 2;
  cfg.embed_dim = 4;
  cfg.hidden_dim = 6;
  cfg.activation = "leaky_relu";
  cfg.copy_t = 4;
  cfg.copy_k = 2;
  cfg.copy_digits = 3;
  cfg.batch_size = 8;
  cfg.epochs = 3;
  cfg.lr = 1e-2;
  cfg.bptt_window = 0;
  cfg.validate();
  return cfg;
}

CopySpec tiny_copy_spec() {
  CopySpec spec;
  spec.T = 4;
  spec.k = 2;
  spec.n_digits = 3;
  return spec;
}

TaskData copy_task_data(int count, std::uint64_t seed) {
  TaskData d;
  d.inputs = gen_copy_dataset(tiny_copy_spec(), count, seed).inputs;
  return d;
}

TaskData parity_task_data(int length, int count, std::uint64_t seed) {
  ParityDataset p = gen_parity_dataset(length, count, seed);
  TaskData d;
  d.inputs = p.sequences;
  d.labels = p.labels;
  return d;
}

void zero_params(QrnnModel& model) {
  for (const auto& [name, t] : model.params().entries()) {
    (void)name;
    std::fill(t->values.begin(), t->values.end(), 0.0);
  }
}

// Reference Adam mirroring the production update rule step by step.
struct MiniAdam {
  AdamConfig cfg;
  std::vector<std::vector<double>> m, v;
  long step = 0;

  explicit MiniAdam(const std::vector<std::vector<double>>& shapes_like, AdamConfig c) : cfg(c) {
    for (const auto& w : shapes_like) {
      m.emplace_back(w.size(), 0.0);
      v.emplace_back(w.size(), 0.0);
    }
  }

  void apply(std::vector<std::vector<double>>& w, const std::vector<std::vector<double>>& grads) {
    double sq = 0.0;
    for (const auto& g : grads)
      for (double x : g) sq += x * x;
    double clip_scale = 1.0;
    if (cfg.grad_clip > 0.0) {
      double norm = std::sqrt(sq);
      if (norm > cfg.grad_clip) clip_scale = cfg.grad_clip / norm;
    }
    step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, double(step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, double(step));
    for (std::size_t e = 0; e < w.size(); ++e) {
      for (std::size_t j = 0; j < w[e].size(); ++j) {
        double g = grads[e][j] * clip_scale;
        if (!cfg.decoupled) g += cfg.weight_decay * w[e][j];
        m[e][j] = cfg.beta1 * m[e][j] + (1.0 - cfg.beta1) * g;
        v[e][j] = cfg.beta2 * v[e][j] + (1.0 - cfg.beta2) * g * g;
        w[e][j] -= cfg.lr * (m[e][j] / bc1) / (std::sqrt(v[e][j] / bc2) + cfg.eps);
        if (cfg.decoupled) w[e][j] -= cfg.lr * cfg.weight_decay * w[e][j];
      }
    }
  }
};

std::vector<std::vector<double>> snapshot(const ParamStore& store) {
  std::vector<std::vector<double>> out;
  for (const auto& [name, t] : store.entries()) {
    (void)name;
    out.push_back(t->values);
  }
  return out;
}

std::string read_file_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(bool(f));
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("adam config maps from the run config") {
  RunConfig cfg;
  cfg.lr = 0.5;
  cfg.beta1 = 0.8;
  cfg.beta2 = 0.95;
  cfg.adam_eps = 1e-7;
  cfg.weight_decay = 0.25;
  cfg.decoupled_weight_decay = true;
  cfg.grad_clip = 3.0;
  AdamConfig a = AdamConfig::from_run(cfg);
  CHECK(a.lr == 0.5);
  CHECK(a.beta1 == 0.8);
  CHECK(a.beta2 == 0.95);
  CHECK(a.eps == 1e-7);
  CHECK(a.weight_decay == 0.25);
  CHECK(a.decoupled);
  CHECK(a.grad_clip == 3.0);
}

TEST_CASE("adam first step with no decay is the classic signed step") {
  ParamStore store;
  TensorPtr w = store.add("w", {2});
  w->values = {0.5, -0.25};

  AdamConfig cfg;
  cfg.weight_decay = 0.0;
  AdamOptimizer opt(store, cfg);
  opt.step(store, {{1.0, -2.0}});

  // After one step m-hat = g and v-hat = g^2, so the update is
  // lr * sign(g) up to eps.
  CHECK(w->values[0] == doctest::Approx(0.5 - 1e-3).epsilon(1e-9));
  CHECK(w->values[1] == doctest::Approx(-0.25 + 1e-3).epsilon(1e-9));
  CHECK(opt.step_count() == 1);
}

TEST_CASE("adam matches a hand-stepped reference over several updates") {
  auto run_variant = [](AdamConfig cfg) {
    ParamStore store;
    TensorPtr a = store.add("a", {3});
    TensorPtr b = store.add("b", {2, 2});
    a->values = {0.5, -1.0, 2.0};
    b->values = {0.1, 0.2, -0.3, 0.4};
    std::vector<std::vector<double>> ref = snapshot(store);

    AdamOptimizer opt(store, cfg);
    MiniAdam mini(ref, cfg);

    auto rng = make_rng(7);
    for (int s = 0; s < 5; ++s) {
      std::vector<std::vector<double>> grads = {{0, 0, 0}, {0, 0, 0, 0}};
      for (auto& g : grads)
        for (double& x : g) x = uniform_range(rng, -2.0, 2.0);
      opt.step(store, grads);
      mini.apply(ref, grads);
      auto got = snapshot(store);
      for (std::size_t e = 0; e < ref.size(); ++e)
        for (std::size_t j = 0; j < ref[e].size(); ++j)
          CHECK(got[e][j] == doctest::Approx(ref[e][j]).epsilon(1e-13));
    }
  };

  SUBCASE("coupled decay") {
    AdamConfig cfg;
    run_variant(cfg);
  }
  SUBCASE("decoupled decay") {
    AdamConfig cfg;
    cfg.decoupled = true;
    cfg.weight_decay = 0.05;
    run_variant(cfg);
  }
  SUBCASE("global norm clipping") {
    AdamConfig cfg;
    cfg.grad_clip = 0.5;
    run_variant(cfg);
  }
}

TEST_CASE("adam with zero gradients and zero decay is a no-op") {
  ParamStore store;
  TensorPtr w = store.add("w", {3});
  w->values = {1.0, -2.0, 3.0};
  AdamConfig cfg;
  cfg.weight_decay = 0.0;
  AdamOptimizer opt(store, cfg);
  for (int s = 0; s < 4; ++s) opt.step(store, {{0.0, 0.0, 0.0}});
  CHECK(w->values[0] == 1.0);
  CHECK(w->values[1] == -2.0);
  CHECK(w->values[2] == 3.0);
}

TEST_CASE("adam clipping equals pre-scaled gradients") {
  auto make_store = [] {
    ParamStore store;
    TensorPtr w = store.add("w", {2});
    w->values = {1.0, 1.0};
    return store;
  };
  // Gradient norm 5, clip at 1: same as feeding grads scaled by 1/5 with
  // clipping disabled (the decay term sees identical weights).
  ParamStore s1 = make_store();
  AdamConfig c1;
  c1.grad_clip = 1.0;
  AdamOptimizer o1(s1, c1);
  o1.step(s1, {{3.0, 4.0}});

  ParamStore s2 = make_store();
  AdamConfig c2;
  AdamOptimizer o2(s2, c2);
  o2.step(s2, {{3.0 / 5.0, 4.0 / 5.0}});

  CHECK(s1.entries()[0].second->values[0] ==
        doctest::Approx(s2.entries()[0].second->values[0]).epsilon(1e-15));
  CHECK(s1.entries()[0].second->values[1] ==
        doctest::Approx(s2.entries()[0].second->values[1]).epsilon(1e-15));
}

TEST_CASE("adam halts on non-finite gradients naming the parameter") {
  ParamStore store;
  store.add("ctrl.W1", {2});
  AdamOptimizer opt(store, AdamConfig{});
  try {
    opt.step(store, {{1.0, std::nan("")}});
    FAIL("expected TrainingHalt");
  } catch (const TrainingHalt& halt) {
    CHECK(std::string(halt.what()).find("ctrl.W1") != std::string::npos);
  }
  CHECK(opt.step_count() == 0);  // state untouched

  try {
    ParamStore s2;
    s2.add("w", {1});
    AdamOptimizer o2(s2, AdamConfig{});
    o2.step(s2, {{std::numeric_limits<double>::infinity()}});
    FAIL("expected TrainingHalt");
  } catch (const TrainingHalt&) {
  }
}

TEST_CASE("adam rejects misaligned gradient lists") {
  ParamStore store;
  store.add("w", {2});
  AdamOptimizer opt(store, AdamConfig{});
  CHECK_THROWS_AS(opt.step(store, {}), std::logic_error);
  CHECK_THROWS_AS(opt.step(store, {{1.0}}), std::logic_error);
}

TEST_CASE("gradient accumulator sums per-sample tapes in store order") {
  RunConfig cfg = tiny_copy_cfg();
  QrnnModel model(cfg);
  TaskData data = copy_task_data(3, 5);

  GradAccumulator acc(model.params());
  std::vector<std::vector<double>> manual(model.params().entries().size());
  for (std::size_t e = 0; e < manual.size(); ++e)
    manual[e].assign(model.params().entries()[e].second->size(), 0.0);

  for (std::size_t i = 0; i < data.size(); ++i) {
    Tape tape;
    RunResult res = run_sample(model, tape, data, i, false, 0);
    tape.backward(res.loss);
    acc.add_from_tape(tape, model.params());
    for (std::size_t e = 0; e < manual.size(); ++e) {
      const auto* g = tape.find_grad(*model.params().entries()[e].second);
      if (!g) continue;
      for (std::size_t j = 0; j < manual[e].size(); ++j) manual[e][j] += (*g)[j];
    }
  }

  double largest = 0.0;
  for (std::size_t e = 0; e < manual.size(); ++e)
    for (std::size_t j = 0; j < manual[e].size(); ++j) {
      CHECK(acc.grads()[e][j] == manual[e][j]);
      largest = std::max(largest, std::abs(manual[e][j]));
    }
  CHECK(largest > 0.0);  // the sweep saw real gradients

  acc.scale(0.5);
  for (std::size_t e = 0; e < manual.size(); ++e)
    for (std::size_t j = 0; j < manual[e].size(); ++j)
      CHECK(acc.grads()[e][j] == doctest::Approx(0.5 * manual[e][j]).epsilon(1e-15));

  acc.zero();
  for (const auto& g : acc.grads())
    for (double x : g) CHECK(x == 0.0);
}

TEST_CASE("evaluate on a zeroed model reports the uniform-predictor loss") {
  SUBCASE("parity accuracy is the class-0 share and loss is ln 2") {
    RunConfig cfg;
    cfg.task = "parity";
    cfg.n_qubits = 2;
    cfg.embed_dim = 3;
    cfg.hidden_dim = 4;
    cfg.parity_length = 5;
    cfg.validate();
    QrnnModel model(cfg);
    zero_params(model);
    TaskData d = parity_task_data(5, 40, 9);
    EpochStats s = evaluate(model, d);
    CHECK(s.loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    // Zero logits make argmax pick class 0; labels are exactly balanced.
    CHECK(s.metric == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(s.seconds >= 0.0);
  }
  SUBCASE("copy loss is ln 10 and recall accuracy is zero") {
    RunConfig cfg = tiny_copy_cfg();
    QrnnModel model(cfg);
    zero_params(model);
    TaskData d = copy_task_data(12, 3);
    EpochStats s = evaluate(model, d);
    CHECK(s.loss == doctest::Approx(std::log(10.0)).epsilon(1e-12));
    CHECK(s.metric == 0.0);  // recall targets are digits >= 1, argmax hits blank
  }
  SUBCASE("lm metric is perplexity, exp of the mean loss") {
    RunConfig cfg;
    cfg.task = "lm";
    cfg.n_qubits = 2;
    cfg.embed_dim = 3;
    cfg.hidden_dim = 4;
    cfg.bptt_window = 0;
    cfg.validate();
    QrnnModel model(cfg, 6);
    zero_params(model);
    TaskData d;
    d.inputs = {{2, 4, 5, 3}, {2, 5, 3}};
    EpochStats s = evaluate(model, d);
    CHECK(s.loss == doctest::Approx(std::log(6.0)).epsilon(1e-12));
    CHECK(s.metric == doctest::Approx(6.0).epsilon(1e-12));
  }
}

TEST_CASE("seq2seq token accuracy counts teacher-forced argmax hits") {
  RunConfig cfg;
  cfg.task = "seq2seq";
  cfg.n_qubits = 2;
  cfg.embed_dim = 3;
  cfg.hidden_dim = 4;
  cfg.attention_dim = 3;
  cfg.validate();
  QrnnModel model(cfg, 8, 8);
  zero_params(model);
  TaskData d;
  d.inputs = {{4, 5}, {6, 4, 7}};
  d.targets = {{5, 4}, {7, 4, 6}};
  EpochStats s = evaluate(model, d);
  CHECK(s.loss == doctest::Approx(std::log(8.0)).epsilon(1e-12));
  CHECK(s.metric == 0.0);  // zero logits pick token 0, never a target here
}

TEST_CASE("a few epochs of training reduce the copy loss") {
  RunConfig cfg = tiny_copy_cfg();
  QrnnModel model(cfg);
  TaskData train = copy_task_data(48, 21);
  TaskData test = copy_task_data(16, 22);

  EpochStats before = evaluate(model, test);
  AdamOptimizer opt(model.params(), AdamConfig::from_run(cfg));
  TrainOutcome out = train_model(model, opt, train, test, cfg, "");
  REQUIRE(out.epochs_run == 3);
  REQUIRE(out.train_history.size() == 3);
  REQUIRE(out.test_history.size() == 3);

  EpochStats after = evaluate(model, test);
  CHECK(after.loss < before.loss);
  CHECK(out.test_history.back().loss < before.loss);
  CHECK(out.train_history.back().loss < out.train_history.front().loss);
  CHECK(opt.step_count() == 3 * 6);  // 48 samples / batch 8, 3 epochs
}

TEST_CASE("a few epochs of training reduce the seq2seq loss") {
  RunConfig cfg;
  cfg.task = "seq2seq";
  cfg.seed = 4;
  cfg.n_qubits = 2;
  cfg.embed_dim = 3;
  cfg.hidden_dim = 5;
  cfg.attention_dim = 3;
  cfg.batch_size = 6;
  cfg.epochs = 2;
  cfg.lr = 1e-2;
  cfg.validate();
  QrnnModel model(cfg, 8, 8);

  // Token reversal over a tiny alphabet.
  TaskData train;
  auto rng = make_rng(33);
  for (int i = 0; i < 18; ++i) {
    std::vector<int> src(3);
    for (int& t : src) t = int(4 + uniform_index(rng, 4));
    std::vector<int> tgt(src.rbegin(), src.rend());
    train.inputs.push_back(src);
    train.targets.push_back(tgt);
  }

  EpochStats before = evaluate(model, train);
  AdamOptimizer opt(model.params(), AdamConfig::from_run(cfg));
  train_model(model, opt, train, train, cfg, "");
  EpochStats after = evaluate(model, train);
  CHECK(after.loss < before.loss);
}

TEST_CASE("training is bit-reproducible for a fixed seed") {
  auto run_once = [](int threads) {
    RunConfig cfg = tiny_copy_cfg();
    cfg.threads = threads;
    QrnnModel model(cfg);
    TaskData train = copy_task_data(24, 21);
    TaskData test = copy_task_data(8, 22);
    AdamOptimizer opt(model.params(), AdamConfig::from_run(cfg));
    TrainOutcome out = train_model(model, opt, train, test, cfg, "");
    return std::make_pair(snapshot(model.params()), out);
  };

  auto [p1, o1] = run_once(1);
  auto [p2, o2] = run_once(1);
  REQUIRE(p1.size() == p2.size());
  for (std::size_t e = 0; e < p1.size(); ++e)
    for (std::size_t j = 0; j < p1[e].size(); ++j) CHECK(p1[e][j] == p2[e][j]);
  for (std::size_t i = 0; i < o1.test_history.size(); ++i) {
    CHECK(o1.test_history[i].loss == o2.test_history[i].loss);
    CHECK(o1.train_history[i].loss == o2.train_history[i].loss);
  }

  // Same thread count, same result; more threads, same result to rounding.
  auto [p3, o3] = run_once(3);
  auto [p4, o4] = run_once(3);
  for (std::size_t e = 0; e < p3.size(); ++e)
    for (std::size_t j = 0; j < p3[e].size(); ++j) CHECK(p3[e][j] == p4[e][j]);
  CHECK(o3.test_history.back().loss == o4.test_history.back().loss);
  CHECK(o3.test_history.back().loss ==
        doctest::Approx(o1.test_history.back().loss).epsilon(1e-9));
}

TEST_CASE("lr decay multiplies the step size once per epoch") {
  RunConfig cfg = tiny_copy_cfg();
  cfg.lr_decay = 0.5;
  TaskData train = copy_task_data(24, 21);
  TaskData test = copy_task_data(8, 22);

  QrnnModel scheduled(cfg);
  AdamOptimizer opt_s(scheduled.params(), AdamConfig::from_run(cfg));
  train_model(scheduled, opt_s, train, test, cfg, "");
  CHECK(opt_s.config().lr == cfg.lr * 0.25);  // third epoch ran at lr/4

  QrnnModel manual(cfg);
  AdamOptimizer opt_m(manual.params(), AdamConfig::from_run(cfg));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    opt_m.set_lr(cfg.lr * std::pow(cfg.lr_decay, epoch));
    train_epoch(manual, opt_m, train, cfg, epoch);
  }

  auto a = snapshot(scheduled.params());
  auto b = snapshot(manual.params());
  REQUIRE(a.size() == b.size());
  for (std::size_t e = 0; e < a.size(); ++e)
    for (std::size_t j = 0; j < a[e].size(); ++j) CHECK(a[e][j] == b[e][j]);
}

TEST_CASE("early stopping fires when the test thresholds are met") {
  RunConfig cfg = tiny_copy_cfg();
  cfg.epochs = 5;
  cfg.early_stop_loss = 100.0;  // any finite loss passes immediately
  QrnnModel model(cfg);
  TaskData train = copy_task_data(16, 21);
  TaskData test = copy_task_data(8, 22);
  AdamOptimizer opt(model.params(), AdamConfig::from_run(cfg));

  const std::string csv = "training_metrics_tmp.csv";
  std::filesystem::remove(csv);
  TrainOutcome out = train_model(model, opt, train, test, cfg, csv);
  CHECK(out.early_stopped);
  CHECK(out.epochs_run == 1);

  std::ifstream f(csv);
  REQUIRE(bool(f));
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(f, line)) lines.push_back(line);
  REQUIRE(lines.size() == 3);
  CHECK(lines[0] == "epoch,split,loss,metric,seconds");
  CHECK(lines[1].rfind("1,train,", 0) == 0);
  CHECK(lines[2].rfind("1,test,", 0) == 0);
  std::filesystem::remove(csv);
}

TEST_CASE("early stopping needs every enabled threshold") {
  RunConfig cfg = tiny_copy_cfg();
  cfg.epochs = 2;
  cfg.early_stop_loss = 100.0;
  cfg.early_stop_acc = 1.01;  // unattainable accuracy keeps training alive
  QrnnModel model(cfg);
  TaskData train = copy_task_data(16, 21);
  TaskData test = copy_task_data(8, 22);
  AdamOptimizer opt(model.params(), AdamConfig::from_run(cfg));
  TrainOutcome out = train_model(model, opt, train, test, cfg, "");
  CHECK_FALSE(out.early_stopped);
  CHECK(out.epochs_run == 2);
}

TEST_CASE("a poisoned parameter halts training with batch context") {
  RunConfig cfg = tiny_copy_cfg();
  QrnnModel model(cfg);
  model.params().entries()[0].second->values[0] = std::nan("");
  TaskData train = copy_task_data(16, 21);
  AdamOptimizer opt(model.params(), AdamConfig::from_run(cfg));
  try {
    train_epoch(model, opt, train, cfg, 0);
    FAIL("expected TrainingHalt");
  } catch (const TrainingHalt& halt) {
    std::string msg = halt.what();
    CHECK(msg.find("non-finite") != std::string::npos);
    CHECK(msg.find("epoch 1") != std::string::npos);
    CHECK(msg.find("batch 0") != std::string::npos);
  }
}

TEST_CASE("checkpoint save, load and restore round-trips bit-exactly") {
  RunConfig cfg = tiny_copy_cfg();
  QrnnModel model(cfg);
  TaskData train = copy_task_data(16, 21);
  TaskData test = copy_task_data(8, 22);
  AdamOptimizer opt(model.params(), AdamConfig::from_run(cfg));
  cfg.epochs = 1;
  train_model(model, opt, train, test, cfg, "");

  const std::string path = "ckpt_tmp.qrnn";
  const std::string path2 = "ckpt_tmp2.qrnn";
  std::filesystem::remove(path);
  std::filesystem::remove(path2);
  save_checkpoint(path, cfg, model.params(), &opt);

  Checkpoint ck = load_checkpoint(path);
  CHECK(ck.config_text == cfg.to_text());
  CHECK(ck.find("param/ctrl.W1") != nullptr);
  CHECK(ck.find("adam/m/ctrl.W1") != nullptr);
  CHECK(ck.find("adam/step") != nullptr);
  CHECK(ck.find("adam/step")->i64[0] == opt.step_count());

  QrnnModel fresh(cfg);
  AdamOptimizer fresh_opt(fresh.params(), AdamConfig::from_run(cfg));
  restore_from_checkpoint(ck, fresh, &fresh_opt);

  auto p1 = snapshot(model.params());
  auto p2 = snapshot(fresh.params());
  for (std::size_t e = 0; e < p1.size(); ++e)
    for (std::size_t j = 0; j < p1[e].size(); ++j) CHECK(p1[e][j] == p2[e][j]);
  CHECK(fresh_opt.step_count() == opt.step_count());

  EpochStats s1 = evaluate(model, test);
  EpochStats s2 = evaluate(fresh, test);
  CHECK(s1.loss == s2.loss);
  CHECK(s1.metric == s2.metric);

  // Save -> load -> save is byte-identical.
  save_checkpoint(path2, cfg, fresh.params(), &fresh_opt);
  CHECK(read_file_bytes(path) == read_file_bytes(path2));

  // Resumed training continues identically to uninterrupted training.
  TrainOutcome cont = train_model(fresh, fresh_opt, train, test, cfg, "");
  TrainOutcome direct = train_model(model, opt, train, test, cfg, "");
  CHECK(cont.test_history.back().loss == direct.test_history.back().loss);

  std::filesystem::remove(path);
  std::filesystem::remove(path2);
}

TEST_CASE("checkpoint rejects corruption and mismatched shapes") {
  RunConfig cfg = tiny_copy_cfg();
  QrnnModel model(cfg);
  const std::string path = "ckpt_err_tmp.qrnn";
  std::filesystem::remove(path);
  save_checkpoint(path, cfg, model.params(), nullptr);
  std::string good = read_file_bytes(path);

  auto write_bytes = [&](const std::string& bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f.write(bytes.data(), std::streamsize(bytes.size()));
  };

  SUBCASE("bad magic") {
    std::string bad = good;
    bad[0] = 'X';
    write_bytes(bad);
    CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("magic"), std::runtime_error);
  }
  SUBCASE("unsupported version") {
    std::string bad = good;
    bad[4] = 9;
    write_bytes(bad);
    CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("version"), std::runtime_error);
  }
  SUBCASE("truncated file") {
    write_bytes(good.substr(0, good.size() - 5));
    CHECK_THROWS_WITH_AS(load_checkpoint(path), doctest::Contains("truncated"),
                         std::runtime_error);
  }
  SUBCASE("payload tamper breaks the digest or the layout") {
    std::string bad = good;
    bad[30] ^= 0x5a;  // lands inside the config section
    write_bytes(bad);
    CHECK_THROWS(load_checkpoint(path));
  }
  SUBCASE("missing optimizer state") {
    Checkpoint ck = load_checkpoint(path);  // saved without optimizer
    QrnnModel fresh(cfg);
    AdamOptimizer opt(fresh.params(), AdamConfig::from_run(cfg));
    restore_from_checkpoint(ck, fresh, nullptr);  // params alone restore fine
    CHECK_THROWS_WITH_AS(restore_from_checkpoint(ck, fresh, &opt),
                         doctest::Contains("optimizer"), std::runtime_error);
  }
  SUBCASE("architecture mismatch is caught by shape checks") {
    Checkpoint ck = load_checkpoint(path);
    RunConfig other = tiny_copy_cfg();
    other.hidden_dim = 9;
    QrnnModel fresh(other);
    CHECK_THROWS_WITH_AS(restore_from_checkpoint(ck, fresh, nullptr),
                         doctest::Contains("shape mismatch"), std::runtime_error);
  }
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint restore rejects a file with extra tensors") {
  RunConfig cfg = tiny_copy_cfg();
  QrnnModel model(cfg);
  const std::string path = "ckpt_extra_tmp.qrnn";
  save_checkpoint(path, cfg, model.params(), nullptr);
  Checkpoint ck = load_checkpoint(path);

  RunConfig parity = cfg;
  parity.task = "parity";
  parity.parity_length = 5;
  QrnnModel other(parity);
  // Same tensor names exist but the head differs in shape, or counts differ;
  // either way the restore refuses quietly mixing architectures.
  CHECK_THROWS_AS(restore_from_checkpoint(ck, other, nullptr), std::runtime_error);
  std::filesystem::remove(path);
}
