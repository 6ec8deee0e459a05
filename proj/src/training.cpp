#include "qrnn/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <thread>

#include "qrnn/rng.hpp"

namespace qrnn {

namespace {

constexpr std::uint64_t kShuffleStream = 0x73687566;  // "shuf"
constexpr std::uint64_t kDropoutStream = 0x64726f70;  // "drop"

double wall_seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int argmax(const std::vector<double>& v) {
  return int(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

AdamConfig AdamConfig::from_run(const RunConfig& cfg) {
  AdamConfig a;
  a.lr = cfg.lr;
  a.beta1 = cfg.beta1;
  a.beta2 = cfg.beta2;
  a.eps = cfg.adam_eps;
  a.weight_decay = cfg.weight_decay;
  a.decoupled = cfg.decoupled_weight_decay;
  a.grad_clip = cfg.grad_clip;
  return a;
}

AdamOptimizer::AdamOptimizer(const ParamStore& store, AdamConfig cfg) : cfg_(cfg) {
  m_.reserve(store.entries().size());
  v_.reserve(store.entries().size());
  for (const auto& [name, t] : store.entries()) {
    (void)name;
    m_.emplace_back(t->size(), 0.0);
    v_.emplace_back(t->size(), 0.0);
  }
}

void AdamOptimizer::step(ParamStore& store, const std::vector<std::vector<double>>& grads) {
  const auto& entries = store.entries();
  if (grads.size() != entries.size())
    throw std::logic_error("adam: gradient list does not match parameter store");

  // First pass: reject non-finite gradients before touching any state, and
  // measure the global norm for clipping.
  double sq_norm = 0.0;
  for (std::size_t e = 0; e < entries.size(); ++e) {
    if (grads[e].size() != entries[e].second->size())
      throw std::logic_error("adam: gradient size mismatch for parameter '" + entries[e].first +
                             "'");
    for (double g : grads[e]) {
      if (!std::isfinite(g))
        throw TrainingHalt("non-finite gradient in parameter '" + entries[e].first + "'");
      sq_norm += g * g;
    }
  }
  double clip_scale = 1.0;
  if (cfg_.grad_clip > 0.0) {
    double norm = std::sqrt(sq_norm);
    if (norm > cfg_.grad_clip) clip_scale = cfg_.grad_clip / norm;
  }

  step_ += 1;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, double(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, double(step_));

  for (std::size_t e = 0; e < entries.size(); ++e) {
    auto& w = entries[e].second->values;
    auto& m = m_[e];
    auto& v = v_[e];
    for (std::size_t j = 0; j < w.size(); ++j) {
      double g = grads[e][j] * clip_scale;
      if (!cfg_.decoupled) g += cfg_.weight_decay * w[j];
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g;
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g * g;
      w[j] -= cfg_.lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + cfg_.eps);
      if (cfg_.decoupled) w[j] -= cfg_.lr * cfg_.weight_decay * w[j];
    }
  }
}

void AdamOptimizer::restore(std::vector<std::vector<double>> m, std::vector<std::vector<double>> v,
                            std::int64_t step) {
  if (m.size() != m_.size() || v.size() != v_.size())
    throw std::invalid_argument("adam: restored moment count does not match parameter store");
  for (std::size_t e = 0; e < m_.size(); ++e) {
    if (m[e].size() != m_[e].size() || v[e].size() != v_[e].size())
      throw std::invalid_argument("adam: restored moment size mismatch at entry " +
                                  std::to_string(e));
  }
  m_ = std::move(m);
  v_ = std::move(v);
  step_ = step;
}

GradAccumulator::GradAccumulator(const ParamStore& store) {
  g_.reserve(store.entries().size());
  for (const auto& [name, t] : store.entries()) {
    (void)name;
    g_.emplace_back(t->size(), 0.0);
  }
}

void GradAccumulator::zero() {
  for (auto& g : g_) std::fill(g.begin(), g.end(), 0.0);
}

void GradAccumulator::add_from_tape(const Tape& tape, const ParamStore& store) {
  const auto& entries = store.entries();
  for (std::size_t e = 0; e < entries.size(); ++e) {
    const std::vector<double>* g = tape.find_grad(*entries[e].second);
    if (!g) continue;  // parameter unused by this sample's graph
    for (std::size_t j = 0; j < g_[e].size(); ++j) g_[e][j] += (*g)[j];
  }
}

void GradAccumulator::add(const GradAccumulator& other) {
  for (std::size_t e = 0; e < g_.size(); ++e)
    for (std::size_t j = 0; j < g_[e].size(); ++j) g_[e][j] += other.g_[e][j];
}

void GradAccumulator::scale(double factor) {
  for (auto& g : g_)
    for (double& x : g) x *= factor;
}

RunResult run_sample(const QrnnModel& model, Tape& tape, const TaskData& data, std::size_t i,
                     bool training, std::uint64_t dropout_seed) {
  switch (model.task()) {
    case TaskKind::Parity:
      return model.run_classifier(tape, data.inputs[i], data.labels[i], training, dropout_seed);
    case TaskKind::Copy:
      return model.run_copy(tape, data.inputs[i], training, dropout_seed);
    case TaskKind::Lm:
      return model.run_lm(tape, data.inputs[i], training, dropout_seed);
    case TaskKind::Seq2Seq:
      return model.run_seq2seq(tape, data.inputs[i], data.targets[i], training, dropout_seed);
  }
  throw std::logic_error("run_sample: unhandled task");
}

namespace {

// Per-sample contribution: loss plus a hit/weight pair for the task metric
// (unused for lm, whose metric is perplexity derived from the loss).
struct SampleEval {
  double loss = 0.0;
  double hits = 0.0;
  double weight = 0.0;
};

SampleEval eval_one(const QrnnModel& model, const TaskData& data, std::size_t i, bool training,
                    std::uint64_t dropout_seed, Tape* tape_out) {
  Tape local;
  Tape& tape = tape_out ? *tape_out : local;
  RunResult res = run_sample(model, tape, data, i, training, dropout_seed);

  SampleEval out;
  out.loss = res.loss->values[0];
  switch (model.task()) {
    case TaskKind::Parity: {
      out.hits = argmax(res.final_logits->values) == data.labels[i] ? 1.0 : 0.0;
      out.weight = 1.0;
      break;
    }
    case TaskKind::Copy: {
      // Recall accuracy over the k positions after the delimiter run.
      const auto& seq = data.inputs[i];
      std::size_t first_delim = 0;
      while (first_delim < seq.size() && seq[first_delim] != 9) ++first_delim;
      for (std::size_t t = first_delim; t < seq.size(); ++t) {
        out.weight += 1.0;
        if (argmax(res.step_logits[t]->values) == seq[t - first_delim]) out.hits += 1.0;
      }
      break;
    }
    case TaskKind::Lm:
      break;
    case TaskKind::Seq2Seq: {
      const auto& tgt = data.targets[i];
      for (std::size_t t = 0; t < tgt.size(); ++t) {
        out.weight += 1.0;
        if (argmax(res.step_logits[t]->values) == tgt[t]) out.hits += 1.0;
      }
      break;
    }
  }

  if (tape_out) tape_out->backward(res.loss);
  return out;
}

EpochStats aggregate(const QrnnModel& model, const std::vector<SampleEval>& evals,
                     double seconds) {
  EpochStats s;
  s.seconds = seconds;
  if (evals.empty()) return s;
  double hits = 0.0, weight = 0.0;
  for (const auto& e : evals) {
    s.loss += e.loss;
    hits += e.hits;
    weight += e.weight;
  }
  s.loss /= double(evals.size());
  if (model.task() == TaskKind::Lm)
    s.metric = std::exp(s.loss);
  else
    s.metric = weight > 0.0 ? hits / weight : 0.0;
  return s;
}

// Runs samples [begin, end) of `order`, accumulating gradients when `acc` is
// given. Exceptions are captured into `error` so threads never unwind.
void run_range(const QrnnModel& model, const TaskData& data, const std::vector<std::size_t>& order,
               std::size_t begin, std::size_t end, bool training, std::uint64_t seed, int epoch,
               std::vector<SampleEval>& evals, GradAccumulator* acc, std::string& error) {
  try {
    for (std::size_t p = begin; p < end; ++p) {
      std::size_t idx = order[p];
      std::uint64_t drop_seed =
          mix_seed(seed, kDropoutStream, std::uint64_t(epoch), std::uint64_t(idx));
      Tape tape;
      evals[p] = eval_one(model, data, idx, training, drop_seed, acc ? &tape : nullptr);
      if (!std::isfinite(evals[p].loss))
        throw TrainingHalt("non-finite loss for sample " + std::to_string(idx));
      if (acc) acc->add_from_tape(tape, model.params());
    }
  } catch (const std::exception& ex) {
    error = ex.what();
  }
}

}  // namespace

EpochStats evaluate(const QrnnModel& model, const TaskData& data) {
  auto t0 = std::chrono::steady_clock::now();
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<SampleEval> evals(data.size());
  std::string error;
  run_range(model, data, order, 0, data.size(), false, 0, 0, evals, nullptr, error);
  if (!error.empty()) throw TrainingHalt("evaluation: " + error);
  return aggregate(model, evals, wall_seconds_since(t0));
}

EpochStats train_epoch(QrnnModel& model, AdamOptimizer& opt, const TaskData& data,
                       const RunConfig& cfg, int epoch) {
  if (data.size() == 0) throw std::invalid_argument("training: empty dataset");
  auto t0 = std::chrono::steady_clock::now();

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto shuffle_rng = make_rng(mix_seed(cfg.seed, kShuffleStream, std::uint64_t(epoch)));
  shuffle_indices(order, shuffle_rng);

  const std::size_t batch = std::size_t(std::max(1, cfg.batch_size));
  const std::size_t n_threads = std::size_t(std::max(1, cfg.threads));
  std::vector<SampleEval> evals(data.size());

  for (std::size_t b0 = 0; b0 < data.size(); b0 += batch) {
    const std::size_t b1 = std::min(b0 + batch, data.size());
    const std::size_t batch_index = b0 / batch;
    GradAccumulator acc(model.params());

    std::string error;
    if (n_threads <= 1 || b1 - b0 <= 1) {
      run_range(model, data, order, b0, b1, true, cfg.seed, epoch, evals, &acc, error);
    } else {
      // Contiguous chunks, merged in chunk order: the reduction is
      // deterministic for a fixed thread count.
      const std::size_t workers = std::min(n_threads, b1 - b0);
      std::vector<GradAccumulator> accs(workers, GradAccumulator(model.params()));
      std::vector<std::string> errors(workers);
      std::vector<std::thread> pool;
      const std::size_t span = (b1 - b0 + workers - 1) / workers;
      for (std::size_t w = 0; w < workers; ++w) {
        std::size_t lo = b0 + w * span;
        std::size_t hi = std::min(lo + span, b1);
        if (lo >= hi) break;
        pool.emplace_back(run_range, std::cref(model), std::cref(data), std::cref(order), lo, hi,
                          true, cfg.seed, epoch, std::ref(evals), &accs[w], std::ref(errors[w]));
      }
      for (auto& th : pool) th.join();
      for (std::size_t w = 0; w < workers; ++w) {
        if (!errors[w].empty() && error.empty()) error = errors[w];
        acc.add(accs[w]);
      }
    }
    if (!error.empty())
      throw TrainingHalt(error + " (epoch " + std::to_string(epoch + 1) + ", batch " +
                         std::to_string(batch_index) + ")");

    acc.scale(1.0 / double(b1 - b0));
    try {
      opt.step(model.params(), acc.grads());
    } catch (const TrainingHalt& halt) {
      throw TrainingHalt(std::string(halt.what()) + " (epoch " + std::to_string(epoch + 1) +
                         ", batch " + std::to_string(batch_index) + ")");
    }
  }

  return aggregate(model, evals, wall_seconds_since(t0));
}

TrainOutcome train_model(QrnnModel& model, AdamOptimizer& opt, const TaskData& train,
                         const TaskData& test, const RunConfig& cfg,
                         const std::string& metrics_csv, const EpochObserver& on_epoch) {
  std::ofstream csv;
  if (!metrics_csv.empty()) {
    csv.open(metrics_csv, std::ios::app);
    if (!csv) throw std::runtime_error("training: cannot open metrics file " + metrics_csv);
    if (csv.tellp() == std::ofstream::pos_type(0)) csv << "epoch,split,loss,metric,seconds\n";
  }
  auto emit = [&](int epoch, const char* split, const EpochStats& s) {
    if (!csv.is_open()) return;
    char line[160];
    std::snprintf(line, sizeof(line), "%d,%s,%.12g,%.12g,%.3f\n", epoch, split, s.loss, s.metric,
                  s.seconds);
    csv << line;
    csv.flush();
  };

  TrainOutcome out;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    opt.set_lr(cfg.lr * std::pow(cfg.lr_decay, epoch));
    EpochStats tr = train_epoch(model, opt, train, cfg, epoch);
    EpochStats te = evaluate(model, test);
    out.train_history.push_back(tr);
    out.test_history.push_back(te);
    out.epochs_run = epoch + 1;
    emit(epoch + 1, "train", tr);
    emit(epoch + 1, "test", te);
    if (on_epoch) on_epoch(epoch + 1, tr, te);

    const bool enabled = cfg.early_stop_loss > 0.0 || cfg.early_stop_acc > 0.0;
    const bool loss_ok = cfg.early_stop_loss <= 0.0 || te.loss < cfg.early_stop_loss;
    const bool acc_ok = cfg.early_stop_acc <= 0.0 || te.metric >= cfg.early_stop_acc;
    if (enabled && loss_ok && acc_ok) {
      out.early_stopped = true;
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoint format. Little-endian throughout, independent of host order:
//   "QRNN" | u32 version | u64 config digest | u32 section count | sections
// section: u32 name length | name | u8 dtype | u32 ndim | u32 dims[] | payload
// dtype 0 = float64, 1 = int64, 2 = raw bytes (dims = [byte count]).

namespace {

constexpr std::uint32_t kCheckpointVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double d) {
  std::uint64_t u;
  std::memcpy(&u, &d, sizeof(u));
  put_u64(out, u);
}

struct ByteReader {
  const std::string& buf;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > buf.size()) throw std::runtime_error("checkpoint: truncated file");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(std::uint8_t(buf[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(std::uint8_t(buf[pos + i])) << (8 * i);
    pos += 8;
    return v;
  }
  double f64() {
    std::uint64_t u = u64();
    double d;
    std::memcpy(&d, &u, sizeof(d));
    return d;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

void append_section(std::string& out, const CheckpointSection& s) {
  std::size_t count = 1;
  for (int d : s.dims) count *= std::size_t(d);
  if ((s.dtype == 0 && s.f64.size() != count) || (s.dtype == 1 && s.i64.size() != count) ||
      (s.dtype == 2 && s.bytes.size() != count))
    throw std::logic_error("checkpoint: section payload does not match dims: " + s.name);

  put_u32(out, std::uint32_t(s.name.size()));
  out += s.name;
  out.push_back(char(s.dtype));
  put_u32(out, std::uint32_t(s.dims.size()));
  for (int d : s.dims) put_u32(out, std::uint32_t(d));
  switch (s.dtype) {
    case 0:
      for (double x : s.f64) put_f64(out, x);
      break;
    case 1:
      for (std::int64_t x : s.i64) put_u64(out, std::uint64_t(x));
      break;
    case 2:
      out += s.bytes;
      break;
    default:
      throw std::logic_error("checkpoint: unknown dtype on write");
  }
}

CheckpointSection tensor_section(const std::string& name, const TensorPtr& t) {
  CheckpointSection s;
  s.name = name;
  s.dtype = 0;
  s.dims = t->shape;
  s.f64 = t->values;
  return s;
}

CheckpointSection vector_section(const std::string& name, const std::vector<double>& v) {
  CheckpointSection s;
  s.name = name;
  s.dtype = 0;
  s.dims = {int(v.size())};
  s.f64 = v;
  return s;
}

}  // namespace

const CheckpointSection* Checkpoint::find(const std::string& name) const {
  for (const auto& s : sections)
    if (s.name == name) return &s;
  return nullptr;
}

void save_checkpoint(const std::string& path, const RunConfig& cfg, const ParamStore& store,
                     const AdamOptimizer* opt) {
  std::vector<CheckpointSection> sections;
  {
    CheckpointSection s;
    s.name = "config";
    s.dtype = 2;
    s.bytes = cfg.to_text();
    s.dims = {int(s.bytes.size())};
    sections.push_back(std::move(s));
  }
  for (const auto& [name, t] : store.entries()) sections.push_back(tensor_section("param/" + name, t));
  if (opt) {
    const auto& entries = store.entries();
    for (std::size_t e = 0; e < entries.size(); ++e) {
      sections.push_back(vector_section("adam/m/" + entries[e].first, opt->first_moments()[e]));
      sections.push_back(vector_section("adam/v/" + entries[e].first, opt->second_moments()[e]));
    }
    CheckpointSection s;
    s.name = "adam/step";
    s.dtype = 1;
    s.dims = {1};
    s.i64 = {opt->step_count()};
    sections.push_back(std::move(s));
  }

  std::string out;
  out += "QRNN";
  put_u32(out, kCheckpointVersion);
  put_u64(out, config_digest(cfg.to_text()));
  put_u32(out, std::uint32_t(sections.size()));
  for (const auto& s : sections) append_section(out, s);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("checkpoint: cannot write " + path);
  f.write(out.data(), std::streamsize(out.size()));
  if (!f) throw std::runtime_error("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open " + path);
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  ByteReader r{buf};
  if (r.bytes(4) != "QRNN") throw std::runtime_error("checkpoint: bad magic (not a checkpoint)");
  std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  std::uint64_t digest = r.u64();
  std::uint32_t n_sections = r.u32();

  Checkpoint ck;
  for (std::uint32_t i = 0; i < n_sections; ++i) {
    CheckpointSection s;
    std::uint32_t name_len = r.u32();
    s.name = r.bytes(name_len);
    s.dtype = int(std::uint8_t(r.bytes(1)[0]));
    std::uint32_t ndim = r.u32();
    std::size_t count = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      s.dims.push_back(int(r.u32()));
      count *= std::size_t(s.dims.back());
    }
    switch (s.dtype) {
      case 0:
        s.f64.resize(count);
        for (std::size_t j = 0; j < count; ++j) s.f64[j] = r.f64();
        break;
      case 1:
        s.i64.resize(count);
        for (std::size_t j = 0; j < count; ++j) s.i64[j] = std::int64_t(r.u64());
        break;
      case 2:
        s.bytes = r.bytes(count);
        break;
      default:
        throw std::runtime_error("checkpoint: unknown dtype in section " + s.name);
    }
    ck.sections.push_back(std::move(s));
  }
  if (r.pos != buf.size()) throw std::runtime_error("checkpoint: unexpected trailing bytes");

  const CheckpointSection* cfg_section = ck.find("config");
  if (!cfg_section || cfg_section->dtype != 2)
    throw std::runtime_error("checkpoint: missing config section");
  ck.config_text = cfg_section->bytes;
  if (config_digest(ck.config_text) != digest)
    throw std::runtime_error("checkpoint: config digest mismatch (corrupt file)");
  return ck;
}

void restore_from_checkpoint(const Checkpoint& ck, QrnnModel& model, AdamOptimizer* opt) {
  const auto& entries = model.params().entries();

  std::size_t param_sections = 0;
  for (const auto& s : ck.sections)
    if (s.name.rfind("param/", 0) == 0) ++param_sections;
  if (param_sections != entries.size())
    throw std::runtime_error("checkpoint: file has " + std::to_string(param_sections) +
                             " parameter tensors, model expects " +
                             std::to_string(entries.size()));

  for (const auto& [name, t] : entries) {
    const CheckpointSection* s = ck.find("param/" + name);
    if (!s) throw std::runtime_error("checkpoint: missing tensor param/" + name);
    if (s->dims != t->shape || s->f64.size() != t->size())
      throw std::runtime_error("checkpoint: shape mismatch for param/" + name);
    t->values = s->f64;
  }

  if (!opt) return;
  std::vector<std::vector<double>> m, v;
  for (const auto& [name, t] : entries) {
    const CheckpointSection* sm = ck.find("adam/m/" + name);
    const CheckpointSection* sv = ck.find("adam/v/" + name);
    if (!sm || !sv) throw std::runtime_error("checkpoint: no optimizer state for " + name);
    if (sm->f64.size() != t->size() || sv->f64.size() != t->size())
      throw std::runtime_error("checkpoint: optimizer state size mismatch for " + name);
    m.push_back(sm->f64);
    v.push_back(sv->f64);
  }
  const CheckpointSection* ss = ck.find("adam/step");
  if (!ss || ss->i64.size() != 1) throw std::runtime_error("checkpoint: missing adam/step");
  opt->restore(std::move(m), std::move(v), ss->i64[0]);
}

}  // namespace qrnn
