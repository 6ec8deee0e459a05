#include "qrnn/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "qrnn/rng.hpp"
#include "qrnn/tasks.hpp"

namespace qrnn {

TaskKind task_from_name(const std::string& name) {
  if (name == "parity") return TaskKind::Parity;
  if (name == "copy") return TaskKind::Copy;
  if (name == "lm") return TaskKind::Lm;
  if (name == "seq2seq") return TaskKind::Seq2Seq;
  throw std::invalid_argument("unknown task: " + name);
}

namespace {

// Derives (k, T) from a sequence and checks the payload/filler/cue layout.
struct CopyShape {
  int k, T;
};

CopyShape check_copy_layout(const std::vector<int>& seq, int n_digits) {
  const int len = int(seq.size());
  int first_cue = -1;
  for (int i = 0; i < len; ++i) {
    if (seq[std::size_t(i)] == 9) {
      first_cue = i;
      break;
    }
  }
  if (first_cue < 0) throw std::invalid_argument("copy input: no delimiter present");
  CopyShape s;
  s.k = len - first_cue;
  s.T = first_cue - s.k;
  if (s.k < 1 || s.T < 1) throw std::invalid_argument("copy input: bad payload/filler split");
  for (int i = 0; i < s.k; ++i) {
    if (seq[std::size_t(i)] < 1 || seq[std::size_t(i)] > n_digits) {
      throw std::invalid_argument("copy input: payload symbol out of range");
    }
  }
  for (int i = s.k; i < first_cue; ++i) {
    if (seq[std::size_t(i)] != 0) throw std::invalid_argument("copy input: filler not blank");
  }
  for (int i = first_cue; i < len; ++i) {
    if (seq[std::size_t(i)] != 9) throw std::invalid_argument("copy input: cue region corrupted");
  }
  return s;
}

int argmax_index(const std::vector<double>& v) {
  return int(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

QrnnModel::QrnnModel(const RunConfig& config, int vocab, int vocab_tgt) : config_(config) {
  config_.validate();
  task_ = task_from_name(config_.task);
  layout_ = build_ansatz14(config_.n_qubits, config_.circuit_depth);
  transform_dim_ =
      config_.readout_transform_dim > 0 ? config_.readout_transform_dim : readout_dim();

  if (config_.feedback == "raw_z") {
    transformed_feedback_ = false;
  } else if (config_.feedback == "transformed_y") {
    transformed_feedback_ = true;
  } else {
    transformed_feedback_ = (task_ == TaskKind::Lm || task_ == TaskKind::Seq2Seq);
  }

  switch (task_) {
    case TaskKind::Parity:
      vocab_ = 2;
      break;
    case TaskKind::Copy:
      vocab_ = 10;
      break;
    case TaskKind::Lm:
      if (vocab < 5) throw std::invalid_argument("lm model needs the corpus vocabulary size");
      vocab_ = vocab;
      break;
    case TaskKind::Seq2Seq:
      if (vocab < 5 || vocab_tgt < 5) {
        throw std::invalid_argument("seq2seq model needs source and target vocabulary sizes");
      }
      vocab_ = vocab;
      vocab_tgt_ = vocab_tgt;
      break;
  }
  pad_id_ = (task_ == TaskKind::Lm || task_ == TaskKind::Seq2Seq) ? TokenCorpus::kPad : -1;

  auto rng = make_rng(mix_seed(config_.seed, 0x6d6f64656cull));
  const int n3 = readout_dim();
  const int e = config_.embed_dim;
  const int H = config_.hidden_dim;
  const int r = transform_dim_;
  const int theta_dim = int(layout_.param_count());
  const Activation act = config_.activation_kind();
  const int tr_rows = (act == Activation::GLU) ? 2 * r : r;

  embed_ = params_.add(task_ == TaskKind::Seq2Seq ? "embed_src" : "embed", {vocab_, e});
  xavier_uniform(*embed_, e, vocab_, rng);
  if (pad_id_ >= 0) {
    for (int j = 0; j < e; ++j) embed_->values[std::size_t(pad_id_) * std::size_t(e) + std::size_t(j)] = 0.0;
  }

  if (task_ == TaskKind::Seq2Seq) {
    embed_tgt_ = params_.add("embed_tgt", {vocab_tgt_, e});
    xavier_uniform(*embed_tgt_, e, vocab_tgt_, rng);
    for (int j = 0; j < e; ++j) embed_tgt_->values[std::size_t(pad_id_) * std::size_t(e) + std::size_t(j)] = 0.0;
    // Encoder feedback is the raw readout; the decoder consumes its own
    // transformed output.
    ctrl_ = make_controller(params_, "enc", n3, e, H, theta_dim, act, config_.leaky_slope, rng);
    dec_ctrl_ = make_controller(params_, "dec", r, e, H, theta_dim, act, config_.leaky_slope, rng);
    att_ = make_attention(params_, "att", r, n3, config_.attention_dim, rng);
    combiner_.W = params_.add("comb.W", {tr_rows, 2 * n3});
    combiner_.b = params_.add("comb.b", {tr_rows});
    xavier_uniform(*combiner_.W, 2 * n3, r, rng);
    out_head_ = make_head(params_, "out", r, vocab_tgt_, rng);
    return;
  }

  ctrl_ = make_controller(params_, "ctrl", feedback_dim(), e, H, theta_dim, act,
                          config_.leaky_slope, rng);
  switch (task_) {
    case TaskKind::Parity:
      head_ = make_head(params_, "head", n3, config_.n_classes, rng);
      break;
    case TaskKind::Copy:
      head_ = make_head(params_, "head", n3, vocab_, rng);
      break;
    case TaskKind::Lm:
      lm_head_ = make_lm_head(params_, "head", n3, r, vocab_, act, config_.leaky_slope, rng);
      break;
    case TaskKind::Seq2Seq:
      break;  // handled above
  }
  if (transformed_feedback_ && task_ != TaskKind::Lm) {
    fb_transform_.W = params_.add("fb.W", {tr_rows, n3});
    fb_transform_.b = params_.add("fb.b", {tr_rows});
    xavier_uniform(*fb_transform_.W, n3, r, rng);
  }
}

TensorPtr QrnnModel::embed_token(Tape& tape, const TensorPtr& table, int token, int table_vocab,
                                 bool training, double rate, std::mt19937_64& drop_rng) const {
  if (token < 0 || token >= table_vocab) {
    throw std::invalid_argument("token id " + std::to_string(token) + " outside vocabulary of " +
                                std::to_string(table_vocab));
  }
  TensorPtr x = embedding_row(tape, table, token, pad_id_);
  return dropout(tape, x, rate, drop_rng, training);
}

TensorPtr QrnnModel::feedback_from(Tape& tape, const TensorPtr& z) const {
  if (!transformed_feedback_) return z;
  if (task_ == TaskKind::Lm) {
    return lm_head_transform(tape, lm_head_, z);
  }
  TensorPtr pre = affine(tape, fb_transform_.W, fb_transform_.b, z);
  return activation(tape, pre, config_.activation_kind(), config_.leaky_slope);
}

RunResult QrnnModel::run_classifier(Tape& tape, const std::vector<int>& tokens, int label,
                                    bool training, std::uint64_t dropout_seed) const {
  if (task_ != TaskKind::Parity) throw std::logic_error("run_classifier: wrong task model");
  int len = int(tokens.size());
  if (pad_id_ >= 0) {
    while (len > 0 && tokens[std::size_t(len - 1)] == pad_id_) --len;
  }
  if (len == 0) throw std::invalid_argument("run_classifier: empty sequence");
  auto drop_rng = make_rng(dropout_seed);

  RunResult out;
  int slot = tape.add_state(zero_state(config_.n_qubits));
  TensorPtr fb = feedback_from(tape, constant(readout(tape.state(slot))));
  for (int t = 0; t < len; ++t) {
    TensorPtr x = embed_token(tape, embed_, tokens[std::size_t(t)], vocab_, training,
                              config_.dropout, drop_rng);
    TensorPtr theta = controller_forward(tape, ctrl_, fb, x);
    QuantumStep step = quantum_step(tape, layout_, theta, slot);
    slot = step.state_slot;
    out.trace.push_back({slot, step.z, theta, tape.state(slot).norm_sqr()});
    fb = feedback_from(tape, step.z);
  }
  out.final_logits = affine(tape, head_.W, head_.b, out.trace.back().z);
  if (label >= 0) {
    out.loss = softmax_cross_entropy(tape, out.final_logits, label);
  }
  return out;
}

RunResult QrnnModel::run_copy(Tape& tape, const std::vector<int>& sequence, bool training,
                              std::uint64_t dropout_seed) const {
  if (task_ != TaskKind::Copy) throw std::logic_error("run_copy: wrong task model");
  const CopyShape shape = check_copy_layout(sequence, config_.copy_digits);
  const int len = int(sequence.size());
  auto drop_rng = make_rng(dropout_seed);

  RunResult out;
  int slot = tape.add_state(zero_state(config_.n_qubits));
  TensorPtr fb = feedback_from(tape, constant(readout(tape.state(slot))));
  std::vector<TensorPtr> losses;
  losses.reserve(std::size_t(len));
  for (int t = 0; t < len; ++t) {
    TensorPtr x = embed_token(tape, embed_, sequence[std::size_t(t)], vocab_, training,
                              config_.dropout, drop_rng);
    TensorPtr theta = controller_forward(tape, ctrl_, fb, x);
    QuantumStep step = quantum_step(tape, layout_, theta, slot);
    slot = step.state_slot;
    out.trace.push_back({slot, step.z, theta, tape.state(slot).norm_sqr()});
    TensorPtr logits = affine(tape, head_.W, head_.b, step.z);
    out.step_logits.push_back(logits);
    const int target =
        (t < shape.T + shape.k) ? 0 : sequence[std::size_t(t - shape.T - shape.k)];
    losses.push_back(softmax_cross_entropy(tape, logits, target));
    fb = feedback_from(tape, step.z);
  }
  out.loss = mean_of(tape, losses);
  return out;
}

RunResult QrnnModel::run_lm(Tape& tape, const std::vector<int>& ids, bool training,
                            std::uint64_t dropout_seed) const {
  if (task_ != TaskKind::Lm) throw std::logic_error("run_lm: wrong task model");
  if (ids.size() < 2) throw std::invalid_argument("run_lm: need at least 2 tokens");
  auto drop_rng = make_rng(dropout_seed);

  RunResult out;
  int slot = tape.add_state(zero_state(config_.n_qubits));
  TensorPtr fb = feedback_from(tape, constant(readout(tape.state(slot))));
  std::vector<TensorPtr> losses;
  const int steps = int(ids.size()) - 1;
  for (int t = 0; t < steps; ++t) {
    TensorPtr x =
        embed_token(tape, embed_, ids[std::size_t(t)], vocab_, training, config_.dropout, drop_rng);
    TensorPtr theta = controller_forward(tape, ctrl_, fb, x);
    QuantumStep step = quantum_step(tape, layout_, theta, slot);
    slot = step.state_slot;
    out.trace.push_back({slot, step.z, theta, tape.state(slot).norm_sqr()});
    if (ids[std::size_t(t + 1)] < 0 || ids[std::size_t(t + 1)] >= vocab_) {
      throw std::invalid_argument("run_lm: target token outside vocabulary");
    }
    LmHeadOut ho = lm_step_head(tape, lm_head_, step.z);
    out.step_logits.push_back(ho.logits);
    losses.push_back(softmax_cross_entropy(tape, ho.logits, ids[std::size_t(t + 1)]));
    fb = transformed_feedback_ ? ho.y : step.z;
    // Truncated backpropagation: carry state and feedback forward detached at
    // window boundaries (gradients stop, values continue).
    if (config_.bptt_window > 0 && (t + 1) % config_.bptt_window == 0 && t + 1 < steps) {
      slot = tape.add_detached_state(tape.state(slot));
      fb = detach(fb);
    }
  }
  out.loss = mean_of(tape, losses);
  return out;
}

RunResult QrnnModel::run_seq2seq(Tape& tape, const std::vector<int>& src,
                                 const std::vector<int>& tgt, bool training,
                                 std::uint64_t dropout_seed) const {
  if (task_ != TaskKind::Seq2Seq) throw std::logic_error("run_seq2seq: wrong task model");
  if (src.empty()) throw std::invalid_argument("run_seq2seq: empty source");
  if (tgt.empty()) throw std::invalid_argument("run_seq2seq: empty target");
  auto drop_rng = make_rng(dropout_seed);

  RunResult out;
  int slot = tape.add_state(zero_state(config_.n_qubits));
  TensorPtr fb = constant(readout(tape.state(slot)));
  std::vector<TensorPtr> memory;
  memory.reserve(src.size());
  for (std::size_t t = 0; t < src.size(); ++t) {
    TensorPtr x = embed_token(tape, embed_, src[t], vocab_, training, config_.dropout, drop_rng);
    TensorPtr theta = controller_forward(tape, ctrl_, fb, x);
    QuantumStep step = quantum_step(tape, layout_, theta, slot);
    slot = step.state_slot;
    out.trace.push_back({slot, step.z, theta, tape.state(slot).norm_sqr()});
    memory.push_back(step.z);
    fb = step.z;
  }

  if (config_.decoder_state == "reset") {
    slot = tape.add_state(zero_state(config_.n_qubits));
  }
  const std::vector<unsigned char> keep(src.size(), 1);
  TensorPtr y = constant(std::vector<double>(std::size_t(transform_dim_), 0.0));
  std::vector<TensorPtr> losses;
  for (std::size_t t = 0; t < tgt.size(); ++t) {
    if (tgt[t] < 0 || tgt[t] >= vocab_tgt_) {
      throw std::invalid_argument("run_seq2seq: target token outside vocabulary");
    }
    const int prev = (t == 0) ? TokenCorpus::kBos : tgt[t - 1];
    TensorPtr x =
        embed_token(tape, embed_tgt_, prev, vocab_tgt_, training, config_.dropout, drop_rng);
    TensorPtr theta = controller_forward(tape, dec_ctrl_, y, x);
    QuantumStep step = quantum_step(tape, layout_, theta, slot);
    slot = step.state_slot;
    out.decoder_trace.push_back({slot, step.z, theta, tape.state(slot).norm_sqr()});
    AttentionOut att = attention_step(tape, att_, y, memory, keep);
    out.attention.push_back(att.weights->values);
    TensorPtr merged = concat(tape, step.z, att.context);
    TensorPtr pre = affine(tape, combiner_.W, combiner_.b, merged);
    y = activation(tape, pre, config_.activation_kind(), config_.leaky_slope);
    TensorPtr logits = affine(tape, out_head_.W, out_head_.b, y);
    out.step_logits.push_back(logits);
    losses.push_back(softmax_cross_entropy(tape, logits, tgt[t]));
  }
  out.loss = mean_of(tape, losses);
  return out;
}

std::vector<int> QrnnModel::decode_greedy(const std::vector<int>& src, int max_len, int eos_id,
                                          bool* truncated) const {
  if (task_ != TaskKind::Seq2Seq) throw std::logic_error("decode_greedy: wrong task model");
  if (src.empty()) throw std::invalid_argument("decode_greedy: empty source");
  if (max_len < 1) throw std::invalid_argument("decode_greedy: max_len must be >= 1");
  Tape tape;
  auto drop_rng = make_rng(0);

  int slot = tape.add_state(zero_state(config_.n_qubits));
  TensorPtr fb = constant(readout(tape.state(slot)));
  std::vector<TensorPtr> memory;
  for (std::size_t t = 0; t < src.size(); ++t) {
    TensorPtr x = embed_token(tape, embed_, src[t], vocab_, false, 0.0, drop_rng);
    TensorPtr theta = controller_forward(tape, ctrl_, fb, x);
    QuantumStep step = quantum_step(tape, layout_, theta, slot);
    slot = step.state_slot;
    memory.push_back(step.z);
    fb = step.z;
  }
  if (config_.decoder_state == "reset") {
    slot = tape.add_state(zero_state(config_.n_qubits));
  }
  const std::vector<unsigned char> keep(src.size(), 1);
  TensorPtr y = constant(std::vector<double>(std::size_t(transform_dim_), 0.0));
  std::vector<int> decoded;
  int prev = TokenCorpus::kBos;
  for (int t = 0; t < max_len; ++t) {
    TensorPtr x = embed_token(tape, embed_tgt_, prev, vocab_tgt_, false, 0.0, drop_rng);
    TensorPtr theta = controller_forward(tape, dec_ctrl_, y, x);
    QuantumStep step = quantum_step(tape, layout_, theta, slot);
    slot = step.state_slot;
    AttentionOut att = attention_step(tape, att_, y, memory, keep);
    TensorPtr merged = concat(tape, step.z, att.context);
    TensorPtr pre = affine(tape, combiner_.W, combiner_.b, merged);
    y = activation(tape, pre, config_.activation_kind(), config_.leaky_slope);
    TensorPtr logits = affine(tape, out_head_.W, out_head_.b, y);
    const int tok = argmax_index(logits->values);
    if (tok == eos_id) return decoded;
    decoded.push_back(tok);
    prev = tok;
  }
  if (truncated) {
    *truncated = true;
    return decoded;
  }
  throw std::runtime_error("decode_greedy: no end token within max_len");
}

std::string QrnnModel::parameter_report() const {
  std::ostringstream out;
  out << "parameters\n";
  for (const auto& [name, t] : params_.entries()) {
    char shape[32];
    if (t->shape.size() == 2) {
      std::snprintf(shape, sizeof shape, "[%d x %d]", t->shape[0], t->shape[1]);
    } else {
      std::snprintf(shape, sizeof shape, "[%d]", t->shape[0]);
    }
    char line[128];
    std::snprintf(line, sizeof line, "  %-12s %-12s %8zu\n", name.c_str(), shape, t->size());
    out << line;
  }
  char line[128];
  std::snprintf(line, sizeof line, "  %-25s %8zu\n", "total", params_.total_size());
  out << line;
  std::snprintf(line, sizeof line, "  %-25s %8zu\n", "total excluding embeddings",
                controller_head_param_count());
  out << line;
  return out.str();
}

std::size_t QrnnModel::controller_head_param_count() const {
  std::size_t total = 0;
  for (const auto& [name, t] : params_.entries()) {
    if (name.rfind("embed", 0) == 0) continue;
    total += t->size();
  }
  return total;
}

void export_step_trace(const std::string& path, const Tape& tape,
                       const std::vector<StepRecord>& trace) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write step trace: " + path);
  out << "t,max_abs_z,norm_sqr_dev,grad_norm\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const StepRecord& rec = trace[i];
    double mx = 0.0;
    for (double v : rec.z->values) mx = std::max(mx, std::abs(v));
    char buf[128];
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,", i + 1, mx,
                  std::abs(rec.norm_sqr - 1.0));
    out << buf;
    if (const std::vector<double>* g = tape.find_grad(*rec.z)) {
      double sq = 0.0;
      for (double v : *g) sq += v * v;
      std::snprintf(buf, sizeof buf, "%.17g", std::sqrt(sq));
      out << buf;
    }
    out << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace qrnn
