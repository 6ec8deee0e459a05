#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qrnn/ansatz.hpp"
#include "qrnn/config.hpp"
#include "qrnn/controller.hpp"

namespace qrnn {

enum class TaskKind { Parity, Copy, Lm, Seq2Seq };
TaskKind task_from_name(const std::string& name);

// One unrolled timestep: the tape slot holding the evolved quantum state, its
// readout and angles, and the squared state norm at record time.
struct StepRecord {
  int state_slot = -1;
  TensorPtr z;
  TensorPtr theta;
  double norm_sqr = 0.0;
};

struct RunResult {
  TensorPtr loss;                      // null when the call computes no loss
  TensorPtr final_logits;              // classifier head output
  std::vector<TensorPtr> step_logits;  // per-position class scores
  std::vector<StepRecord> trace;       // encoder / main recurrence, t = 1..T
  std::vector<StepRecord> decoder_trace;
  std::vector<std::vector<double>> attention;  // one row per decoder step
};

// The unrolled hybrid model. The quantum register evolves unitarily across
// the whole sequence; a feedforward controller turns (feedback, embedded
// token) into the circuit angles at every step. Parameters are created
// deterministically from the config seed at construction.
class QrnnModel {
 public:
  // vocab/vocab_tgt are required for lm and seq2seq (corpus-dependent);
  // parity and copy derive their alphabets from the task definition.
  explicit QrnnModel(const RunConfig& config, int vocab = 0, int vocab_tgt = 0);

  const RunConfig& config() const { return config_; }
  TaskKind task() const { return task_; }
  const CircuitLayout& layout() const { return layout_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  int vocab() const { return vocab_; }
  int vocab_tgt() const { return vocab_tgt_; }
  int readout_dim() const { return 3 * config_.n_qubits; }
  int transform_dim() const { return transform_dim_; }
  bool transformed_feedback() const { return transformed_feedback_; }
  int feedback_dim() const { return transformed_feedback_ ? transform_dim_ : readout_dim(); }

  // Final-readout classification (parity and friends). label < 0 skips the
  // loss. Trailing pad_id tokens are ignored for the head readout.
  RunResult run_classifier(Tape& tape, const std::vector<int>& tokens, int label, bool training,
                           std::uint64_t dropout_seed) const;

  // Per-step classification over the digit alphabet; the input must follow
  // the copy-task layout and the targets are derived from it. Loss averages
  // over every position.
  RunResult run_copy(Tape& tape, const std::vector<int>& sequence, bool training,
                     std::uint64_t dropout_seed) const;

  // Teacher-forced next-token prediction over ids (at least 2 tokens).
  // Gradient truncation: after every bptt_window steps the quantum state and
  // the feedback vector are carried forward detached.
  RunResult run_lm(Tape& tape, const std::vector<int>& ids, bool training,
                   std::uint64_t dropout_seed) const;

  // Encoder over src, attention-equipped decoder teacher-forced on tgt.
  RunResult run_seq2seq(Tape& tape, const std::vector<int>& src, const std::vector<int>& tgt,
                        bool training, std::uint64_t dropout_seed) const;

  // Greedy decoding until eos_id or max_len. Without a `truncated` sink, a
  // sequence that never emits eos_id is an error.
  std::vector<int> decode_greedy(const std::vector<int>& src, int max_len, int eos_id,
                                 bool* truncated = nullptr) const;

  std::string parameter_report() const;
  // Parameter count excluding embedding tables (the controller + heads
  // figure used for width accounting).
  std::size_t controller_head_param_count() const;

 private:
  RunConfig config_;
  TaskKind task_;
  CircuitLayout layout_;
  ParamStore params_;
  int vocab_ = 0;
  int vocab_tgt_ = 0;
  int transform_dim_ = 0;
  bool transformed_feedback_ = false;
  int pad_id_ = -1;  // < 0 means the task has no padding symbol

  TensorPtr embed_, embed_tgt_;
  ControllerParams ctrl_, dec_ctrl_;
  HeadParams head_;          // parity / copy class head
  LmHeadParams lm_head_;     // lm transform + vocab projection
  HeadParams fb_transform_;  // optional transform when classification feeds y
  AttentionParams att_;
  HeadParams combiner_;  // decoder (z : context) -> r
  HeadParams out_head_;  // seq2seq vocabulary projection

  TensorPtr embed_token(Tape& tape, const TensorPtr& table, int token, int table_vocab,
                        bool training, double rate, std::mt19937_64& drop_rng) const;
  TensorPtr feedback_from(Tape& tape, const TensorPtr& z) const;
};

// Writes one row per step: t, max |z| entry, squared norm deviation, and the
// gradient norm of z_t if backward has run (empty otherwise).
void export_step_trace(const std::string& path, const Tape& tape,
                       const std::vector<StepRecord>& trace);

}  // namespace qrnn
