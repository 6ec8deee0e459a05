#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "qrnn/ansatz.hpp"
#include "qrnn/statevector.hpp"

// Reverse-mode tape over small dense tensors, with the quantum state threaded
// through dedicated "state slots" so gradients can flow both into per-step
// circuit parameters and backwards through the unitary recurrence.
//
// Tapes are single-threaded and single-shot: record a forward pass, call
// backward(loss) once, read gradients out, throw the tape away. Gradient
// buffers live in the tape (keyed by tensor identity), never in the tensors,
// so shared parameters can be used from many tapes concurrently.

namespace qrnn {

struct Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

struct Tensor {
  std::vector<int> shape;
  std::vector<double> values;
  bool requires_grad = false;
  bool from_op = false;  // produced by a recorded op; gradients flow through
  std::uint64_t id = 0;

  std::size_t size() const { return values.size(); }
  int rows() const { return shape.empty() ? 0 : shape[0]; }
  int cols() const { return shape.size() < 2 ? 1 : shape[1]; }

  static TensorPtr make(std::vector<int> shape, bool requires_grad = false);
};

// Leaf helpers. Constants never accumulate gradients.
TensorPtr constant(std::vector<double> values);
TensorPtr scalar_constant(double value);

enum class Activation { ReLU, LeakyReLU, GELU, GLU, Tanh, Identity };
Activation activation_from_name(std::string_view name);
std::string_view activation_name(Activation a);

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Gradient buffer for a tensor, zero-initialized on first access.
  std::vector<double>& grad(const Tensor& t);
  const std::vector<double>* find_grad(const Tensor& t) const;

  // Runs recorded nodes in reverse from a scalar loss. A second call without
  // re-recording is an error.
  void backward(const TensorPtr& loss);
  bool backward_done() const { return used_; }

  void record(std::function<void()> fn) { nodes_.push_back(std::move(fn)); }
  std::size_t node_count() const { return nodes_.size(); }

  // Quantum state slots. add_state links nothing by itself; quantum_step
  // records the backward node. add_detached_state deliberately drops the
  // gradient path (BPTT truncation).
  int add_state(QuantumState s);
  int add_detached_state(const QuantumState& s);
  const QuantumState& state(int slot) const;
  // Diagnostics-only escape hatch (e.g. deliberate corruption in audits).
  QuantumState& mutable_state(int slot);
  // Cotangent d loss / d (Re a, Im a) packed as complex, per slot.
  std::vector<cdouble>& state_cotangent(int slot);
  const std::vector<cdouble>* find_state_cotangent(int slot) const;

 private:
  std::vector<std::function<void()>> nodes_;
  std::unordered_map<std::uint64_t, std::vector<double>> grads_;
  std::vector<QuantumState> states_;
  std::vector<std::vector<cdouble>> state_cots_;  // empty vector = not touched
  bool used_ = false;
};

// y = W x + b. W is [m,k] row major, b and y are [m], x is [k].
TensorPtr affine(Tape& tape, const TensorPtr& W, const TensorPtr& b, const TensorPtr& x);

// Elementwise nonlinearity; GLU halves the width (input [2m] -> output [m],
// first half gated by the sigmoid of the second). Identity returns its input.
TensorPtr activation(Tape& tape, const TensorPtr& x, Activation kind, double leaky_slope = 0.01);

TensorPtr concat(Tape& tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr add(Tape& tape, const TensorPtr& a, const TensorPtr& b);
TensorPtr scale(Tape& tape, const TensorPtr& x, double factor);

// Mean of scalar tensors; the sequence-loss reducer.
TensorPtr mean_of(Tape& tape, const std::vector<TensorPtr>& scalars);
// [L] vector out of L scalar tensors (attention scores).
TensorPtr stack_scalars(Tape& tape, const std::vector<TensorPtr>& scalars);

// Numerically stable fused softmax + cross entropy against a class index.
TensorPtr softmax_cross_entropy(Tape& tape, const TensorPtr& logits, int target);

// Softmax over positions where keep[j] != 0; masked weights are exactly zero
// and receive no gradient. Throws if nothing is kept.
TensorPtr masked_softmax(Tape& tape, const TensorPtr& scores,
                         const std::vector<unsigned char>& keep);

// y = sum_j weights[j] * items[j], items all [m].
TensorPtr weighted_sum(Tape& tape, const TensorPtr& weights,
                       const std::vector<TensorPtr>& items);

// Row lookup into a [V,e] table. pad_row's gradient is frozen (the padding
// embedding stays exactly zero).
TensorPtr embedding_row(Tape& tape, const TensorPtr& table, int row, int pad_row = -1);

// Inverted dropout on the input vector; identity when !training or rate == 0.
TensorPtr dropout(Tape& tape, const TensorPtr& x, double rate, std::mt19937_64& rng,
                  bool training);

// Constant copy; gradients stop here.
TensorPtr detach(const TensorPtr& x);

struct QuantumStep {
  int state_slot;
  TensorPtr z;  // readout of the evolved state, width 3n
};

// Applies U(theta) to the state in slot_in, stores the evolved state in a new
// slot and returns its readout. Backward routes the readout gradient and the
// output slot's state cotangent through adjoint_backward into theta's
// gradient and slot_in's state cotangent.
QuantumStep quantum_step(Tape& tape, const CircuitLayout& layout, const TensorPtr& theta,
                         int slot_in);

}  // namespace qrnn
