#pragma once

#include <string>
#include <utility>
#include <vector>

#include "qrnn/autograd.hpp"

namespace qrnn {

// Named parameter registry with stable iteration order; the optimizer and the
// checkpoint format both key off this order.
class ParamStore {
 public:
  TensorPtr add(const std::string& name, std::vector<int> shape);
  TensorPtr find(const std::string& name) const;  // nullptr when absent
  const std::vector<std::pair<std::string, TensorPtr>>& entries() const { return entries_; }
  std::size_t total_size() const;

 private:
  std::vector<std::pair<std::string, TensorPtr>> entries_;
};

// Uniform in +-sqrt(6/(fan_in+fan_out)), drawn in row-major order.
void xavier_uniform(Tensor& t, int fan_in, int fan_out, std::mt19937_64& rng);

// Two-layer feedforward controller: theta = W2 phi(W1 [feedback; x] + b1) + b2.
// hidden_dim is the post-activation width; GLU doubles the first projection.
// Output angles are raw reals, no wrapping.
struct ControllerParams {
  TensorPtr W1, b1, W2, b2;
  Activation act = Activation::LeakyReLU;
  double leaky_slope = 0.01;
};

ControllerParams make_controller(ParamStore& store, const std::string& prefix, int feedback_dim,
                                 int input_dim, int hidden_dim, int theta_dim, Activation act,
                                 double leaky_slope, std::mt19937_64& rng);

TensorPtr controller_forward(Tape& tape, const ControllerParams& c, const TensorPtr& feedback,
                             const TensorPtr& x);

// Plain affine head (final or per-step classification).
struct HeadParams {
  TensorPtr W, b;
};
HeadParams make_head(ParamStore& store, const std::string& prefix, int in_dim, int out_dim,
                     std::mt19937_64& rng);

// Shared readout transform + vocabulary projection. The transform output y is
// both the classification feature and the next step's feedback vector.
struct LmHeadParams {
  TensorPtr Wt, bt;  // [r, 3n]
  TensorPtr Wv, bv;  // [V, r]
  Activation act = Activation::Tanh;
  double leaky_slope = 0.01;
};
LmHeadParams make_lm_head(ParamStore& store, const std::string& prefix, int readout_dim,
                          int transform_dim, int vocab, Activation act, double leaky_slope,
                          std::mt19937_64& rng);

TensorPtr lm_head_transform(Tape& tape, const LmHeadParams& h, const TensorPtr& z);

struct LmHeadOut {
  TensorPtr y;       // transformed readout, width r
  TensorPtr logits;  // vocabulary scores, width V
};
LmHeadOut lm_step_head(Tape& tape, const LmHeadParams& h, const TensorPtr& z);

// Additive attention over encoder readouts: score_j = v . tanh(Ws [q; m_j] +
// bs) + vb, weights = masked softmax, context = sum_j w_j m_j.
struct AttentionParams {
  TensorPtr Ws, bs;  // [a, q+m], [a]
  TensorPtr v, vb;   // [1, a], [1]
};
AttentionParams make_attention(ParamStore& store, const std::string& prefix, int query_dim,
                               int memory_dim, int attention_dim, std::mt19937_64& rng);

struct AttentionOut {
  TensorPtr context;  // [m]
  TensorPtr weights;  // [L], zeros at masked positions
};
AttentionOut attention_step(Tape& tape, const AttentionParams& a, const TensorPtr& query,
                            const std::vector<TensorPtr>& memory,
                            const std::vector<unsigned char>& keep);

}  // namespace qrnn
