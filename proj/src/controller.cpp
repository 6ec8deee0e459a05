#include "qrnn/controller.hpp"

#include <cmath>
#include <stdexcept>

#include "qrnn/rng.hpp"

namespace qrnn {

TensorPtr ParamStore::add(const std::string& name, std::vector<int> shape) {
  if (find(name)) {
    throw std::invalid_argument("duplicate parameter name: " + name);
  }
  TensorPtr t = Tensor::make(std::move(shape), true);
  entries_.emplace_back(name, t);
  return t;
}

TensorPtr ParamStore::find(const std::string& name) const {
  for (const auto& [n, t] : entries_) {
    if (n == name) return t;
  }
  return nullptr;
}

std::size_t ParamStore::total_size() const {
  std::size_t total = 0;
  for (const auto& [n, t] : entries_) total += t->size();
  return total;
}

void xavier_uniform(Tensor& t, int fan_in, int fan_out, std::mt19937_64& rng) {
  if (fan_in <= 0 || fan_out <= 0) {
    throw std::invalid_argument("xavier_uniform: fans must be positive");
  }
  const double limit = std::sqrt(6.0 / (double(fan_in) + double(fan_out)));
  for (double& v : t.values) v = uniform_range(rng, -limit, limit);
}

ControllerParams make_controller(ParamStore& store, const std::string& prefix, int feedback_dim,
                                 int input_dim, int hidden_dim, int theta_dim, Activation act,
                                 double leaky_slope, std::mt19937_64& rng) {
  if (feedback_dim < 0 || input_dim < 0 || feedback_dim + input_dim <= 0) {
    throw std::invalid_argument("make_controller: bad input widths");
  }
  if (hidden_dim <= 0 || theta_dim <= 0) {
    throw std::invalid_argument("make_controller: bad layer widths");
  }
  const int in_dim = feedback_dim + input_dim;
  const int rows1 = (act == Activation::GLU) ? 2 * hidden_dim : hidden_dim;
  ControllerParams c;
  c.W1 = store.add(prefix + ".W1", {rows1, in_dim});
  c.b1 = store.add(prefix + ".b1", {rows1});
  c.W2 = store.add(prefix + ".W2", {theta_dim, hidden_dim});
  c.b2 = store.add(prefix + ".b2", {theta_dim});
  c.act = act;
  c.leaky_slope = leaky_slope;
  xavier_uniform(*c.W1, in_dim, hidden_dim, rng);
  xavier_uniform(*c.W2, hidden_dim, theta_dim, rng);
  return c;
}

TensorPtr controller_forward(Tape& tape, const ControllerParams& c, const TensorPtr& feedback,
                             const TensorPtr& x) {
  TensorPtr u;
  if (feedback && x) {
    u = concat(tape, feedback, x);
  } else if (feedback) {
    u = feedback;
  } else if (x) {
    u = x;
  } else {
    throw std::invalid_argument("controller_forward: no input");
  }
  TensorPtr h = affine(tape, c.W1, c.b1, u);
  TensorPtr a = activation(tape, h, c.act, c.leaky_slope);
  return affine(tape, c.W2, c.b2, a);
}

HeadParams make_head(ParamStore& store, const std::string& prefix, int in_dim, int out_dim,
                     std::mt19937_64& rng) {
  HeadParams h;
  h.W = store.add(prefix + ".W", {out_dim, in_dim});
  h.b = store.add(prefix + ".b", {out_dim});
  xavier_uniform(*h.W, in_dim, out_dim, rng);
  return h;
}

LmHeadParams make_lm_head(ParamStore& store, const std::string& prefix, int readout_dim,
                          int transform_dim, int vocab, Activation act, double leaky_slope,
                          std::mt19937_64& rng) {
  const int rows_t = (act == Activation::GLU) ? 2 * transform_dim : transform_dim;
  LmHeadParams h;
  h.Wt = store.add(prefix + ".Wt", {rows_t, readout_dim});
  h.bt = store.add(prefix + ".bt", {rows_t});
  h.Wv = store.add(prefix + ".Wv", {vocab, transform_dim});
  h.bv = store.add(prefix + ".bv", {vocab});
  h.act = act;
  h.leaky_slope = leaky_slope;
  xavier_uniform(*h.Wt, readout_dim, transform_dim, rng);
  xavier_uniform(*h.Wv, transform_dim, vocab, rng);
  return h;
}

TensorPtr lm_head_transform(Tape& tape, const LmHeadParams& h, const TensorPtr& z) {
  TensorPtr t = affine(tape, h.Wt, h.bt, z);
  return activation(tape, t, h.act, h.leaky_slope);
}

LmHeadOut lm_step_head(Tape& tape, const LmHeadParams& h, const TensorPtr& z) {
  LmHeadOut out;
  out.y = lm_head_transform(tape, h, z);
  out.logits = affine(tape, h.Wv, h.bv, out.y);
  return out;
}

AttentionParams make_attention(ParamStore& store, const std::string& prefix, int query_dim,
                               int memory_dim, int attention_dim, std::mt19937_64& rng) {
  const int in_dim = query_dim + memory_dim;
  AttentionParams a;
  a.Ws = store.add(prefix + ".Ws", {attention_dim, in_dim});
  a.bs = store.add(prefix + ".bs", {attention_dim});
  a.v = store.add(prefix + ".v", {1, attention_dim});
  a.vb = store.add(prefix + ".vb", {1});
  xavier_uniform(*a.Ws, in_dim, attention_dim, rng);
  xavier_uniform(*a.v, attention_dim, 1, rng);
  return a;
}

AttentionOut attention_step(Tape& tape, const AttentionParams& a, const TensorPtr& query,
                            const std::vector<TensorPtr>& memory,
                            const std::vector<unsigned char>& keep) {
  if (memory.empty()) {
    throw std::invalid_argument("attention_step: empty memory");
  }
  if (keep.size() != memory.size()) {
    throw std::invalid_argument("attention_step: keep mask length mismatch");
  }
  std::vector<TensorPtr> scores;
  scores.reserve(memory.size());
  for (const TensorPtr& m : memory) {
    TensorPtr qm = concat(tape, query, m);
    TensorPtr hidden = activation(tape, affine(tape, a.Ws, a.bs, qm), Activation::Tanh, 0.0);
    scores.push_back(affine(tape, a.v, a.vb, hidden));
  }
  TensorPtr score_vec = stack_scalars(tape, scores);
  AttentionOut out;
  out.weights = masked_softmax(tape, score_vec, keep);
  out.context = weighted_sum(tape, out.weights, memory);
  return out;
}

}  // namespace qrnn
