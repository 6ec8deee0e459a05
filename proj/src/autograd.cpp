#include "qrnn/autograd.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "qrnn/rng.hpp"

namespace qrnn {

namespace {

std::atomic<std::uint64_t> next_tensor_id{1};

std::size_t shape_product(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor dimensions must be positive");
    n *= std::size_t(d);
  }
  return n;
}

bool wants_grad(const Tensor& t) { return t.requires_grad || t.from_op; }

void check_vector(const Tensor& t, const char* what) {
  if (t.shape.size() != 1) {
    throw std::invalid_argument(std::string(what) + " must be a 1-d tensor");
  }
}

TensorPtr make_output(std::vector<int> shape) {
  TensorPtr t = Tensor::make(std::move(shape));
  t->from_op = true;
  return t;
}

}  // namespace

TensorPtr Tensor::make(std::vector<int> shape, bool requires_grad) {
  auto t = std::make_shared<Tensor>();
  t->values.assign(shape_product(shape), 0.0);
  t->shape = std::move(shape);
  t->requires_grad = requires_grad;
  t->id = next_tensor_id.fetch_add(1, std::memory_order_relaxed);
  return t;
}

TensorPtr constant(std::vector<double> values) {
  auto t = Tensor::make({int(values.size())});
  t->values = std::move(values);
  return t;
}

TensorPtr scalar_constant(double value) { return constant({value}); }

Activation activation_from_name(std::string_view name) {
  if (name == "relu") return Activation::ReLU;
  if (name == "leaky_relu") return Activation::LeakyReLU;
  if (name == "gelu") return Activation::GELU;
  if (name == "glu") return Activation::GLU;
  if (name == "tanh") return Activation::Tanh;
  if (name == "identity") return Activation::Identity;
  throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

std::string_view activation_name(Activation a) {
  switch (a) {
    case Activation::ReLU: return "relu";
    case Activation::LeakyReLU: return "leaky_relu";
    case Activation::GELU: return "gelu";
    case Activation::GLU: return "glu";
    case Activation::Tanh: return "tanh";
    case Activation::Identity: return "identity";
  }
  return "?";
}

std::vector<double>& Tape::grad(const Tensor& t) {
  auto [it, inserted] = grads_.try_emplace(t.id);
  if (inserted) it->second.assign(t.size(), 0.0);
  return it->second;
}

const std::vector<double>* Tape::find_grad(const Tensor& t) const {
  auto it = grads_.find(t.id);
  return it == grads_.end() ? nullptr : &it->second;
}

void Tape::backward(const TensorPtr& loss) {
  if (used_) throw std::runtime_error("tape already backpropagated; record a new forward pass");
  if (!loss || loss->size() != 1) {
    throw std::invalid_argument("backward needs a scalar loss tensor");
  }
  used_ = true;
  grad(*loss).assign(1, 1.0);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

int Tape::add_state(QuantumState s) {
  states_.push_back(std::move(s));
  state_cots_.emplace_back();
  return int(states_.size()) - 1;
}

int Tape::add_detached_state(const QuantumState& s) { return add_state(s); }

const QuantumState& Tape::state(int slot) const { return states_.at(std::size_t(slot)); }

QuantumState& Tape::mutable_state(int slot) { return states_.at(std::size_t(slot)); }

std::vector<cdouble>& Tape::state_cotangent(int slot) {
  auto& cot = state_cots_.at(std::size_t(slot));
  if (cot.empty()) cot.assign(states_[std::size_t(slot)].dim(), cdouble(0, 0));
  return cot;
}

const std::vector<cdouble>* Tape::find_state_cotangent(int slot) const {
  const auto& cot = state_cots_.at(std::size_t(slot));
  return cot.empty() ? nullptr : &cot;
}

TensorPtr affine(Tape& tape, const TensorPtr& W, const TensorPtr& b, const TensorPtr& x) {
  if (W->shape.size() != 2) throw std::invalid_argument("affine weight must be 2-d");
  check_vector(*b, "affine bias");
  check_vector(*x, "affine input");
  const int m = W->shape[0], k = W->shape[1];
  if (x->shape[0] != k || b->shape[0] != m) {
    throw std::invalid_argument("affine shape mismatch: W is [" + std::to_string(m) + "," +
                                std::to_string(k) + "], x has " + std::to_string(x->shape[0]) +
                                ", b has " + std::to_string(b->shape[0]));
  }
  TensorPtr y = make_output({m});
  const double* wv = W->values.data();
  const double* xv = x->values.data();
  for (int i = 0; i < m; ++i) {
    double acc = b->values[std::size_t(i)];
    const double* row = wv + std::size_t(i) * k;
    for (int j = 0; j < k; ++j) acc += row[j] * xv[j];
    y->values[std::size_t(i)] = acc;
  }
  tape.record([&tape, W, b, x, y, m, k] {
    const std::vector<double>* g = tape.find_grad(*y);
    if (!g) return;
    const double* gv = g->data();
    if (wants_grad(*W)) {
      double* gw = tape.grad(*W).data();
      const double* xv = x->values.data();
      for (int i = 0; i < m; ++i) {
        const double gi = gv[i];
        if (gi == 0.0) continue;
        double* row = gw + std::size_t(i) * k;
        for (int j = 0; j < k; ++j) row[j] += gi * xv[j];
      }
    }
    if (wants_grad(*b)) {
      double* gb = tape.grad(*b).data();
      for (int i = 0; i < m; ++i) gb[i] += gv[i];
    }
    if (wants_grad(*x)) {
      double* gx = tape.grad(*x).data();
      const double* wv = W->values.data();
      for (int i = 0; i < m; ++i) {
        const double gi = gv[i];
        if (gi == 0.0) continue;
        const double* row = wv + std::size_t(i) * k;
        for (int j = 0; j < k; ++j) gx[j] += gi * row[j];
      }
    }
  });
  return y;
}

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace

TensorPtr activation(Tape& tape, const TensorPtr& x, Activation kind, double leaky_slope) {
  check_vector(*x, "activation input");
  if (kind == Activation::Identity) return x;

  const int n = x->shape[0];
  if (kind == Activation::GLU) {
    if (n % 2 != 0) throw std::invalid_argument("GLU needs an even input width");
    const int m = n / 2;
    TensorPtr y = make_output({m});
    for (int i = 0; i < m; ++i) {
      y->values[std::size_t(i)] =
          x->values[std::size_t(i)] * sigmoid(x->values[std::size_t(m + i)]);
    }
    tape.record([&tape, x, y, m] {
      const std::vector<double>* g = tape.find_grad(*y);
      if (!g || !wants_grad(*x)) return;
      double* gx = tape.grad(*x).data();
      for (int i = 0; i < m; ++i) {
        const double a = x->values[std::size_t(i)];
        const double s = sigmoid(x->values[std::size_t(m + i)]);
        gx[i] += (*g)[std::size_t(i)] * s;
        gx[m + i] += (*g)[std::size_t(i)] * a * s * (1.0 - s);
      }
    });
    return y;
  }

  TensorPtr y = make_output({n});
  for (int i = 0; i < n; ++i) {
    const double v = x->values[std::size_t(i)];
    double out = v;
    switch (kind) {
      case Activation::ReLU: out = v > 0 ? v : 0.0; break;
      case Activation::LeakyReLU: out = v > 0 ? v : leaky_slope * v; break;
      case Activation::GELU: out = 0.5 * v * (1.0 + std::erf(v * kInvSqrt2)); break;
      case Activation::Tanh: out = std::tanh(v); break;
      default: break;
    }
    y->values[std::size_t(i)] = out;
  }
  tape.record([&tape, x, y, kind, leaky_slope, n] {
    const std::vector<double>* g = tape.find_grad(*y);
    if (!g || !wants_grad(*x)) return;
    double* gx = tape.grad(*x).data();
    for (int i = 0; i < n; ++i) {
      const double v = x->values[std::size_t(i)];
      double d = 1.0;
      switch (kind) {
        case Activation::ReLU: d = v > 0 ? 1.0 : 0.0; break;
        case Activation::LeakyReLU: d = v > 0 ? 1.0 : leaky_slope; break;
        case Activation::GELU:
          d = 0.5 * (1.0 + std::erf(v * kInvSqrt2)) +
              v * kInvSqrt2Pi * std::exp(-0.5 * v * v);
          break;
        case Activation::Tanh: {
          const double t = y->values[std::size_t(i)];
          d = 1.0 - t * t;
          break;
        }
        default: break;
      }
      gx[i] += (*g)[std::size_t(i)] * d;
    }
  });
  return y;
}

TensorPtr concat(Tape& tape, const TensorPtr& a, const TensorPtr& b) {
  check_vector(*a, "concat input");
  check_vector(*b, "concat input");
  const int p = a->shape[0], q = b->shape[0];
  TensorPtr y = make_output({p + q});
  std::copy(a->values.begin(), a->values.end(), y->values.begin());
  std::copy(b->values.begin(), b->values.end(), y->values.begin() + p);
  tape.record([&tape, a, b, y, p, q] {
    const std::vector<double>* g = tape.find_grad(*y);
    if (!g) return;
    if (wants_grad(*a)) {
      double* ga = tape.grad(*a).data();
      for (int i = 0; i < p; ++i) ga[i] += (*g)[std::size_t(i)];
    }
    if (wants_grad(*b)) {
      double* gb = tape.grad(*b).data();
      for (int i = 0; i < q; ++i) gb[i] += (*g)[std::size_t(p + i)];
    }
  });
  return y;
}

TensorPtr add(Tape& tape, const TensorPtr& a, const TensorPtr& b) {
  if (a->shape != b->shape) throw std::invalid_argument("add shape mismatch");
  TensorPtr y = make_output(a->shape);
  for (std::size_t i = 0; i < y->size(); ++i) y->values[i] = a->values[i] + b->values[i];
  tape.record([&tape, a, b, y] {
    const std::vector<double>* g = tape.find_grad(*y);
    if (!g) return;
    for (const TensorPtr& t : {a, b}) {
      if (!wants_grad(*t)) continue;
      double* gt = tape.grad(*t).data();
      for (std::size_t i = 0; i < g->size(); ++i) gt[i] += (*g)[i];
    }
  });
  return y;
}

TensorPtr scale(Tape& tape, const TensorPtr& x, double factor) {
  TensorPtr y = make_output(x->shape);
  for (std::size_t i = 0; i < y->size(); ++i) y->values[i] = factor * x->values[i];
  tape.record([&tape, x, y, factor] {
    const std::vector<double>* g = tape.find_grad(*y);
    if (!g || !wants_grad(*x)) return;
    double* gx = tape.grad(*x).data();
    for (std::size_t i = 0; i < g->size(); ++i) gx[i] += factor * (*g)[i];
  });
  return y;
}

TensorPtr mean_of(Tape& tape, const std::vector<TensorPtr>& scalars) {
  if (scalars.empty()) throw std::invalid_argument("mean_of needs at least one term");
  TensorPtr y = make_output({1});
  double acc = 0;
  for (const TensorPtr& s : scalars) {
    if (s->size() != 1) throw std::invalid_argument("mean_of terms must be scalars");
    acc += s->values[0];
  }
  const double inv = 1.0 / double(scalars.size());
  y->values[0] = acc * inv;
  tape.record([&tape, scalars, y, inv] {
    const std::vector<double>* g = tape.find_grad(*y);
    if (!g) return;
    const double gv = (*g)[0] * inv;
    for (const TensorPtr& s : scalars) {
      if (wants_grad(*s)) tape.grad(*s)[0] += gv;
    }
  });
  return y;
}

TensorPtr stack_scalars(Tape& tape, const std::vector<TensorPtr>& scalars) {
  if (scalars.empty()) throw std::invalid_argument("stack_scalars needs at least one term");
  TensorPtr y = make_output({int(scalars.size())});
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    if (scalars[i]->size() != 1) throw std::invalid_argument("stack_scalars terms must be scalars");
    y->values[i] = scalars[i]->values[0];
  }
  tape.record([&tape, scalars, y] {
    const std::vector<double>* g = tape.find_grad(*y);
    if (!g) return;
    for (std::size_t i = 0; i < scalars.size(); ++i) {
      if (wants_grad(*scalars[i])) tape.grad(*scalars[i])[0] += (*g)[i];
    }
  });
  return y;
}

TensorPtr softmax_cross_entropy(Tape& tape, const TensorPtr& logits, int target) {
  check_vector(*logits, "logits");
  const int c = logits->shape[0];
  if (target < 0 || target >= c) {
    throw std::invalid_argument("target class " + std::to_string(target) + " out of range [0," +
                                std::to_string(c) + ")");
  }
  double mx = logits->values[0];
  for (int i = 1; i < c; ++i) mx = std::max(mx, logits->values[std::size_t(i)]);
  double sum = 0;
  std::vector<double> p(static_cast<std::size_t>(c), 0.0);
  for (int i = 0; i < c; ++i) {
    p[std::size_t(i)] = std::exp(logits->values[std::size_t(i)] - mx);
    sum += p[std::size_t(i)];
  }
  for (double& v : p) v /= sum;
  TensorPtr y = make_output({1});
  y->values[0] = std::log(sum) - (logits->values[std::size_t(target)] - mx);
  tape.record([&tape, logits, y, p = std::move(p), target] {
    const std::vector<double>* g = tape.find_grad(*y);
    if (!g || !wants_grad(*logits)) return;
    const double gv = (*g)[0];
    double* gl = tape.grad(*logits).data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      gl[i] += gv * (p[i] - (int(i) == target ? 1.0 : 0.0));
    }
  });
  return y;
}

TensorPtr masked_softmax(Tape& tape, const TensorPtr& scores,
                         const std::vector<unsigned char>& keep) {
  check_vector(*scores, "softmax scores");
  const int n = scores->shape[0];
  if (keep.size() != std::size_t(n)) throw std::invalid_argument("mask width mismatch");
  double mx = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    if (keep[std::size_t(i)]) mx = std::max(mx, scores->values[std::size_t(i)]);
  }
  if (!std::isfinite(mx)) throw std::invalid_argument("masked_softmax: all positions masked");
  TensorPtr y = make_output({n});
  double sum = 0;
  for (int i = 0; i < n; ++i) {
    if (keep[std::size_t(i)]) {
      y->values[std::size_t(i)] = std::exp(scores->values[std::size_t(i)] - mx);
      sum += y->values[std::size_t(i)];
    }
  }
  for (int i = 0; i < n; ++i) y->values[std::size_t(i)] /= sum;
  tape.record([&tape, scores, y, keep, n] {
    const std::vector<double>* g = tape.find_grad(*y);
    if (!g || !wants_grad(*scores)) return;
    double dot = 0;
    for (int i = 0; i < n; ++i) {
      if (keep[std::size_t(i)]) dot += (*g)[std::size_t(i)] * y->values[std::size_t(i)];
    }
    double* gs = tape.grad(*scores).data();
    for (int i = 0; i < n; ++i) {
      if (keep[std::size_t(i)]) {
        gs[i] += y->values[std::size_t(i)] * ((*g)[std::size_t(i)] - dot);
      }
    }
  });
  return y;
}

TensorPtr weighted_sum(Tape& tape, const TensorPtr& weights,
                       const std::vector<TensorPtr>& items) {
  check_vector(*weights, "weights");
  if (items.empty() || weights->shape[0] != int(items.size())) {
    throw std::invalid_argument("weighted_sum needs one weight per item");
  }
  const int m = items[0]->shape[0];
  for (const TensorPtr& it : items) {
    check_vector(*it, "weighted_sum item");
    if (it->shape[0] != m) throw std::invalid_argument("weighted_sum items differ in width");
  }
  TensorPtr y = make_output({m});
  for (std::size_t j = 0; j < items.size(); ++j) {
    const double w = weights->values[j];
    for (int d = 0; d < m; ++d) y->values[std::size_t(d)] += w * items[j]->values[std::size_t(d)];
  }
  tape.record([&tape, weights, items, y, m] {
    const std::vector<double>* g = tape.find_grad(*y);
    if (!g) return;
    const bool into_w = wants_grad(*weights);
    double* gw = into_w ? tape.grad(*weights).data() : nullptr;
    for (std::size_t j = 0; j < items.size(); ++j) {
      if (into_w) {
        double dot = 0;
        for (int d = 0; d < m; ++d) dot += (*g)[std::size_t(d)] * items[j]->values[std::size_t(d)];
        gw[j] += dot;
      }
      if (wants_grad(*items[j])) {
        double* gi = tape.grad(*items[j]).data();
        const double w = weights->values[j];
        for (int d = 0; d < m; ++d) gi[d] += w * (*g)[std::size_t(d)];
      }
    }
  });
  return y;
}

TensorPtr embedding_row(Tape& tape, const TensorPtr& table, int row, int pad_row) {
  if (table->shape.size() != 2) throw std::invalid_argument("embedding table must be 2-d");
  const int v = table->shape[0], e = table->shape[1];
  if (row < 0 || row >= v) {
    throw std::invalid_argument("embedding row " + std::to_string(row) + " out of range [0," +
                                std::to_string(v) + ")");
  }
  TensorPtr y = make_output({e});
  const double* src = table->values.data() + std::size_t(row) * e;
  std::copy(src, src + e, y->values.begin());
  if (row == pad_row) return y;  // padding row stays frozen
  tape.record([&tape, table, y, row, e] {
    const std::vector<double>* g = tape.find_grad(*y);
    if (!g || !wants_grad(*table)) return;
    double* gt = tape.grad(*table).data() + std::size_t(row) * e;
    for (int d = 0; d < e; ++d) gt[d] += (*g)[std::size_t(d)];
  });
  return y;
}

TensorPtr dropout(Tape& tape, const TensorPtr& x, double rate, std::mt19937_64& rng,
                  bool training) {
  if (rate < 0.0 || rate >= 1.0) {
    throw std::invalid_argument("dropout rate must be in [0, 1)");
  }
  if (!training || rate == 0.0) return x;
  check_vector(*x, "dropout input");
  const int n = x->shape[0];
  const double inv_keep = 1.0 / (1.0 - rate);
  std::vector<double> mask(static_cast<std::size_t>(n), 0.0);
  for (double& m : mask) m = uniform_double(rng) < rate ? 0.0 : inv_keep;
  TensorPtr y = make_output({n});
  for (int i = 0; i < n; ++i) y->values[std::size_t(i)] = x->values[std::size_t(i)] * mask[std::size_t(i)];
  tape.record([&tape, x, y, mask = std::move(mask)] {
    const std::vector<double>* g = tape.find_grad(*y);
    if (!g || !wants_grad(*x)) return;
    double* gx = tape.grad(*x).data();
    for (std::size_t i = 0; i < mask.size(); ++i) gx[i] += (*g)[i] * mask[i];
  });
  return y;
}

TensorPtr detach(const TensorPtr& x) { return constant(x->values); }

QuantumStep quantum_step(Tape& tape, const CircuitLayout& layout, const TensorPtr& theta,
                         int slot_in) {
  check_vector(*theta, "theta");
  if (theta->shape[0] != layout.param_count()) {
    throw std::invalid_argument("theta width " + std::to_string(theta->shape[0]) +
                                " does not match the circuit's " +
                                std::to_string(layout.param_count()) + " parameters");
  }
  QuantumState s = tape.state(slot_in);
  apply_unitary(s, layout, theta->values);
  const int slot_out = tape.add_state(std::move(s));
  TensorPtr z = make_output({3 * layout.n_qubits});
  readout_into(tape.state(slot_out), z->values);

  const CircuitLayout* lay = &layout;
  tape.record([&tape, lay, theta, z, slot_in, slot_out] {
    const std::vector<double>* w = tape.find_grad(*z);
    const std::vector<cdouble>* v = tape.find_state_cotangent(slot_out);
    if (!w && !v) return;
    const AdjointResult adj = adjoint_backward(
        *lay, theta->values, tape.state(slot_in),
        w ? std::span<const double>(*w) : std::span<const double>{},
        v ? std::span<const cdouble>(*v) : std::span<const cdouble>{});
    if (wants_grad(*theta)) {
      double* gt = tape.grad(*theta).data();
      for (std::size_t i = 0; i < adj.theta_grad.size(); ++i) gt[i] += adj.theta_grad[i];
    }
    std::vector<cdouble>& cot = tape.state_cotangent(slot_in);
    for (std::size_t i = 0; i < cot.size(); ++i) cot[i] += adj.state_in_cotangent[i];
  });
  return {slot_out, z};
}

}  // namespace qrnn
