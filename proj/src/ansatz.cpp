#include "qrnn/ansatz.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>

namespace qrnn {

namespace {

void check_layout_args(int n_qubits, int depth) {
  if (n_qubits < 2 || n_qubits > kMaxQubits) {
    throw std::invalid_argument("ansatz needs 2.." + std::to_string(kMaxQubits) +
                                " qubits, got " + std::to_string(n_qubits));
  }
  if (depth < 1) throw std::invalid_argument("circuit depth must be >= 1");
}

void check_theta(const CircuitLayout& layout, std::span<const double> theta) {
  if (int(theta.size()) != layout.param_count()) {
    throw std::invalid_argument("theta has " + std::to_string(theta.size()) +
                                " entries, layout expects " + std::to_string(layout.param_count()));
  }
}

}  // namespace

CircuitLayout build_ansatz14(int n_qubits, int depth) {
  check_layout_args(n_qubits, depth);
  CircuitLayout layout;
  layout.n_qubits = n_qubits;
  layout.ops.reserve(std::size_t(4 * n_qubits) * depth);
  int p = 0;
  for (int rep = 0; rep < depth; ++rep) {
    for (int q = 0; q < n_qubits; ++q) {
      layout.ops.push_back({GateKind::RY, q, -1, p++});
    }
    for (int k = n_qubits - 1; k >= 0; --k) {
      layout.ops.push_back({GateKind::CRX, (k + 1) % n_qubits, k, p++});
    }
    for (int q = 0; q < n_qubits; ++q) {
      layout.ops.push_back({GateKind::RY, q, -1, p++});
    }
    for (int k = 0; k < n_qubits; ++k) {
      layout.ops.push_back({GateKind::CRX, (k - 1 + n_qubits) % n_qubits, k, p++});
    }
  }
  return layout;
}

CircuitLayout build_ry_layer(int n_qubits) {
  if (n_qubits < 1 || n_qubits > kMaxQubits) {
    throw std::invalid_argument("qubit count out of range");
  }
  CircuitLayout layout;
  layout.n_qubits = n_qubits;
  for (int q = 0; q < n_qubits; ++q) {
    layout.ops.push_back({GateKind::RY, q, -1, q});
  }
  return layout;
}

std::string layout_to_text(const CircuitLayout& layout) {
  std::string out;
  char line[64];
  for (const GateOp& op : layout.ops) {
    if (op.kind == GateKind::RY) {
      std::snprintf(line, sizeof line, "RY q=%d p=%d\n", op.target, op.param_index);
    } else {
      std::snprintf(line, sizeof line, "CRX c=%d t=%d p=%d\n", op.control, op.target,
                    op.param_index);
    }
    out += line;
  }
  return out;
}

void apply_unitary(QuantumState& state, const CircuitLayout& layout,
                   std::span<const double> theta) {
  if (state.n_qubits() != layout.n_qubits) {
    throw std::invalid_argument("state and layout disagree on qubit count");
  }
  check_theta(layout, theta);
  for (const GateOp& op : layout.ops) {
    const double t = theta[std::size_t(op.param_index)];
    if (op.kind == GateKind::RY) {
      apply_ry(state, t, op.target);
    } else {
      apply_crx(state, t, op.control, op.target);
    }
  }
}

namespace {

// lambda += sum_k (w_x X_k + w_y Y_k + w_z Z_k) psi, weights from the readout
// cotangent in (X_k, Y_k, Z_k) order.
void accumulate_observable_times_state(const QuantumState& psi, std::span<const double> w,
                                       std::vector<cdouble>& lambda) {
  const cdouble* a = psi.amplitudes().data();
  const int n = psi.n_qubits();
  for (int k = 0; k < n; ++k) {
    const double wx = w[3 * std::size_t(k) + 0];
    const double wy = w[3 * std::size_t(k) + 1];
    const double wz = w[3 * std::size_t(k) + 2];
    if (wx == 0.0 && wy == 0.0 && wz == 0.0) continue;
    const std::uint64_t mask = std::uint64_t(1) << k;
    const std::uint64_t lo_mask = mask - 1, hi_mask = ~lo_mask;
    const std::uint64_t pairs = psi.dim() >> 1;
    for (std::uint64_t i = 0; i < pairs; ++i) {
      const std::uint64_t i0 = ((i & hi_mask) << 1) | (i & lo_mask);
      const std::uint64_t i1 = i0 | mask;
      const double r0 = a[i0].real(), m0 = a[i0].imag();
      const double r1 = a[i1].real(), m1 = a[i1].imag();
      lambda[i0] += cdouble(wx * r1 + wy * m1 + wz * r0, wx * m1 - wy * r1 + wz * m0);
      lambda[i1] += cdouble(wx * r0 - wy * m0 - wz * r1, wx * m0 + wy * r0 - wz * m1);
    }
  }
}

// 2*Re<lambda | dRY(theta)/dtheta psi> over pairs of the target qubit.
double ry_param_grad(const QuantumState& psi, const cdouble* lambda, double theta,
                     int target) {
  const cdouble* a = psi.amplitudes().data();
  const double c2 = 0.5 * std::cos(0.5 * theta), s2 = 0.5 * std::sin(0.5 * theta);
  const std::uint64_t mask = std::uint64_t(1) << target;
  const std::uint64_t lo_mask = mask - 1, hi_mask = ~lo_mask;
  const std::uint64_t pairs = psi.dim() >> 1;
  double acc = 0.0;
  for (std::uint64_t i = 0; i < pairs; ++i) {
    const std::uint64_t i0 = ((i & hi_mask) << 1) | (i & lo_mask);
    const std::uint64_t i1 = i0 | mask;
    const double r0 = a[i0].real(), m0 = a[i0].imag();
    const double r1 = a[i1].real(), m1 = a[i1].imag();
    const double mu0r = -s2 * r0 - c2 * r1, mu0i = -s2 * m0 - c2 * m1;
    const double mu1r = c2 * r0 - s2 * r1, mu1i = c2 * m0 - s2 * m1;
    acc += lambda[i0].real() * mu0r + lambda[i0].imag() * mu0i;
    acc += lambda[i1].real() * mu1r + lambda[i1].imag() * mu1i;
  }
  return 2.0 * acc;
}

// 2*Re<lambda | d(CRX)/dtheta psi>; the derivative is |1><1| (x) dRX/dtheta,
// so only control-1 pairs contribute.
double crx_param_grad(const QuantumState& psi, const cdouble* lambda, double theta,
                      int control, int target) {
  const cdouble* a = psi.amplitudes().data();
  const double c2 = 0.5 * std::cos(0.5 * theta), s2 = 0.5 * std::sin(0.5 * theta);
  const std::uint64_t cmask = std::uint64_t(1) << control;
  const std::uint64_t tmask = std::uint64_t(1) << target;
  const int p = control < target ? control : target;
  const int q = control < target ? target : control;
  const std::uint64_t p_lo = (std::uint64_t(1) << p) - 1;
  const std::uint64_t q_lo = (std::uint64_t(1) << (q - 1)) - 1;
  const std::uint64_t groups = psi.dim() >> 2;
  double acc = 0.0;
  for (std::uint64_t i = 0; i < groups; ++i) {
    std::uint64_t base = ((i & ~q_lo) << 1) | (i & q_lo);
    base = ((base & ~p_lo) << 1) | (base & p_lo);
    const std::uint64_t i0 = base | cmask;
    const std::uint64_t i1 = i0 | tmask;
    const double r0 = a[i0].real(), m0 = a[i0].imag();
    const double r1 = a[i1].real(), m1 = a[i1].imag();
    const double mu0r = -s2 * r0 + c2 * m1, mu0i = -s2 * m0 - c2 * r1;
    const double mu1r = c2 * m0 - s2 * r1, mu1i = -c2 * r0 - s2 * m1;
    acc += lambda[i0].real() * mu0r + lambda[i0].imag() * mu0i;
    acc += lambda[i1].real() * mu1r + lambda[i1].imag() * mu1i;
  }
  return 2.0 * acc;
}

}  // namespace

AdjointResult adjoint_backward(const CircuitLayout& layout, std::span<const double> theta,
                               const QuantumState& state_in,
                               std::span<const double> readout_cotangent,
                               std::span<const cdouble> state_out_cotangent) {
  if (state_in.n_qubits() != layout.n_qubits) {
    throw std::invalid_argument("state and layout disagree on qubit count");
  }
  check_theta(layout, theta);
  const std::size_t dim = state_in.dim();
  const std::size_t m = 3 * std::size_t(layout.n_qubits);
  if (!readout_cotangent.empty() && readout_cotangent.size() != m) {
    throw std::invalid_argument("readout cotangent has wrong width");
  }
  if (!state_out_cotangent.empty() && state_out_cotangent.size() != dim) {
    throw std::invalid_argument("state cotangent has wrong dimension");
  }

  QuantumState psi = state_in;
  apply_unitary(psi, layout, theta);

  // lambda = O psi_out + v/2 where O is the cotangent-weighted Pauli sum and v
  // the output-state cotangent. Per-parameter gradients are 2*Re<lambda|dU psi>
  // and lambda propagates through U^dagger alongside psi.
  std::vector<cdouble> lambda(dim, cdouble(0.0, 0.0));
  if (!readout_cotangent.empty()) {
    accumulate_observable_times_state(psi, readout_cotangent, lambda);
  }
  if (!state_out_cotangent.empty()) {
    for (std::size_t i = 0; i < dim; ++i) lambda[i] += 0.5 * state_out_cotangent[i];
  }

  AdjointResult result;
  result.theta_grad.assign(std::size_t(layout.param_count()), 0.0);
  QuantumState lam(layout.n_qubits, std::move(lambda));

  for (auto it = layout.ops.rbegin(); it != layout.ops.rend(); ++it) {
    const GateOp& op = *it;
    const double t = theta[std::size_t(op.param_index)];
    if (op.kind == GateKind::RY) {
      apply_ry(psi, -t, op.target);
      result.theta_grad[std::size_t(op.param_index)] =
          ry_param_grad(psi, lam.amplitudes().data(), t, op.target);
      apply_ry(lam, -t, op.target);
    } else {
      apply_crx(psi, -t, op.control, op.target);
      result.theta_grad[std::size_t(op.param_index)] =
          crx_param_grad(psi, lam.amplitudes().data(), t, op.control, op.target);
      apply_crx(lam, -t, op.control, op.target);
    }
  }

  result.state_in_cotangent.resize(dim);
  const std::span<const cdouble> lam_final = lam.amplitudes();
  for (std::size_t i = 0; i < dim; ++i) result.state_in_cotangent[i] = 2.0 * lam_final[i];
  return result;
}

}  // namespace qrnn
