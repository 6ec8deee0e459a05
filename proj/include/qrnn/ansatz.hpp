#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qrnn/statevector.hpp"

namespace qrnn {

enum class GateKind : std::uint8_t { RY, CRX };

struct GateOp {
  GateKind kind;
  int target;
  int control;      // -1 for single-qubit gates
  int param_index;  // position in the theta vector
};

struct CircuitLayout {
  int n_qubits = 0;
  std::vector<GateOp> ops;
  int param_count() const { return int(ops.size()); }
};

// Circuit 14 of the hardware-efficient ansatz family: an RY layer, a CRX ring
// (control k -> target (k+1) mod n, applied for k = n-1 down to 0), a second
// RY layer and the reversed ring (control k -> target (k-1+n) mod n, k = 0 up
// to n-1). 4n parametrized gates per repetition, param_index in program order.
CircuitLayout build_ansatz14(int n_qubits, int depth = 1);

// Single RY rotation per qubit; the low-expressibility comparator circuit.
CircuitLayout build_ry_layer(int n_qubits);

// Line-based description ("RY q=0 p=0", "CRX c=3 t=0 p=4"), for documentation
// and golden tests.
std::string layout_to_text(const CircuitLayout& layout);

void apply_unitary(QuantumState& state, const CircuitLayout& layout, std::span<const double> theta);

struct AdjointResult {
  std::vector<double> theta_grad;
  // dL/dRe(a_i) + i*dL/dIm(a_i) over the input amplitudes, viewed as 2*2^n
  // independent reals (no normalization constraint).
  std::vector<cdouble> state_in_cotangent;
};

// Reverse-mode gradient of
//   L = sum_j readout_cotangent[j] * readout_j(U(theta) psi)
//     + Re<state_out_cotangent | U(theta) psi>_{R^2N}
// with respect to theta and psi, in one adjoint sweep with O(2^n) memory.
// state_out_cotangent may be empty (treated as zero); same packing convention
// as state_in_cotangent. Gradients w.r.t. CRX parameters restrict the sweep to
// the control-1 subspace since d(CRX)/dtheta vanishes on the control-0 block.
//
// The two-term parameter-shift identity g = (L(t+pi/2) - L(t-pi/2))/2 holds
// for the RY positions of this loss (generator eigenvalues +-1/2) and is used
// as a test oracle; CRX positions would need the four-term rule because their
// generator adds a zero eigenvalue.
AdjointResult adjoint_backward(const CircuitLayout& layout, std::span<const double> theta,
                               const QuantumState& state_in,
                               std::span<const double> readout_cotangent,
                               std::span<const cdouble> state_out_cotangent = {});

}  // namespace qrnn
