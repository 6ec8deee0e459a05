#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace qrnn {

using cdouble = std::complex<double>;

// Hard cap on simulated register width. 2^20 amplitudes = 16 MiB per state;
// anything beyond that is out of scope for a desk-scale simulator and almost
// certainly a mis-parsed config.
inline constexpr int kMaxQubits = 20;

// Dense statevector over n qubits, little endian: bit k of the amplitude
// index is qubit k, so index 1 is |q0=1, all others 0>.
class QuantumState {
 public:
  explicit QuantumState(int n_qubits);  // |0...0>
  QuantumState(int n_qubits, std::vector<cdouble> amplitudes);

  int n_qubits() const { return n_qubits_; }
  std::size_t dim() const { return amps_.size(); }
  std::span<const cdouble> amplitudes() const { return {amps_.data(), amps_.size()}; }
  std::span<cdouble> amplitudes() { return {amps_.data(), amps_.size()}; }
  const cdouble& operator[](std::size_t i) const { return amps_[i]; }
  cdouble& operator[](std::size_t i) { return amps_[i]; }

  double norm_sqr() const;
  void reset();  // back to |0...0>

 private:
  int n_qubits_;
  std::vector<cdouble> amps_;
};

QuantumState zero_state(int n_qubits);

// 2x2 complex gate, row major.
struct Gate2x2 {
  cdouble m00, m01, m10, m11;
};

Gate2x2 rx_gate(double theta);
Gate2x2 ry_gate(double theta);
// Elementwise d/dtheta of the rotation matrices.
Gate2x2 drx_gate(double theta);
Gate2x2 dry_gate(double theta);
Gate2x2 dagger(const Gate2x2& g);

void apply_single_qubit(QuantumState& state, const Gate2x2& g, int target);
// Controlled-g: identity on the control-|0> subspace, g on the target wire
// where the control bit is 1.
void apply_controlled(QuantumState& state, const Gate2x2& g, int control, int target);

// Specialized rotation kernels. Same math as apply_single_qubit /
// apply_controlled with rx_gate/ry_gate, hand-unrolled because they dominate
// the training profile; equality with the generic path is pinned by tests.
void apply_rx(QuantumState& state, double theta, int target);
void apply_ry(QuantumState& state, double theta, int target);
void apply_crx(QuantumState& state, double theta, int control, int target);

// <a|b>, conjugating a's amplitudes. Dimensions must match.
cdouble inner_product(const QuantumState& a, const QuantumState& b);

double expectation_x(const QuantumState& state, int qubit);
double expectation_y(const QuantumState& state, int qubit);
double expectation_z(const QuantumState& state, int qubit);

// Non-destructive Pauli readout, (X_0, Y_0, Z_0, ..., X_{n-1}, Y_{n-1},
// Z_{n-1}), length 3n. The expectations are raw quadratic forms <psi|P|psi>;
// no renormalization is applied.
std::vector<double> readout(const QuantumState& state);
void readout_into(const QuantumState& state, std::span<double> out);

}  // namespace qrnn
