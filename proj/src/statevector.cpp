#include "qrnn/statevector.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace qrnn {

namespace {

void check_qubit_count(int n) {
  if (n < 1 || n > kMaxQubits) {
    throw std::invalid_argument("qubit count must be in [1, " + std::to_string(kMaxQubits) +
                                "], got " + std::to_string(n));
  }
}

void check_target(const QuantumState& s, int target) {
  if (target < 0 || target >= s.n_qubits()) {
    throw std::invalid_argument("qubit index " + std::to_string(target) +
                                " out of range for " + std::to_string(s.n_qubits()) + " qubits");
  }
}

// Index of the pair member with target bit 0, for pair counter i in
// [0, dim/2): insert a zero bit at the target position.
inline std::uint64_t insert_bit(std::uint64_t i, std::uint64_t lo_mask, std::uint64_t hi_mask) {
  return ((i & hi_mask) << 1) | (i & lo_mask);
}

}  // namespace

QuantumState::QuantumState(int n_qubits) : n_qubits_(n_qubits) {
  check_qubit_count(n_qubits);
  amps_.assign(std::size_t(1) << n_qubits, cdouble(0.0, 0.0));
  amps_[0] = 1.0;
}

QuantumState::QuantumState(int n_qubits, std::vector<cdouble> amplitudes)
    : n_qubits_(n_qubits), amps_(std::move(amplitudes)) {
  check_qubit_count(n_qubits);
  if (amps_.size() != (std::size_t(1) << n_qubits)) {
    throw std::invalid_argument("amplitude vector has size " + std::to_string(amps_.size()) +
                                ", expected 2^" + std::to_string(n_qubits));
  }
}

double QuantumState::norm_sqr() const {
  double acc = 0.0;
  for (const cdouble& a : amps_) acc += a.real() * a.real() + a.imag() * a.imag();
  return acc;
}

void QuantumState::reset() {
  std::fill(amps_.begin(), amps_.end(), cdouble(0.0, 0.0));
  amps_[0] = 1.0;
}

QuantumState zero_state(int n_qubits) { return QuantumState(n_qubits); }

Gate2x2 rx_gate(double theta) {
  const double c = std::cos(0.5 * theta), s = std::sin(0.5 * theta);
  return {cdouble(c, 0), cdouble(0, -s), cdouble(0, -s), cdouble(c, 0)};
}

Gate2x2 ry_gate(double theta) {
  const double c = std::cos(0.5 * theta), s = std::sin(0.5 * theta);
  return {cdouble(c, 0), cdouble(-s, 0), cdouble(s, 0), cdouble(c, 0)};
}

Gate2x2 drx_gate(double theta) {
  const double c = 0.5 * std::cos(0.5 * theta), s = 0.5 * std::sin(0.5 * theta);
  return {cdouble(-s, 0), cdouble(0, -c), cdouble(0, -c), cdouble(-s, 0)};
}

Gate2x2 dry_gate(double theta) {
  const double c = 0.5 * std::cos(0.5 * theta), s = 0.5 * std::sin(0.5 * theta);
  return {cdouble(-s, 0), cdouble(-c, 0), cdouble(c, 0), cdouble(-s, 0)};
}

Gate2x2 dagger(const Gate2x2& g) {
  return {std::conj(g.m00), std::conj(g.m10), std::conj(g.m01), std::conj(g.m11)};
}

void apply_single_qubit(QuantumState& state, const Gate2x2& g, int target) {
  check_target(state, target);
  cdouble* a = state.amplitudes().data();
  const std::uint64_t mask = std::uint64_t(1) << target;
  const std::uint64_t lo_mask = mask - 1, hi_mask = ~lo_mask;
  const std::uint64_t pairs = state.dim() >> 1;
  for (std::uint64_t i = 0; i < pairs; ++i) {
    const std::uint64_t i0 = insert_bit(i, lo_mask, hi_mask);
    const std::uint64_t i1 = i0 | mask;
    const cdouble a0 = a[i0], a1 = a[i1];
    a[i0] = g.m00 * a0 + g.m01 * a1;
    a[i1] = g.m10 * a0 + g.m11 * a1;
  }
}

void apply_controlled(QuantumState& state, const Gate2x2& g, int control, int target) {
  check_target(state, control);
  check_target(state, target);
  if (control == target) {
    throw std::invalid_argument("control and target must be distinct qubits");
  }
  cdouble* a = state.amplitudes().data();
  const std::uint64_t cmask = std::uint64_t(1) << control;
  const std::uint64_t tmask = std::uint64_t(1) << target;
  const int p = control < target ? control : target;
  const int q = control < target ? target : control;
  const std::uint64_t p_lo = (std::uint64_t(1) << p) - 1;
  const std::uint64_t q_lo = (std::uint64_t(1) << (q - 1)) - 1;  // after first insertion
  const std::uint64_t groups = state.dim() >> 2;
  for (std::uint64_t i = 0; i < groups; ++i) {
    // Insert zero bits at positions p then q to get the (control=0, target=0)
    // member of the 4-element orbit; select the control=1 pair from it.
    std::uint64_t base = ((i & ~q_lo) << 1) | (i & q_lo);
    base = ((base & ~p_lo) << 1) | (base & p_lo);
    const std::uint64_t i0 = base | cmask;
    const std::uint64_t i1 = i0 | tmask;
    const cdouble a0 = a[i0], a1 = a[i1];
    a[i0] = g.m00 * a0 + g.m01 * a1;
    a[i1] = g.m10 * a0 + g.m11 * a1;
  }
}

void apply_rx(QuantumState& state, double theta, int target) {
  check_target(state, target);
  cdouble* a = state.amplitudes().data();
  const double c = std::cos(0.5 * theta), s = std::sin(0.5 * theta);
  const std::uint64_t mask = std::uint64_t(1) << target;
  const std::uint64_t lo_mask = mask - 1, hi_mask = ~lo_mask;
  const std::uint64_t pairs = state.dim() >> 1;
  for (std::uint64_t i = 0; i < pairs; ++i) {
    const std::uint64_t i0 = insert_bit(i, lo_mask, hi_mask);
    const std::uint64_t i1 = i0 | mask;
    const double r0 = a[i0].real(), m0 = a[i0].imag();
    const double r1 = a[i1].real(), m1 = a[i1].imag();
    a[i0] = cdouble(c * r0 + s * m1, c * m0 - s * r1);
    a[i1] = cdouble(s * m0 + c * r1, -s * r0 + c * m1);
  }
}

void apply_ry(QuantumState& state, double theta, int target) {
  check_target(state, target);
  cdouble* a = state.amplitudes().data();
  const double c = std::cos(0.5 * theta), s = std::sin(0.5 * theta);
  const std::uint64_t mask = std::uint64_t(1) << target;
  const std::uint64_t lo_mask = mask - 1, hi_mask = ~lo_mask;
  const std::uint64_t pairs = state.dim() >> 1;
  for (std::uint64_t i = 0; i < pairs; ++i) {
    const std::uint64_t i0 = insert_bit(i, lo_mask, hi_mask);
    const std::uint64_t i1 = i0 | mask;
    const double r0 = a[i0].real(), m0 = a[i0].imag();
    const double r1 = a[i1].real(), m1 = a[i1].imag();
    a[i0] = cdouble(c * r0 - s * r1, c * m0 - s * m1);
    a[i1] = cdouble(s * r0 + c * r1, s * m0 + c * m1);
  }
}

void apply_crx(QuantumState& state, double theta, int control, int target) {
  check_target(state, control);
  check_target(state, target);
  if (control == target) {
    throw std::invalid_argument("control and target must be distinct qubits");
  }
  cdouble* a = state.amplitudes().data();
  const double c = std::cos(0.5 * theta), s = std::sin(0.5 * theta);
  const std::uint64_t cmask = std::uint64_t(1) << control;
  const std::uint64_t tmask = std::uint64_t(1) << target;
  const int p = control < target ? control : target;
  const int q = control < target ? target : control;
  const std::uint64_t p_lo = (std::uint64_t(1) << p) - 1;
  const std::uint64_t q_lo = (std::uint64_t(1) << (q - 1)) - 1;
  const std::uint64_t groups = state.dim() >> 2;
  for (std::uint64_t i = 0; i < groups; ++i) {
    std::uint64_t base = ((i & ~q_lo) << 1) | (i & q_lo);
    base = ((base & ~p_lo) << 1) | (base & p_lo);
    const std::uint64_t i0 = base | cmask;
    const std::uint64_t i1 = i0 | tmask;
    const double r0 = a[i0].real(), m0 = a[i0].imag();
    const double r1 = a[i1].real(), m1 = a[i1].imag();
    a[i0] = cdouble(c * r0 + s * m1, c * m0 - s * r1);
    a[i1] = cdouble(s * m0 + c * r1, -s * r0 + c * m1);
  }
}

double expectation_z(const QuantumState& state, int qubit) {
  check_target(state, qubit);
  const cdouble* a = state.amplitudes().data();
  const std::uint64_t mask = std::uint64_t(1) << qubit;
  double acc = 0.0;
  for (std::uint64_t i = 0; i < state.dim(); ++i) {
    const double p = a[i].real() * a[i].real() + a[i].imag() * a[i].imag();
    acc += (i & mask) ? -p : p;
  }
  return acc;
}

cdouble inner_product(const QuantumState& a, const QuantumState& b) {
  if (a.n_qubits() != b.n_qubits())
    throw std::invalid_argument("inner_product: qubit count mismatch");
  const cdouble* pa = a.amplitudes().data();
  const cdouble* pb = b.amplitudes().data();
  cdouble acc = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) acc += std::conj(pa[i]) * pb[i];
  return acc;
}

double expectation_x(const QuantumState& state, int qubit) {
  check_target(state, qubit);
  const cdouble* a = state.amplitudes().data();
  const std::uint64_t mask = std::uint64_t(1) << qubit;
  const std::uint64_t lo_mask = mask - 1, hi_mask = ~lo_mask;
  const std::uint64_t pairs = state.dim() >> 1;
  double acc = 0.0;
  for (std::uint64_t i = 0; i < pairs; ++i) {
    const std::uint64_t i0 = insert_bit(i, lo_mask, hi_mask);
    const std::uint64_t i1 = i0 | mask;
    // 2*Re(conj(a0)*a1)
    acc += 2.0 * (a[i0].real() * a[i1].real() + a[i0].imag() * a[i1].imag());
  }
  return acc;
}

double expectation_y(const QuantumState& state, int qubit) {
  check_target(state, qubit);
  const cdouble* a = state.amplitudes().data();
  const std::uint64_t mask = std::uint64_t(1) << qubit;
  const std::uint64_t lo_mask = mask - 1, hi_mask = ~lo_mask;
  const std::uint64_t pairs = state.dim() >> 1;
  double acc = 0.0;
  for (std::uint64_t i = 0; i < pairs; ++i) {
    const std::uint64_t i0 = insert_bit(i, lo_mask, hi_mask);
    const std::uint64_t i1 = i0 | mask;
    // 2*Im(conj(a0)*a1)
    acc += 2.0 * (a[i0].real() * a[i1].imag() - a[i0].imag() * a[i1].real());
  }
  return acc;
}

void readout_into(const QuantumState& state, std::span<double> out) {
  const int n = state.n_qubits();
  if (out.size() != std::size_t(3 * n)) {
    throw std::invalid_argument("readout buffer has size " + std::to_string(out.size()) +
                                ", expected " + std::to_string(3 * n));
  }
  const cdouble* a = state.amplitudes().data();
  for (int k = 0; k < n; ++k) {
    const std::uint64_t mask = std::uint64_t(1) << k;
    const std::uint64_t lo_mask = mask - 1, hi_mask = ~lo_mask;
    const std::uint64_t pairs = state.dim() >> 1;
    double x = 0.0, y = 0.0, z = 0.0;
    for (std::uint64_t i = 0; i < pairs; ++i) {
      const std::uint64_t i0 = insert_bit(i, lo_mask, hi_mask);
      const std::uint64_t i1 = i0 | mask;
      const double r0 = a[i0].real(), m0 = a[i0].imag();
      const double r1 = a[i1].real(), m1 = a[i1].imag();
      x += 2.0 * (r0 * r1 + m0 * m1);
      y += 2.0 * (r0 * m1 - m0 * r1);
      z += r0 * r0 + m0 * m0 - r1 * r1 - m1 * m1;
    }
    out[3 * k + 0] = x;
    out[3 * k + 1] = y;
    out[3 * k + 2] = z;
  }
}

std::vector<double> readout(const QuantumState& state) {
  std::vector<double> out(3 * std::size_t(state.n_qubits()));
  readout_into(state, out);
  return out;
}

}  // namespace qrnn
