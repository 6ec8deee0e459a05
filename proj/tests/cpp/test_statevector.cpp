#include "qrnn/statevector.hpp"

#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "qrnn/rng.hpp"

using namespace qrnn;

namespace {

Gate2x2 random_gate(std::mt19937_64& rng) {
  auto c = [&] { return cdouble(uniform_range(rng, -1, 1), uniform_range(rng, -1, 1)); };
  return {c(), c(), c(), c()};
}

}  // namespace

TEST_CASE("zero state starts in |0...0> with unit norm") {
  QuantumState s(3);
  CHECK(s.dim() == 8);
  CHECK(s[0] == cdouble(1.0, 0.0));
  for (std::size_t i = 1; i < s.dim(); ++i) CHECK(s[i] == cdouble(0.0, 0.0));
  CHECK(s.norm_sqr() == doctest::Approx(1.0).epsilon(1e-15));

  s[0] = 0.0;
  s[5] = 1.0;
  s.reset();
  CHECK(s[0] == cdouble(1.0, 0.0));
  CHECK(s[5] == cdouble(0.0, 0.0));
}

TEST_CASE("qubit count guard rejects 0 and > 20") {
  CHECK_THROWS_AS(QuantumState(0), std::invalid_argument);
  CHECK_THROWS_AS(QuantumState(21), std::invalid_argument);
  CHECK_THROWS_AS(QuantumState(-3), std::invalid_argument);
  CHECK_NOTHROW(QuantumState(1));
  // Constructor taking amplitudes validates the length.
  CHECK_THROWS_AS(QuantumState(2, std::vector<cdouble>(3)), std::invalid_argument);
}

TEST_CASE("rotation gate matrices match their defining entries") {
  const double th = 0.7311;
  const Gate2x2 rx = rx_gate(th);
  CHECK(rx.m00 == cdouble(std::cos(th / 2), 0));
  CHECK(rx.m01 == cdouble(0, -std::sin(th / 2)));
  CHECK(rx.m10 == cdouble(0, -std::sin(th / 2)));
  CHECK(rx.m11 == cdouble(std::cos(th / 2), 0));
  const Gate2x2 ry = ry_gate(th);
  CHECK(ry.m00 == cdouble(std::cos(th / 2), 0));
  CHECK(ry.m01 == cdouble(-std::sin(th / 2), 0));
  CHECK(ry.m10 == cdouble(std::sin(th / 2), 0));
  CHECK(ry.m11 == cdouble(std::cos(th / 2), 0));
}

TEST_CASE("gate derivative matrices match finite differences entrywise") {
  const double th = -1.234, h = 1e-6;
  auto check_fd = [&](const Gate2x2& d, const Gate2x2& plus, const Gate2x2& minus) {
    const cdouble* dm[4] = {&d.m00, &d.m01, &d.m10, &d.m11};
    const cdouble* pm[4] = {&plus.m00, &plus.m01, &plus.m10, &plus.m11};
    const cdouble* mm[4] = {&minus.m00, &minus.m01, &minus.m10, &minus.m11};
    for (int i = 0; i < 4; ++i) {
      const cdouble fd = (*pm[i] - *mm[i]) / (2 * h);
      CHECK(std::abs(fd - *dm[i]) < 1e-9);
    }
  };
  check_fd(drx_gate(th), rx_gate(th + h), rx_gate(th - h));
  check_fd(dry_gate(th), ry_gate(th + h), ry_gate(th - h));
}

TEST_CASE("RY(pi) flips |0> to |1>, RX(pi) gives -i|1>") {
  QuantumState s(1);
  apply_ry(s, M_PI, 0);
  CHECK(std::abs(s[1] - cdouble(1, 0)) < 1e-12);
  CHECK(std::abs(s[0]) < 1e-12);

  s.reset();
  apply_rx(s, M_PI, 0);
  CHECK(std::abs(s[1] - cdouble(0, -1)) < 1e-12);
  CHECK(std::abs(s[0]) < 1e-12);
}

TEST_CASE("RY(theta)|0> = cos(theta/2)|0> + sin(theta/2)|1>") {
  const double th = 0.37;
  QuantumState s(1);
  apply_ry(s, th, 0);
  CHECK(std::abs(s[0] - cdouble(std::cos(th / 2), 0)) < 1e-15);
  CHECK(std::abs(s[1] - cdouble(std::sin(th / 2), 0)) < 1e-15);
}

TEST_CASE("single-qubit kernel agrees with the dense matrix oracle") {
  std::mt19937_64 rng = make_rng(11);
  for (int n = 1; n <= 5; ++n) {
    for (int target = 0; target < n; ++target) {
      const auto amps = oracle::random_amplitudes(n, rng);
      const Gate2x2 g = random_gate(rng);
      QuantumState s(n, amps);
      apply_single_qubit(s, g, target);
      const auto expect = oracle::matvec(oracle::single_qubit_matrix(n, g, target), amps);
      CHECK(oracle::max_abs_diff(s.amplitudes(), expect) < 1e-13);
    }
  }
}

TEST_CASE("controlled kernel agrees with the dense matrix oracle") {
  std::mt19937_64 rng = make_rng(12);
  for (int n = 2; n <= 5; ++n) {
    for (int control = 0; control < n; ++control) {
      for (int target = 0; target < n; ++target) {
        if (control == target) continue;
        const auto amps = oracle::random_amplitudes(n, rng);
        const Gate2x2 g = random_gate(rng);
        QuantumState s(n, amps);
        apply_controlled(s, g, control, target);
        const auto expect = oracle::matvec(oracle::controlled_matrix(n, g, control, target), amps);
        CHECK(oracle::max_abs_diff(s.amplitudes(), expect) < 1e-13);
      }
    }
  }
}

TEST_CASE("controlled gate leaves the control-|0> subspace untouched") {
  std::mt19937_64 rng = make_rng(13);
  const int n = 4, control = 2, target = 0;
  auto amps = oracle::random_amplitudes(n, rng);
  // Confine support to control=0 basis states.
  for (std::size_t i = 0; i < amps.size(); ++i)
    if ((i >> control) & 1) amps[i] = 0.0;
  QuantumState s(n, amps);
  apply_crx(s, 1.31, control, target);
  CHECK(oracle::max_abs_diff(s.amplitudes(), amps) == 0.0);
}

TEST_CASE("specialized rotation kernels match the generic path") {
  std::mt19937_64 rng = make_rng(14);
  for (int n : {1, 2, 5, 9}) {
    for (int rep = 0; rep < 3; ++rep) {
      const auto amps = oracle::random_amplitudes(n, rng);
      const double th = uniform_range(rng, -6, 6);
      for (int target = 0; target < n; ++target) {
        QuantumState fast(n, amps), slow(n, amps);
        apply_rx(fast, th, target);
        apply_single_qubit(slow, rx_gate(th), target);
        CHECK(oracle::max_abs_diff(fast.amplitudes(),
                                   {slow.amplitudes().begin(), slow.amplitudes().end()}) < 1e-15);

        QuantumState fast2(n, amps), slow2(n, amps);
        apply_ry(fast2, th, target);
        apply_single_qubit(slow2, ry_gate(th), target);
        CHECK(oracle::max_abs_diff(fast2.amplitudes(),
                                   {slow2.amplitudes().begin(), slow2.amplitudes().end()}) < 1e-15);
      }
      if (n >= 2) {
        for (int c = 0; c < n; ++c) {
          const int t = (c + 1) % n;
          QuantumState fast(n, amps), slow(n, amps);
          apply_crx(fast, th, c, t);
          apply_controlled(slow, rx_gate(th), c, t);
          CHECK(oracle::max_abs_diff(fast.amplitudes(),
                                     {slow.amplitudes().begin(), slow.amplitudes().end()}) < 1e-15);
        }
      }
    }
  }
}

TEST_CASE("long random rotation circuits preserve the norm") {
  std::mt19937_64 rng = make_rng(15);
  QuantumState s(10);
  for (int step = 0; step < 200; ++step) {
    const int kind = int(uniform_index(rng, 3));
    const double th = uniform_range(rng, -M_PI, M_PI);
    const int a = int(uniform_index(rng, 10));
    int b = int(uniform_index(rng, 9));
    if (b >= a) ++b;
    if (kind == 0) apply_rx(s, th, a);
    else if (kind == 1) apply_ry(s, th, a);
    else apply_crx(s, th, a, b);
  }
  CHECK(std::abs(s.norm_sqr() - 1.0) < 1e-12);
}

TEST_CASE("Pauli expectations agree with dense quadratic forms") {
  std::mt19937_64 rng = make_rng(16);
  for (int n = 1; n <= 5; ++n) {
    const auto amps = oracle::random_amplitudes(n, rng);
    QuantumState s(n, amps);
    for (int k = 0; k < n; ++k) {
      const double x = oracle::quadratic_form(oracle::pauli_matrix(n, 'X', k), amps).real();
      const double y = oracle::quadratic_form(oracle::pauli_matrix(n, 'Y', k), amps).real();
      const double z = oracle::quadratic_form(oracle::pauli_matrix(n, 'Z', k), amps).real();
      CHECK(expectation_x(s, k) == doctest::Approx(x).epsilon(1e-12));
      CHECK(expectation_y(s, k) == doctest::Approx(y).epsilon(1e-12));
      CHECK(expectation_z(s, k) == doctest::Approx(z).epsilon(1e-12));
    }
  }
}

TEST_CASE("expectation sign conventions on single-qubit rotations") {
  QuantumState s(1);
  apply_ry(s, M_PI / 2, 0);  // (|0> + |1>)/sqrt(2)
  CHECK(expectation_x(s, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(expectation_y(s, 0)) < 1e-12);
  CHECK(std::abs(expectation_z(s, 0)) < 1e-12);

  s.reset();
  apply_rx(s, M_PI / 2, 0);  // (|0> - i|1>)/sqrt(2)
  CHECK(expectation_y(s, 0) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(std::abs(expectation_x(s, 0)) < 1e-12);
}

TEST_CASE("readout is (X,Y,Z) per qubit, width 3n, and non-destructive") {
  std::mt19937_64 rng = make_rng(17);
  for (int n : {1, 3, 4, 5, 8, 10, 13, 14}) {
    QuantumState s(n);
    const auto out = readout(s);
    CHECK(out.size() == std::size_t(3 * n));
    // |0...0> reads (0, 0, 1) on every qubit.
    for (int k = 0; k < n; ++k) {
      CHECK(out[3 * k + 0] == 0.0);
      CHECK(out[3 * k + 1] == 0.0);
      CHECK(out[3 * k + 2] == 1.0);
    }
  }
  const auto amps = oracle::random_amplitudes(4, rng);
  QuantumState s(4, amps);
  const auto out = readout(s);
  for (int k = 0; k < 4; ++k) {
    CHECK(out[3 * k + 0] == doctest::Approx(expectation_x(s, k)).epsilon(1e-14));
    CHECK(out[3 * k + 1] == doctest::Approx(expectation_y(s, k)).epsilon(1e-14));
    CHECK(out[3 * k + 2] == doctest::Approx(expectation_z(s, k)).epsilon(1e-14));
  }
  CHECK(oracle::max_abs_diff(s.amplitudes(), amps) == 0.0);  // state untouched
}

TEST_CASE("index guards on gate application") {
  QuantumState s(3);
  CHECK_THROWS_AS(apply_ry(s, 0.1, 3), std::invalid_argument);
  CHECK_THROWS_AS(apply_ry(s, 0.1, -1), std::invalid_argument);
  CHECK_THROWS_AS(apply_crx(s, 0.1, 1, 1), std::invalid_argument);
  CHECK_THROWS_AS(apply_crx(s, 0.1, 3, 0), std::invalid_argument);
  CHECK_THROWS_AS(expectation_x(s, 5), std::invalid_argument);
  std::vector<double> buf(8);
  CHECK_THROWS_AS(readout_into(s, buf), std::invalid_argument);
}

TEST_CASE("inner product matches the quadratic forms it generalizes") {
  auto rng = qrnn::make_rng(31);
  QuantumState a(3, oracle::random_amplitudes(3, rng));
  QuantumState b(3, oracle::random_amplitudes(3, rng));

  // <a|a> recovers the squared norm (here 1: the helper normalizes).
  CHECK(inner_product(a, a).real() == doctest::Approx(a.norm_sqr()).epsilon(1e-14));
  CHECK(inner_product(a, a).imag() == doctest::Approx(0.0).epsilon(1e-14));

  // Conjugate symmetry and sesquilinearity against a manual sum.
  cdouble ab = inner_product(a, b);
  cdouble ba = inner_product(b, a);
  CHECK(ab.real() == doctest::Approx(ba.real()).epsilon(1e-14));
  CHECK(ab.imag() == doctest::Approx(-ba.imag()).epsilon(1e-14));
  cdouble manual = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) manual += std::conj(a[i]) * b[i];
  CHECK(std::abs(ab - manual) == 0.0);

  // Orthogonal basis states and a known rotation overlap.
  QuantumState z0 = zero_state(1);
  QuantumState z1 = zero_state(1);
  apply_ry(z1, 3.141592653589793238, 0);
  CHECK(std::abs(inner_product(z0, z1)) < 1e-15);
  QuantumState half = zero_state(1);
  apply_ry(half, 3.141592653589793238 / 2.0, 0);
  CHECK(inner_product(z0, half).real() == doctest::Approx(std::sqrt(0.5)).epsilon(1e-14));

  QuantumState wide(4);
  CHECK_THROWS_AS(inner_product(a, wide), std::invalid_argument);
}
