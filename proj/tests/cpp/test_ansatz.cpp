#include "qrnn/ansatz.hpp"

#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "qrnn/rng.hpp"

using namespace qrnn;

namespace {

std::vector<double> random_theta(int count, std::mt19937_64& rng, double lo = -M_PI,
                                 double hi = M_PI) {
  std::vector<double> th(static_cast<std::size_t>(count), 0.0);
  for (double& v : th) v = uniform_range(rng, lo, hi);
  return th;
}

// Weighted-readout loss used by the gradient oracles.
double weighted_readout_loss(const CircuitLayout& layout, const std::vector<double>& theta,
                             const QuantumState& in, const std::vector<double>& w) {
  QuantumState s = in;
  apply_unitary(s, layout, theta);
  const auto r = readout(s);
  double acc = 0;
  for (std::size_t i = 0; i < w.size(); ++i) acc += w[i] * r[i];
  return acc;
}

oracle::DenseMatrix dense_unitary(const CircuitLayout& layout, const std::vector<double>& theta) {
  const std::size_t dim = std::size_t(1) << layout.n_qubits;
  oracle::DenseMatrix u = oracle::zeros(dim);
  for (std::size_t i = 0; i < dim; ++i) u[i][i] = 1.0;
  for (const GateOp& op : layout.ops) {
    const double t = theta[std::size_t(op.param_index)];
    oracle::DenseMatrix g = op.kind == GateKind::RY
                                ? oracle::single_qubit_matrix(layout.n_qubits, ry_gate(t), op.target)
                                : oracle::controlled_matrix(layout.n_qubits, rx_gate(t), op.control,
                                                            op.target);
    u = oracle::matmul(g, u);
  }
  return u;
}

}  // namespace

TEST_CASE("ansatz-14 golden layout for 4 qubits") {
  const CircuitLayout layout = build_ansatz14(4);
  CHECK(layout.param_count() == 16);
  CHECK(layout_to_text(layout) ==
        "RY q=0 p=0\n"
        "RY q=1 p=1\n"
        "RY q=2 p=2\n"
        "RY q=3 p=3\n"
        "CRX c=3 t=0 p=4\n"
        "CRX c=2 t=3 p=5\n"
        "CRX c=1 t=2 p=6\n"
        "CRX c=0 t=1 p=7\n"
        "RY q=0 p=8\n"
        "RY q=1 p=9\n"
        "RY q=2 p=10\n"
        "RY q=3 p=11\n"
        "CRX c=0 t=3 p=12\n"
        "CRX c=1 t=0 p=13\n"
        "CRX c=2 t=1 p=14\n"
        "CRX c=3 t=2 p=15\n");
}

TEST_CASE("ansatz-14 parameter count is 4n per repetition") {
  for (int n : {2, 3, 5, 8, 14}) {
    CHECK(build_ansatz14(n).param_count() == 4 * n);
  }
  CHECK(build_ansatz14(4, 3).param_count() == 48);
  CHECK(build_ry_layer(6).param_count() == 6);
  CHECK_THROWS_AS(build_ansatz14(1), std::invalid_argument);
  CHECK_THROWS_AS(build_ansatz14(4, 0), std::invalid_argument);
}

TEST_CASE("zero angles give the identity circuit") {
  std::mt19937_64 rng = make_rng(21);
  const CircuitLayout layout = build_ansatz14(4);
  const auto amps = oracle::random_amplitudes(4, rng);
  QuantumState s(4, amps);
  apply_unitary(s, layout, std::vector<double>(16, 0.0));
  CHECK(oracle::max_abs_diff(s.amplitudes(), amps) == 0.0);
}

TEST_CASE("apply_unitary matches the dense gate-product oracle") {
  std::mt19937_64 rng = make_rng(22);
  for (int n : {2, 3, 4}) {
    const CircuitLayout layout = build_ansatz14(n);
    const auto theta = random_theta(layout.param_count(), rng);
    const auto amps = oracle::random_amplitudes(n, rng);
    QuantumState s(n, amps);
    apply_unitary(s, layout, theta);
    const auto expect = oracle::matvec(dense_unitary(layout, theta), amps);
    CHECK(oracle::max_abs_diff(s.amplitudes(), expect) < 1e-12);
  }
}

TEST_CASE("400 random circuit steps keep the norm within 1e-9") {
  std::mt19937_64 rng = make_rng(23);
  const CircuitLayout layout = build_ansatz14(8);
  QuantumState s(8);
  double worst = 0;
  for (int step = 0; step < 400; ++step) {
    apply_unitary(s, layout, random_theta(layout.param_count(), rng, -8, 8));
    worst = std::max(worst, std::abs(s.norm_sqr() - 1.0));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("theta width and qubit mismatches are rejected") {
  const CircuitLayout layout = build_ansatz14(3);
  QuantumState s(3);
  CHECK_THROWS_AS(apply_unitary(s, layout, std::vector<double>(11, 0.0)), std::invalid_argument);
  QuantumState s4(4);
  CHECK_THROWS_AS(apply_unitary(s4, layout, std::vector<double>(12, 0.0)), std::invalid_argument);
  CHECK_THROWS_AS(
      adjoint_backward(layout, std::vector<double>(12, 0.0), s4, std::vector<double>(9, 0.0)),
      std::invalid_argument);
  CHECK_THROWS_AS(
      adjoint_backward(layout, std::vector<double>(12, 0.0), s, std::vector<double>(7, 0.0)),
      std::invalid_argument);
}

TEST_CASE("adjoint theta gradients match central finite differences") {
  std::mt19937_64 rng = make_rng(24);
  for (int n : {2, 3, 4}) {
    const CircuitLayout layout = build_ansatz14(n);
    const auto theta = random_theta(layout.param_count(), rng);
    const auto amps = oracle::random_amplitudes(n, rng);
    const QuantumState in(n, amps);
    std::vector<double> w(3 * std::size_t(n));
    for (double& v : w) v = uniform_range(rng, -1, 1);

    const AdjointResult adj = adjoint_backward(layout, theta, in, w);
    const double h = 1e-6;
    for (int p = 0; p < layout.param_count(); ++p) {
      auto tp = theta, tm = theta;
      tp[std::size_t(p)] += h;
      tm[std::size_t(p)] -= h;
      const double fd =
          (weighted_readout_loss(layout, tp, in, w) - weighted_readout_loss(layout, tm, in, w)) /
          (2 * h);
      CHECK(adj.theta_grad[std::size_t(p)] == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("two-term parameter shift reproduces adjoint gradients on RY positions") {
  std::mt19937_64 rng = make_rng(25);
  const int n = 4;
  const CircuitLayout layout = build_ansatz14(n);
  const auto theta = random_theta(layout.param_count(), rng);
  const auto amps = oracle::random_amplitudes(n, rng);
  const QuantumState in(n, amps);
  std::vector<double> w(3 * std::size_t(n));
  for (double& v : w) v = uniform_range(rng, -1, 1);

  const AdjointResult adj = adjoint_backward(layout, theta, in, w);
  for (const GateOp& op : layout.ops) {
    if (op.kind != GateKind::RY) continue;
    auto tp = theta, tm = theta;
    tp[std::size_t(op.param_index)] += M_PI / 2;
    tm[std::size_t(op.param_index)] -= M_PI / 2;
    const double shift =
        (weighted_readout_loss(layout, tp, in, w) - weighted_readout_loss(layout, tm, in, w)) / 2;
    CHECK(std::abs(shift - adj.theta_grad[std::size_t(op.param_index)]) < 1e-10);
  }
}

TEST_CASE("input-state cotangent matches finite differences over Re/Im parts") {
  std::mt19937_64 rng = make_rng(26);
  const int n = 3;
  const CircuitLayout layout = build_ansatz14(n);
  const auto theta = random_theta(layout.param_count(), rng);
  const auto amps = oracle::random_amplitudes(n, rng);
  std::vector<double> w(3 * std::size_t(n));
  for (double& v : w) v = uniform_range(rng, -1, 1);

  const AdjointResult adj = adjoint_backward(layout, theta, QuantumState(n, amps), w);
  REQUIRE(adj.state_in_cotangent.size() == amps.size());

  const double h = 1e-6;
  for (std::size_t i = 0; i < amps.size(); ++i) {
    for (int part = 0; part < 2; ++part) {
      auto ap = amps, am = amps;
      const cdouble delta = part == 0 ? cdouble(h, 0) : cdouble(0, h);
      ap[i] += delta;
      am[i] -= delta;
      const double fd = (weighted_readout_loss(layout, theta, QuantumState(n, ap), w) -
                         weighted_readout_loss(layout, theta, QuantumState(n, am), w)) /
                        (2 * h);
      const double got =
          part == 0 ? adj.state_in_cotangent[i].real() : adj.state_in_cotangent[i].imag();
      CHECK(got == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("state cotangent chains two circuit applications correctly") {
  // L = w . readout(U(theta2) U(theta1) psi0). Backprop step 2 with only the
  // readout cotangent, feed its input-state cotangent into step 1's
  // state_out_cotangent, and compare d L / d theta1 against finite
  // differences. This is the exact path the recurrent model uses.
  std::mt19937_64 rng = make_rng(27);
  const int n = 3;
  const CircuitLayout layout = build_ansatz14(n);
  const auto th1 = random_theta(layout.param_count(), rng);
  const auto th2 = random_theta(layout.param_count(), rng);
  const auto amps = oracle::random_amplitudes(n, rng);
  std::vector<double> w(3 * std::size_t(n));
  for (double& v : w) v = uniform_range(rng, -1, 1);

  const QuantumState psi0(n, amps);
  QuantumState psi1 = psi0;
  apply_unitary(psi1, layout, th1);

  const AdjointResult step2 = adjoint_backward(layout, th2, psi1, w);
  const AdjointResult step1 =
      adjoint_backward(layout, th1, psi0, {}, step2.state_in_cotangent);

  auto loss = [&](const std::vector<double>& t1) {
    QuantumState s = psi0;
    apply_unitary(s, layout, t1);
    return weighted_readout_loss(layout, th2, s, w);
  };
  const double h = 1e-6;
  for (int p = 0; p < layout.param_count(); ++p) {
    auto tp = th1, tm = th1;
    tp[std::size_t(p)] += h;
    tm[std::size_t(p)] -= h;
    const double fd = (loss(tp) - loss(tm)) / (2 * h);
    CHECK(step1.theta_grad[std::size_t(p)] == doctest::Approx(fd).epsilon(1e-6));
  }
}
