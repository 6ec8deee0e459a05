#include "qrnn/diagnostics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "qrnn/rng.hpp"
#include "qrnn/statevector.hpp"

namespace qrnn {

namespace {

constexpr double kTwoPi = 6.283185307179586476925287;

std::vector<double> draw_theta(std::mt19937_64& rng, int count) {
  std::vector<double> theta(count);
  for (double& t : theta) t = uniform_range(rng, 0.0, kTwoPi);
  return theta;
}

QuantumState sampled_state(const CircuitLayout& layout, std::uint64_t seed) {
  auto rng = make_rng(seed);
  std::vector<double> theta = draw_theta(rng, layout.param_count());
  QuantumState state = zero_state(layout.n_qubits);
  apply_unitary(state, layout, theta);
  return state;
}

double fidelity(const QuantumState& a, const QuantumState& b) {
  return std::norm(inner_product(a, b));
}

}  // namespace

void ExpressibilitySpec::validate() const {
  if (n_qubits < 1 || n_qubits > 20)
    throw std::invalid_argument("expressibility: n_qubits out of range");
  if (bins < 2) throw std::invalid_argument("expressibility: need at least 2 bins");
  if (pairs < 100) throw std::invalid_argument("expressibility: need at least 100 pairs");
}

double haar_bin_mass(int n_qubits, double lo, double hi) {
  if (n_qubits < 1) throw std::invalid_argument("haar_bin_mass: n_qubits < 1");
  if (!(lo <= hi) || lo < 0.0 || hi > 1.0)
    throw std::invalid_argument("haar_bin_mass: bad interval");
  const double exponent = std::pow(2.0, n_qubits) - 1.0;  // N - 1
  return std::pow(1.0 - lo, exponent) - std::pow(1.0 - hi, exponent);
}

double kl_divergence(const std::vector<double>& empirical, const std::vector<double>& reference) {
  if (empirical.size() != reference.size())
    throw std::invalid_argument("kl_divergence: length mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < empirical.size(); ++i) {
    if (empirical[i] <= 0.0) continue;  // 0 log 0 = 0
    if (reference[i] <= 0.0)
      throw std::invalid_argument("kl_divergence: empirical mass where reference is zero");
    kl += empirical[i] * std::log(empirical[i] / reference[i]);
  }
  return kl;
}

ExpressibilityResult expressibility_kl(const ExpressibilitySpec& spec,
                                       const CircuitLayout& layout) {
  spec.validate();
  if (layout.n_qubits != spec.n_qubits)
    throw std::invalid_argument("expressibility: layout qubit count does not match spec");

  std::vector<std::int64_t> counts(spec.bins, 0);
  auto record = [&](double f) {
    int bin = int(f * spec.bins);
    if (bin >= spec.bins) bin = spec.bins - 1;  // F = 1 lands in the top bin
    if (bin < 0) bin = 0;
    counts[bin] += 1;
  };

  std::size_t total = 0;
  if (!spec.pool_mode) {
    // Two fresh parameter vectors per pair; substreams keyed by pair index
    // so sampling parallelizes without reordering draws.
    for (int p = 0; p < spec.pairs; ++p) {
      QuantumState a = sampled_state(layout, mix_seed(spec.seed, std::uint64_t(p), 0));
      QuantumState b = sampled_state(layout, mix_seed(spec.seed, std::uint64_t(p), 1));
      record(fidelity(a, b));
    }
    total = std::size_t(spec.pairs);
  } else {
    // Smallest pool whose all-pairs count reaches the requested pairs.
    int m = 2;
    while (std::size_t(m) * (m - 1) / 2 < std::size_t(spec.pairs)) ++m;
    std::vector<QuantumState> pool;
    pool.reserve(std::size_t(m));
    for (int i = 0; i < m; ++i)
      pool.push_back(sampled_state(layout, mix_seed(spec.seed, 0x706f6f6c, std::uint64_t(i))));
    for (int i = 0; i < m; ++i)
      for (int j = i + 1; j < m; ++j) record(fidelity(pool[i], pool[j]));
    total = std::size_t(m) * (m - 1) / 2;
  }

  ExpressibilityResult result;
  result.fidelity_count = total;
  result.empirical.resize(spec.bins);
  result.haar.resize(spec.bins);
  for (int i = 0; i < spec.bins; ++i) {
    result.empirical[i] = double(counts[i]) / double(total);
    result.haar[i] =
        haar_bin_mass(spec.n_qubits, double(i) / spec.bins, double(i + 1) / spec.bins);
  }
  result.kl = kl_divergence(result.empirical, result.haar);
  return result;
}

void save_expressibility_csv(const std::string& path, const ExpressibilityResult& result) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("expressibility: cannot write " + path);
  f << "bin_lower,empirical_mass,haar_mass\n";
  const int bins = int(result.empirical.size());
  for (int i = 0; i < bins; ++i) {
    char line[96];
    std::snprintf(line, sizeof(line), "%.9g,%.12g,%.12g\n", double(i) / bins,
                  result.empirical[i], result.haar[i]);
    f << line;
  }
}

GradProfile grad_profile(const QrnnModel& model, const TaskData& batch) {
  if (batch.size() == 0) throw std::invalid_argument("grad_profile: empty batch");
  const std::size_t len = batch.inputs[0].size();
  for (const auto& seq : batch.inputs)
    if (seq.size() != len) throw std::invalid_argument("grad_profile: mixed sequence lengths");

  GradProfile profile;
  profile.batch = int(batch.size());

  for (std::size_t i = 0; i < batch.size(); ++i) {
    Tape tape;
    RunResult res = run_sample(model, tape, batch, i, false, 0);
    if (!res.loss) throw std::logic_error("grad_profile: run produced no loss");
    tape.backward(res.loss);

    if (profile.mean_grad_norm.empty()) profile.mean_grad_norm.assign(res.trace.size(), 0.0);
    if (res.trace.size() != profile.mean_grad_norm.size())
      throw std::invalid_argument("grad_profile: mixed step counts");
    for (std::size_t t = 0; t < res.trace.size(); ++t) {
      const std::vector<double>* g = tape.find_grad(*res.trace[t].z);
      double sq = 0.0;
      if (g)
        for (double x : *g) sq += x * x;
      profile.mean_grad_norm[t] += std::sqrt(sq);
    }
  }

  for (double& x : profile.mean_grad_norm) x /= double(batch.size());
  const double final_norm = profile.mean_grad_norm.back();
  if (!(final_norm > 0.0))
    throw std::runtime_error("grad_profile: zero final-step gradient norm");
  profile.normalized.resize(profile.mean_grad_norm.size());
  for (std::size_t t = 0; t < profile.normalized.size(); ++t)
    profile.normalized[t] = profile.mean_grad_norm[t] / final_norm;
  profile.normalized.back() = 1.0;  // exact, not up to rounding
  return profile;
}

void save_grad_profile_csv(const std::string& path, const GradProfile& profile) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("grad_profile: cannot write " + path);
  f << "t,mean_grad_norm,normalized\n";
  for (std::size_t t = 0; t < profile.mean_grad_norm.size(); ++t) {
    char line[96];
    std::snprintf(line, sizeof(line), "%zu,%.12g,%.12g\n", t + 1, profile.mean_grad_norm[t],
                  profile.normalized[t]);
    f << line;
  }
}

NormAuditResult norm_audit_scan(const Tape& tape, const std::vector<StepRecord>& trace) {
  NormAuditResult result;
  result.steps = int(trace.size());
  for (std::size_t t = 0; t < trace.size(); ++t) {
    const double dev = std::abs(tape.state(trace[t].state_slot).norm_sqr() - 1.0);
    if (dev > result.max_dev) {
      result.max_dev = dev;
      result.worst_t = int(t) + 1;
    }
  }
  return result;
}

NormAuditResult norm_audit(const QrnnModel& model, const std::vector<int>& sequence) {
  Tape tape;
  RunResult res;
  switch (model.task()) {
    case TaskKind::Parity:
      res = model.run_classifier(tape, sequence, -1, false, 0);
      break;
    case TaskKind::Copy:
      res = model.run_copy(tape, sequence, false, 0);
      break;
    case TaskKind::Lm:
      res = model.run_lm(tape, sequence, false, 0);
      break;
    case TaskKind::Seq2Seq:
      // Echo target: the decoder trace gets audited over the same length.
      res = model.run_seq2seq(tape, sequence, sequence, false, 0);
      break;
  }

  std::vector<StepRecord> all = res.trace;
  all.insert(all.end(), res.decoder_trace.begin(), res.decoder_trace.end());
  return norm_audit_scan(tape, all);
}

}  // namespace qrnn
