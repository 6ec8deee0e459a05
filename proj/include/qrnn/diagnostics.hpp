#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qrnn/ansatz.hpp"
#include "qrnn/model.hpp"
#include "qrnn/training.hpp"

namespace qrnn {

// Fidelity-histogram comparison of a circuit family against Haar-random
// states. Parameter vectors are drawn uniformly from [0, 2pi)^d.
struct ExpressibilitySpec {
  int n_qubits = 4;
  int pairs = 5000;
  int bins = 75;
  std::uint64_t seed = 1;
  // All-pairs fidelities over one shared state pool instead of independent
  // pairs; kept as a cross-check for the i.i.d. estimator.
  bool pool_mode = false;

  void validate() const;  // bins >= 2, pairs >= 100
};

struct ExpressibilityResult {
  double kl = 0.0;
  std::vector<double> empirical;  // per-bin mass, sums to 1
  std::vector<double> haar;       // analytic reference mass, sums to 1
  std::size_t fidelity_count = 0;
};

// Mass of the Haar fidelity density (N-1)(1-F)^(N-2), N = 2^n, over
// [lo, hi] in closed form: (1-lo)^(N-1) - (1-hi)^(N-1).
double haar_bin_mass(int n_qubits, double lo, double hi);

// KL(empirical || reference) with the 0 log 0 = 0 convention. Requires equal
// lengths and strictly positive reference mass wherever empirical mass is.
double kl_divergence(const std::vector<double>& empirical, const std::vector<double>& reference);

ExpressibilityResult expressibility_kl(const ExpressibilitySpec& spec,
                                       const CircuitLayout& layout);

// CSV: bin_lower, empirical_mass, haar_mass.
void save_expressibility_csv(const std::string& path, const ExpressibilityResult& result);

// Per-timestep gradient norms ||dL/dz_t||_2, averaged over a batch of
// equal-length sequences, plus the curve normalized by the final step.
struct GradProfile {
  std::vector<double> mean_grad_norm;  // index 0 is timestep 1
  std::vector<double> normalized;      // final entry exactly 1
  int batch = 0;
};

GradProfile grad_profile(const QrnnModel& model, const TaskData& batch);

// CSV: t, mean_grad_norm, normalized.
void save_grad_profile_csv(const std::string& path, const GradProfile& profile);

// Unitarity audit: max_t | ||h_t||^2 - 1 | over every recurrent state the
// run produced (encoder and decoder), recomputed from the tape states.
struct NormAuditResult {
  double max_dev = 0.0;
  int worst_t = 0;  // 1-based step (decoder steps continue the count)
  int steps = 0;
};

NormAuditResult norm_audit(const QrnnModel& model, const std::vector<int>& sequence);

// Scan an existing run's states; lets tests corrupt a tape slot first and
// confirm the audit notices.
NormAuditResult norm_audit_scan(const Tape& tape, const std::vector<StepRecord>& trace);

}  // namespace qrnn
