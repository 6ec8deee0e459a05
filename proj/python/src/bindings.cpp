#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <complex>
#include <cstring>
#include <memory>

#include "qrnn/ansatz.hpp"
#include "qrnn/config.hpp"
#include "qrnn/diagnostics.hpp"
#include "qrnn/model.hpp"
#include "qrnn/statevector.hpp"
#include "qrnn/tasks.hpp"
#include "qrnn/training.hpp"

namespace py = pybind11;
using namespace qrnn;

namespace {

py::array_t<std::complex<double>> amplitudes_array(const QuantumState& state) {
  py::array_t<std::complex<double>> out(py::ssize_t(state.dim()));
  std::memcpy(out.mutable_data(), state.amplitudes().data(),
              state.dim() * sizeof(std::complex<double>));
  return out;
}

RunConfig config_from_dict(const py::dict& d) {
  ConfigMap map;
  for (auto item : d) {
    map.set(py::str(item.first).cast<std::string>(), py::str(item.second).cast<std::string>());
  }
  return RunConfig::from_map(map);
}

TaskData task_data(const std::vector<std::vector<int>>& inputs,
                   const std::vector<int>& labels,
                   const std::vector<std::vector<int>>& targets) {
  TaskData d;
  d.inputs = inputs;
  d.labels = labels;
  d.targets = targets;
  return d;
}

// Model plus optimizer bundled behind one handle, mirroring the CLI's
// train/eval lifecycle without exposing tape internals to python.
class Session {
 public:
  Session(const py::dict& config, int vocab, int vocab_tgt)
      : cfg_(config_from_dict(config)),
        model_(std::make_unique<QrnnModel>(cfg_, vocab, vocab_tgt)),
        opt_(std::make_unique<AdamOptimizer>(model_->params(), AdamConfig::from_run(cfg_))) {}

  py::dict train(const std::vector<std::vector<int>>& train_inputs,
                 const std::vector<int>& train_labels,
                 const std::vector<std::vector<int>>& train_targets,
                 const std::vector<std::vector<int>>& test_inputs,
                 const std::vector<int>& test_labels,
                 const std::vector<std::vector<int>>& test_targets,
                 const std::string& metrics_csv) {
    TaskData train = task_data(train_inputs, train_labels, train_targets);
    TaskData test = task_data(test_inputs, test_labels, test_targets);
    TrainOutcome out = train_model(*model_, *opt_, train, test, cfg_, metrics_csv);
    py::dict r;
    r["epochs_run"] = out.epochs_run;
    r["early_stopped"] = out.early_stopped;
    r["final_test_loss"] = out.test_history.back().loss;
    r["final_test_metric"] = out.test_history.back().metric;
    return r;
  }

  py::dict evaluate(const std::vector<std::vector<int>>& inputs, const std::vector<int>& labels,
                    const std::vector<std::vector<int>>& targets) {
    EpochStats s = qrnn::evaluate(*model_, task_data(inputs, labels, targets));
    py::dict r;
    r["loss"] = s.loss;
    r["metric"] = s.metric;
    return r;
  }

  double sample_loss(const std::vector<int>& input, int label,
                     const std::vector<int>& target) {
    Tape tape;
    TaskData d;
    d.inputs = {input};
    if (label >= 0) d.labels = {label};
    if (!target.empty()) d.targets = {target};
    RunResult res = run_sample(*model_, tape, d, 0, false, 0);
    return res.loss->values[0];
  }

  py::tuple decode(const std::vector<int>& src, int max_len, int eos_id) {
    bool truncated = false;
    std::vector<int> out = model_->decode_greedy(src, max_len, eos_id, &truncated);
    return py::make_tuple(out, truncated);
  }

  py::dict grad_profile(const std::vector<std::vector<int>>& inputs,
                        const std::vector<int>& labels,
                        const std::vector<std::vector<int>>& targets) {
    GradProfile p = qrnn::grad_profile(*model_, task_data(inputs, labels, targets));
    py::dict r;
    r["mean_grad_norm"] = p.mean_grad_norm;
    r["normalized"] = p.normalized;
    r["batch"] = p.batch;
    return r;
  }

  py::dict norm_audit(const std::vector<int>& sequence) {
    NormAuditResult a = qrnn::norm_audit(*model_, sequence);
    py::dict r;
    r["max_dev"] = a.max_dev;
    r["worst_t"] = a.worst_t;
    r["steps"] = a.steps;
    return r;
  }

  void save(const std::string& path) { save_checkpoint(path, cfg_, model_->params(), opt_.get()); }

  void load(const std::string& path) {
    Checkpoint ck = load_checkpoint(path);
    restore_from_checkpoint(ck, *model_, opt_.get());
  }

  std::string parameter_report() const { return model_->parameter_report(); }
  std::size_t param_count() const { return model_->params().total_size(); }
  int readout_dim() const { return model_->readout_dim(); }
  std::string config_text() const { return cfg_.to_text(); }

 private:
  RunConfig cfg_;
  std::unique_ptr<QrnnModel> model_;
  std::unique_ptr<AdamOptimizer> opt_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "quantum recurrent network simulator core";

  py::class_<QuantumState>(m, "QuantumState")
      .def(py::init<int>(), py::arg("n_qubits"))
      .def_property_readonly("n_qubits", &QuantumState::n_qubits)
      .def_property_readonly("dim", &QuantumState::dim)
      .def("norm_sqr", &QuantumState::norm_sqr)
      .def("reset", &QuantumState::reset)
      .def("amplitudes", &amplitudes_array)
      .def("apply_rx",
           [](QuantumState& s, double theta, int target) { apply_rx(s, theta, target); },
           py::arg("theta"), py::arg("target"))
      .def("apply_ry",
           [](QuantumState& s, double theta, int target) { apply_ry(s, theta, target); },
           py::arg("theta"), py::arg("target"))
      .def("apply_crx",
           [](QuantumState& s, double theta, int control, int target) {
             apply_crx(s, theta, control, target);
           },
           py::arg("theta"), py::arg("control"), py::arg("target"))
      .def("readout", [](const QuantumState& s) { return readout(s); });

  py::class_<CircuitLayout>(m, "CircuitLayout")
      .def_property_readonly("n_qubits", [](const CircuitLayout& l) { return l.n_qubits; })
      .def_property_readonly("param_count", &CircuitLayout::param_count);

  m.def("build_ansatz14", &build_ansatz14, py::arg("n_qubits"), py::arg("depth") = 1);
  m.def("build_ry_layer", &build_ry_layer, py::arg("n_qubits"));
  m.def(
      "apply_unitary",
      [](QuantumState& state, const CircuitLayout& layout, const std::vector<double>& theta) {
        apply_unitary(state, layout, theta);
      },
      py::arg("state"), py::arg("layout"), py::arg("theta"));
  m.def(
      "inner_product",
      [](const QuantumState& a, const QuantumState& b) { return inner_product(a, b); },
      py::arg("a"), py::arg("b"));

  m.def(
      "expressibility_kl",
      [](int n_qubits, int pairs, int bins, std::uint64_t seed, const std::string& circuit,
         int depth, bool pool) {
        ExpressibilitySpec spec;
        spec.n_qubits = n_qubits;
        spec.pairs = pairs;
        spec.bins = bins;
        spec.seed = seed;
        spec.pool_mode = pool;
        spec.validate();
        CircuitLayout layout;
        if (circuit == "ansatz14")
          layout = build_ansatz14(n_qubits, depth);
        else if (circuit == "ry_layer")
          layout = build_ry_layer(n_qubits);
        else
          throw std::invalid_argument("unknown circuit '" + circuit + "'");
        ExpressibilityResult r = qrnn::expressibility_kl(spec, layout);
        py::dict out;
        out["kl"] = r.kl;
        out["empirical"] = r.empirical;
        out["haar"] = r.haar;
        out["fidelity_count"] = r.fidelity_count;
        return out;
      },
      py::arg("n_qubits") = 4, py::arg("pairs") = 5000, py::arg("bins") = 75, py::arg("seed") = 1,
      py::arg("circuit") = "ansatz14", py::arg("depth") = 1, py::arg("pool") = false);

  m.def("gen_copy_dataset",
        [](int T, int k, int n_digits, int count, std::uint64_t seed) {
          CopySpec spec;
          spec.T = T;
          spec.k = k;
          spec.n_digits = n_digits;
          return gen_copy_dataset(spec, count, seed).inputs;
        },
        py::arg("T"), py::arg("k"), py::arg("n_digits") = 8, py::arg("count") = 1,
        py::arg("seed") = 1);
  m.def("gen_parity_dataset",
        [](int length, int count, std::uint64_t seed) {
          ParityDataset d = gen_parity_dataset(length, count, seed);
          return py::make_tuple(d.sequences, d.labels);
        },
        py::arg("length"), py::arg("count"), py::arg("seed") = 1);
  m.def("copy_baseline_loss",
        [](int T, int k, int n_digits) {
          CopySpec spec;
          spec.T = T;
          spec.k = k;
          spec.n_digits = n_digits;
          return random_baseline_loss(spec);
        },
        py::arg("T"), py::arg("k"), py::arg("n_digits") = 8);

  py::class_<Session>(m, "Session")
      .def(py::init<const py::dict&, int, int>(), py::arg("config"), py::arg("vocab") = 0,
           py::arg("vocab_tgt") = 0)
      .def("train", &Session::train, py::arg("train_inputs"),
           py::arg("train_labels") = std::vector<int>{},
           py::arg("train_targets") = std::vector<std::vector<int>>{},
           py::arg("test_inputs") = std::vector<std::vector<int>>{},
           py::arg("test_labels") = std::vector<int>{},
           py::arg("test_targets") = std::vector<std::vector<int>>{},
           py::arg("metrics_csv") = std::string{})
      .def("evaluate", &Session::evaluate, py::arg("inputs"),
           py::arg("labels") = std::vector<int>{},
           py::arg("targets") = std::vector<std::vector<int>>{})
      .def("sample_loss", &Session::sample_loss, py::arg("input"), py::arg("label") = -1,
           py::arg("target") = std::vector<int>{})
      .def("decode", &Session::decode, py::arg("src"), py::arg("max_len") = 64,
           py::arg("eos_id") = 3)
      .def("grad_profile", &Session::grad_profile, py::arg("inputs"),
           py::arg("labels") = std::vector<int>{},
           py::arg("targets") = std::vector<std::vector<int>>{})
      .def("norm_audit", &Session::norm_audit, py::arg("sequence"))
      .def("save", &Session::save, py::arg("path"))
      .def("load", &Session::load, py::arg("path"))
      .def("parameter_report", &Session::parameter_report)
      .def("param_count", &Session::param_count)
      .def("readout_dim", &Session::readout_dim)
      .def("config_text", &Session::config_text);
}
