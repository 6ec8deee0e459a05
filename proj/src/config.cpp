#include "qrnn/config.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace qrnn {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

ConfigMap ConfigMap::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open config file: " + path);
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_text(ss.str());
}

ConfigMap ConfigMap::parse_text(const std::string& text) {
  ConfigMap map;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    std::size_t eq = s.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config line " + std::to_string(line_no) +
                               " is not key=value: " + s);
    }
    std::string key = trim(s.substr(0, eq));
    std::string value = trim(s.substr(eq + 1));
    if (key.empty()) {
      throw std::runtime_error("config line " + std::to_string(line_no) + " has an empty key");
    }
    map.set(key, value);
  }
  return map;
}

void ConfigMap::set(const std::string& key, const std::string& value) {
  for (Entry& e : entries_) {
    if (e.key == key) {
      e.value = value;
      return;
    }
  }
  entries_.push_back({key, value, false});
}

bool ConfigMap::has(const std::string& key) const { return lookup(key) != nullptr; }

const ConfigMap::Entry* ConfigMap::lookup(const std::string& key) const {
  for (const Entry& e : entries_) {
    if (e.key == key) {
      e.used = true;
      return &e;
    }
  }
  return nullptr;
}

std::string ConfigMap::get_string(const std::string& key, const std::string& fallback) const {
  const Entry* e = lookup(key);
  return e ? e->value : fallback;
}

int ConfigMap::get_int(const std::string& key, int fallback) const {
  std::int64_t v = get_i64(key, fallback);
  if (v < INT32_MIN || v > INT32_MAX) {
    throw std::runtime_error("config value out of int range for key: " + key);
  }
  return int(v);
}

std::int64_t ConfigMap::get_i64(const std::string& key, std::int64_t fallback) const {
  const Entry* e = lookup(key);
  if (!e) return fallback;
  errno = 0;
  char* end = nullptr;
  std::int64_t v = std::strtoll(e->value.c_str(), &end, 10);
  if (errno != 0 || end == e->value.c_str() || *end != '\0') {
    throw std::runtime_error("config value for key " + key + " is not an integer: " + e->value);
  }
  return v;
}

double ConfigMap::get_double(const std::string& key, double fallback) const {
  const Entry* e = lookup(key);
  if (!e) return fallback;
  errno = 0;
  char* end = nullptr;
  double v = std::strtod(e->value.c_str(), &end);
  if (errno != 0 || end == e->value.c_str() || *end != '\0') {
    throw std::runtime_error("config value for key " + key + " is not a number: " + e->value);
  }
  return v;
}

bool ConfigMap::get_bool(const std::string& key, bool fallback) const {
  const Entry* e = lookup(key);
  if (!e) return fallback;
  if (e->value == "true" || e->value == "1") return true;
  if (e->value == "false" || e->value == "0") return false;
  throw std::runtime_error("config value for key " + key + " is not a bool: " + e->value);
}

void ConfigMap::reject_unknown_keys() const {
  std::string bad;
  for (const Entry& e : entries_) {
    if (!e.used) {
      if (!bad.empty()) bad += ", ";
      bad += e.key;
    }
  }
  if (!bad.empty()) {
    throw std::runtime_error("unknown config key(s): " + bad);
  }
}

RunConfig RunConfig::from_map(const ConfigMap& map) {
  RunConfig c;
  c.task = map.get_string("task", c.task);
  c.seed = std::uint64_t(map.get_i64("seed", std::int64_t(c.seed)));
  c.threads = map.get_int("threads", c.threads);

  c.n_qubits = map.get_int("n_qubits", c.n_qubits);
  c.circuit_depth = map.get_int("circuit_depth", c.circuit_depth);
  c.embed_dim = map.get_int("embed_dim", c.embed_dim);
  c.hidden_dim = map.get_int("hidden_dim", c.hidden_dim);
  c.activation = map.get_string("activation", c.activation);
  c.leaky_slope = map.get_double("leaky_slope", c.leaky_slope);
  c.dropout = map.get_double("dropout", c.dropout);
  c.feedback = map.get_string("feedback", c.feedback);
  c.readout_transform_dim = map.get_int("readout_transform_dim", c.readout_transform_dim);
  c.attention_dim = map.get_int("attention_dim", c.attention_dim);
  c.n_classes = map.get_int("n_classes", c.n_classes);
  c.vocab_limit = map.get_int("vocab_limit", c.vocab_limit);
  c.bptt_window = map.get_int("bptt_window", c.bptt_window);
  c.decoder_state = map.get_string("decoder_state", c.decoder_state);

  c.lr = map.get_double("lr", c.lr);
  c.lr_decay = map.get_double("lr_decay", c.lr_decay);
  c.beta1 = map.get_double("beta1", c.beta1);
  c.beta2 = map.get_double("beta2", c.beta2);
  c.adam_eps = map.get_double("adam_eps", c.adam_eps);
  c.weight_decay = map.get_double("weight_decay", c.weight_decay);
  c.decoupled_weight_decay = map.get_bool("decoupled_weight_decay", c.decoupled_weight_decay);
  c.grad_clip = map.get_double("grad_clip", c.grad_clip);

  c.batch_size = map.get_int("batch_size", c.batch_size);
  c.epochs = map.get_int("epochs", c.epochs);
  c.early_stop_loss = map.get_double("early_stop_loss", c.early_stop_loss);
  c.early_stop_acc = map.get_double("early_stop_acc", c.early_stop_acc);

  c.copy_t = map.get_int("copy_t", c.copy_t);
  c.copy_k = map.get_int("copy_k", c.copy_k);
  c.copy_digits = map.get_int("copy_digits", c.copy_digits);
  c.parity_length = map.get_int("parity_length", c.parity_length);
  c.count_train = map.get_int("count_train", c.count_train);
  c.count_test = map.get_int("count_test", c.count_test);
  c.decode_max_len = map.get_int("decode_max_len", c.decode_max_len);

  map.reject_unknown_keys();
  c.validate();
  return c;
}

RunConfig RunConfig::from_file(const std::string& path, const std::vector<std::string>& overrides) {
  ConfigMap map = ConfigMap::parse_file(path);
  for (const std::string& ov : overrides) {
    std::size_t eq = ov.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw std::runtime_error("override is not key=value: " + ov);
    }
    map.set(ov.substr(0, eq), ov.substr(eq + 1));
  }
  return from_map(map);
}

std::string RunConfig::to_text() const {
  std::ostringstream out;
  out << "task = " << task << "\n";
  out << "seed = " << seed << "\n";
  out << "threads = " << threads << "\n";
  out << "n_qubits = " << n_qubits << "\n";
  out << "circuit_depth = " << circuit_depth << "\n";
  out << "embed_dim = " << embed_dim << "\n";
  out << "hidden_dim = " << hidden_dim << "\n";
  out << "activation = " << activation << "\n";
  out << "leaky_slope = " << fmt_double(leaky_slope) << "\n";
  out << "dropout = " << fmt_double(dropout) << "\n";
  out << "feedback = " << feedback << "\n";
  out << "readout_transform_dim = " << readout_transform_dim << "\n";
  out << "attention_dim = " << attention_dim << "\n";
  out << "n_classes = " << n_classes << "\n";
  out << "vocab_limit = " << vocab_limit << "\n";
  out << "bptt_window = " << bptt_window << "\n";
  out << "decoder_state = " << decoder_state << "\n";
  out << "lr = " << fmt_double(lr) << "\n";
  out << "lr_decay = " << fmt_double(lr_decay) << "\n";
  out << "beta1 = " << fmt_double(beta1) << "\n";
  out << "beta2 = " << fmt_double(beta2) << "\n";
  out << "adam_eps = " << fmt_double(adam_eps) << "\n";
  out << "weight_decay = " << fmt_double(weight_decay) << "\n";
  out << "decoupled_weight_decay = " << (decoupled_weight_decay ? "true" : "false") << "\n";
  out << "grad_clip = " << fmt_double(grad_clip) << "\n";
  out << "batch_size = " << batch_size << "\n";
  out << "epochs = " << epochs << "\n";
  out << "early_stop_loss = " << fmt_double(early_stop_loss) << "\n";
  out << "early_stop_acc = " << fmt_double(early_stop_acc) << "\n";
  out << "copy_t = " << copy_t << "\n";
  out << "copy_k = " << copy_k << "\n";
  out << "copy_digits = " << copy_digits << "\n";
  out << "parity_length = " << parity_length << "\n";
  out << "count_train = " << count_train << "\n";
  out << "count_test = " << count_test << "\n";
  out << "decode_max_len = " << decode_max_len << "\n";
  return out.str();
}

Activation RunConfig::activation_kind() const { return activation_from_name(activation); }

void RunConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::runtime_error("config: " + msg); };
  if (task != "copy" && task != "parity" && task != "lm" && task != "seq2seq") {
    fail("task must be copy, parity, lm or seq2seq, got " + task);
  }
  if (n_qubits < 1 || n_qubits > 20) fail("n_qubits must be in [1, 20]");
  if (circuit_depth < 1) fail("circuit_depth must be >= 1");
  if (embed_dim < 1) fail("embed_dim must be >= 1");
  if (hidden_dim < 1) fail("hidden_dim must be >= 1");
  try {
    activation_from_name(activation);
  } catch (const std::exception&) {
    fail("unknown activation: " + activation);
  }
  if (dropout < 0.0 || dropout >= 1.0) fail("dropout must be in [0, 1)");
  if (feedback != "auto" && feedback != "raw_z" && feedback != "transformed_y") {
    fail("feedback must be auto, raw_z or transformed_y");
  }
  if (readout_transform_dim < 0) fail("readout_transform_dim must be >= 0");
  if (attention_dim < 1) fail("attention_dim must be >= 1");
  if (n_classes < 2) fail("n_classes must be >= 2");
  if (vocab_limit < 5) fail("vocab_limit must be >= 5");
  if (bptt_window < 0) fail("bptt_window must be >= 0 (0 means no truncation)");
  if (decoder_state != "continue" && decoder_state != "reset") {
    fail("decoder_state must be continue or reset");
  }
  if (lr <= 0.0) fail("lr must be positive");
  if (lr_decay <= 0.0 || lr_decay > 1.0) fail("lr_decay must be in (0, 1]");
  if (beta1 < 0.0 || beta1 >= 1.0) fail("beta1 must be in [0, 1)");
  if (beta2 < 0.0 || beta2 >= 1.0) fail("beta2 must be in [0, 1)");
  if (adam_eps <= 0.0) fail("adam_eps must be positive");
  if (weight_decay < 0.0) fail("weight_decay must be >= 0");
  if (grad_clip < 0.0) fail("grad_clip must be >= 0");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (epochs < 0) fail("epochs must be >= 0");
  if (copy_t < 1) fail("copy_t must be >= 1");
  if (copy_k < 1) fail("copy_k must be >= 1");
  if (copy_digits < 2 || copy_digits > 8) fail("copy_digits must be in [2, 8]");
  if (parity_length < 1) fail("parity_length must be >= 1");
  if (count_train < 1) fail("count_train must be >= 1");
  if (count_test < 1) fail("count_test must be >= 1");
  if (decode_max_len < 1) fail("decode_max_len must be >= 1");
  if (threads < 1) fail("threads must be >= 1");
}

std::uint64_t config_digest(const std::string& resolved_text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : resolved_text) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace qrnn
