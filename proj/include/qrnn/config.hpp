#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qrnn/autograd.hpp"

namespace qrnn {

// Flat key=value text, '#' comments, blank lines ignored. Later assignments
// win, so CLI --set overrides are plain appends.
class ConfigMap {
 public:
  static ConfigMap parse_file(const std::string& path);
  static ConfigMap parse_text(const std::string& text);

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;

  // Typed getters fall back to the default and mark the key as recognized.
  // Malformed values throw with the offending key in the message.
  std::string get_string(const std::string& key, const std::string& fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::int64_t get_i64(const std::string& key, std::int64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  // Throws listing every key that no getter touched; call after a struct has
  // consumed its fields so typos cannot silently fall back to defaults.
  void reject_unknown_keys() const;

 private:
  struct Entry {
    std::string key, value;
    mutable bool used = false;
  };
  const Entry* lookup(const std::string& key) const;
  std::vector<Entry> entries_;
};

// Every run-affecting knob, with defaults. Serializes to a full snapshot so a
// run directory records the resolved configuration, not just the overrides.
struct RunConfig {
  std::string task = "copy";  // copy | parity | lm | seq2seq
  std::uint64_t seed = 1;
  int threads = 1;

  int n_qubits = 8;
  int circuit_depth = 1;
  int embed_dim = 16;
  int hidden_dim = 64;
  std::string activation = "leaky_relu";
  double leaky_slope = 0.01;
  double dropout = 0.0;
  std::string feedback = "auto";  // auto | raw_z | transformed_y
  int readout_transform_dim = 0;  // 0 means 3 * n_qubits
  int attention_dim = 32;
  int n_classes = 2;
  int vocab_limit = 10000;
  int bptt_window = 35;
  std::string decoder_state = "continue";  // continue | reset

  double lr = 1e-3;
  double lr_decay = 1.0;  // per-epoch multiplier, 1 keeps lr constant
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-10;
  double weight_decay = 1e-4;
  bool decoupled_weight_decay = false;
  double grad_clip = 0.0;  // 0 disables

  int batch_size = 32;
  int epochs = 10;
  double early_stop_loss = 0.0;  // 0 disables
  double early_stop_acc = 0.0;

  int copy_t = 200;
  int copy_k = 10;
  int copy_digits = 8;
  int parity_length = 20;
  int count_train = 5000;
  int count_test = 1000;
  int decode_max_len = 64;

  static RunConfig from_map(const ConfigMap& map);
  static RunConfig from_file(const std::string& path,
                             const std::vector<std::string>& overrides = {});
  std::string to_text() const;

  Activation activation_kind() const;
  void validate() const;  // throws on out-of-range fields
};

// FNV-1a over the resolved snapshot text; checkpoints embed it so a mismatched
// architecture is caught before tensors are copied.
std::uint64_t config_digest(const std::string& resolved_text);

}  // namespace qrnn
