#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace qrnn {

// Copy-memory benchmark. Inputs are [k payload digits from 1..n_digits]
// [T blanks][k delimiters]; the first delimiter (index T+k) cues recall.
// Targets are blank everywhere except the final k positions, which repeat the
// payload, and the loss averages over all T+2k positions.
struct CopySpec {
  int T = 200;
  int k = 10;
  int n_digits = 8;
  int delimiter = 9;
  int blank = 0;
  int count_train = 5000;
  int count_test = 1000;
  std::uint64_t seed = 1;

  int seq_len() const { return T + 2 * k; }
  int n_symbols() const { return delimiter + 1; }
  void validate() const;
};

struct CopyDataset {
  std::vector<std::vector<int>> inputs;
  std::vector<std::vector<int>> targets;
};

// Deterministic under (spec, seed); every sample is checked against the
// layout invariants before it is returned.
CopyDataset gen_copy_dataset(const CopySpec& spec, int count, std::uint64_t seed);

struct CopySplits {
  CopyDataset train, test;
};
// Train/test splits from spec.count_* on disjoint seed substreams.
CopySplits gen_copy_splits(const CopySpec& spec);

// Expected mean cross entropy of the reference random predictor,
// k * ln(n_digits - 1) / (T + 2k). Accepts k = 0 (no recall positions).
double random_baseline_loss(const CopySpec& spec);

// Binary sequences labeled by the parity of their ones. Classes are exactly
// balanced (sample i targets parity i mod 2; the last bit is set to match).
struct ParityDataset {
  std::vector<std::vector<int>> sequences;
  std::vector<int> labels;
};
ParityDataset gen_parity_dataset(int length, int count, std::uint64_t seed);

// Whitespace-tokenized line corpus with ids assigned by descending frequency,
// lexicographic tie-break, after the four specials. Sequences are raw token
// ids; BOS/EOS wrapping is the consumer's choice.
struct TokenCorpus {
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kBos = 2;
  static constexpr int kEos = 3;

  std::unordered_map<std::string, int> vocab;
  std::vector<std::string> id_to_token;
  std::vector<std::vector<int>> sequences;

  int vocab_size() const { return int(id_to_token.size()); }
};

// vocab_limit caps the total vocabulary including the specials.
TokenCorpus load_token_corpus(const std::string& path, int vocab_limit);
TokenCorpus corpus_from_lines(const std::vector<std::string>& lines, int vocab_limit);

// Encodes another split with an existing vocabulary (OOV -> UNK).
std::vector<std::vector<int>> encode_lines(const TokenCorpus& corpus,
                                           const std::vector<std::string>& lines);
std::vector<std::vector<int>> encode_file(const TokenCorpus& corpus, const std::string& path);

// Dataset file format: one sample per line, space-separated integers.
void save_int_lines(const std::string& path, const std::vector<std::vector<int>>& rows);
std::vector<std::vector<int>> load_int_lines(const std::string& path);
void save_int_scalars(const std::string& path, const std::vector<int>& values);
std::vector<int> load_int_scalars(const std::string& path);

}  // namespace qrnn
