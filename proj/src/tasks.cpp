#include "qrnn/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "qrnn/rng.hpp"

namespace qrnn {

void CopySpec::validate() const {
  if (T < 1) throw std::invalid_argument("copy spec: T must be >= 1");
  if (k < 1) throw std::invalid_argument("copy spec: k must be >= 1");
  if (n_digits < 2 || n_digits > delimiter - 1) {
    throw std::invalid_argument("copy spec: n_digits must leave room between blank and delimiter");
  }
  if (blank != 0 || delimiter <= n_digits) {
    throw std::invalid_argument("copy spec: blank must be 0 and delimiter above the digits");
  }
  if (count_train < 1 || count_test < 1) {
    throw std::invalid_argument("copy spec: counts must be >= 1");
  }
}

namespace {

// Generator bug detector, not input validation: every sample is checked
// against the layout contract before release.
void check_copy_sample(const CopySpec& s, const std::vector<int>& in,
                       const std::vector<int>& tgt) {
  const std::size_t len = std::size_t(s.seq_len());
  if (in.size() != len || tgt.size() != len) throw std::logic_error("copy sample: bad length");
  for (int i = 0; i < s.k; ++i) {
    if (in[std::size_t(i)] < 1 || in[std::size_t(i)] > s.n_digits) {
      throw std::logic_error("copy sample: payload out of range");
    }
  }
  for (int i = s.k; i < s.T + s.k; ++i) {
    if (in[std::size_t(i)] != s.blank) throw std::logic_error("copy sample: filler not blank");
  }
  for (int i = s.T + s.k; i < s.seq_len(); ++i) {
    if (in[std::size_t(i)] != s.delimiter) throw std::logic_error("copy sample: cue not delimiter");
  }
  for (int i = 0; i < s.T + s.k; ++i) {
    if (tgt[std::size_t(i)] != s.blank) throw std::logic_error("copy sample: early target not blank");
  }
  for (int i = 0; i < s.k; ++i) {
    if (tgt[std::size_t(s.T + s.k + i)] != in[std::size_t(i)]) {
      throw std::logic_error("copy sample: recall target mismatch");
    }
  }
}

}  // namespace

CopyDataset gen_copy_dataset(const CopySpec& spec, int count, std::uint64_t seed) {
  spec.validate();
  if (count < 1) throw std::invalid_argument("gen_copy_dataset: count must be >= 1");
  CopyDataset ds;
  ds.inputs.reserve(std::size_t(count));
  ds.targets.reserve(std::size_t(count));
  const int len = spec.seq_len();
  for (int s = 0; s < count; ++s) {
    auto rng = make_rng(mix_seed(seed, std::uint64_t(s)));
    std::vector<int> in(std::size_t(len), spec.blank);
    std::vector<int> tgt(std::size_t(len), spec.blank);
    for (int i = 0; i < spec.k; ++i) {
      in[std::size_t(i)] = 1 + int(uniform_index(rng, std::size_t(spec.n_digits)));
      tgt[std::size_t(spec.T + spec.k + i)] = in[std::size_t(i)];
    }
    for (int i = spec.T + spec.k; i < len; ++i) in[std::size_t(i)] = spec.delimiter;
    check_copy_sample(spec, in, tgt);
    ds.inputs.push_back(std::move(in));
    ds.targets.push_back(std::move(tgt));
  }
  return ds;
}

CopySplits gen_copy_splits(const CopySpec& spec) {
  CopySplits splits;
  splits.train = gen_copy_dataset(spec, spec.count_train, mix_seed(spec.seed, 0x7261696eull));
  splits.test = gen_copy_dataset(spec, spec.count_test, mix_seed(spec.seed, 0x74657374ull));
  return splits;
}

double random_baseline_loss(const CopySpec& spec) {
  if (spec.T < 1 || spec.k < 0 || spec.n_digits < 2) {
    throw std::invalid_argument("random_baseline_loss: bad spec");
  }
  if (spec.k == 0) return 0.0;
  return double(spec.k) * std::log(double(spec.n_digits - 1)) / double(spec.T + 2 * spec.k);
}

ParityDataset gen_parity_dataset(int length, int count, std::uint64_t seed) {
  if (length < 1) throw std::invalid_argument("gen_parity_dataset: length must be >= 1");
  if (count < 1) throw std::invalid_argument("gen_parity_dataset: count must be >= 1");
  ParityDataset ds;
  ds.sequences.reserve(std::size_t(count));
  ds.labels.reserve(std::size_t(count));
  for (int s = 0; s < count; ++s) {
    auto rng = make_rng(mix_seed(seed, std::uint64_t(s)));
    const int want = s % 2;
    std::vector<int> bits(std::size_t(length), 0);
    int ones = 0;
    for (int i = 0; i + 1 < length; ++i) {
      bits[std::size_t(i)] = int(uniform_index(rng, 2));
      ones += bits[std::size_t(i)];
    }
    bits[std::size_t(length - 1)] = (ones % 2 == want) ? 0 : 1;
    ds.sequences.push_back(std::move(bits));
    ds.labels.push_back(want);
  }
  return ds;
}

TokenCorpus corpus_from_lines(const std::vector<std::string>& lines, int vocab_limit) {
  if (vocab_limit < 5) {
    throw std::invalid_argument("corpus: vocab_limit must leave room beyond the specials");
  }
  std::unordered_map<std::string, std::int64_t> freq;
  std::vector<std::vector<std::string>> tokenized;
  tokenized.reserve(lines.size());
  for (const std::string& line : lines) {
    std::istringstream in(line);
    std::vector<std::string> toks;
    std::string tok;
    while (in >> tok) {
      ++freq[tok];
      toks.push_back(std::move(tok));
      tok.clear();
    }
    if (!toks.empty()) tokenized.push_back(std::move(toks));
  }
  if (tokenized.empty()) throw std::runtime_error("corpus: no tokens found");

  std::vector<std::pair<std::string, std::int64_t>> ranked(freq.begin(), freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  TokenCorpus corpus;
  corpus.id_to_token = {"<pad>", "<unk>", "<bos>", "<eos>"};
  const std::size_t budget = std::size_t(vocab_limit) - corpus.id_to_token.size();
  for (std::size_t i = 0; i < ranked.size() && i < budget; ++i) {
    corpus.id_to_token.push_back(ranked[i].first);
  }
  for (std::size_t i = 0; i < corpus.id_to_token.size(); ++i) {
    corpus.vocab[corpus.id_to_token[i]] = int(i);
  }
  corpus.sequences.reserve(tokenized.size());
  for (const auto& toks : tokenized) {
    std::vector<int> ids;
    ids.reserve(toks.size());
    for (const std::string& t : toks) {
      auto it = corpus.vocab.find(t);
      ids.push_back(it != corpus.vocab.end() ? it->second : TokenCorpus::kUnk);
    }
    corpus.sequences.push_back(std::move(ids));
  }
  return corpus;
}

namespace {

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

}  // namespace

TokenCorpus load_token_corpus(const std::string& path, int vocab_limit) {
  return corpus_from_lines(read_lines(path), vocab_limit);
}

std::vector<std::vector<int>> encode_lines(const TokenCorpus& corpus,
                                           const std::vector<std::string>& lines) {
  std::vector<std::vector<int>> out;
  out.reserve(lines.size());
  for (const std::string& line : lines) {
    std::istringstream in(line);
    std::vector<int> ids;
    std::string tok;
    while (in >> tok) {
      auto it = corpus.vocab.find(tok);
      ids.push_back(it != corpus.vocab.end() ? it->second : TokenCorpus::kUnk);
    }
    if (!ids.empty()) out.push_back(std::move(ids));
  }
  return out;
}

std::vector<std::vector<int>> encode_file(const TokenCorpus& corpus, const std::string& path) {
  return encode_lines(corpus, read_lines(path));
}

void save_int_lines(const std::string& path, const std::vector<std::vector<int>>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ' ';
      out << row[i];
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::vector<std::vector<int>> load_int_lines(const std::string& path) {
  std::vector<std::vector<int>> rows;
  for (const std::string& line : read_lines(path)) {
    std::istringstream in(line);
    std::vector<int> row;
    long long v = 0;
    while (in >> v) row.push_back(int(v));
    if (!in.eof()) throw std::runtime_error("non-integer token in " + path);
    if (!row.empty()) rows.push_back(std::move(row));
  }
  return rows;
}

void save_int_scalars(const std::string& path, const std::vector<int>& values) {
  std::vector<std::vector<int>> rows;
  rows.reserve(values.size());
  for (int v : values) rows.push_back({v});
  save_int_lines(path, rows);
}

std::vector<int> load_int_scalars(const std::string& path) {
  std::vector<int> out;
  for (const auto& row : load_int_lines(path)) {
    if (row.size() != 1) throw std::runtime_error("expected one integer per line in " + path);
    out.push_back(row[0]);
  }
  return out;
}

}  // namespace qrnn
