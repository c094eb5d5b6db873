#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "errors.hpp"

namespace groundnet {

// Token ids: 0 = padding, 1 = out-of-vocabulary, 2.. = corpus tokens in
// insertion order. Frozen after construction.
class Vocabulary {
 public:
  static constexpr int kPadId = 0;
  static constexpr int kOovId = 1;

  Vocabulary() = default;
  explicit Vocabulary(const std::vector<std::string>& tokens);

  int id(const std::string& token) const;  // kOovId when absent
  bool contains(const std::string& token) const;
  const std::string& token(int id) const;  // ids >= 2
  int size() const { return static_cast<int>(tokens_.size()) + 2; }

  // Text file, one token per line; line number equals id - 2.
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

// Lowercases, splits on whitespace, strips trailing punctuation.
std::vector<std::string> tokenize(const std::string& text);
std::string detokenize(const std::vector<std::string>& tokens);

std::vector<int> encode_tokens(const Vocabulary& vocab,
                               const std::vector<std::string>& tokens);

}  // namespace groundnet
