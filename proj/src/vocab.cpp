#include "vocab.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace groundnet {

Vocabulary::Vocabulary(const std::vector<std::string>& tokens) {
  for (const std::string& t : tokens) {
    if (index_.count(t)) continue;
    index_[t] = static_cast<int>(tokens_.size()) + 2;
    tokens_.push_back(t);
  }
}

int Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kOovId : it->second;
}

bool Vocabulary::contains(const std::string& token) const {
  return index_.count(token) > 0;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 2 || id >= size()) {
    throw InputError("vocabulary: id " + std::to_string(id) +
                     " has no token");
  }
  return tokens_[id - 2];
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw IoError("vocabulary: cannot write '" + path + "'");
  for (const std::string& t : tokens_) os << t << "\n";
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("vocabulary: cannot open '" + path + "'");
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty()) tokens.push_back(line);
  }
  return Vocabulary(tokens);
}

std::vector<std::string> tokenize(const std::string& text) {
  static const std::string punct = ".,!?;:";
  std::istringstream is(text);
  std::vector<std::string> out;
  std::string w;
  while (is >> w) {
    std::transform(w.begin(), w.end(), w.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    while (!w.empty() && punct.find(w.back()) != std::string::npos) {
      w.pop_back();
    }
    if (!w.empty()) out.push_back(w);
  }
  if (out.empty()) {
    throw InputError("tokenize: empty or whitespace-only text");
  }
  return out;
}

std::string detokenize(const std::vector<std::string>& tokens) {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::vector<int> encode_tokens(const Vocabulary& vocab,
                               const std::vector<std::string>& tokens) {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const std::string& t : tokens) ids.push_back(vocab.id(t));
  return ids;
}

}  // namespace groundnet
