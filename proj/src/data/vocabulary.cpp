#include "mmtf/vocabulary.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "mmtf/errors.hpp"

namespace mmtf {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isspace(u)) {
      flush();
    } else if (u < 0x80 && std::ispunct(u)) {
      continue;
    } else {
      current.push_back(u < 0x80 ? static_cast<char>(std::tolower(u)) : c);
    }
  }
  flush();
  return tokens;
}

TokenVocabulary::TokenVocabulary()
    : TokenVocabulary(from_tokens({"[PAD]", "[CLS]", "[SEP]", "[UNK]"})) {}

TokenVocabulary TokenVocabulary::from_tokens(std::vector<std::string> tokens) {
  static const std::vector<std::string> reserved = {"[PAD]", "[CLS]", "[SEP]",
                                                    "[UNK]"};
  if (tokens.size() < kReserved ||
      !std::equal(reserved.begin(), reserved.end(), tokens.begin())) {
    throw FormatError("token vocabulary must start with the reserved tokens");
  }
  TokenVocabulary vocab(Unchecked{}, std::move(tokens));
  for (std::size_t i = 0; i < vocab.tokens_.size(); ++i) {
    if (!vocab.ids_.emplace(vocab.tokens_[i], i).second) {
      throw FormatError("duplicate token '" + vocab.tokens_[i] +
                        "' in vocabulary");
    }
  }
  return vocab;
}

TokenVocabulary TokenVocabulary::build(const std::vector<std::string>& texts) {
  std::map<std::string, std::size_t> counts;
  for (const auto& text : texts) {
    for (auto& tok : tokenize(text)) ++counts[tok];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(),
                                                          counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens = {"[PAD]", "[CLS]", "[SEP]", "[UNK]"};
  for (auto& [tok, n] : ranked) tokens.push_back(tok);
  return from_tokens(std::move(tokens));
}

std::size_t TokenVocabulary::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnk : it->second;
}

const std::string& TokenVocabulary::token(std::size_t id) const {
  if (id >= tokens_.size()) {
    throw LabelError("token id " + std::to_string(id) +
                     " outside vocabulary of " + std::to_string(tokens_.size()));
  }
  return tokens_[id];
}

}  // namespace mmtf
