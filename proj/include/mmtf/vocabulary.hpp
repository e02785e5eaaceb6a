#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mmtf {

// Lowercases ASCII, splits on whitespace and removes ASCII punctuation.
// Tokens that become empty are dropped.
std::vector<std::string> tokenize(std::string_view text);

class TokenVocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kCls = 1;
  static constexpr std::size_t kSep = 2;
  static constexpr std::size_t kUnk = 3;
  static constexpr std::size_t kReserved = 4;

  TokenVocabulary();
  // Rebuilds from an id-ordered token list (first four must be the reserved
  // tokens). Used when restoring checkpoints.
  static TokenVocabulary from_tokens(std::vector<std::string> tokens);
  // Ids assigned by descending frequency, ties lexicographic, after the
  // reserved ids. Every token seen at least once is kept.
  static TokenVocabulary build(const std::vector<std::string>& texts);

  std::size_t id(std::string_view token) const;  // kUnk when unseen
  const std::string& token(std::size_t id) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  bool operator==(const TokenVocabulary& other) const {
    return tokens_ == other.tokens_;
  }

 private:
  struct Unchecked {};
  TokenVocabulary(Unchecked, std::vector<std::string> tokens)
      : tokens_(std::move(tokens)) {}

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> ids_;
};

}  // namespace mmtf
