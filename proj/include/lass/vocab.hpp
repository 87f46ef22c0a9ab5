#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace lass::query {

// Word-level vocabulary with fixed reserved ids. Ids are dense: reserved
// tokens first, then the corpus tokens in the order they were given.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kSos = 1;
  static constexpr int kUnk = 2;
  static constexpr int kReserved = 3;

  Vocabulary();
  explicit Vocabulary(const std::vector<std::string>& tokens);

  // One token per line; line number = id - kReserved.
  static Vocabulary load(const std::string& path);
  static Vocabulary from_text(const std::string& text);
  void save(const std::string& path) const;
  std::string to_text() const;

  int id(const std::string& token) const;  // kUnk when absent
  const std::string& token(int id) const;
  size_t size() const { return tokens_.size(); }

 private:
  std::vector<std::string> tokens_;  // index = id
  std::unordered_map<std::string, int> index_;
};

struct TokenSequence {
  std::vector<int> ids;  // first element is always <SOS>
  size_t length() const { return ids.size(); }
};

// Lowercases, removes punctuation, splits on whitespace.
std::vector<std::string> split_words(const std::string& text);

// split_words + <SOS> prefix + vocabulary lookup (OOV -> <UNK>).
TokenSequence tokenize(const std::string& text, const Vocabulary& vocab);

}  // namespace lass::query
