#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "lass/vocab.hpp"

namespace lass::query {

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

Vocabulary::Vocabulary(const std::vector<std::string>& tokens) {
  tokens_ = {"<PAD>", "<SOS>", "<UNK>"};
  for (const auto& t : tokens) {
    if (index_.count(t))
      throw std::invalid_argument("vocabulary: duplicate token '" + t + "'");
    index_[t] = static_cast<int>(tokens_.size());
    tokens_.push_back(t);
  }
}

Vocabulary Vocabulary::from_text(const std::string& text) {
  std::vector<std::string> toks;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) toks.push_back(line);
  }
  return Vocabulary(toks);
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("vocabulary: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_text(buf.str());
}

std::string Vocabulary::to_text() const {
  std::string out;
  for (size_t i = kReserved; i < tokens_.size(); ++i) {
    out += tokens_[i];
    out += '\n';
  }
  return out;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("vocabulary: cannot write " + path);
  out << to_text();
}

int Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<size_t>(id) >= tokens_.size())
    throw std::out_of_range("vocabulary: id " + std::to_string(id) + " out of range");
  return tokens_[static_cast<size_t>(id)];
}

namespace {

// Decodes one UTF-8 codepoint; advances i. Malformed bytes come back verbatim.
uint32_t next_codepoint(const std::string& s, size_t& i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  size_t extra = 0;
  uint32_t cp = b0;
  if (b0 >= 0xF0) {
    extra = 3;
    cp = b0 & 0x07u;
  } else if (b0 >= 0xE0) {
    extra = 2;
    cp = b0 & 0x0Fu;
  } else if (b0 >= 0xC0) {
    extra = 1;
    cp = b0 & 0x1Fu;
  }
  if (i + extra >= s.size()) {
    ++i;
    return b0;
  }
  for (size_t k = 1; k <= extra; ++k) cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3Fu);
  i += extra + 1;
  return cp;
}

bool is_space_cp(uint32_t cp) {
  return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == '\f' || cp == '\v' ||
         cp == 0xA0 || (cp >= 0x2000 && cp <= 0x200A) || cp == 0x3000;
}

// ASCII punctuation plus the common general-punctuation codepoints; a
// pragmatic stand-in for the full Unicode P categories at this corpus size.
bool is_punct_cp(uint32_t cp) {
  if (cp < 0x80)
    return (cp >= '!' && cp <= '/') || (cp >= ':' && cp <= '@') || (cp >= '[' && cp <= '`') ||
           (cp >= '{' && cp <= '~');
  return cp == 0xA1 || cp == 0xAB || cp == 0xBB || cp == 0xBF ||
         (cp >= 0x2010 && cp <= 0x2027) || (cp >= 0x2030 && cp <= 0x205E) ||
         (cp >= 0x3001 && cp <= 0x303F);
}

void append_codepoint(std::string& out, uint32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

}  // namespace

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> words;
  std::string cur;
  size_t i = 0;
  while (i < text.size()) {
    uint32_t cp = next_codepoint(text, i);
    if (is_space_cp(cp)) {
      if (!cur.empty()) {
        words.push_back(cur);
        cur.clear();
      }
      continue;
    }
    if (is_punct_cp(cp)) continue;
    if (cp >= 'A' && cp <= 'Z') cp += 'a' - 'A';
    append_codepoint(cur, cp);
  }
  if (!cur.empty()) words.push_back(cur);
  return words;
}

TokenSequence tokenize(const std::string& text, const Vocabulary& vocab) {
  TokenSequence seq;
  seq.ids.push_back(Vocabulary::kSos);
  for (const auto& w : split_words(text)) seq.ids.push_back(vocab.id(w));
  return seq;
}

}  // namespace lass::query
