#pragma once

#include <cctype>
#include <string>
#include <vector>

#include "emofuse/error.hpp"
#include "emofuse/hash.hpp"

namespace emofuse {

struct TextHeadConfig {
  int embedding_dim = 768;  // fixed by the encoder
  int max_seq_len = 124;
  std::vector<int> head_widths = {256, 64};
  int n_classes = 4;
  std::string optimizer = "adam";
  double learning_rate = 1e-5;
  int batch_size = 8;

  void validate() const {
    if (max_seq_len < 1) throw ConfigError("text head: max_seq_len >= 1");
    if (embedding_dim < 1) throw ConfigError("text head: embedding_dim >= 1");
    if (head_widths.empty()) throw ConfigError("text head: head widths required");
  }
};

struct TokenSequence {
  std::vector<int> ids;     // length in [1, max_seq_len]
  bool truncated = false;
  bool empty_input = false;  // replaced by a single padding token, flagged
};

// Hashing tokenizer for the stand-in text encoder: lowercase, split on
// non-alphanumerics, FNV hash into [1, vocab); id 0 stays the padding token.
inline TokenSequence tokenize(const std::string& text, int max_seq_len,
                              std::size_t vocab_size) {
  if (vocab_size < 2) throw ConfigError("tokenize: vocab_size >= 2");
  TokenSequence out;
  std::string word;
  auto flush = [&] {
    if (word.empty()) return;
    if (static_cast<int>(out.ids.size()) < max_seq_len) {
      auto h = fnv1a64(word);
      out.ids.push_back(1 + static_cast<int>(h % (vocab_size - 1)));
    } else {
      out.truncated = true;
    }
    word.clear();
  };
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c)))
      word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    else
      flush();
  }
  flush();
  if (out.ids.empty()) {
    out.ids.push_back(0);
    out.empty_input = true;
  }
  return out;
}

}  // namespace emofuse
