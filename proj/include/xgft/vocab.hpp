#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "xgft/tensor.hpp"

namespace xgft {

enum class WordCat : std::uint8_t { Object = 0, Spatial = 1, Grammatical = 2 };

// Word list with category tags, loaded from one-word-per-line files:
//   <word> <object|spatial|grammatical>
// Word ids are line order and stable across runs.
class Vocabulary {
 public:
  static Vocabulary load(const std::string& path);
  static Vocabulary from_string(const std::string& text);

  int size() const { return static_cast<int>(words_.size()); }
  const std::string& word(int id) const {
    return words_[static_cast<std::size_t>(id)];
  }
  WordCat category(int id) const { return cats_[static_cast<std::size_t>(id)]; }

  bool contains(const std::string& w) const { return index_.count(w) != 0; }
  // Throws naming the offending token when the word is unknown.
  int id(const std::string& w) const;

  const std::vector<int>& object_ids() const { return object_ids_; }
  int object_count() const { return static_cast<int>(object_ids_.size()); }
  // class index <-> object word id
  int object_word(int cls) const {
    return object_ids_[static_cast<std::size_t>(cls)];
  }
  int class_of_word(int word_id) const;

  // Whitespace tokenization followed by vocabulary lookup.
  std::vector<int> tokenize(const std::string& sentence) const;
  std::string detokenize(const std::vector<int>& tokens) const;

 private:
  std::vector<std::string> words_;
  std::vector<WordCat> cats_;
  std::unordered_map<std::string, int> index_;
  std::vector<int> object_ids_;
  std::unordered_map<int, int> class_by_word_;
};

}  // namespace xgft
