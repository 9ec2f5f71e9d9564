#include "xgft/vocab.hpp"

#include <fstream>
#include <sstream>

namespace xgft {

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  check(in.good(), "vocabulary: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_string(ss.str());
}

Vocabulary Vocabulary::from_string(const std::string& text) {
  Vocabulary v;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string word, cat;
    if (!(ls >> word) || word[0] == '#') continue;
    check(static_cast<bool>(ls >> cat), "vocabulary: missing category for '" + word + "'");
    WordCat c;
    if (cat == "object")
      c = WordCat::Object;
    else if (cat == "spatial")
      c = WordCat::Spatial;
    else if (cat == "grammatical")
      c = WordCat::Grammatical;
    else
      throw Error("vocabulary: unknown category '" + cat + "'");
    check(!v.contains(word), "vocabulary: duplicate word '" + word + "'");
    const int id = v.size();
    v.words_.push_back(word);
    v.cats_.push_back(c);
    v.index_[word] = id;
    if (c == WordCat::Object) {
      v.class_by_word_[id] = static_cast<int>(v.object_ids_.size());
      v.object_ids_.push_back(id);
    }
  }
  check(v.size() > 0, "vocabulary: empty");
  return v;
}

int Vocabulary::id(const std::string& w) const {
  auto it = index_.find(w);
  check(it != index_.end(), "vocabulary: unknown token '" + w + "'");
  return it->second;
}

int Vocabulary::class_of_word(int word_id) const {
  auto it = class_by_word_.find(word_id);
  check(it != class_by_word_.end(), "vocabulary: word " + std::to_string(word_id) +
                                        " is not an object word");
  return it->second;
}

std::vector<int> Vocabulary::tokenize(const std::string& sentence) const {
  std::istringstream ss(sentence);
  std::vector<int> out;
  std::string w;
  while (ss >> w) out.push_back(id(w));
  return out;
}

std::string Vocabulary::detokenize(const std::vector<int>& tokens) const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += word(tokens[i]);
  }
  return out;
}

}  // namespace xgft
