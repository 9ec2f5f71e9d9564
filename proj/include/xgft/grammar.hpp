#pragma once

#include <optional>
#include <string>
#include <vector>

#include "xgft/rng.hpp"
#include "xgft/vocab.hpp"

namespace xgft {

// Finite CFG over the vocabulary, loaded from text files with one production
// per line:
//   NONTERM -> alt1 tokens | alt2 tokens
// A symbol is a nonterminal iff it appears on some left-hand side; $OBJ is an
// object-word slot; everything else must be a vocabulary word. Recursive
// grammars are rejected, and every sentence derivable from a start symbol
// must have between 1 and 15 tokens.
class Grammar {
 public:
  static Grammar load(const std::string& path, const Vocabulary& vocab);
  static Grammar from_string(const std::string& text, const Vocabulary& vocab);

  bool has_symbol(const std::string& name) const;

  int min_length(const std::string& start) const;
  int max_length(const std::string& start) const;
  int min_slots(const std::string& start) const;
  int max_slots(const std::string& start) const;

  // Exact number of distinct token sequences derivable from the given start
  // symbols (duplicates within and across symbols counted once). Expansion
  // beyond `cap` sentences is rejected.
  long count_distinct(const std::vector<std::string>& starts,
                      long cap = 2000000) const;
  // Full expansion of one start symbol, deduplicated.
  std::vector<std::vector<int>> enumerate(const std::string& start,
                                          long cap = 2000000) const;

  // Uniform random derivation with $OBJ slots filled from `obj_words` in
  // derivation order. When required_dir_word >= 0, resamples until the
  // sentence contains that direction word (bounded retries).
  std::vector<int> sample(const std::string& start,
                          const std::vector<int>& obj_words,
                          int required_dir_word, Rng& rng) const;

  struct ParseResult {
    std::string start;
    std::vector<int> obj_words;  // slot captures in sentence order
    int dir_word = -1;           // unique direction word, when present
  };
  // Matches the token sequence against each candidate start symbol; exactly
  // one may accept, and all derivations must agree on the captures.
  std::optional<ParseResult> parse(const std::vector<int>& tokens,
                                   const std::vector<std::string>& starts) const;

  const Vocabulary& vocab() const { return *vocab_; }
  // Direction words recognized for spatial commands: left/right/front/behind.
  const std::vector<int>& direction_words() const { return dir_words_; }

 private:
  struct Sym {
    enum Kind { Word, NonTerm, ObjSlot } kind = Word;
    int word = -1;
    int nt = -1;
  };
  struct Alt {
    std::vector<Sym> syms;
  };

  int nt_index(const std::string& name) const;
  void validate();
  void expand_nt(int nt, std::vector<std::vector<std::vector<int>>>& memo,
                 long cap) const;
  std::vector<std::pair<int, std::vector<int>>> match_seq(
      const std::vector<Sym>& syms, std::size_t si,
      const std::vector<int>& toks, int pos) const;

  std::vector<std::string> nt_names_;
  std::vector<std::vector<Alt>> rules_;
  std::vector<int> min_len_, max_len_, min_slots_, max_slots_;
  std::vector<int> dir_words_;
  const Vocabulary* vocab_ = nullptr;
};

}  // namespace xgft
