#include "xgft/grammar.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <unordered_map>

namespace xgft {

namespace {
std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream ss(s);
  std::vector<std::string> out;
  std::string w;
  while (ss >> w) out.push_back(w);
  return out;
}
}  // namespace

Grammar Grammar::load(const std::string& path, const Vocabulary& vocab) {
  std::ifstream in(path);
  check(in.good(), "grammar: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_string(ss.str(), vocab);
}

Grammar Grammar::from_string(const std::string& text, const Vocabulary& vocab) {
  Grammar g;
  g.vocab_ = &vocab;
  for (const char* w : {"left", "right", "front", "behind"})
    if (vocab.contains(w)) g.dir_words_.push_back(vocab.id(w));

  struct RawRule {
    std::string lhs;
    std::vector<std::vector<std::string>> alts;
  };
  std::vector<RawRule> raw;
  std::unordered_map<std::string, int> lhs_index;

  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    if (split_ws(line).empty()) continue;
    const auto arrow = line.find("->");
    check(arrow != std::string::npos, "grammar: missing '->' in: " + line);
    const auto lhs_tokens = split_ws(line.substr(0, arrow));
    check(lhs_tokens.size() == 1, "grammar: bad left-hand side in: " + line);
    RawRule r;
    r.lhs = lhs_tokens[0];
    check(lhs_index.find(r.lhs) == lhs_index.end(),
          "grammar: duplicate rule for '" + r.lhs + "'");
    std::string rhs = line.substr(arrow + 2);
    std::vector<std::string> alt_tokens;
    std::istringstream rs(rhs);
    std::string tok;
    std::vector<std::vector<std::string>> alts;
    std::vector<std::string> cur;
    while (rs >> tok) {
      if (tok == "|") {
        check(!cur.empty(), "grammar: empty alternative in: " + line);
        alts.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(tok);
      }
    }
    check(!cur.empty(), "grammar: empty alternative in: " + line);
    alts.push_back(cur);
    r.alts = std::move(alts);
    lhs_index[r.lhs] = static_cast<int>(raw.size());
    raw.push_back(std::move(r));
  }
  check(!raw.empty(), "grammar: no productions");

  g.nt_names_.reserve(raw.size());
  for (const auto& r : raw) g.nt_names_.push_back(r.lhs);
  g.rules_.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    for (const auto& alt : raw[i].alts) {
      Alt a;
      for (const auto& t : alt) {
        Sym s;
        if (t == "$OBJ") {
          s.kind = Sym::ObjSlot;
        } else if (lhs_index.count(t)) {
          s.kind = Sym::NonTerm;
          s.nt = lhs_index[t];
        } else {
          s.kind = Sym::Word;
          s.word = vocab.id(t);  // throws for words outside the vocabulary
        }
        a.syms.push_back(s);
      }
      g.rules_[i].push_back(std::move(a));
    }
  }
  g.validate();
  return g;
}

int Grammar::nt_index(const std::string& name) const {
  for (std::size_t i = 0; i < nt_names_.size(); ++i)
    if (nt_names_[i] == name) return static_cast<int>(i);
  throw Error("grammar: no production for '" + name + "'");
}

bool Grammar::has_symbol(const std::string& name) const {
  for (const auto& n : nt_names_)
    if (n == name) return true;
  return false;
}

void Grammar::validate() {
  const int n = static_cast<int>(nt_names_.size());
  // cycle detection (0 = unvisited, 1 = in progress, 2 = done)
  std::vector<int> color(static_cast<std::size_t>(n), 0);
  std::vector<int> stack;
  std::function<void(int)> dfs = [&](int nt) {
    color[static_cast<std::size_t>(nt)] = 1;
    for (const auto& alt : rules_[static_cast<std::size_t>(nt)])
      for (const auto& s : alt.syms)
        if (s.kind == Sym::NonTerm) {
          if (color[static_cast<std::size_t>(s.nt)] == 1)
            throw Error("grammar: recursive production through '" +
                        nt_names_[static_cast<std::size_t>(s.nt)] + "'");
          if (color[static_cast<std::size_t>(s.nt)] == 0) dfs(s.nt);
        }
    color[static_cast<std::size_t>(nt)] = 2;
  };
  for (int i = 0; i < n; ++i)
    if (color[static_cast<std::size_t>(i)] == 0) dfs(i);

  min_len_.assign(static_cast<std::size_t>(n), -1);
  max_len_.assign(static_cast<std::size_t>(n), -1);
  min_slots_.assign(static_cast<std::size_t>(n), -1);
  max_slots_.assign(static_cast<std::size_t>(n), -1);
  std::function<void(int)> measure = [&](int nt) {
    if (min_len_[static_cast<std::size_t>(nt)] >= 0) return;
    int mn = 1 << 20, mx = 0, smn = 1 << 20, smx = 0;
    for (const auto& alt : rules_[static_cast<std::size_t>(nt)]) {
      int alt_mn = 0, alt_mx = 0, alt_smn = 0, alt_smx = 0;
      for (const auto& s : alt.syms) {
        if (s.kind == Sym::NonTerm) {
          measure(s.nt);
          alt_mn += min_len_[static_cast<std::size_t>(s.nt)];
          alt_mx += max_len_[static_cast<std::size_t>(s.nt)];
          alt_smn += min_slots_[static_cast<std::size_t>(s.nt)];
          alt_smx += max_slots_[static_cast<std::size_t>(s.nt)];
        } else {
          alt_mn += 1;
          alt_mx += 1;
          if (s.kind == Sym::ObjSlot) {
            alt_smn += 1;
            alt_smx += 1;
          }
        }
      }
      mn = std::min(mn, alt_mn);
      mx = std::max(mx, alt_mx);
      smn = std::min(smn, alt_smn);
      smx = std::max(smx, alt_smx);
    }
    min_len_[static_cast<std::size_t>(nt)] = mn;
    max_len_[static_cast<std::size_t>(nt)] = mx;
    min_slots_[static_cast<std::size_t>(nt)] = smn;
    max_slots_[static_cast<std::size_t>(nt)] = smx;
  };
  for (int i = 0; i < n; ++i) {
    measure(i);
    check(min_len_[static_cast<std::size_t>(i)] >= 1 &&
              max_len_[static_cast<std::size_t>(i)] <= 15,
          "grammar: sentences from '" + nt_names_[static_cast<std::size_t>(i)] +
              "' leave the 1..15 token range");
  }
}

int Grammar::min_length(const std::string& s) const {
  return min_len_[static_cast<std::size_t>(nt_index(s))];
}
int Grammar::max_length(const std::string& s) const {
  return max_len_[static_cast<std::size_t>(nt_index(s))];
}
int Grammar::min_slots(const std::string& s) const {
  return min_slots_[static_cast<std::size_t>(nt_index(s))];
}
int Grammar::max_slots(const std::string& s) const {
  return max_slots_[static_cast<std::size_t>(nt_index(s))];
}

void Grammar::expand_nt(int nt, std::vector<std::vector<std::vector<int>>>& memo,
                        long cap) const {
  if (!memo[static_cast<std::size_t>(nt)].empty()) return;
  std::vector<std::vector<int>> out;
  for (const auto& alt : rules_[static_cast<std::size_t>(nt)]) {
    std::vector<std::vector<int>> partial{{}};
    for (const auto& s : alt.syms) {
      std::vector<std::vector<int>> next;
      auto extend = [&](const std::vector<int>& suffix_pool_entry) {
        for (const auto& p : partial) {
          std::vector<int> seq = p;
          seq.insert(seq.end(), suffix_pool_entry.begin(),
                     suffix_pool_entry.end());
          next.push_back(std::move(seq));
          check(static_cast<long>(next.size()) <= cap,
                "grammar: expansion exceeds cap");
        }
      };
      if (s.kind == Sym::Word) {
        extend({s.word});
      } else if (s.kind == Sym::ObjSlot) {
        for (int w : vocab_->object_ids()) extend({w});
      } else {
        expand_nt(s.nt, memo, cap);
        for (const auto& sub : memo[static_cast<std::size_t>(s.nt)]) extend(sub);
      }
      partial = std::move(next);
      check(static_cast<long>(partial.size()) <= cap,
            "grammar: expansion exceeds cap");
    }
    for (auto& p : partial) out.push_back(std::move(p));
    check(static_cast<long>(out.size()) <= cap, "grammar: expansion exceeds cap");
  }
  memo[static_cast<std::size_t>(nt)] = std::move(out);
}

std::vector<std::vector<int>> Grammar::enumerate(const std::string& start,
                                                 long cap) const {
  std::vector<std::vector<std::vector<int>>> memo(nt_names_.size());
  const int nt = nt_index(start);
  expand_nt(nt, memo, cap);
  std::vector<std::vector<int>> out = memo[static_cast<std::size_t>(nt)];
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

long Grammar::count_distinct(const std::vector<std::string>& starts,
                             long cap) const {
  std::set<std::vector<int>> all;
  for (const auto& s : starts) {
    for (auto& seq : enumerate(s, cap)) all.insert(std::move(seq));
    check(static_cast<long>(all.size()) <= cap, "grammar: expansion exceeds cap");
  }
  return static_cast<long>(all.size());
}

std::vector<int> Grammar::sample(const std::string& start,
                                 const std::vector<int>& obj_words,
                                 int required_dir_word, Rng& rng) const {
  const int nt = nt_index(start);
  for (int attempt = 0; attempt < 300; ++attempt) {
    std::vector<int> tokens;
    std::size_t slot = 0;
    bool ok = true;
    std::function<void(int)> derive = [&](int cur) {
      const auto& alts = rules_[static_cast<std::size_t>(cur)];
      const auto& alt =
          alts[static_cast<std::size_t>(rng.below(static_cast<int>(alts.size())))];
      for (const auto& s : alt.syms) {
        if (s.kind == Sym::Word) {
          tokens.push_back(s.word);
        } else if (s.kind == Sym::ObjSlot) {
          if (slot >= obj_words.size()) {
            ok = false;
            return;
          }
          tokens.push_back(obj_words[slot++]);
        } else {
          derive(s.nt);
          if (!ok) return;
        }
      }
    };
    derive(nt);
    if (!ok || slot != obj_words.size()) continue;
    if (required_dir_word >= 0) {
      int found = -1;
      for (int t : tokens)
        for (int d : dir_words_)
          if (t == d) found = t;
      if (found != required_dir_word) continue;
    }
    return tokens;
  }
  throw Error("grammar: cannot derive a sentence for '" + start +
              "' matching the requested referents");
}

std::vector<std::pair<int, std::vector<int>>> Grammar::match_seq(
    const std::vector<Sym>& syms, std::size_t si, const std::vector<int>& toks,
    int pos) const {
  if (si == syms.size()) return {{pos, {}}};
  std::vector<std::pair<int, std::vector<int>>> results;
  const Sym& s = syms[si];
  if (s.kind == Sym::Word) {
    if (pos < static_cast<int>(toks.size()) &&
        toks[static_cast<std::size_t>(pos)] == s.word)
      return match_seq(syms, si + 1, toks, pos + 1);
    return {};
  }
  if (s.kind == Sym::ObjSlot) {
    if (pos < static_cast<int>(toks.size()) &&
        vocab_->category(toks[static_cast<std::size_t>(pos)]) == WordCat::Object) {
      for (auto& [end, caps] : match_seq(syms, si + 1, toks, pos + 1)) {
        std::vector<int> c{toks[static_cast<std::size_t>(pos)]};
        c.insert(c.end(), caps.begin(), caps.end());
        results.push_back({end, std::move(c)});
      }
    }
    return results;
  }
  for (const auto& alt : rules_[static_cast<std::size_t>(s.nt)]) {
    for (auto& [mid, caps1] : match_seq(alt.syms, 0, toks, pos)) {
      for (auto& [end, caps2] : match_seq(syms, si + 1, toks, mid)) {
        std::vector<int> c = caps1;
        c.insert(c.end(), caps2.begin(), caps2.end());
        results.push_back({end, std::move(c)});
      }
    }
  }
  return results;
}

std::optional<Grammar::ParseResult> Grammar::parse(
    const std::vector<int>& tokens,
    const std::vector<std::string>& starts) const {
  std::optional<ParseResult> found;
  for (const auto& start : starts) {
    const int nt = nt_index(start);
    std::vector<Sym> root{Sym{Sym::NonTerm, -1, nt}};
    std::set<std::vector<int>> captures;
    for (auto& [end, caps] : match_seq(root, 0, tokens, 0))
      if (end == static_cast<int>(tokens.size())) captures.insert(caps);
    if (captures.empty()) continue;
    check(captures.size() == 1,
          "grammar: ambiguous captures parsing under '" + start + "'");
    check(!found, "grammar: sentence parses under two tasks");
    ParseResult r;
    r.start = start;
    r.obj_words = *captures.begin();
    for (int t : tokens)
      for (int d : dir_words_)
        if (t == d) {
          check(r.dir_word == -1, "grammar: two direction words in one sentence");
          r.dir_word = t;
        }
    found = std::move(r);
  }
  return found;
}

}  // namespace xgft
