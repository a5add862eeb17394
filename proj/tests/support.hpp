#pragma once

// Test-only helpers: fixture loading and oracles that do not go through the
// automaton construction they check.

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "moon/automaton.hpp"
#include "moon/notebook.hpp"
#include "moon/script.hpp"
#include "moon/session.hpp"

namespace moon::test {

inline const char* kImageCourseScript =
    "((C1~T0 C3~T2 C5~T4 C7~T6 C3 C5 C7 ?C10~T9)[(C12~T11 C14~T13)(C16~T15 C18~T17)])";
inline const char* kImageCoursePlain = "((C1 C3 C5 C7 C3 C5 C7 ?C10)[(C12 C14)(C16 C18)])";
inline const char* kPartsScript = "(C7 ?C10 [(C12 C14)(C16 C18)])";

inline std::string data_path(const std::string& name) { return std::string(MOON_TEST_DATA) + "/" + name; }

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline NotebookDoc load_notebook(const std::string& name) { return NotebookDoc::parse(read_file(data_path(name))); }

/// Minimal notebook from a kind pattern such as "tctc" (t = markdown, c = code).
inline NotebookDoc make_notebook(const std::string& kinds) {
  Json cells = Json::array();
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    Json c{{"cell_type", kinds[i] == 'c' ? "code" : "markdown"}, {"metadata", Json::object()},
           {"source", "cell " + std::to_string(i)}};
    if (kinds[i] == 'c') {
      c["execution_count"] = nullptr;
      c["outputs"] = Json::array();
    }
    cells.push_back(std::move(c));
  }
  Json nb{{"cells", cells}, {"metadata", Json::object()}, {"nbformat", 4}, {"nbformat_minor", 4}};
  return NotebookDoc::parse(nb.dump());
}

/// Notebook whose every cell is code, for scripts over C0..C(n-1).
inline NotebookDoc code_notebook(std::size_t n) { return make_notebook(std::string(n, 'c')); }

inline std::vector<CellRef> cells(std::initializer_list<std::size_t> idx) {
  std::vector<CellRef> out;
  for (auto i : idx) out.push_back(CellRef::code(i));
  return out;
}

using Word = std::vector<CellRef>;
using Language = std::set<Word>;

/// Language of a script obtained by expanding Opt/Any/Seq syntactically.
inline Language expand_language(const Node& n) {
  auto concat = [](const Language& a, const Language& b) {
    Language out;
    for (const auto& x : a)
      for (const auto& y : b) {
        Word w = x;
        w.insert(w.end(), y.begin(), y.end());
        out.insert(std::move(w));
      }
    return out;
  };
  switch (n.kind) {
    case Node::Kind::Cell:
      return {{n.code}};
    case Node::Kind::Opt: {
      Language l = expand_language(n.child());
      l.insert(Word{});
      return l;
    }
    case Node::Kind::Seq: {
      Language l{Word{}};
      for (const auto& c : n.children) l = concat(l, expand_language(c));
      return l;
    }
    case Node::Kind::Alt: {
      Language l;
      for (const auto& c : n.children) l.merge(expand_language(c));
      return l;
    }
    case Node::Kind::Any: {
      std::vector<Language> parts;
      for (const auto& c : n.children) parts.push_back(expand_language(c));
      std::vector<std::size_t> order(parts.size());
      std::iota(order.begin(), order.end(), 0);
      Language l;
      do {
        Language acc{Word{}};
        for (auto i : order) acc = concat(acc, parts[i]);
        l.merge(acc);
      } while (std::next_permutation(order.begin(), order.end()));
      return l;
    }
  }
  return {};
}

/// Guidance semantics evaluated on the language itself: a state is the
/// sequence of accepted steps, a step is valid iff it extends a prefix of
/// some word.
class PrefixGuide {
 public:
  explicit PrefixGuide(const Language& lang) : lang_(&lang) {}

  Classification execute(CellRef c) {
    Word w = trace_;
    w.push_back(c);
    if (is_prefix(w)) {
      trace_ = std::move(w);
      return Classification::Advance;
    }
    if (!trace_.empty() && trace_.back() == c) return Classification::ReexecStay;
    for (std::size_t i = trace_.size(); i-- > 0;) {
      if (trace_[i] == c) {
        trace_.resize(i + 1);
        return Classification::Backtrack;
      }
    }
    return Classification::Deviation;
  }

  bool is_prefix(const Word& w) const {
    auto it = lang_->lower_bound(w);
    return it != lang_->end() && it->size() >= w.size() && std::equal(w.begin(), w.end(), it->begin());
  }

  bool complete() const { return lang_->count(trace_) > 0; }
  const Word& trace() const { return trace_; }

 private:
  const Language* lang_;
  Word trace_;
};

/// Random scripts: depth <= max_depth, any-order groups <= 4, at most
/// `budget` cell occurrences over C0..C(pool-1).
class ScriptGenerator {
 public:
  ScriptGenerator(std::uint32_t seed, std::size_t pool) : rng_(seed), pool_(pool) {}

  Node generate(int max_depth, int budget) { return node(max_depth, budget); }

  std::mt19937& rng() { return rng_; }

 private:
  std::mt19937 rng_;
  std::size_t pool_;

  int uniform(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

  Node node(int depth, int& budget) {
    int choice = depth <= 0 || budget <= 1 ? uniform(0, 1) : uniform(0, 5);
    if (budget <= 0) choice = 0;
    switch (choice) {
      case 1:
        return Node::opt(leafish(depth, budget));
      case 2:
      case 3:
      case 4: {
        const int k = uniform(1, std::min(4, budget));
        std::vector<Node> kids;
        for (int i = 0; i < k; ++i) {
          int local = budget - (k - i - 1);
          const int before = local;
          kids.push_back(node(depth - 1, local));
          budget -= before - local;
        }
        return choice == 4 ? Node::any(std::move(kids)) : Node::seq(std::move(kids));
      }
      case 5:
        return Node::opt(node(depth - 1, budget));
      default:
        --budget;
        return Node::cell(CellRef::code(static_cast<std::size_t>(uniform(0, static_cast<int>(pool_) - 1))));
    }
  }

  Node leafish(int, int& budget) {
    --budget;
    return Node::cell(CellRef::code(static_cast<std::size_t>(uniform(0, static_cast<int>(pool_) - 1))));
  }
};

/// (source, symbol, target) triples of an automaton.
inline std::set<std::tuple<StateId, std::size_t, StateId>> edge_set(const Dfa& dfa) {
  std::set<std::tuple<StateId, std::size_t, StateId>> out;
  for (StateId s = 0; s < dfa.state_count(); ++s)
    for (const auto& [sym, to] : dfa.transitions(s)) out.emplace(s, sym.index, to);
  return out;
}

/// Transcription of the reference three-part automaton, re-execution loops included.
inline std::set<std::tuple<StateId, std::size_t, StateId>> reference_parts_automaton(bool with_loops) {
  std::set<std::tuple<StateId, std::size_t, StateId>> e{
      {0, 7, 1},  {1, 10, 2}, {1, 12, 3}, {1, 16, 6}, {2, 12, 3}, {2, 16, 6},
      {3, 14, 4}, {4, 16, 5}, {5, 18, 9}, {6, 18, 7}, {7, 12, 8}, {8, 14, 9},
  };
  if (with_loops) {
    for (auto [q, c] : std::vector<std::pair<StateId, std::size_t>>{
             {1, 7}, {2, 10}, {3, 12}, {4, 14}, {5, 16}, {6, 16}, {7, 18}, {8, 12}})
      e.emplace(q, c, q);
  }
  return e;
}

/// Deterministic automata with designated starts are isomorphic iff the
/// simultaneous walk from both starts induces a consistent bijection.
inline bool isomorphic(const Dfa& dfa, const std::set<std::tuple<StateId, std::size_t, StateId>>& edges,
                       StateId other_start, const std::set<StateId>& other_accepting) {
  std::map<StateId, std::map<std::size_t, StateId>> other;
  std::set<StateId> other_states{other_start};
  for (auto [s, c, t] : edges) {
    other[s][c] = t;
    other_states.insert(s);
    other_states.insert(t);
  }
  if (other_states.size() != dfa.state_count() || edges.size() != dfa.transition_count()) return false;
  std::map<StateId, StateId> fwd, back;
  std::vector<std::pair<StateId, StateId>> work{{dfa.start(), other_start}};
  fwd[dfa.start()] = other_start;
  back[other_start] = dfa.start();
  while (!work.empty()) {
    auto [a, b] = work.back();
    work.pop_back();
    if (dfa.is_accepting(a) != (other_accepting.count(b) > 0)) return false;
    const auto& row = dfa.transitions(a);
    if (row.size() != other[b].size()) return false;
    for (const auto& [sym, ta] : row) {
      auto it = other[b].find(sym.index);
      if (it == other[b].end()) return false;
      StateId tb = it->second;
      auto f = fwd.find(ta);
      auto r = back.find(tb);
      if (f == fwd.end() && r == back.end()) {
        fwd[ta] = tb;
        back[tb] = ta;
        work.emplace_back(ta, tb);
      } else if (f == fwd.end() || r == back.end() || f->second != tb || r->second != ta) {
        return false;
      }
    }
  }
  return fwd.size() == dfa.state_count();
}

}  // namespace moon::test
