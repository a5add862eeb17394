#include "moon/automaton.hpp"

#include <algorithm>
#include <deque>
#include <limits>
#include <numeric>
#include <sstream>

#include "moon/error.hpp"

namespace moon {

StateId Dfa::add_state(bool accepting) {
  rows_.emplace_back();
  accepting_.push_back(accepting);
  return static_cast<StateId>(rows_.size() - 1);
}

void Dfa::add_transition(StateId from, CellRef symbol, StateId to) {
  if (from >= rows_.size() || to >= rows_.size())
    throw Error(ErrorCode::InvalidArgument, "transition refers to an unknown state");
  auto [it, inserted] = rows_[from].emplace(symbol, to);
  if (!inserted && it->second != to)
    throw Error(ErrorCode::InvalidArgument,
                "nondeterministic transition " + state_label(from) + " on " + symbol.label());
  alphabet_.insert(symbol);
}

std::size_t Dfa::transition_count() const {
  std::size_t n = 0;
  for (const auto& row : rows_) n += row.size();
  return n;
}

std::optional<StateId> Dfa::next(StateId from, CellRef symbol) const {
  const auto& row = rows_.at(from);
  auto it = row.find(symbol);
  if (it == row.end()) return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------------------
// Any-order expansion

namespace {

using Count = std::uint64_t;
constexpr Count kSaturated = std::numeric_limits<Count>::max();

Count sat_add(Count a, Count b) { return a > kSaturated - b ? kSaturated : a + b; }
Count sat_mul(Count a, Count b) {
  if (a == 0 || b == 0) return 0;
  return a > kSaturated / b ? kSaturated : a * b;
}

std::string describe_group(const Node& node, std::string_view source) {
  std::string text = node.span.end > node.span.begin && node.span.end <= source.size()
                         ? std::string(source.substr(node.span.begin, node.span.end - node.span.begin))
                         : to_string(node);
  return "any-order group " + text + " at " + std::to_string(node.span.begin) + ".." +
         std::to_string(node.span.end);
}

// Number of cell leaves after expansion. Also enforces the group-size guard,
// so oversized groups fail before anything is materialised.
Count expanded_leaves(const Node& node, const CompileLimits& limits, std::string_view source) {
  switch (node.kind) {
    case Node::Kind::Cell:
      return 1;
    case Node::Kind::Opt:
      return expanded_leaves(node.child(), limits, source);
    case Node::Kind::Seq:
    case Node::Kind::Alt: {
      Count n = 0;
      for (const auto& c : node.children) n = sat_add(n, expanded_leaves(c, limits, source));
      return n;
    }
    case Node::Kind::Any: {
      const std::size_t k = node.children.size();
      if (k > limits.max_any_elements)
        throw Error(ErrorCode::Blowup,
                    describe_group(node, source) + " has " + std::to_string(k) + " elements (limit " +
                        std::to_string(limits.max_any_elements) + ")",
                    node.span);
      Count n = 0;
      for (const auto& c : node.children) n = sat_add(n, expanded_leaves(c, limits, source));
      Count perms = 1;
      for (std::size_t i = 2; i <= k; ++i) perms = sat_mul(perms, i);
      return sat_mul(n, perms);
    }
  }
  return 0;
}

Node expand(const Node& node) {
  switch (node.kind) {
    case Node::Kind::Cell:
      return node;
    case Node::Kind::Opt:
      return Node::opt(expand(node.child()), node.span);
    case Node::Kind::Seq:
    case Node::Kind::Alt: {
      Node out = node;
      for (auto& c : out.children) c = expand(c);
      return out;
    }
    case Node::Kind::Any: {
      std::vector<Node> blocks;
      blocks.reserve(node.children.size());
      for (const auto& c : node.children) blocks.push_back(expand(c));
      if (blocks.size() == 1) return std::move(blocks.front());
      std::vector<std::size_t> order(blocks.size());
      std::iota(order.begin(), order.end(), 0);
      std::vector<Node> alternatives;
      do {
        std::vector<Node> seq;
        seq.reserve(order.size());
        for (std::size_t i : order) seq.push_back(blocks[i]);
        alternatives.push_back(Node::seq(std::move(seq), node.span));
      } while (std::next_permutation(order.begin(), order.end()));
      return Node::alt(std::move(alternatives), node.span);
    }
  }
  return node;
}

Node checked_expand(const Node& node, const CompileLimits& limits, std::string_view source) {
  if (limits.max_any_elements < 1 || limits.max_states < 1)
    throw Error(ErrorCode::InvalidArgument, "compile limits must be at least 1");
  const Count leaves = expanded_leaves(node, limits, source);
  const Count budget = sat_mul(100, limits.max_states);
  if (leaves > budget)
    throw Error(ErrorCode::Size, "any-order expansion would produce " +
                                     (leaves == kSaturated ? std::string("too many") : std::to_string(leaves)) +
                                     " cell occurrences (budget " + std::to_string(budget) + ")");
  return expand(node);
}

// ---------------------------------------------------------------------------
// Thompson construction

struct Nfa {
  struct Edge {
    CellRef symbol;
    std::size_t to;
  };
  std::vector<std::vector<std::size_t>> eps;
  std::vector<std::vector<Edge>> edges;

  std::size_t add() {
    eps.emplace_back();
    edges.emplace_back();
    return eps.size() - 1;
  }

  // Builds `node` starting at `from`; returns the exit state.
  std::size_t build(const Node& node, std::size_t from) {
    switch (node.kind) {
      case Node::Kind::Cell: {
        std::size_t to = add();
        edges[from].push_back({node.code, to});
        return to;
      }
      case Node::Kind::Seq: {
        std::size_t at = from;
        for (const auto& c : node.children) at = build(c, at);
        return at;
      }
      case Node::Kind::Opt: {
        std::size_t to = build(node.child(), from);
        eps[from].push_back(to);
        return to;
      }
      case Node::Kind::Alt: {
        std::size_t end = add();
        for (const auto& c : node.children) {
          std::size_t entry = add();
          eps[from].push_back(entry);
          eps[build(c, entry)].push_back(end);
        }
        return end;
      }
      case Node::Kind::Any:
        break;
    }
    throw Error(ErrorCode::InvalidArgument, "unexpanded any-order group");
  }

  std::vector<std::size_t> closure(std::vector<std::size_t> states) const {
    std::vector<bool> seen(eps.size(), false);
    std::vector<std::size_t> stack = states;
    for (auto s : states) seen[s] = true;
    while (!stack.empty()) {
      std::size_t s = stack.back();
      stack.pop_back();
      for (auto t : eps[s]) {
        if (!seen[t]) {
          seen[t] = true;
          states.push_back(t);
          stack.push_back(t);
        }
      }
    }
    std::sort(states.begin(), states.end());
    return states;
  }
};

Dfa determinize(const Nfa& nfa, std::size_t final_state, std::size_t max_states) {
  Dfa dfa;
  std::map<std::vector<std::size_t>, StateId> ids;
  std::deque<std::vector<std::size_t>> work;

  auto intern = [&](std::vector<std::size_t> set) {
    auto it = ids.find(set);
    if (it != ids.end()) return it->second;
    if (dfa.state_count() >= max_states)
      throw Error(ErrorCode::Size, "automaton exceeds " + std::to_string(max_states) + " states");
    bool accepting = std::binary_search(set.begin(), set.end(), final_state);
    StateId id = dfa.add_state(accepting);
    ids.emplace(set, id);
    work.push_back(std::move(set));
    return id;
  };

  intern(nfa.closure({0}));
  while (!work.empty()) {
    std::vector<std::size_t> set = std::move(work.front());
    work.pop_front();
    StateId from = ids.at(set);
    std::map<CellRef, std::vector<std::size_t>> moves;
    for (auto s : set)
      for (const auto& e : nfa.edges[s]) moves[e.symbol].push_back(e.to);
    for (auto& [symbol, targets] : moves) {
      StateId to = intern(nfa.closure(std::move(targets)));
      dfa.add_transition(from, symbol, to);
    }
  }
  return dfa;
}

// Moore partition refinement. Every state of a trimmed automaton is live,
// so a missing transition is distinguishable from any present one.
Dfa minimize(const Dfa& dfa) {
  const std::size_t n = dfa.state_count();
  std::vector<std::size_t> cls(n);
  for (StateId s = 0; s < n; ++s) cls[s] = dfa.is_accepting(s) ? 1 : 0;
  std::size_t classes = 0;
  for (;;) {
    using Signature = std::pair<std::size_t, std::vector<std::pair<CellRef, std::size_t>>>;
    std::map<Signature, std::size_t> index;
    std::vector<std::size_t> next(n);
    for (StateId s = 0; s < n; ++s) {
      Signature sig{cls[s], {}};
      for (const auto& [sym, to] : dfa.transitions(s)) sig.second.emplace_back(sym, cls[to]);
      next[s] = index.emplace(std::move(sig), index.size()).first->second;
    }
    const bool stable = index.size() == classes;
    classes = index.size();
    cls = std::move(next);
    if (stable) break;
  }

  Dfa out;
  std::vector<std::optional<StateId>> rep(classes);
  // Start state keeps id 0.
  std::vector<StateId> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (StateId s : order)
    if (!rep[cls[s]]) rep[cls[s]] = out.add_state(dfa.is_accepting(s));
  for (StateId s = 0; s < n; ++s)
    for (const auto& [sym, to] : dfa.transitions(s)) out.add_transition(*rep[cls[s]], sym, *rep[cls[to]]);
  return out;
}

// Renumbers states in reverse DFS postorder, exploring higher cell indices
// first. On these acyclic automata that is a topological order in which
// branches written earlier in the script receive smaller numbers.
Dfa canonicalize(const Dfa& dfa) {
  const std::size_t n = dfa.state_count();
  std::vector<bool> visited(n, false);
  std::vector<StateId> postorder;
  postorder.reserve(n);

  struct Frame {
    StateId state;
    std::vector<StateId> succ;
    std::size_t next = 0;
  };
  auto frame_for = [&](StateId s) {
    Frame f{s, {}, 0};
    const auto& row = dfa.transitions(s);
    for (auto it = row.rbegin(); it != row.rend(); ++it) f.succ.push_back(it->second);
    return f;
  };

  std::vector<Frame> stack;
  visited[dfa.start()] = true;
  stack.push_back(frame_for(dfa.start()));
  while (!stack.empty()) {
    Frame& top = stack.back();
    if (top.next < top.succ.size()) {
      StateId t = top.succ[top.next++];
      if (!visited[t]) {
        visited[t] = true;
        stack.push_back(frame_for(t));
      }
    } else {
      postorder.push_back(top.state);
      stack.pop_back();
    }
  }

  std::vector<StateId> new_id(n, 0);
  Dfa out;
  for (auto it = postorder.rbegin(); it != postorder.rend(); ++it) new_id[*it] = out.add_state(dfa.is_accepting(*it));
  for (StateId s : postorder)
    for (const auto& [sym, to] : dfa.transitions(s)) out.add_transition(new_id[s], sym, new_id[to]);
  return out;
}

}  // namespace

Node expand_any(const Node& node, const CompileLimits& limits) { return checked_expand(node, limits, {}); }

ScriptAst expand_any(const ScriptAst& ast, const CompileLimits& limits) {
  ScriptAst out;
  out.root = checked_expand(ast.root, limits, ast.source);
  out.source = ast.source;
  return out;
}

Dfa compile(const ScriptAst& ast, const CompileLimits& limits) {
  Node expanded = checked_expand(ast.root, limits, ast.source);
  Nfa nfa;
  std::size_t start = nfa.add();
  std::size_t final_state = nfa.build(expanded, start);
  Dfa dfa = determinize(nfa, final_state, limits.max_states);
  return canonicalize(minimize(dfa));
}

Dfa decorate_reexec_loops(const Dfa& dfa) {
  Dfa out = dfa;
  for (StateId p = 0; p < dfa.state_count(); ++p) {
    for (const auto& [sym, q] : dfa.transitions(p)) {
      if (p == q || dfa.is_accepting(q)) continue;
      if (out.next(q, sym)) continue;
      out.add_transition(q, sym, q);
    }
  }
  return out;
}

bool accepts(const Dfa& dfa, std::span<const CellRef> seq) {
  if (dfa.state_count() == 0) return false;
  StateId s = dfa.start();
  for (const auto& c : seq) {
    auto t = dfa.next(s, c);
    if (!t) return false;
    s = *t;
  }
  return dfa.is_accepting(s);
}

std::set<std::vector<CellRef>> enumerate_language(const Dfa& dfa, std::size_t max_length) {
  if (max_length > 20) throw Error(ErrorCode::InvalidArgument, "enumeration length is limited to 20");
  std::set<std::vector<CellRef>> out;
  if (dfa.state_count() == 0) return out;
  std::deque<std::pair<StateId, std::vector<CellRef>>> queue;
  queue.emplace_back(dfa.start(), std::vector<CellRef>{});
  while (!queue.empty()) {
    auto [s, path] = std::move(queue.front());
    queue.pop_front();
    if (dfa.is_accepting(s)) out.insert(path);
    if (path.size() == max_length) continue;
    for (const auto& [sym, to] : dfa.transitions(s)) {
      auto next = path;
      next.push_back(sym);
      queue.emplace_back(to, std::move(next));
    }
  }
  return out;
}

std::string export_dot(const Dfa& dfa) {
  std::ostringstream out;
  out << "digraph dfa {\n";
  out << "  rankdir=LR;\n";
  out << "  __start [shape=point];\n";
  for (StateId s = 0; s < dfa.state_count(); ++s)
    out << "  " << Dfa::state_label(s) << " [shape=" << (dfa.is_accepting(s) ? "doublecircle" : "circle")
        << "];\n";
  if (dfa.state_count() > 0) out << "  __start -> " << Dfa::state_label(dfa.start()) << ";\n";
  for (StateId s = 0; s < dfa.state_count(); ++s)
    for (const auto& [sym, to] : dfa.transitions(s))
      out << "  " << Dfa::state_label(s) << " -> " << Dfa::state_label(to) << " [label=\"" << sym.label()
          << "\"];\n";
  out << "}\n";
  return out.str();
}

}  // namespace moon
