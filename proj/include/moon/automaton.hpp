#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "moon/notebook.hpp"
#include "moon/script.hpp"

namespace moon {

using StateId = std::uint32_t;

struct CompileLimits {
  std::size_t max_any_elements = 6;
  std::size_t max_states = 10000;
};

/// Deterministic automaton over code-cell identities. State 0 is the start.
class Dfa {
 public:
  using Row = std::map<CellRef, StateId>;

  StateId add_state(bool accepting);
  /// Throws Error{InvalidArgument} if (from, symbol) already has another target.
  void add_transition(StateId from, CellRef symbol, StateId to);

  std::size_t state_count() const { return rows_.size(); }
  std::size_t transition_count() const;
  StateId start() const { return 0; }
  bool is_accepting(StateId s) const { return accepting_.at(s); }
  std::optional<StateId> next(StateId from, CellRef symbol) const;
  const Row& transitions(StateId from) const { return rows_.at(from); }
  const std::set<CellRef>& alphabet() const { return alphabet_; }

  static std::string state_label(StateId s) { return "q" + std::to_string(s); }

 private:
  std::vector<Row> rows_;
  std::vector<bool> accepting_;
  std::set<CellRef> alphabet_;
};

/// Replaces every any-order group by the union of its block permutations.
/// Throws Error{Blowup} for groups larger than limits.max_any_elements and
/// Error{Size} when the expansion would be unreasonably large.
Node expand_any(const Node& node, const CompileLimits& limits = {});
ScriptAst expand_any(const ScriptAst& ast, const CompileLimits& limits = {});

/// Minimal DFA accepting exactly the executions the script permits.
/// States are numbered in topological order from q0.
Dfa compile(const ScriptAst& ast, const CompileLimits& limits = {});

/// Adds a re-execution self-loop (q, c, q) on the target q of every
/// transition (p, c, q), p != q, unless q is accepting or already has an
/// outgoing c transition.
Dfa decorate_reexec_loops(const Dfa& dfa);

bool accepts(const Dfa& dfa, std::span<const CellRef> seq);

/// Every accepted sequence of length <= max_length (at most 20).
std::set<std::vector<CellRef>> enumerate_language(const Dfa& dfa, std::size_t max_length);

/// Graphviz text; byte-identical for equal automata.
std::string export_dot(const Dfa& dfa);

}  // namespace moon
