#include <doctest.h>

#include "moon/automaton.hpp"
#include "moon/error.hpp"
#include "support.hpp"

using namespace moon;
using moon::test::cells;
using moon::test::Language;

namespace {

Dfa build(std::string_view s, const CompileLimits& limits = {}) { return compile(parse_script(s), limits); }

Error compile_error(std::string_view s, const CompileLimits& limits = {}) {
  try {
    build(s, limits);
  } catch (const Error& e) {
    return e;
  }
  FAIL("compiled: " << s);
  return Error(ErrorCode::InvalidArgument, "");
}

/// Pairwise distinguishability by table filling.
bool is_minimal(const Dfa& dfa) {
  const std::size_t n = dfa.state_count();
  std::vector<std::vector<bool>> diff(n, std::vector<bool>(n, false));
  for (StateId a = 0; a < n; ++a)
    for (StateId b = 0; b < n; ++b) diff[a][b] = dfa.is_accepting(a) != dfa.is_accepting(b);
  bool changed = true;
  while (changed) {
    changed = false;
    for (StateId a = 0; a < n; ++a)
      for (StateId b = a + 1; b < n; ++b) {
        if (diff[a][b]) continue;
        for (const auto& sym : dfa.alphabet()) {
          auto ta = dfa.next(a, sym), tb = dfa.next(b, sym);
          if (ta.has_value() != tb.has_value() || (ta && diff[*ta][*tb])) {
            diff[a][b] = diff[b][a] = true;
            changed = true;
            break;
          }
        }
      }
  }
  for (StateId a = 0; a < n; ++a)
    for (StateId b = a + 1; b < n; ++b)
      if (!diff[a][b]) return false;
  return true;
}

std::vector<CellRef> collapse(const std::vector<CellRef>& seq) {
  std::vector<CellRef> out;
  for (const auto& c : seq)
    if (out.empty() || out.back() != c) out.push_back(c);
  return out;
}

}  // namespace

TEST_CASE("expand_any turns groups into block permutations") {
  auto e = expand_any(parse_script("[C1 C2]"));
  Node expect = Node::alt({Node::seq({Node::cell(CellRef::code(1)), Node::cell(CellRef::code(2))}),
                           Node::seq({Node::cell(CellRef::code(2)), Node::cell(CellRef::code(1))})});
  CHECK(e.root == expect);
  CHECK(expand_any(parse_script("[(C1 C2)]")).root == parse_script("(C1 C2)").root);
  auto parts = expand_any(parse_script("[(C12 C14)(C16 C18)]"));
  REQUIRE(parts.root.kind == Node::Kind::Alt);
  CHECK(parts.root.children.size() == 2);
  auto six = expand_any(parse_script("[C1 C2 C3]"));
  CHECK(six.root.children.size() == 6);
}

TEST_CASE("any-order groups above the limit are rejected by name") {
  auto e = compile_error("[C1 C2 C3 C4 C5 C6 C7]");
  CHECK(e.code() == ErrorCode::Blowup);
  CHECK(std::string(e.what()).find("[C1 C2 C3 C4 C5 C6 C7]") != std::string::npos);
  CHECK(std::string(e.what()).find("7 elements") != std::string::npos);
  CHECK(e.span() == Span{0, 22});
  CHECK_NOTHROW(build("[C1 C2 C3 C4 C5 C6]"));
  CHECK(compile_error("(C0 [C1 C2 C3])", {2, 10000}).code() == ErrorCode::Blowup);
  CHECK(compile_error("(C0 [C1 C2 C3])", {0, 10000}).code() == ErrorCode::InvalidArgument);
}

TEST_CASE("state limit") {
  CHECK(compile_error("(C1 C2 C3 C4)", {6, 3}).code() == ErrorCode::Size);
  CHECK_NOTHROW(build("(C1 C2 C3 C4)", {6, 5}));
}

TEST_CASE("single cell") {
  auto d = build("C1");
  CHECK(d.state_count() == 2);
  CHECK(d.transition_count() == 1);
  CHECK_FALSE(d.is_accepting(0));
  CHECK(d.is_accepting(*d.next(0, CellRef::code(1))));
  auto decorated = decorate_reexec_loops(d);
  CHECK(moon::test::edge_set(decorated) == moon::test::edge_set(d));
}

TEST_CASE("optional middle cell") {
  auto d = build("(C1 ?C2 C3)");
  Language expect{cells({1, 3}), cells({1, 2, 3})};
  CHECK(enumerate_language(d, 10) == expect);
  CHECK(enumerate_language(build("(C1 ?C2)"), 5) == Language{cells({1}), cells({1, 2})});
  CHECK(enumerate_language(build("C1"), 5) == Language{cells({1})});
  CHECK_THROWS_AS(enumerate_language(d, 21), Error);
}

TEST_CASE("the three-part script matches the reference automaton") {
  auto d = build(moon::test::kPartsScript);
  CHECK(d.state_count() == 10);
  CHECK(moon::test::edge_set(d) == moon::test::reference_parts_automaton(false));
  CHECK(d.is_accepting(9));
  for (StateId s = 0; s < 9; ++s) CHECK_FALSE(d.is_accepting(s));
  CHECK(enumerate_language(d, 10).size() == 4);
  CHECK(is_minimal(d));

  auto loops = decorate_reexec_loops(d);
  CHECK(loops.transition_count() == 20);
  CHECK(moon::test::edge_set(loops) == moon::test::reference_parts_automaton(true));
  CHECK(moon::test::isomorphic(loops, moon::test::reference_parts_automaton(true), 0, {9}));
  CHECK(loops.transitions(9).empty());
}

TEST_CASE("accepts") {
  auto d = build(moon::test::kPartsScript);
  auto seq = cells({7, 12, 14, 16, 18});
  CHECK(accepts(d, seq));
  CHECK_FALSE(accepts(d, std::vector<CellRef>{}));
  auto bad = cells({7, 18});
  CHECK_FALSE(accepts(d, bad));
  auto with_opt = cells({7, 10, 16, 18, 12, 14});
  CHECK(accepts(d, with_opt));
}

TEST_CASE("loop decoration skips symbols that already leave the state") {
  auto d = build("(C1 C2 C1)");
  auto loops = decorate_reexec_loops(d);
  const StateId after_c1 = *d.next(0, CellRef::code(1));
  const StateId after_c2 = *d.next(after_c1, CellRef::code(2));
  CHECK(loops.next(after_c2, CellRef::code(2)) == after_c2);
  CHECK(loops.next(after_c1, CellRef::code(1)) == after_c1);
  // the C1 leaving after_c2 is the real transition, not a loop
  CHECK(loops.next(after_c2, CellRef::code(1)) == d.next(after_c2, CellRef::code(1)));
  CHECK(loops.transition_count() == d.transition_count() + 2);
}

TEST_CASE("decoration preserves acceptance of collapsed sequences") {
  // Repeats are injected where the decoration captures a re-execution; the
  // accepting state carries no loop, so repeating the final cell is rejected.
  moon::test::ScriptGenerator gen(5, 5);
  std::size_t stretched_words = 0;
  for (int i = 0; i < 60; ++i) {
    ScriptAst ast{gen.generate(3, 8), ""};
    auto d = compile(ast);
    auto loops = decorate_reexec_loops(d);
    for (const auto& word : enumerate_language(d, 12)) {
      if (collapse(word) != word) continue;
      std::vector<CellRef> stretched;
      StateId q = d.start();
      for (const auto& c : word) {
        q = *d.next(q, c);
        stretched.push_back(c);
        if (loops.next(q, c) == q && !d.next(q, c)) {
          const int reps = std::uniform_int_distribution<int>(0, 2)(gen.rng());
          for (int r = 0; r < reps; ++r) stretched.push_back(c);
        }
      }
      stretched_words += stretched.size() > word.size();
      CHECK(collapse(stretched) == word);
      CHECK(accepts(loops, stretched));
    }
    StateId last_accepting = 0;
    for (StateId s = 0; s < d.state_count(); ++s)
      if (d.is_accepting(s)) last_accepting = s;
    CHECK(loops.transitions(last_accepting).size() == d.transitions(last_accepting).size());
  }
  CHECK(stretched_words > 0);
}

TEST_CASE("random scripts agree with syntactic expansion and are minimal") {
  moon::test::ScriptGenerator gen(2024, 6);
  for (int i = 0; i < 150; ++i) {
    ScriptAst ast{gen.generate(4, 10), ""};
    auto d = compile(ast);
    INFO(to_string(ast));
    CHECK(enumerate_language(d, 12) == moon::test::expand_language(ast.root));
    if (d.state_count() <= 40) CHECK(is_minimal(d));
    for (StateId s = 0; s < d.state_count(); ++s)
      for (const auto& [sym, to] : d.transitions(s)) CHECK(to < d.state_count());
  }
}

TEST_CASE("dot export") {
  auto one = export_dot(build("C1"));
  CHECK(one.find("q0 -> q1 [label=\"C1\"];") != std::string::npos);
  CHECK(one.find("q1 [shape=doublecircle];") != std::string::npos);

  auto loops = decorate_reexec_loops(build(moon::test::kPartsScript));
  auto text = export_dot(loops);
  CHECK(text == export_dot(decorate_reexec_loops(build(moon::test::kPartsScript))));
  std::size_t edges = 0, self = 0, pos = 0;
  while ((pos = text.find("[label=", pos)) != std::string::npos) {
    ++edges;
    auto line_start = text.rfind('\n', pos) + 1;
    auto arrow = text.find(" -> ", line_start);
    std::string from = text.substr(line_start, arrow - line_start);
    std::string to = text.substr(arrow + 4, pos - arrow - 5);
    from.erase(0, from.find_first_not_of(' '));
    self += from == to;
    ++pos;
  }
  CHECK(edges == 20);
  CHECK(self == 8);
}

TEST_CASE("add_transition refuses nondeterminism") {
  Dfa d;
  d.add_state(false);
  d.add_state(true);
  d.add_state(true);
  d.add_transition(0, CellRef::code(1), 1);
  CHECK_NOTHROW(d.add_transition(0, CellRef::code(1), 1));
  CHECK_THROWS_AS(d.add_transition(0, CellRef::code(1), 2), Error);
}
