#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "moon/error.hpp"
#include "moon/notebook.hpp"

namespace moon {

/// Scenario script tree.
///
/// Seq runs its children in order, Any runs whole child blocks in some
/// permutation, Opt may skip its single child, Cell is one code cell with
/// the text cells holding its instructions. Alt is a union of alternatives;
/// the parser never produces it, any-order expansion does.
struct Node {
  enum class Kind { Seq, Any, Opt, Cell, Alt };

  Kind kind = Kind::Seq;
  std::vector<Node> children;
  CellRef code;                 // Cell only
  std::vector<CellRef> texts;   // Cell only
  Span span;                    // source range; ignored by equality

  static Node seq(std::vector<Node> children, Span span = {});
  static Node any(std::vector<Node> children, Span span = {});
  static Node opt(Node child, Span span = {});
  static Node alt(std::vector<Node> children, Span span = {});
  static Node cell(CellRef code, std::vector<CellRef> texts = {}, Span span = {});

  const Node& child() const { return children.front(); }

  /// Structural equality (spans ignored).
  friend bool operator==(const Node& a, const Node& b);
};

struct ScriptAst {
  Node root;
  std::string source;

  friend bool operator==(const ScriptAst& a, const ScriptAst& b) { return a.root == b.root; }
};

/// Parses a scenario script. Throws Error{Syntax} carrying the offending span.
ScriptAst parse_script(std::string_view text);

/// Canonical text form. Re-parsing it yields an equal tree (Alt excepted).
std::string to_string(const Node& node);
inline std::string to_string(const ScriptAst& ast) { return to_string(ast.root); }

enum class Severity { Warning, Error };

struct Issue {
  Severity severity = Severity::Error;
  std::string message;
  std::optional<CellRef> cell;
  std::optional<Span> span;
};

struct ValidationReport {
  std::vector<Issue> issues;

  /// True when no issue has error severity.
  bool ok() const;
};

ValidationReport validate_script(const ScriptAst& ast, const NotebookDoc& doc);

/// Visits every Cell node in source order.
template <typename F>
void for_each_cell(const Node& node, F&& f) {
  if (node.kind == Node::Kind::Cell) {
    f(node);
    return;
  }
  for (const auto& c : node.children) for_each_cell(c, f);
}

}  // namespace moon
