#include "moon/script.hpp"

#include <cctype>
#include <charconv>
#include <map>
#include <set>

namespace moon {

Node Node::seq(std::vector<Node> children, Span span) {
  Node n;
  n.kind = Kind::Seq;
  n.children = std::move(children);
  n.span = span;
  return n;
}

Node Node::any(std::vector<Node> children, Span span) {
  Node n = seq(std::move(children), span);
  n.kind = Kind::Any;
  return n;
}

Node Node::alt(std::vector<Node> children, Span span) {
  Node n = seq(std::move(children), span);
  n.kind = Kind::Alt;
  return n;
}

Node Node::opt(Node child, Span span) {
  Node n;
  n.kind = Kind::Opt;
  n.children.push_back(std::move(child));
  n.span = span;
  return n;
}

Node Node::cell(CellRef code, std::vector<CellRef> texts, Span span) {
  Node n;
  n.kind = Kind::Cell;
  n.code = code;
  n.texts = std::move(texts);
  n.span = span;
  return n;
}

bool operator==(const Node& a, const Node& b) {
  if (a.kind != b.kind) return false;
  if (a.kind == Node::Kind::Cell) return a.code == b.code && a.texts == b.texts;
  return a.children == b.children;
}

namespace {

struct Token {
  enum class Type { LParen, RParen, LBrack, RBrack, Question, Tilde, Ref, End };
  Type type = Type::End;
  CellRef ref;
  Span span;
};

class Lexer {
 public:
  explicit Lexer(std::string_view text) : text_(text) {}

  Token next() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    Token tok;
    tok.span = {pos_, pos_ + 1};
    if (pos_ >= text_.size()) {
      tok.span = {pos_, pos_};
      return tok;
    }
    char c = text_[pos_];
    switch (c) {
      case '(': tok.type = Token::Type::LParen; ++pos_; return tok;
      case ')': tok.type = Token::Type::RParen; ++pos_; return tok;
      case '[': tok.type = Token::Type::LBrack; ++pos_; return tok;
      case ']': tok.type = Token::Type::RBrack; ++pos_; return tok;
      case '?': tok.type = Token::Type::Question; ++pos_; return tok;
      case '~': tok.type = Token::Type::Tilde; ++pos_; return tok;
      default: break;
    }
    std::size_t start = pos_;
    while (pos_ < text_.size() && std::isalnum(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (pos_ == start) ++pos_;
    std::string_view word = text_.substr(start, pos_ - start);
    tok.span = {start, pos_};
    auto ref = CellRef::parse(word);
    if (!ref) throw Error(ErrorCode::Syntax, "unknown token '" + std::string(word) + "'", tok.span);
    tok.type = Token::Type::Ref;
    tok.ref = *ref;
    return tok;
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
};

class Parser {
 public:
  explicit Parser(std::string_view text) : lexer_(text) { advance(); }

  Node parse_script() {
    std::size_t begin = tok_.span.begin;
    std::vector<Node> items;
    while (tok_.type != Token::Type::End) {
      if (tok_.type == Token::Type::RParen || tok_.type == Token::Type::RBrack)
        throw Error(ErrorCode::Syntax, "unbalanced '" + symbol(tok_.type) + "'", tok_.span);
      items.push_back(parse_expr());
    }
    if (items.empty()) throw Error(ErrorCode::Syntax, "empty script", tok_.span);
    if (items.size() == 1) return std::move(items.front());
    Span span{begin, items.back().span.end};
    return Node::seq(std::move(items), span);
  }

 private:
  Lexer lexer_;
  Token tok_;

  void advance() { tok_ = lexer_.next(); }

  static std::string symbol(Token::Type t) {
    switch (t) {
      case Token::Type::LParen: return "(";
      case Token::Type::RParen: return ")";
      case Token::Type::LBrack: return "[";
      case Token::Type::RBrack: return "]";
      case Token::Type::Question: return "?";
      case Token::Type::Tilde: return "~";
      case Token::Type::Ref: return "cell";
      case Token::Type::End: return "end of script";
    }
    return "?";
  }

  Node parse_expr() {
    Token start = tok_;
    switch (tok_.type) {
      case Token::Type::LParen:
      case Token::Type::LBrack: {
        const bool any = tok_.type == Token::Type::LBrack;
        const auto close = any ? Token::Type::RBrack : Token::Type::RParen;
        advance();
        std::vector<Node> items;
        while (tok_.type != close) {
          if (tok_.type == Token::Type::End)
            throw Error(ErrorCode::Syntax, "unbalanced '" + symbol(start.type) + "'", start.span);
          if (tok_.type == Token::Type::RParen || tok_.type == Token::Type::RBrack)
            throw Error(ErrorCode::Syntax,
                        "expected '" + symbol(close) + "' but found '" + symbol(tok_.type) + "'", tok_.span);
          items.push_back(parse_expr());
        }
        Span span{start.span.begin, tok_.span.end};
        advance();
        if (items.empty()) throw Error(ErrorCode::Syntax, "empty group", span);
        return any ? Node::any(std::move(items), span) : Node::seq(std::move(items), span);
      }
      case Token::Type::Question: {
        advance();
        if (tok_.type == Token::Type::End || tok_.type == Token::Type::RParen ||
            tok_.type == Token::Type::RBrack)
          throw Error(ErrorCode::Syntax, "'?' must be followed by an expression", start.span);
        Node child = parse_expr();
        Span span{start.span.begin, child.span.end};
        return Node::opt(std::move(child), span);
      }
      case Token::Type::Ref:
        return parse_cell();
      default:
        throw Error(ErrorCode::Syntax, "unexpected '" + symbol(tok_.type) + "'", tok_.span);
    }
  }

  Node parse_cell() {
    Token head = tok_;
    if (head.ref.kind != CellKind::Code)
      throw Error(ErrorCode::Syntax,
                  "text cell " + head.ref.label() + " must be attached to a code cell with '~'", head.span);
    advance();
    std::vector<CellRef> texts;
    Span span = head.span;
    while (tok_.type == Token::Type::Tilde) {
      Token tilde = tok_;
      advance();
      if (tok_.type != Token::Type::Ref)
        throw Error(ErrorCode::Syntax, "'~' must be followed by a text cell", tilde.span);
      if (tok_.ref.kind != CellKind::Text)
        throw Error(ErrorCode::Syntax, "'~' followed by code cell " + tok_.ref.label(), tok_.span);
      texts.push_back(tok_.ref);
      span.end = tok_.span.end;
      advance();
    }
    return Node::cell(head.ref, std::move(texts), span);
  }
};

void print(const Node& node, std::string& out) {
  auto group = [&](char open, char close, const char* sep) {
    out += open;
    for (std::size_t i = 0; i < node.children.size(); ++i) {
      if (i) out += sep;
      print(node.children[i], out);
    }
    out += close;
  };
  switch (node.kind) {
    case Node::Kind::Seq: group('(', ')', " "); break;
    case Node::Kind::Any: group('[', ']', " "); break;
    case Node::Kind::Alt: group('{', '}', " | "); break;
    case Node::Kind::Opt:
      out += '?';
      print(node.child(), out);
      break;
    case Node::Kind::Cell:
      out += node.code.label();
      for (const auto& t : node.texts) out += "~" + t.label();
      break;
  }
}

}  // namespace

ScriptAst parse_script(std::string_view text) {
  Parser parser(text);
  ScriptAst ast;
  ast.root = parser.parse_script();
  ast.source = std::string(text);
  return ast;
}

std::string to_string(const Node& node) {
  std::string out;
  print(node, out);
  return out;
}

bool ValidationReport::ok() const {
  for (const auto& i : issues)
    if (i.severity == Severity::Error) return false;
  return true;
}

ValidationReport validate_script(const ScriptAst& ast, const NotebookDoc& doc) {
  ValidationReport report;
  std::set<std::size_t> referenced;
  std::map<CellRef, std::set<CellRef>> text_owners;
  std::vector<std::optional<CellRef>> tags(doc.size());
  bool tagged = false;
  try {
    for (std::size_t pos = 0; pos < doc.size(); ++pos) {
      tags[pos] = scenario_tag(doc.cell(pos));
      tagged = tagged || tags[pos];
    }
  } catch (const Error& e) {
    report.issues.push_back({Severity::Error, e.what(), std::nullopt, std::nullopt});
    return report;
  }

  auto check = [&](CellRef ref, Span span) {
    auto pos = scenario_position(doc, ref);
    if (!pos) {
      report.issues.push_back(
          {Severity::Error, ref.label() + (tagged ? " is not tagged on any cell" : " out of range"), ref, span});
      return false;
    }
    if (doc.cell(*pos).kind != ref.kind) {
      const char* want = ref.kind == CellKind::Code ? "code" : "text";
      report.issues.push_back({Severity::Error, ref.label() + " is not a " + std::string(want) + " cell", ref, span});
      return false;
    }
    referenced.insert(*pos);
    return true;
  };

  for_each_cell(ast.root, [&](const Node& n) {
    check(n.code, n.span);
    for (const auto& t : n.texts)
      if (check(t, n.span)) text_owners[t].insert(n.code);
  });

  std::map<CellRef, std::size_t> tag_count;
  for (std::size_t pos = 0; pos < doc.size(); ++pos) {
    const Cell& cell = doc.cell(pos);
    const auto& tag = tags[pos];
    if (tag && ++tag_count[*tag] == 2)
      report.issues.push_back({Severity::Error, tag->label() + " is tagged on several cells", *tag, std::nullopt});
    // Untagged cells of a tagged notebook were added by the student.
    if (cell.kind != CellKind::Code || referenced.count(pos) || (tagged && !tag)) continue;
    CellRef ref = tag ? *tag : CellRef::code(pos);
    report.issues.push_back({Severity::Warning, ref.label() + " is not referenced by the script", ref, std::nullopt});
  }
  for (const auto& [text, owners] : text_owners) {
    if (owners.size() < 2) continue;
    std::string list;
    for (const auto& o : owners) list += (list.empty() ? "" : ", ") + o.label();
    report.issues.push_back({Severity::Warning,
                             text.label() + " is associated with several code cells (" + list + ")", text,
                             std::nullopt});
  }
  return report;
}

}  // namespace moon
