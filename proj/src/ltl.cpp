#include "nl2ltl/ltl.hpp"

#include <algorithm>
#include <cctype>

#include "nl2ltl/error.hpp"

namespace nl2ltl::ltl {
namespace {

struct Alias {
  std::string_view from;
  std::string_view to;
};

constexpr Alias kAliases[] = {
    {"◊", "F"}, {"◇", "F"}, {"♢", "F"}, {"<>", "F"},
    {"□", "G"}, {"☐", "G"}, {"[]", "G"},
    {"∧", "&"}, {"&&", "&"},
    {"∨", "|"}, {"||", "|"},
    {"¬", "!"}, {"~", "!"},
    {"→", "->"}, {"=>", "->"},
    {"\U0001D4B0", "U"},
};

// Binding strength for binary operators; higher binds tighter.
int binary_precedence(std::string_view op) {
  if (op == "U") return 4;
  if (op == "&") return 3;
  if (op == "|") return 2;
  if (op == "->") return 1;
  return 0;
}

bool right_assoc(std::string_view op) { return op == "U" || op == "->"; }

class Parser {
 public:
  explicit Parser(const std::vector<Token>& tokens) : tokens_(tokens) {}

  Node parse() {
    if (tokens_.empty()) throw Error(Errc::ArityViolation, "empty formula");
    auto node = implies();
    if (pos_ != tokens_.size()) {
      const auto& t = tokens_[pos_];
      if (t.kind == TokenKind::CloseParen) throw Error(Errc::UnbalancedParens, "unexpected ')'");
      throw Error(Errc::ArityViolation, "unexpected '" + t.text + "' after complete formula");
    }
    return node;
  }

 private:
  const Token* peek() const { return pos_ < tokens_.size() ? &tokens_[pos_] : nullptr; }

  bool peek_binary(std::string_view op) const {
    const auto* t = peek();
    return t && t->kind == TokenKind::Operator && t->text == op;
  }

  Node implies() {
    auto left = disjunction();
    if (peek_binary("->")) {
      ++pos_;
      return Node::binary("->", std::move(left), implies());
    }
    return left;
  }

  Node disjunction() {
    auto left = conjunction();
    while (peek_binary("|")) {
      ++pos_;
      left = Node::binary("|", std::move(left), conjunction());
    }
    return left;
  }

  Node conjunction() {
    auto left = until();
    while (peek_binary("&")) {
      ++pos_;
      left = Node::binary("&", std::move(left), until());
    }
    return left;
  }

  Node until() {
    auto left = unary();
    if (peek_binary("U")) {
      ++pos_;
      return Node::binary("U", std::move(left), until());
    }
    return left;
  }

  Node unary() {
    const auto* t = peek();
    if (!t) throw Error(Errc::ArityViolation, "formula ends where an operand is required");
    switch (t->kind) {
      case TokenKind::Operator:
        if (is_unary_operator(t->text)) {
          auto op = t->text;
          ++pos_;
          return Node::unary(std::move(op), unary());
        }
        throw Error(Errc::ArityViolation, "binary operator '" + t->text + "' is missing its left operand");
      case TokenKind::AtomicProposition: {
        auto name = t->text;
        ++pos_;
        return Node::atom(std::move(name));
      }
      case TokenKind::OpenParen: {
        ++pos_;
        auto inner = implies();
        const auto* close = peek();
        if (!close) throw Error(Errc::UnbalancedParens, "missing ')'");
        if (close->kind != TokenKind::CloseParen) {
          throw Error(Errc::ArityViolation, "unexpected '" + close->text + "' inside parentheses");
        }
        ++pos_;
        return inner;
      }
      case TokenKind::CloseParen:
        throw Error(Errc::ArityViolation, "')' where an operand is required");
      case TokenKind::EndMarker:
        break;
    }
    throw Error(Errc::UnknownToken, "end marker inside formula");
  }

  const std::vector<Token>& tokens_;
  std::size_t pos_ = 0;
};

void render_into(const Node& node, int parent_prec, bool wrap_compound, std::vector<Token>& out) {
  switch (node.kind) {
    case NodeKind::Atom:
      out.push_back({TokenKind::AtomicProposition, node.text});
      return;
    case NodeKind::Unary: {
      const bool parens = wrap_compound;
      if (parens) out.push_back({TokenKind::OpenParen, "("});
      out.push_back({TokenKind::Operator, node.text});
      render_into(node.children[0], 5, node.children[0].kind != NodeKind::Atom, out);
      if (parens) out.push_back({TokenKind::CloseParen, ")"});
      return;
    }
    case NodeKind::Binary: {
      const int prec = binary_precedence(node.text);
      const bool parens = wrap_compound || prec < parent_prec;
      if (parens) out.push_back({TokenKind::OpenParen, "("});
      // Same-precedence operands go on the side the associativity allows.
      const int left_prec = right_assoc(node.text) ? prec + 1 : prec;
      const int right_prec = right_assoc(node.text) ? prec : prec + 1;
      render_into(node.children[0], left_prec, false, out);
      out.push_back({TokenKind::Operator, node.text});
      render_into(node.children[1], right_prec, false, out);
      if (parens) out.push_back({TokenKind::CloseParen, ")"});
      return;
    }
  }
}

}  // namespace

std::string canonical_symbol(std::string_view text) {
  for (const auto& alias : kAliases) {
    if (text == alias.from) return std::string(alias.to);
  }
  return std::string(text);
}

bool is_unary_operator(std::string_view op) { return op == "!" || op == "X" || op == "F" || op == "G"; }
bool is_binary_operator(std::string_view op) { return op == "U" || op == "&" || op == "|" || op == "->"; }
bool is_operator(std::string_view op) { return is_unary_operator(op) || is_binary_operator(op); }

std::optional<Token> classify_token(std::string_view raw) {
  const auto text = canonical_symbol(raw);
  if (text == kEndMarker) return Token{TokenKind::EndMarker, text};
  if (text == "(") return Token{TokenKind::OpenParen, text};
  if (text == ")") return Token{TokenKind::CloseParen, text};
  if (is_operator(text)) return Token{TokenKind::Operator, text};
  if (parse_ap(text)) return Token{TokenKind::AtomicProposition, text};
  return std::nullopt;
}

Node Node::atom(std::string name) { return Node{NodeKind::Atom, std::move(name), {}}; }

Node Node::unary(std::string op, Node child) {
  Node n{NodeKind::Unary, std::move(op), {}};
  n.children.push_back(std::move(child));
  return n;
}

Node Node::binary(std::string op, Node left, Node right) {
  Node n{NodeKind::Binary, std::move(op), {}};
  n.children.push_back(std::move(left));
  n.children.push_back(std::move(right));
  return n;
}

std::size_t Node::depth() const {
  std::size_t d = 0;
  for (const auto& c : children) d = std::max(d, c.depth());
  return d + 1;
}

std::string Node::str() const {
  switch (kind) {
    case NodeKind::Atom: return text;
    case NodeKind::Unary:
      return text + (children[0].kind == NodeKind::Atom ? children[0].str() : "(" + children[0].str() + ")");
    case NodeKind::Binary: {
      auto side = [](const Node& n) { return n.kind == NodeKind::Atom ? n.str() : "(" + n.str() + ")"; };
      return side(children[0]) + " " + text + " " + side(children[1]);
    }
  }
  return "";
}

Formula Formula::from_ast(Node ast) {
  std::vector<Token> tokens;
  render_into(ast, 0, false, tokens);
  return Formula(std::move(tokens), std::move(ast));
}

std::vector<std::string> Formula::token_texts() const {
  std::vector<std::string> out;
  out.reserve(tokens_.size());
  for (const auto& t : tokens_) out.push_back(t.text);
  return out;
}

std::set<std::string> Formula::atoms() const {
  std::set<std::string> out;
  for (const auto& t : tokens_) {
    if (t.kind == TokenKind::AtomicProposition) out.insert(t.text);
  }
  return out;
}

Formula parse_tokens(const std::vector<std::string>& raw) {
  if (raw.empty()) throw Error(Errc::ArityViolation, "empty token sequence");

  std::vector<Token> tokens;
  tokens.reserve(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    auto token = classify_token(raw[i]);
    if (!token) throw Error(Errc::UnknownToken, "'" + raw[i] + "'");
    if (token->kind == TokenKind::EndMarker) {
      if (i + 1 != raw.size()) throw Error(Errc::UnknownToken, "end marker before the last token");
      continue;
    }
    tokens.push_back(std::move(*token));
  }

  int depth = 0;
  for (const auto& t : tokens) {
    if (t.kind == TokenKind::OpenParen) ++depth;
    if (t.kind == TokenKind::CloseParen && --depth < 0) throw Error(Errc::UnbalancedParens, "unmatched ')'");
  }
  if (depth != 0) throw Error(Errc::UnbalancedParens, "unclosed '('");

  Parser parser(tokens);
  auto ast = parser.parse();
  return Formula(std::move(tokens), std::move(ast));
}

std::vector<std::string> lex(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  const auto ident_char = [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '%';
  };
  while (i < text.size()) {
    const char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    bool matched = false;
    for (const auto& alias : kAliases) {
      if (text.substr(i, alias.from.size()) == alias.from) {
        out.emplace_back(alias.to);
        i += alias.from.size();
        matched = true;
        break;
      }
    }
    if (matched) continue;
    if (text.substr(i, 2) == "->") {
      out.emplace_back("->");
      i += 2;
      continue;
    }
    if (std::string_view("()&|!/").find(c) != std::string_view::npos) {
      out.emplace_back(1, c);
      ++i;
      continue;
    }
    if (ident_char(c)) {
      std::size_t j = i;
      while (j < text.size() && ident_char(text[j])) ++j;
      out.emplace_back(text.substr(i, j - i));
      i = j;
      continue;
    }
    // Unknown byte (or a multibyte glyph we do not alias): keep it as its
    // own token so parse_tokens reports it.
    std::size_t j = i + 1;
    while (j < text.size() && (static_cast<unsigned char>(text[j]) & 0xC0) == 0x80) ++j;
    out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

std::vector<std::string> render_formula(const Formula& formula) { return formula.token_texts(); }

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out.push_back(' ');
    out += t;
  }
  return out;
}

}  // namespace nl2ltl::ltl
