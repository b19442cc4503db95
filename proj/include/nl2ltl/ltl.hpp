#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "nl2ltl/ap.hpp"

namespace nl2ltl::ltl {

inline constexpr std::string_view kEndMarker = "/";

enum class TokenKind { Operator, AtomicProposition, OpenParen, CloseParen, EndMarker };

struct Token {
  TokenKind kind = TokenKind::AtomicProposition;
  std::string text;

  friend bool operator==(const Token&, const Token&) = default;
};

/// Maps glyph aliases (◊ □ ∧ ∨ ¬ →) to the ASCII alphabet; other text is
/// returned unchanged.
std::string canonical_symbol(std::string_view text);

/// Classifies one canonicalized response string. Returns nullopt for text
/// that is neither an operator, a parenthesis, the end marker, nor shaped
/// like an atomic proposition.
std::optional<Token> classify_token(std::string_view text);

bool is_operator(std::string_view canonical);
bool is_unary_operator(std::string_view canonical);
bool is_binary_operator(std::string_view canonical);

enum class NodeKind { Atom, Unary, Binary };

struct Node {
  NodeKind kind = NodeKind::Atom;
  std::string text;  // operator symbol or atom name
  std::vector<Node> children;

  static Node atom(std::string name);
  static Node unary(std::string op, Node child);
  static Node binary(std::string op, Node left, Node right);

  std::size_t depth() const;
  /// Infix rendering with explicit parentheses around every compound operand.
  std::string str() const;

  friend bool operator==(const Node&, const Node&) = default;
};

/// A parsed formula. `tokens` is the canonical token list (end marker
/// excluded); `ast` the tree it denotes.
class Formula {
 public:
  /// Builds from an AST, rendering a minimal canonical token list.
  static Formula from_ast(Node ast);

  const std::vector<Token>& tokens() const noexcept { return tokens_; }
  const Node& ast() const noexcept { return ast_; }
  std::vector<std::string> token_texts() const;
  std::set<std::string> atoms() const;

  friend bool operator==(const Formula& a, const Formula& b) { return a.tokens_ == b.tokens_; }

 private:
  friend Formula parse_tokens(const std::vector<std::string>&);
  Formula(std::vector<Token> tokens, Node ast) : tokens_(std::move(tokens)), ast_(std::move(ast)) {}

  std::vector<Token> tokens_;
  Node ast_;
};

/// Parses a response-token sequence. A trailing "/" is stripped.
/// Precedence, tightest first: ! X F G, then U (right-assoc), &, |, -> (right-assoc).
/// Throws Error{UnbalancedParens | UnknownToken | ArityViolation}.
Formula parse_tokens(const std::vector<std::string>& tokens);

/// Splits infix text such as "F(p_red_box & F(storage & pd))" into tokens.
std::vector<std::string> lex(std::string_view text);

inline Formula parse_text(std::string_view text) { return parse_tokens(lex(text)); }

std::vector<std::string> render_formula(const Formula& formula);

/// Joins tokens with single spaces, the prompt "status" rendering.
std::string join_tokens(const std::vector<std::string>& tokens);

// ---------------------------------------------------------------------------
// Finite-trace semantics.

class Trace {
 public:
  explicit Trace(std::vector<std::set<std::string>> steps);

  std::size_t size() const noexcept { return steps_.size(); }
  const std::set<std::string>& at(std::size_t i) const { return steps_.at(i); }
  const std::vector<std::set<std::string>>& steps() const noexcept { return steps_; }

 private:
  std::vector<std::set<std::string>> steps_;
};

/// LTLf-style evaluation at position 0; X is false at the final position.
bool evaluate_on_trace(const Formula& formula, const Trace& trace);
bool evaluate_on_trace(const Node& node, const Trace& trace);

}  // namespace nl2ltl::ltl
