#pragma once

// Tokenizer, parser and canonical serializer for the SPARQL subset used by
// the question-answering pipeline. The same grammar covers "logical forms":
// queries whose entity slots still hold natural-language mentions such as
// <Ruijie Wang> instead of IRIs.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace nlqx::sparql {

enum class TokenKind {
  Keyword,
  Variable,
  Iri,
  Mention,
  Placeholder,
  StringLiteral,
  NumericLiteral,
  Punct,
};

const char* to_string(TokenKind kind);

struct Token {
  TokenKind kind;
  /// Token text as it appears in canonical form (keywords uppercased,
  /// multi-word keywords joined by a single space).
  std::string text;
  /// 0-based character offset into the tokenized input.
  std::size_t position = 0;

  bool operator==(const Token&) const = default;
};

/// Thrown by tokenize() and parse().
class SyntaxError : public std::runtime_error {
 public:
  enum class Kind {
    UnterminatedBracket,
    UnterminatedString,
    IllegalCharacter,
    Syntax,
    UnsupportedConstruct,
  };

  SyntaxError(Kind kind, std::size_t offset, std::string message,
              std::vector<std::string> expected = {});

  Kind kind() const noexcept { return kind_; }
  std::size_t offset() const noexcept { return offset_; }
  /// Expected-token set for Kind::Syntax; empty otherwise.
  const std::vector<std::string>& expected() const noexcept {
    return expected_;
  }

 private:
  Kind kind_;
  std::size_t offset_;
  std::vector<std::string> expected_;
};

std::vector<Token> tokenize(std::string_view text);

/// Joins token texts with the canonical whitespace rule: single spaces,
/// except none after "(" or before ")", and none between a keyword and a
/// following "(".
std::string join_tokens(const std::vector<Token>& tokens);

// ---------------------------------------------------------------------------
// Terms

struct Variable {
  std::string name;  // without the leading '?'
  auto operator<=>(const Variable&) const = default;
};

struct Iri {
  std::string value;  // without angle brackets
  auto operator<=>(const Iri&) const = default;
};

struct Mention {
  std::string surface;  // trimmed, internal whitespace collapsed
  auto operator<=>(const Mention&) const = default;
};

struct Placeholder {
  int index = 1;  // <entity_index>, index >= 1
  auto operator<=>(const Placeholder&) const = default;
};

struct StringLiteral {
  std::string value;  // unescaped lexical value
  auto operator<=>(const StringLiteral&) const = default;
};

struct NumericLiteral {
  std::string lexical;  // exact decimal text, never converted to floating point
  auto operator<=>(const NumericLiteral&) const = default;
};

using Term = std::variant<Variable, Iri, Mention, Placeholder, StringLiteral,
                          NumericLiteral>;

std::string to_text(const Term& term);

inline bool is_variable(const Term& t) { return std::holds_alternative<Variable>(t); }
inline bool is_iri(const Term& t) { return std::holds_alternative<Iri>(t); }
inline bool is_mention(const Term& t) { return std::holds_alternative<Mention>(t); }
inline bool is_placeholder(const Term& t) { return std::holds_alternative<Placeholder>(t); }

// ---------------------------------------------------------------------------
// Query structure

struct TriplePattern {
  Term subject;
  Iri predicate;
  Term object;
  bool operator==(const TriplePattern&) const = default;
};

enum class CompareOp { Eq, Ne, Lt, Le, Gt, Ge };

const char* to_string(CompareOp op);

struct Comparison {
  CompareOp op;
  Term lhs;
  Term rhs;
  bool operator==(const Comparison&) const = default;
};

struct Element;
using Group = std::vector<Element>;

struct NotExists {
  Group group;
  bool operator==(const NotExists&) const;
};

struct Filter {
  std::variant<Comparison, NotExists> condition;
  bool operator==(const Filter&) const = default;
};

struct Union {
  Group left;
  Group right;
  bool operator==(const Union&) const;
};

struct Bind {
  Term value;
  Variable target;
  bool operator==(const Bind&) const = default;
};

struct Element {
  std::variant<TriplePattern, Filter, Union, Bind> node;
  bool operator==(const Element&) const = default;
};

/// COUNT([DISTINCT] ?inner)
struct Count {
  bool distinct = false;
  Variable inner;
  bool operator==(const Count&) const = default;
};

/// COUNT([DISTINCT] ?inner) AS ?alias in a projection.
struct Aggregate {
  Count count;
  Variable alias;
  bool operator==(const Aggregate&) const = default;
};

using ProjectionItem = std::variant<Variable, Aggregate>;

enum class SortDirection { Asc, Desc };

struct OrderBy {
  std::variant<Variable, Count> expression;
  SortDirection direction = SortDirection::Asc;
  bool operator==(const OrderBy&) const = default;
};

enum class QueryForm { Select, Ask };

struct QueryAst {
  QueryForm form = QueryForm::Select;
  bool distinct = false;  // SELECT DISTINCT
  std::vector<ProjectionItem> projection;
  Group where;
  std::vector<Variable> group_by;
  std::optional<OrderBy> order_by;
  std::optional<std::uint64_t> limit;
  std::optional<std::uint64_t> offset;

  bool operator==(const QueryAst&) const = default;

  bool has_count() const;
};

/// Parses the supported subset. Throws SyntaxError (kind Syntax or
/// UnsupportedConstruct, or any tokenizer kind).
QueryAst parse(std::string_view text);

/// Canonical text: single spaces, uppercase keywords, every triple pattern
/// terminated by " .". Pure and total on valid ASTs.
std::string serialize(const QueryAst& ast);

/// Tokens of the canonical form, before joining.
std::vector<Token> serialize_tokens(const QueryAst& ast);

/// Checks the structural invariants parse() guarantees. Returns an error
/// description, or nullopt when valid.
std::optional<std::string> validate(const QueryAst& ast);

/// Visits every term of the query in canonical text order.
template <typename Fn>
void for_each_term(const Group& group, Fn&& fn);

/// Fixed syntax tokens followed by the relation IRIs, duplicates removed.
/// Throws std::invalid_argument on an empty or malformed relation list.
std::vector<std::string> special_token_vocabulary(
    const std::vector<std::string>& relations);

/// The fixed keyword vocabulary, canonical spelling.
const std::vector<std::string>& keyword_vocabulary();

// ---------------------------------------------------------------------------

template <typename Fn>
void for_each_term_mut(Group& group, Fn&& fn);

namespace detail {

template <typename G, typename Fn>
void visit_terms(G& group, Fn& fn) {
  for (auto& element : group) {
    std::visit(
        [&](auto& node) {
          using T = std::decay_t<decltype(node)>;
          if constexpr (std::is_same_v<T, TriplePattern>) {
            fn(node.subject);
            fn(node.object);
          } else if constexpr (std::is_same_v<T, Filter>) {
            std::visit(
                [&](auto& cond) {
                  using C = std::decay_t<decltype(cond)>;
                  if constexpr (std::is_same_v<C, Comparison>) {
                    fn(cond.lhs);
                    fn(cond.rhs);
                  } else {
                    visit_terms(cond.group, fn);
                  }
                },
                node.condition);
          } else if constexpr (std::is_same_v<T, Union>) {
            visit_terms(node.left, fn);
            visit_terms(node.right, fn);
          } else {
            fn(node.value);
          }
        },
        element.node);
  }
}

}  // namespace detail

template <typename Fn>
void for_each_term(const Group& group, Fn&& fn) {
  detail::visit_terms(group, fn);
}

template <typename Fn>
void for_each_term_mut(Group& group, Fn&& fn) {
  detail::visit_terms(group, fn);
}

}  // namespace nlqx::sparql
