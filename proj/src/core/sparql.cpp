#include "nlqxform/sparql.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <set>
#include <sstream>
#include <unordered_set>

namespace nlqx::sparql {

namespace {

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_ident_start(char c) {
  return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_';
}
bool is_ident(char c) { return is_ident_start(c) || is_digit(c); }

std::string upper(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  bool pending = false;
  for (char c : s) {
    if (is_space(c)) {
      pending = !out.empty();
      continue;
    }
    if (pending) out.push_back(' ');
    pending = false;
    out.push_back(c);
  }
  return out;
}

// Single-word keywords of the subset.
const std::unordered_set<std::string> kSingleKeywords = {
    "SELECT", "ASK",    "WHERE", "DISTINCT", "COUNT", "AS",   "FILTER",
    "UNION",  "ASC",    "DESC",  "LIMIT",    "OFFSET", "BIND",
};

// SPARQL words outside the subset; reported as UnsupportedConstruct.
const std::unordered_set<std::string> kUnsupportedWords = {
    "OPTIONAL", "PREFIX",   "BASE",     "MINUS",    "SERVICE",  "GRAPH",
    "FROM",     "NAMED",    "VALUES",   "HAVING",   "SUM",      "AVG",
    "MIN",      "MAX",      "SAMPLE",   "GROUP_CONCAT", "CONSTRUCT",
    "DESCRIBE", "REGEX",    "STR",      "LANG",     "LANGMATCHES",
    "DATATYPE", "BOUND",    "IF",       "COALESCE", "IN",       "EXISTS",
    "CONTAINS", "STRSTARTS", "STRENDS", "LCASE",    "UCASE",    "YEAR",
    "NOW",      "ISIRI",    "ISURI",    "ISLITERAL", "REDUCED", "A",
    "TRUE",     "FALSE",    "UNDEF",    "INSERT",   "DELETE",   "LOAD",
    "CLEAR",    "DROP",     "CREATE",   "WITH",     "USING",    "SEPARATOR",
    "STRLEN",   "SUBSTR",   "CONCAT",   "ABS",      "ROUND",    "CEIL",
    "FLOOR",    "RAND",     "IRI",      "URI",      "BNODE",    "SAMETERM",
};

bool keyword_takes_paren(const std::string& kw) {
  return kw == "COUNT" || kw == "ASC" || kw == "DESC" || kw == "FILTER" ||
         kw == "BIND";
}

std::optional<int> placeholder_index(std::string_view content) {
  constexpr std::string_view prefix = "entity_";
  if (content.substr(0, prefix.size()) != prefix) return std::nullopt;
  auto digits = content.substr(prefix.size());
  if (digits.empty() || digits.size() > 9 || digits.front() == '0')
    return std::nullopt;
  int value = 0;
  for (char c : digits) {
    if (!is_digit(c)) return std::nullopt;
    value = value * 10 + (c - '0');
  }
  return value;
}

std::string escape_string(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\r': out += "\\r"; break;
      default: out.push_back(c);
    }
  }
  out.push_back('"');
  return out;
}

class Tokenizer {
 public:
  explicit Tokenizer(std::string_view text) : text_(text) {}

  std::vector<Token> run() {
    std::vector<Token> tokens;
    while (true) {
      skip_space();
      if (pos_ >= text_.size()) break;
      tokens.push_back(next());
    }
    return tokens;
  }

 private:
  using Kind = SyntaxError::Kind;

  char peek(std::size_t ahead = 0) const {
    return pos_ + ahead < text_.size() ? text_[pos_ + ahead] : '\0';
  }

  void skip_space() {
    while (pos_ < text_.size() && is_space(text_[pos_])) ++pos_;
  }

  Token make(TokenKind kind, std::string text, std::size_t start) {
    return Token{kind, std::move(text), start};
  }

  Token next() {
    const std::size_t start = pos_;
    const char c = text_[pos_];
    if (c == '?') return variable(start);
    if (c == '<') return bracket(start);
    if (c == '"' || c == '\'') return string_literal(start);
    if (is_digit(c) || (c == '-' && is_digit(peek(1)))) return number(start);
    if (is_ident_start(c)) return word(start);

    switch (c) {
      case '>':
        ++pos_;
        if (peek() == '=') { ++pos_; return make(TokenKind::Punct, ">=", start); }
        return make(TokenKind::Punct, ">", start);
      case '!':
        if (peek(1) == '=') { pos_ += 2; return make(TokenKind::Punct, "!=", start); }
        throw SyntaxError(Kind::IllegalCharacter, start, "illegal character '!'");
      case '&':
      case '|':
        if (peek(1) == c) {
          pos_ += 2;
          return make(TokenKind::Punct, std::string(2, c), start);
        }
        throw SyntaxError(Kind::IllegalCharacter, start,
                          std::string("illegal character '") + c + "'");
      case '^':
        if (peek(1) == '^') { pos_ += 2; return make(TokenKind::Punct, "^^", start); }
        throw SyntaxError(Kind::IllegalCharacter, start, "illegal character '^'");
      case '{': case '}': case '(': case ')': case '.': case '=': case ',':
      case ';': case '*': case '+': case '-': case '/': case '@':
        ++pos_;
        return make(TokenKind::Punct, std::string(1, c), start);
      default:
        break;
    }
    std::ostringstream msg;
    msg << "illegal character '" << c << "' at offset " << start;
    throw SyntaxError(Kind::IllegalCharacter, start, msg.str());
  }

  Token variable(std::size_t start) {
    ++pos_;
    const std::size_t name_start = pos_;
    while (pos_ < text_.size() && is_ident(text_[pos_])) ++pos_;
    if (pos_ == name_start)
      throw SyntaxError(Kind::IllegalCharacter, start,
                        "'?' must be followed by a variable name");
    return make(TokenKind::Variable, std::string(text_.substr(start, pos_ - start)),
                start);
  }

  Token bracket(std::size_t start) {
    const char after = peek(1);
    if (after == '\0' || is_space(after) || after == '=') {
      // comparison operator
      ++pos_;
      if (peek() == '=') { ++pos_; return make(TokenKind::Punct, "<=", start); }
      return make(TokenKind::Punct, "<", start);
    }
    const auto close = text_.find('>', start + 1);
    if (close == std::string_view::npos)
      throw SyntaxError(Kind::UnterminatedBracket, start,
                        "'<' at offset " + std::to_string(start) +
                            " has no closing '>'");
    const auto content = text_.substr(start + 1, close - start - 1);
    pos_ = close + 1;
    if (content.substr(0, 4) == "http") {
      for (std::size_t i = 0; i < content.size(); ++i) {
        if (is_space(content[i]) || content[i] == '<')
          throw SyntaxError(Kind::IllegalCharacter, start + 1 + i,
                            "illegal character inside IRI");
      }
      return make(TokenKind::Iri, "<" + std::string(content) + ">", start);
    }
    if (auto idx = placeholder_index(content))
      return make(TokenKind::Placeholder,
                  "<entity_" + std::to_string(*idx) + ">", start);
    auto surface = collapse_whitespace(content);
    if (surface.empty())
      throw SyntaxError(Kind::IllegalCharacter, start, "empty angle brackets");
    if (surface.find('<') != std::string::npos)
      throw SyntaxError(Kind::IllegalCharacter,
                        start + 1 + content.find('<'),
                        "'<' inside a bracketed term");
    return make(TokenKind::Mention, "<" + surface + ">", start);
  }

  Token string_literal(std::size_t start) {
    const char quote = text_[pos_++];
    std::string value;
    while (true) {
      if (pos_ >= text_.size())
        throw SyntaxError(Kind::UnterminatedString, start,
                          "string literal at offset " + std::to_string(start) +
                              " is not terminated");
      const char c = text_[pos_++];
      if (c == quote) break;
      if (c == '\\') {
        if (pos_ >= text_.size()) continue;
        const char e = text_[pos_++];
        switch (e) {
          case 'n': value.push_back('\n'); break;
          case 't': value.push_back('\t'); break;
          case 'r': value.push_back('\r'); break;
          case '"': case '\'': case '\\': value.push_back(e); break;
          default:
            throw SyntaxError(Kind::IllegalCharacter, pos_ - 1,
                              "unknown escape sequence in string literal");
        }
        continue;
      }
      value.push_back(c);
    }
    return make(TokenKind::StringLiteral, escape_string(value), start);
  }

  Token number(std::size_t start) {
    if (text_[pos_] == '-') ++pos_;
    while (is_digit(peek())) ++pos_;
    if (peek() == '.' && is_digit(peek(1))) {
      ++pos_;
      while (is_digit(peek())) ++pos_;
    }
    if (is_ident_start(peek()))
      throw SyntaxError(Kind::IllegalCharacter, pos_,
                        "unexpected character after number");
    return make(TokenKind::NumericLiteral,
                std::string(text_.substr(start, pos_ - start)), start);
  }

  std::string read_word() {
    const std::size_t s = pos_;
    while (pos_ < text_.size() && is_ident(text_[pos_])) ++pos_;
    return std::string(text_.substr(s, pos_ - s));
  }

  Token word(std::size_t start) {
    const std::string raw = read_word();
    const std::string up = upper(raw);
    if (peek() == ':')
      throw SyntaxError(Kind::UnsupportedConstruct, start,
                        "unsupported construct: prefixed name '" + raw + ":'");

    auto second_word = [&](std::string_view expected) {
      const std::size_t save = pos_;
      skip_space();
      if (is_ident_start(peek())) {
        const std::string w = upper(read_word());
        if (w == expected) return true;
      }
      pos_ = save;
      return false;
    };

    if (up == "GROUP" || up == "ORDER") {
      if (second_word("BY")) return make(TokenKind::Keyword, up + " BY", start);
      throw SyntaxError(Kind::IllegalCharacter, start,
                        "'" + raw + "' must be followed by BY");
    }
    if (up == "NOT") {
      if (second_word("EXISTS"))
        return make(TokenKind::Keyword, "NOT EXISTS", start);
      throw SyntaxError(Kind::UnsupportedConstruct, start,
                        "unsupported construct: NOT without EXISTS");
    }
    if (kSingleKeywords.count(up)) return make(TokenKind::Keyword, up, start);
    if (kUnsupportedWords.count(up))
      throw SyntaxError(Kind::UnsupportedConstruct, start,
                        "unsupported construct: " + up);
    throw SyntaxError(Kind::IllegalCharacter, start,
                      "unexpected word '" + raw + "'");
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

// ---------------------------------------------------------------------------

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens, std::size_t text_size)
      : tokens_(std::move(tokens)), end_offset_(text_size) {}

  QueryAst run() {
    QueryAst ast;
    if (accept_keyword("SELECT")) {
      ast.form = QueryForm::Select;
      ast.distinct = accept_keyword("DISTINCT");
      parse_projection(ast);
      accept_keyword("WHERE");
      ast.where = parse_group();
      parse_modifiers(ast);
    } else if (accept_keyword("ASK")) {
      ast.form = QueryForm::Ask;
      accept_keyword("WHERE");
      ast.where = parse_group();
    } else {
      fail({"SELECT", "ASK"});
    }
    if (!at_end()) fail({"end of query"});
    return ast;
  }

  const std::vector<Token>& tokens() const { return tokens_; }

 private:
  using Kind = SyntaxError::Kind;

  bool at_end() const { return pos_ >= tokens_.size(); }
  const Token* peek(std::size_t ahead = 0) const {
    return pos_ + ahead < tokens_.size() ? &tokens_[pos_ + ahead] : nullptr;
  }
  std::size_t offset() const {
    return at_end() ? end_offset_ : tokens_[pos_].position;
  }

  bool is_keyword(std::string_view kw, std::size_t ahead = 0) const {
    const Token* t = peek(ahead);
    return t && t->kind == TokenKind::Keyword && t->text == kw;
  }
  bool is_punct(std::string_view p, std::size_t ahead = 0) const {
    const Token* t = peek(ahead);
    return t && t->kind == TokenKind::Punct && t->text == p;
  }
  bool accept_keyword(std::string_view kw) {
    if (!is_keyword(kw)) return false;
    ++pos_;
    return true;
  }
  bool accept_punct(std::string_view p) {
    if (!is_punct(p)) return false;
    ++pos_;
    return true;
  }

  [[noreturn]] void fail(std::vector<std::string> expected) const {
    std::string found = at_end() ? "end of input" : "'" + tokens_[pos_].text + "'";
    std::string msg = "syntax error at offset " + std::to_string(offset()) +
                      ": found " + found + ", expected ";
    for (std::size_t i = 0; i < expected.size(); ++i) {
      if (i) msg += " | ";
      msg += expected[i];
    }
    throw SyntaxError(Kind::Syntax, offset(), msg, std::move(expected));
  }
  [[noreturn]] void unsupported(const std::string& what) const {
    throw SyntaxError(Kind::UnsupportedConstruct, offset(),
                      "unsupported construct: " + what);
  }

  // Raises UnsupportedConstruct for punctuation that belongs to SPARQL
  // features outside the subset.
  void reject_unsupported_punct() const {
    const Token* t = peek();
    if (!t || t->kind != TokenKind::Punct) return;
    const auto& p = t->text;
    if (p == ";" || p == ",") unsupported("predicate-object list ('" + p + "')");
    if (p == "*") unsupported("wildcard '*'");
    if (p == "&&" || p == "||") unsupported("logical connective '" + p + "'");
    if (p == "+" || p == "-" || p == "/") unsupported("arithmetic expression");
    if (p == "^^" || p == "@") unsupported("typed or language-tagged literal");
  }

  Variable expect_variable() {
    const Token* t = peek();
    if (!t || t->kind != TokenKind::Variable) {
      reject_unsupported_punct();
      fail({"variable"});
    }
    ++pos_;
    return Variable{t->text.substr(1)};
  }

  void expect_punct(std::string_view p) {
    if (accept_punct(p)) return;
    reject_unsupported_punct();
    fail({std::string(p)});
  }

  void expect_keyword(std::string_view kw) {
    if (accept_keyword(kw)) return;
    reject_unsupported_punct();
    fail({std::string(kw)});
  }

  // COUNT '(' [DISTINCT] ?v ')', COUNT already consumed.
  Count parse_count_body() {
    expect_punct("(");
    Count count;
    count.distinct = accept_keyword("DISTINCT");
    if (is_punct("*")) unsupported("COUNT(*)");
    count.inner = expect_variable();
    expect_punct(")");
    return count;
  }

  void parse_projection(QueryAst& ast) {
    while (true) {
      const Token* t = peek();
      if (!t) break;
      if (t->kind == TokenKind::Variable) {
        ast.projection.emplace_back(expect_variable());
      } else if (is_keyword("COUNT")) {
        ++pos_;
        Aggregate agg;
        agg.count = parse_count_body();
        expect_keyword("AS");
        agg.alias = expect_variable();
        ast.projection.emplace_back(std::move(agg));
      } else if (is_punct("(") && is_keyword("COUNT", 1)) {
        pos_ += 2;
        Aggregate agg;
        agg.count = parse_count_body();
        expect_keyword("AS");
        agg.alias = expect_variable();
        expect_punct(")");
        ast.projection.emplace_back(std::move(agg));
      } else if (is_punct("*")) {
        unsupported("wildcard projection 'SELECT *'");
      } else {
        break;
      }
    }
    if (ast.projection.empty()) fail({"variable", "COUNT"});
  }

  Term parse_term() {
    const Token* t = peek();
    if (!t) fail({"term"});
    switch (t->kind) {
      case TokenKind::Variable:
        ++pos_;
        return Variable{t->text.substr(1)};
      case TokenKind::Iri:
        ++pos_;
        return Iri{t->text.substr(1, t->text.size() - 2)};
      case TokenKind::Mention:
        ++pos_;
        return Mention{t->text.substr(1, t->text.size() - 2)};
      case TokenKind::Placeholder: {
        ++pos_;
        return Placeholder{*placeholder_index(
            std::string_view(t->text).substr(1, t->text.size() - 2))};
      }
      case TokenKind::StringLiteral: {
        ++pos_;
        // Re-tokenized canonical escape; decode it again.
        std::string value;
        const auto& s = t->text;
        for (std::size_t i = 1; i + 1 < s.size(); ++i) {
          if (s[i] == '\\' && i + 2 < s.size()) {
            const char e = s[++i];
            value.push_back(e == 'n' ? '\n' : e == 't' ? '\t' : e == 'r' ? '\r' : e);
          } else {
            value.push_back(s[i]);
          }
        }
        if (is_punct("^^") || is_punct("@")) unsupported("typed or language-tagged literal");
        return StringLiteral{std::move(value)};
      }
      case TokenKind::NumericLiteral:
        ++pos_;
        return NumericLiteral{t->text};
      default:
        reject_unsupported_punct();
        fail({"variable", "IRI", "mention", "placeholder", "literal"});
    }
  }

  Iri parse_predicate() {
    const Token* t = peek();
    if (t && t->kind == TokenKind::Iri) {
      ++pos_;
      return Iri{t->text.substr(1, t->text.size() - 2)};
    }
    if (t && t->kind == TokenKind::Variable) unsupported("variable predicate");
    reject_unsupported_punct();
    fail({"IRI"});
  }

  bool at_term_start() const {
    const Token* t = peek();
    if (!t) return false;
    switch (t->kind) {
      case TokenKind::Variable:
      case TokenKind::Iri:
      case TokenKind::Mention:
      case TokenKind::Placeholder:
      case TokenKind::StringLiteral:
      case TokenKind::NumericLiteral:
        return true;
      default:
        return false;
    }
  }

  Group parse_group() {
    expect_punct("{");
    Group group;
    while (!accept_punct("}")) {
      if (at_end()) fail({"}"});
      if (at_term_start()) {
        TriplePattern tp;
        tp.subject = parse_term();
        tp.predicate = parse_predicate();
        tp.object = parse_term();
        group.push_back(Element{std::move(tp)});
        reject_unsupported_punct();
        if (accept_punct(".")) continue;
        if (is_punct("}") || is_keyword("FILTER") || is_keyword("BIND") ||
            is_punct("{"))
          continue;
        fail({".", "}"});
      } else if (accept_keyword("FILTER")) {
        group.push_back(Element{parse_filter()});
        accept_punct(".");
      } else if (accept_keyword("BIND")) {
        expect_punct("(");
        Bind bind;
        bind.value = parse_term();
        expect_keyword("AS");
        bind.target = expect_variable();
        expect_punct(")");
        group.push_back(Element{std::move(bind)});
        accept_punct(".");
      } else if (is_punct("{")) {
        Group left = parse_group();
        if (!is_keyword("UNION")) unsupported("nested group without UNION");
        while (accept_keyword("UNION")) {
          Group right = parse_group();
          Union u{std::move(left), std::move(right)};
          if (is_keyword("UNION")) {
            left = Group{Element{std::move(u)}};
          } else {
            group.push_back(Element{std::move(u)});
            break;
          }
        }
        accept_punct(".");
      } else {
        reject_unsupported_punct();
        fail({"triple pattern", "FILTER", "BIND", "{", "}"});
      }
    }
    return group;
  }

  Filter parse_filter() {
    if (accept_keyword("NOT EXISTS")) return Filter{NotExists{parse_group()}};
    expect_punct("(");
    if (accept_keyword("NOT EXISTS")) {
      Filter f{NotExists{parse_group()}};
      expect_punct(")");
      return f;
    }
    Comparison cmp;
    cmp.lhs = parse_term();
    const Token* t = peek();
    static const std::array<std::pair<const char*, CompareOp>, 6> ops = {{
        {"=", CompareOp::Eq}, {"!=", CompareOp::Ne}, {"<", CompareOp::Lt},
        {"<=", CompareOp::Le}, {">", CompareOp::Gt}, {">=", CompareOp::Ge},
    }};
    bool found = false;
    if (t && t->kind == TokenKind::Punct) {
      for (const auto& [text, op] : ops) {
        if (t->text == text) {
          cmp.op = op;
          found = true;
          break;
        }
      }
    }
    if (!found) {
      reject_unsupported_punct();
      fail({"=", "!=", "<", "<=", ">", ">="});
    }
    ++pos_;
    cmp.rhs = parse_term();
    reject_unsupported_punct();
    expect_punct(")");
    return Filter{std::move(cmp)};
  }

  std::variant<Variable, Count> parse_order_expression() {
    if (accept_keyword("COUNT")) return parse_count_body();
    return expect_variable();
  }

  std::uint64_t parse_unsigned() {
    const Token* t = peek();
    if (!t || t->kind != TokenKind::NumericLiteral || t->text.front() == '-' ||
        t->text.find('.') != std::string::npos)
      fail({"non-negative integer"});
    std::uint64_t value = 0;
    auto [ptr, ec] = std::from_chars(t->text.data(), t->text.data() + t->text.size(), value);
    if (ec != std::errc()) fail({"non-negative integer"});
    ++pos_;
    return value;
  }

  void parse_modifiers(QueryAst& ast) {
    if (accept_keyword("GROUP BY")) {
      do {
        ast.group_by.push_back(expect_variable());
      } while (peek() && peek()->kind == TokenKind::Variable);
    }
    if (accept_keyword("ORDER BY")) {
      OrderBy order;
      if (accept_keyword("ASC") || is_keyword("DESC")) {
        if (accept_keyword("DESC")) order.direction = SortDirection::Desc;
        expect_punct("(");
        order.expression = parse_order_expression();
        expect_punct(")");
      } else {
        order.expression = parse_order_expression();
      }
      ast.order_by = std::move(order);
      const Token* t = peek();
      if (t && (t->kind == TokenKind::Variable || is_keyword("ASC") ||
                is_keyword("DESC") || is_keyword("COUNT")))
        unsupported("multiple ORDER BY keys");
    }
    for (int i = 0; i < 2; ++i) {
      if (!ast.limit && accept_keyword("LIMIT")) {
        ast.limit = parse_unsigned();
      } else if (!ast.offset && accept_keyword("OFFSET")) {
        ast.offset = parse_unsigned();
      }
    }
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  std::size_t end_offset_;
};

void collect_bound(const Group& group, std::set<std::string>& bound) {
  for (const auto& element : group) {
    if (auto* tp = std::get_if<TriplePattern>(&element.node)) {
      if (auto* v = std::get_if<Variable>(&tp->subject)) bound.insert(v->name);
      if (auto* v = std::get_if<Variable>(&tp->object)) bound.insert(v->name);
    } else if (auto* u = std::get_if<Union>(&element.node)) {
      collect_bound(u->left, bound);
      collect_bound(u->right, bound);
    } else if (auto* b = std::get_if<Bind>(&element.node)) {
      bound.insert(b->target.name);
    }
  }
}

bool valid_variable_name(const std::string& name) {
  return !name.empty() && std::all_of(name.begin(), name.end(), is_ident);
}

std::optional<std::string> validate_term(const Term& term) {
  return std::visit(
      [](const auto& t) -> std::optional<std::string> {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, Variable>) {
          if (!valid_variable_name(t.name)) return "invalid variable name '" + t.name + "'";
        } else if constexpr (std::is_same_v<T, Iri>) {
          if (t.value.substr(0, 4) != "http") return "IRI must start with http: " + t.value;
          for (char c : t.value)
            if (is_space(c) || c == '<' || c == '>') return "invalid character in IRI " + t.value;
        } else if constexpr (std::is_same_v<T, Mention>) {
          if (t.surface.empty()) return std::string("empty mention");
          if (t.surface.substr(0, 4) == "http") return "mention looks like an IRI: " + t.surface;
          if (t.surface != collapse_whitespace(t.surface)) return "mention is not whitespace-normalized";
          if (t.surface.find_first_of("<>") != std::string::npos) return "mention contains angle bracket";
          if (placeholder_index(t.surface)) return "mention collides with placeholder syntax";
        } else if constexpr (std::is_same_v<T, Placeholder>) {
          if (t.index < 1) return std::string("placeholder index must be >= 1");
        } else if constexpr (std::is_same_v<T, NumericLiteral>) {
          const auto& s = t.lexical;
          std::size_t i = (!s.empty() && s[0] == '-') ? 1 : 0;
          const std::size_t digits_start = i;
          while (i < s.size() && is_digit(s[i])) ++i;
          if (i == digits_start) return "invalid numeric literal '" + s + "'";
          if (i < s.size()) {
            if (s[i] != '.' || i + 1 >= s.size()) return "invalid numeric literal '" + s + "'";
            ++i;
            while (i < s.size() && is_digit(s[i])) ++i;
            if (i != s.size()) return "invalid numeric literal '" + s + "'";
          }
        }
        return std::nullopt;
      },
      term);
}

void append_term(std::vector<Token>& out, const Term& term) {
  std::visit(
      [&](const auto& t) {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, Variable>)
          out.push_back({TokenKind::Variable, "?" + t.name, 0});
        else if constexpr (std::is_same_v<T, Iri>)
          out.push_back({TokenKind::Iri, "<" + t.value + ">", 0});
        else if constexpr (std::is_same_v<T, Mention>)
          out.push_back({TokenKind::Mention, "<" + t.surface + ">", 0});
        else if constexpr (std::is_same_v<T, Placeholder>)
          out.push_back({TokenKind::Placeholder, "<entity_" + std::to_string(t.index) + ">", 0});
        else if constexpr (std::is_same_v<T, StringLiteral>)
          out.push_back({TokenKind::StringLiteral, escape_string(t.value), 0});
        else
          out.push_back({TokenKind::NumericLiteral, t.lexical, 0});
      },
      term);
}

void kw(std::vector<Token>& out, const char* text) {
  out.push_back({TokenKind::Keyword, text, 0});
}
void punct(std::vector<Token>& out, const char* text) {
  out.push_back({TokenKind::Punct, text, 0});
}

void append_count(std::vector<Token>& out, const Count& count) {
  kw(out, "COUNT");
  punct(out, "(");
  if (count.distinct) kw(out, "DISTINCT");
  append_term(out, count.inner);
  punct(out, ")");
}

void append_group(std::vector<Token>& out, const Group& group) {
  punct(out, "{");
  for (const auto& element : group) {
    std::visit(
        [&](const auto& node) {
          using T = std::decay_t<decltype(node)>;
          if constexpr (std::is_same_v<T, TriplePattern>) {
            append_term(out, node.subject);
            append_term(out, node.predicate);
            append_term(out, node.object);
            punct(out, ".");
          } else if constexpr (std::is_same_v<T, Filter>) {
            kw(out, "FILTER");
            if (auto* cmp = std::get_if<Comparison>(&node.condition)) {
              punct(out, "(");
              append_term(out, cmp->lhs);
              out.push_back({TokenKind::Punct, to_string(cmp->op), 0});
              append_term(out, cmp->rhs);
              punct(out, ")");
            } else {
              kw(out, "NOT EXISTS");
              append_group(out, std::get<NotExists>(node.condition).group);
            }
          } else if constexpr (std::is_same_v<T, Union>) {
            append_group(out, node.left);
            kw(out, "UNION");
            append_group(out, node.right);
          } else {
            kw(out, "BIND");
            punct(out, "(");
            append_term(out, node.value);
            kw(out, "AS");
            append_term(out, node.target);
            punct(out, ")");
          }
        },
        element.node);
  }
  punct(out, "}");
}

std::optional<std::string> validate_group(const Group& group) {
  std::optional<std::string> error;
  for_each_term(group, [&](const Term& t) {
    if (!error) error = validate_term(t);
  });
  if (error) return error;
  for (const auto& element : group) {
    if (auto* tp = std::get_if<TriplePattern>(&element.node)) {
      if (auto e = validate_term(Term{tp->predicate})) return e;
    } else if (auto* b = std::get_if<Bind>(&element.node)) {
      if (!valid_variable_name(b->target.name)) return "invalid BIND target";
    }
  }
  return std::nullopt;
}

}  // namespace

// ---------------------------------------------------------------------------

SyntaxError::SyntaxError(Kind kind, std::size_t offset, std::string message,
                         std::vector<std::string> expected)
    : std::runtime_error(std::move(message)),
      kind_(kind),
      offset_(offset),
      expected_(std::move(expected)) {}

const char* to_string(TokenKind kind) {
  switch (kind) {
    case TokenKind::Keyword: return "keyword";
    case TokenKind::Variable: return "variable";
    case TokenKind::Iri: return "iri";
    case TokenKind::Mention: return "mention";
    case TokenKind::Placeholder: return "placeholder";
    case TokenKind::StringLiteral: return "string-literal";
    case TokenKind::NumericLiteral: return "numeric-literal";
    case TokenKind::Punct: return "punct";
  }
  return "?";
}

const char* to_string(CompareOp op) {
  switch (op) {
    case CompareOp::Eq: return "=";
    case CompareOp::Ne: return "!=";
    case CompareOp::Lt: return "<";
    case CompareOp::Le: return "<=";
    case CompareOp::Gt: return ">";
    case CompareOp::Ge: return ">=";
  }
  return "?";
}

std::string to_text(const Term& term) {
  std::vector<Token> tokens;
  append_term(tokens, term);
  return tokens.front().text;
}

bool NotExists::operator==(const NotExists& other) const {
  return group == other.group;
}

bool Union::operator==(const Union& other) const {
  return left == other.left && right == other.right;
}

bool QueryAst::has_count() const {
  return std::any_of(projection.begin(), projection.end(), [](const auto& item) {
    return std::holds_alternative<Aggregate>(item);
  });
}

std::vector<Token> tokenize(std::string_view text) {
  return Tokenizer(text).run();
}

std::string join_tokens(const std::vector<Token>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto& t = tokens[i];
    if (i > 0) {
      const auto& prev = tokens[i - 1];
      const bool after_open = prev.kind == TokenKind::Punct && prev.text == "(";
      const bool before_close = t.kind == TokenKind::Punct && t.text == ")";
      const bool call = t.kind == TokenKind::Punct && t.text == "(" &&
                        prev.kind == TokenKind::Keyword &&
                        keyword_takes_paren(prev.text);
      if (!after_open && !before_close && !call) out.push_back(' ');
    }
    out += t.text;
  }
  return out;
}

QueryAst parse(std::string_view text) {
  Parser parser(tokenize(text), text.size());
  QueryAst ast = parser.run();
  if (auto error = validate(ast)) {
    // Point at the first occurrence of an offending variable when possible.
    std::size_t offset = 0;
    const auto quote = error->find('?');
    if (quote != std::string::npos) {
      const auto name = error->substr(quote, error->find(' ', quote) - quote);
      for (const auto& t : parser.tokens()) {
        if (t.kind == TokenKind::Variable && t.text == name) {
          offset = t.position;
          break;
        }
      }
    }
    throw SyntaxError(SyntaxError::Kind::Syntax, offset, *error);
  }
  return ast;
}

std::optional<std::string> validate(const QueryAst& ast) {
  if (ast.form == QueryForm::Ask) {
    if (!ast.projection.empty()) return std::string("ASK query must not project");
    if (ast.distinct || !ast.group_by.empty() || ast.order_by || ast.limit || ast.offset)
      return std::string("ASK query must not carry solution modifiers");
  } else if (ast.projection.empty()) {
    return std::string("SELECT query needs at least one projected item");
  }
  if (auto e = validate_group(ast.where)) return e;

  std::set<std::string> bound;
  collect_bound(ast.where, bound);
  std::set<std::string> aliases;
  auto require = [&](const Variable& v) -> std::optional<std::string> {
    if (!valid_variable_name(v.name)) return "invalid variable name '" + v.name + "'";
    if (!bound.count(v.name) && !aliases.count(v.name))
      return "?" + v.name + " is not bound by any triple pattern";
    return std::nullopt;
  };
  for (const auto& item : ast.projection) {
    if (auto* agg = std::get_if<Aggregate>(&item)) {
      if (!valid_variable_name(agg->alias.name)) return std::string("invalid aggregate alias");
      aliases.insert(agg->alias.name);
    }
  }
  for (const auto& item : ast.projection) {
    std::optional<std::string> e;
    if (auto* v = std::get_if<Variable>(&item))
      e = require(*v);
    else
      e = require(std::get<Aggregate>(item).count.inner);
    if (e) return e;
  }
  for (const auto& v : ast.group_by)
    if (auto e = require(v)) return e;
  if (ast.order_by) {
    const auto& expr = ast.order_by->expression;
    auto e = std::holds_alternative<Variable>(expr) ? require(std::get<Variable>(expr))
                                                    : require(std::get<Count>(expr).inner);
    if (e) return e;
  }
  return std::nullopt;
}

std::vector<Token> serialize_tokens(const QueryAst& ast) {
  std::vector<Token> out;
  if (ast.form == QueryForm::Ask) {
    kw(out, "ASK");
    append_group(out, ast.where);
    return out;
  }
  kw(out, "SELECT");
  if (ast.distinct) kw(out, "DISTINCT");
  for (const auto& item : ast.projection) {
    if (auto* v = std::get_if<Variable>(&item)) {
      append_term(out, *v);
    } else {
      const auto& agg = std::get<Aggregate>(item);
      append_count(out, agg.count);
      kw(out, "AS");
      append_term(out, agg.alias);
    }
  }
  kw(out, "WHERE");
  append_group(out, ast.where);
  if (!ast.group_by.empty()) {
    kw(out, "GROUP BY");
    for (const auto& v : ast.group_by) append_term(out, v);
  }
  if (ast.order_by) {
    kw(out, "ORDER BY");
    kw(out, ast.order_by->direction == SortDirection::Asc ? "ASC" : "DESC");
    punct(out, "(");
    if (auto* v = std::get_if<Variable>(&ast.order_by->expression))
      append_term(out, *v);
    else
      append_count(out, std::get<Count>(ast.order_by->expression));
    punct(out, ")");
  }
  if (ast.limit) {
    kw(out, "LIMIT");
    out.push_back({TokenKind::NumericLiteral, std::to_string(*ast.limit), 0});
  }
  if (ast.offset) {
    kw(out, "OFFSET");
    out.push_back({TokenKind::NumericLiteral, std::to_string(*ast.offset), 0});
  }
  return out;
}

std::string serialize(const QueryAst& ast) {
  return join_tokens(serialize_tokens(ast));
}

const std::vector<std::string>& keyword_vocabulary() {
  static const std::vector<std::string> vocab = {
      "SELECT", "ASK",    "WHERE", "DISTINCT", "COUNT",    "AS",
      "FILTER", "UNION",  "GROUP BY", "ORDER BY", "ASC",   "DESC",
      "LIMIT",  "OFFSET", "BIND",  "NOT EXISTS",
  };
  return vocab;
}

std::vector<std::string> special_token_vocabulary(
    const std::vector<std::string>& relations) {
  if (relations.empty())
    throw std::invalid_argument("relation set is empty");
  std::vector<std::string> out = {"SELECT", "COUNT", "ORDER BY", "{", "}",
                                  "(",      ")",     "."};
  for (const auto& k : keyword_vocabulary()) out.push_back(k);
  for (const auto& r : relations) {
    if (auto e = validate_term(Term{Iri{r}}))
      throw std::invalid_argument("invalid relation IRI: " + *e);
    out.push_back(r);
  }
  std::unordered_set<std::string> seen;
  std::vector<std::string> unique;
  for (auto& t : out)
    if (seen.insert(t).second) unique.push_back(std::move(t));
  return unique;
}

}  // namespace nlqx::sparql
