#include "nlqxform/endpoint.hpp"

#include <algorithm>
#include <charconv>
#include <optional>
#include <thread>

#include <json.hpp>

#include "io.hpp"
#include "nlqxform/errors.hpp"
#include "nlqxform/http.hpp"

namespace nlqx {

namespace {

using Solution = std::map<std::string, Node>;

std::optional<long long> as_integer(std::string_view s) {
  if (s.empty() || s.size() > 19) return std::nullopt;
  long long value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

[[noreturn]] void unresolved(const sparql::Term& term) {
  throw EndpointError(EndpointError::Kind::Unsupported,
                      "cannot execute unresolved entity slot " + sparql::to_text(term));
}

// Does the pattern term accept this node? Binds unbound variables.
bool unify(const sparql::Term& term, const Node& node, Solution& s) {
  return std::visit(
      [&](const auto& t) -> bool {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, sparql::Variable>) {
          auto it = s.find(t.name);
          if (it == s.end()) {
            s.emplace(t.name, node);
            return true;
          }
          return it->second == node;
        } else if constexpr (std::is_same_v<T, sparql::Iri>) {
          return !node.literal && node.value == t.value;
        } else if constexpr (std::is_same_v<T, sparql::StringLiteral>) {
          return node.literal && node.value == t.value;
        } else if constexpr (std::is_same_v<T, sparql::NumericLiteral>) {
          return node.literal && node.value == t.lexical;
        } else {
          unresolved(sparql::Term{t});
        }
      },
      term);
}

std::optional<Node> resolve(const sparql::Term& term, const Solution& s) {
  return std::visit(
      [&](const auto& t) -> std::optional<Node> {
        using T = std::decay_t<decltype(t)>;
        if constexpr (std::is_same_v<T, sparql::Variable>) {
          auto it = s.find(t.name);
          if (it == s.end()) return std::nullopt;
          return it->second;
        } else if constexpr (std::is_same_v<T, sparql::Iri>) {
          return Node{false, t.value};
        } else if constexpr (std::is_same_v<T, sparql::StringLiteral>) {
          return Node{true, t.value};
        } else if constexpr (std::is_same_v<T, sparql::NumericLiteral>) {
          return Node{true, t.lexical};
        } else {
          unresolved(sparql::Term{t});
        }
      },
      term);
}

bool nodes_equal(const Node& a, const Node& b) {
  if (a.literal && b.literal) {
    auto x = as_integer(a.value);
    auto y = as_integer(b.value);
    if (x && y) return *x == *y;
  }
  return a == b;
}

class Evaluator {
 public:
  explicit Evaluator(const Graph& graph) : graph_(graph) {}

  std::vector<Solution> group(const sparql::Group& g, std::vector<Solution> input) {
    std::vector<const sparql::Filter*> filters;
    auto solutions = std::move(input);
    for (const auto& element : g) {
      if (auto* tp = std::get_if<sparql::TriplePattern>(&element.node)) {
        solutions = join(solutions, *tp);
      } else if (auto* u = std::get_if<sparql::Union>(&element.node)) {
        auto left = group(u->left, solutions);
        auto right = group(u->right, solutions);
        left.insert(left.end(), std::make_move_iterator(right.begin()),
                    std::make_move_iterator(right.end()));
        solutions = std::move(left);
      } else if (auto* b = std::get_if<sparql::Bind>(&element.node)) {
        for (auto& s : solutions) {
          if (s.count(b->target.name))
            throw EndpointError(EndpointError::Kind::Unsupported,
                                "BIND target ?" + b->target.name + " is already bound");
          if (auto value = resolve(b->value, s)) s.emplace(b->target.name, *value);
        }
      } else {
        filters.push_back(&std::get<sparql::Filter>(element.node));
      }
    }
    if (filters.empty()) return solutions;
    std::vector<Solution> kept;
    for (auto& s : solutions) {
      bool pass = true;
      for (const auto* f : filters) {
        if (!test(*f, s)) {
          pass = false;
          break;
        }
      }
      if (pass) kept.push_back(std::move(s));
    }
    return kept;
  }

 private:
  std::vector<Solution> join(const std::vector<Solution>& input,
                             const sparql::TriplePattern& tp) {
    std::vector<Solution> out;
    for (const auto& s : input) {
      for (const auto& triple : graph_.triples()) {
        if (triple.predicate != tp.predicate.value) continue;
        Solution next = s;
        if (!unify(tp.subject, Node{false, triple.subject}, next)) continue;
        if (!unify(tp.object, triple.object, next)) continue;
        out.push_back(std::move(next));
      }
    }
    // Terms that can never match still need to be rejected when the graph
    // has no triple to unify against.
    if (out.empty()) {
      for (const auto* term : {&tp.subject, &tp.object})
        if (sparql::is_mention(*term) || sparql::is_placeholder(*term)) unresolved(*term);
    }
    return out;
  }

  bool test(const sparql::Filter& f, const Solution& s) {
    if (auto* ne = std::get_if<sparql::NotExists>(&f.condition))
      return group(ne->group, {s}).empty();
    const auto& cmp = std::get<sparql::Comparison>(f.condition);
    auto lhs = resolve(cmp.lhs, s);
    auto rhs = resolve(cmp.rhs, s);
    if (!lhs || !rhs) return false;
    switch (cmp.op) {
      case sparql::CompareOp::Eq: return nodes_equal(*lhs, *rhs);
      case sparql::CompareOp::Ne: return !nodes_equal(*lhs, *rhs);
      case sparql::CompareOp::Lt: return compare_values(lhs->value, rhs->value) < 0;
      case sparql::CompareOp::Le: return compare_values(lhs->value, rhs->value) <= 0;
      case sparql::CompareOp::Gt: return compare_values(lhs->value, rhs->value) > 0;
      case sparql::CompareOp::Ge: return compare_values(lhs->value, rhs->value) >= 0;
    }
    return false;
  }

  const Graph& graph_;
};

long long count_values(const std::vector<const Solution*>& members,
                       const sparql::Count& count) {
  if (!count.distinct) {
    long long n = 0;
    for (const auto* s : members) n += s->count(count.inner.name) ? 1 : 0;
    return n;
  }
  std::set<Node> seen;
  for (const auto* s : members)
    if (auto it = s->find(count.inner.name); it != s->end()) seen.insert(it->second);
  return static_cast<long long>(seen.size());
}

constexpr const char* kOrderKey = "\x01order";

std::string parse_literal(std::string_view text, std::size_t& i,
                          const std::string& source, std::size_t lineno) {
  std::string value;
  ++i;  // opening quote
  while (true) {
    if (i >= text.size()) throw FormatError(source, lineno, "unterminated literal");
    const char c = text[i++];
    if (c == '"') break;
    if (c == '\\' && i < text.size()) {
      const char e = text[i++];
      value.push_back(e == 'n' ? '\n' : e == 't' ? '\t' : e == 'r' ? '\r' : e);
      continue;
    }
    value.push_back(c);
  }
  // Drop ^^<datatype> or @lang.
  if (text.substr(i, 2) == "^^") {
    i += 2;
    if (i < text.size() && text[i] == '<') {
      const auto close = text.find('>', i);
      if (close == std::string_view::npos)
        throw FormatError(source, lineno, "unterminated datatype IRI");
      i = close + 1;
    }
  } else if (i < text.size() && text[i] == '@') {
    while (i < text.size() && text[i] != ' ' && text[i] != '\t') ++i;
  }
  return value;
}

std::string parse_iri(std::string_view text, std::size_t& i,
                      const std::string& source, std::size_t lineno) {
  if (i >= text.size() || text[i] != '<')
    throw FormatError(source, lineno, "expected '<' at column " + std::to_string(i + 1));
  const auto close = text.find('>', i);
  if (close == std::string_view::npos)
    throw FormatError(source, lineno, "unterminated IRI");
  std::string iri(text.substr(i + 1, close - i - 1));
  i = close + 1;
  if (iri.empty()) throw FormatError(source, lineno, "empty IRI");
  return iri;
}

void skip_blanks(std::string_view text, std::size_t& i) {
  while (i < text.size() && (text[i] == ' ' || text[i] == '\t' || text[i] == '\r')) ++i;
}

std::string excerpt(const std::string& body) {
  return body.size() <= 200 ? body : body.substr(0, 200) + "...";
}

}  // namespace

int compare_values(std::string_view a, std::string_view b) {
  auto x = as_integer(a);
  auto y = as_integer(b);
  if (x && y) return *x < *y ? -1 : (*x > *y ? 1 : 0);
  const int c = a.compare(b);
  return c < 0 ? -1 : (c > 0 ? 1 : 0);
}

Graph parse_graph(std::string_view text, const std::string& source) {
  Graph graph;
  std::size_t lineno = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto line = text.substr(start, end - start);
    start = end + 1;
    ++lineno;
    std::size_t i = 0;
    skip_blanks(line, i);
    if (i >= line.size() || line[i] == '#') {
      if (end == text.size()) break;
      continue;
    }
    Triple t;
    t.subject = parse_iri(line, i, source, lineno);
    skip_blanks(line, i);
    t.predicate = parse_iri(line, i, source, lineno);
    skip_blanks(line, i);
    if (i < line.size() && line[i] == '"') {
      t.object = Node{true, parse_literal(line, i, source, lineno)};
    } else {
      t.object = Node{false, parse_iri(line, i, source, lineno)};
    }
    skip_blanks(line, i);
    if (i >= line.size() || line[i] != '.')
      throw FormatError(source, lineno, "expected '.' terminating the triple");
    ++i;
    skip_blanks(line, i);
    if (i < line.size() && line[i] != '#')
      throw FormatError(source, lineno, "trailing characters after '.'");
    graph.insert(std::move(t));
    if (end == text.size()) break;
  }
  return graph;
}

Graph load_graph(const std::filesystem::path& path) {
  auto text = io::read_file(path);
  if (!text) throw ConfigError("cannot open graph file " + path.string());
  return parse_graph(*text, path.string());
}

ResultSet evaluate_local(const sparql::QueryAst& ast, const Graph& graph) {
  Evaluator evaluator(graph);
  auto solutions = evaluator.group(ast.where, {Solution{}});

  ResultSet out;
  if (ast.form == sparql::QueryForm::Ask) {
    out.kind = ResultSet::Kind::Boolean;
    out.truth = !solutions.empty();
    return out;
  }

  for (const auto& item : ast.projection) {
    if (auto* v = std::get_if<sparql::Variable>(&item))
      out.variables.push_back(v->name);
    else
      out.variables.push_back(std::get<sparql::Aggregate>(item).alias.name);
  }

  // Rows before projection; aggregate queries collapse solutions per group.
  std::vector<Solution> rows;
  const bool aggregate = ast.has_count() || !ast.group_by.empty();
  if (aggregate) {
    std::vector<std::vector<std::optional<Node>>> keys;
    std::map<std::vector<std::optional<Node>>, std::vector<const Solution*>> groups;
    for (const auto& s : solutions) {
      std::vector<std::optional<Node>> key;
      for (const auto& v : ast.group_by) {
        auto it = s.find(v.name);
        key.push_back(it == s.end() ? std::nullopt : std::optional<Node>(it->second));
      }
      auto [it, inserted] = groups.try_emplace(key);
      if (inserted) keys.push_back(key);
      it->second.push_back(&s);
    }
    if (ast.group_by.empty() && keys.empty()) {
      keys.emplace_back();
      groups[{}];
    }
    for (const auto& key : keys) {
      const auto& members = groups.at(key);
      Solution row;
      for (std::size_t i = 0; i < ast.group_by.size(); ++i)
        if (key[i]) row.emplace(ast.group_by[i].name, *key[i]);
      for (const auto& item : ast.projection) {
        if (auto* v = std::get_if<sparql::Variable>(&item)) {
          const bool grouped =
              std::any_of(ast.group_by.begin(), ast.group_by.end(),
                          [&](const sparql::Variable& g) { return g.name == v->name; });
          if (!grouped)
            throw EndpointError(EndpointError::Kind::Unsupported,
                                "?" + v->name + " is projected but not grouped");
          continue;
        }
        const auto& agg = std::get<sparql::Aggregate>(item);
        row[agg.alias.name] =
            Node{true, std::to_string(count_values(members, agg.count))};
      }
      if (ast.order_by) {
        if (auto* c = std::get_if<sparql::Count>(&ast.order_by->expression))
          row[kOrderKey] = Node{true, std::to_string(count_values(members, *c))};
      }
      rows.push_back(std::move(row));
    }
  } else {
    if (ast.order_by && std::holds_alternative<sparql::Count>(ast.order_by->expression))
      throw EndpointError(EndpointError::Kind::Unsupported,
                          "ORDER BY COUNT requires an aggregate query");
    rows = std::move(solutions);
  }

  if (ast.order_by) {
    const auto& order = *ast.order_by;
    const std::string key = std::holds_alternative<sparql::Variable>(order.expression)
                                ? std::get<sparql::Variable>(order.expression).name
                                : std::string(kOrderKey);
    const bool descending = order.direction == sparql::SortDirection::Desc;
    std::stable_sort(rows.begin(), rows.end(), [&](const Solution& a, const Solution& b) {
      auto ia = a.find(key);
      auto ib = b.find(key);
      const bool ba = ia != a.end();
      const bool bb = ib != b.end();
      int c;
      if (!ba || !bb)
        c = ba == bb ? 0 : (ba ? 1 : -1);  // unbound sorts first
      else
        c = compare_values(ia->second.value, ib->second.value);
      return descending ? c > 0 : c < 0;
    });
  }

  for (const auto& row : rows) {
    std::map<std::string, Node> projected;
    for (const auto& name : out.variables)
      if (auto it = row.find(name); it != row.end()) projected.emplace(name, it->second);
    out.rows.push_back(std::move(projected));
  }
  if (ast.distinct) {
    std::vector<std::map<std::string, Node>> unique;
    std::set<std::map<std::string, Node>> seen;
    for (auto& row : out.rows)
      if (seen.insert(row).second) unique.push_back(std::move(row));
    out.rows = std::move(unique);
  }
  const std::size_t offset = ast.offset.value_or(0);
  if (offset >= out.rows.size()) {
    out.rows.clear();
  } else if (offset > 0) {
    out.rows.erase(out.rows.begin(), out.rows.begin() + static_cast<std::ptrdiff_t>(offset));
  }
  if (ast.limit && *ast.limit < out.rows.size())
    out.rows.resize(*ast.limit);
  return out;
}

// ---------------------------------------------------------------------------

std::string to_results_json(const ResultSet& results) {
  nlohmann::ordered_json j;
  if (results.kind == ResultSet::Kind::Boolean) {
    j["head"] = nlohmann::json::object();
    j["boolean"] = results.truth;
    return j.dump();
  }
  j["head"]["vars"] = results.variables;
  auto bindings = nlohmann::ordered_json::array();
  for (const auto& row : results.rows) {
    nlohmann::ordered_json b = nlohmann::ordered_json::object();
    for (const auto& [name, node] : row) {
      b[name]["type"] = node.literal ? "literal" : "uri";
      b[name]["value"] = node.value;
    }
    bindings.push_back(std::move(b));
  }
  j["results"]["bindings"] = std::move(bindings);
  return j.dump();
}

ResultSet parse_results_json(std::string_view body) {
  auto malformed = [](const std::string& why) {
    return EndpointError(EndpointError::Kind::MalformedResults, "malformed results: " + why);
  };
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw malformed(e.what());
  }
  if (!doc.is_object()) throw malformed("top level is not an object");
  ResultSet out;
  if (doc.contains("boolean")) {
    if (!doc["boolean"].is_boolean()) throw malformed("'boolean' is not a boolean");
    out.kind = ResultSet::Kind::Boolean;
    out.truth = doc["boolean"].get<bool>();
    return out;
  }
  if (!doc.contains("head") || !doc["head"].is_object()) throw malformed("missing head");
  const auto& head = doc["head"];
  if (head.contains("vars")) {
    if (!head["vars"].is_array()) throw malformed("head.vars is not a list");
    for (const auto& v : head["vars"]) {
      if (!v.is_string()) throw malformed("variable name is not a string");
      out.variables.push_back(v.get<std::string>());
    }
  }
  if (!doc.contains("results") || !doc["results"].is_object() ||
      !doc["results"].contains("bindings") || !doc["results"]["bindings"].is_array())
    throw malformed("missing results.bindings");
  for (const auto& b : doc["results"]["bindings"]) {
    if (!b.is_object()) throw malformed("binding is not an object");
    std::map<std::string, Node> row;
    for (const auto& [name, cell] : b.items()) {
      if (std::find(out.variables.begin(), out.variables.end(), name) == out.variables.end())
        throw malformed("binding for undeclared variable " + name);
      if (!cell.is_object() || !cell.contains("value") || !cell["value"].is_string())
        throw malformed("binding cell without value");
      const auto type = cell.value("type", std::string("literal"));
      row.emplace(name, Node{type != "uri", cell["value"].get<std::string>()});
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

// ---------------------------------------------------------------------------

EndpointClient::EndpointClient(EndpointConfig config)
    : config_(std::move(config)), in_flight_(std::clamp(config_.max_in_flight, 1, 64)) {
  http::split_url(config_.url);
  if (config_.max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
  if (config_.retries < 0) throw ConfigError("retries must be >= 0");
}

ResultSet EndpointClient::execute(std::string_view query) {
  struct Slot {
    std::counting_semaphore<64>& sem;
    explicit Slot(std::counting_semaphore<64>& s) : sem(s) { sem.acquire(); }
    ~Slot() { sem.release(); }
  } slot(in_flight_);

  http::Request request;
  const auto encoded = http::url_encode(query);
  if (encoded.size() <= 1800) {
    request.url = config_.url + (config_.url.find('?') == std::string::npos ? "?" : "&") +
                  "query=" + encoded;
  } else {
    request.url = config_.url;
    request.method = "POST";
    request.body = "query=" + encoded;
    request.content_type = "application/x-www-form-urlencoded";
  }
  request.headers["Accept"] = "application/sparql-results+json";
  request.timeout = config_.timeout;

  http::Outcome outcome;
  for (int attempt = 0; attempt <= config_.retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(config_.backoff * (1 << (attempt - 1)));
    ++requests_;
    outcome = http::perform(request);
    if (outcome.failure != http::Failure::None) continue;
    const int status = outcome.response.status;
    if (status >= 200 && status < 300) return parse_results_json(outcome.response.body);
    if (status != 429 && status < 500) break;
  }
  if (outcome.failure == http::Failure::Timeout)
    throw EndpointError(EndpointError::Kind::Timeout, "endpoint timed out: " + outcome.error);
  if (outcome.failure == http::Failure::Connection)
    throw EndpointError(EndpointError::Kind::Connection,
                        "cannot reach endpoint: " + outcome.error);
  throw EndpointError(EndpointError::Kind::Http,
                      "endpoint returned HTTP " + std::to_string(outcome.response.status) +
                          ": " + excerpt(outcome.response.body),
                      outcome.response.status);
}

ResultSet LocalExecutor::execute(const sparql::QueryAst& ast) {
  return evaluate_local(ast, *graph_);
}

ResultSet RemoteExecutor::execute(const sparql::QueryAst& ast) {
  return client_.execute(sparql::serialize(ast));
}

}  // namespace nlqx
