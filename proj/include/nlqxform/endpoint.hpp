#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <semaphore>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "nlqxform/sparql.hpp"

namespace nlqx {

/// An IRI or a literal value.
struct Node {
  bool literal = false;
  std::string value;
  auto operator<=>(const Node&) const = default;
};

struct ResultSet {
  enum class Kind { Bindings, Boolean };

  Kind kind = Kind::Bindings;
  std::vector<std::string> variables;
  /// Each row binds a subset of `variables`.
  std::vector<std::map<std::string, Node>> rows;
  bool truth = false;

  bool operator==(const ResultSet&) const = default;
};

/// SPARQL 1.1 query results JSON.
std::string to_results_json(const ResultSet& results);
/// Throws EndpointError (MalformedResults).
ResultSet parse_results_json(std::string_view body);

struct Triple {
  std::string subject;
  std::string predicate;
  Node object;
  auto operator<=>(const Triple&) const = default;
};

/// In-memory triple set.
class Graph {
 public:
  Graph() = default;
  explicit Graph(std::set<Triple> triples) : triples_(std::move(triples)) {}

  bool insert(Triple t) { return triples_.insert(std::move(t)).second; }
  const std::set<Triple>& triples() const { return triples_; }
  std::size_t size() const { return triples_.size(); }

 private:
  std::set<Triple> triples_;
};

/// Reads `<s> <p> <o> .` / `<s> <p> "literal" .` lines; '#' comments and
/// blank lines are skipped, datatype and language suffixes on literals are
/// dropped. Throws FormatError carrying the 1-based line number.
Graph load_graph(const std::filesystem::path& path);
Graph parse_graph(std::string_view text, const std::string& source = "<memory>");

/// Reference evaluator for the supported subset: nested-loop join, then
/// FILTER, grouping/COUNT, ORDER BY, projection, DISTINCT, OFFSET/LIMIT.
/// Throws EndpointError (Unsupported) for unresolved mentions/placeholders.
ResultSet evaluate_local(const sparql::QueryAst& ast, const Graph& graph);

/// Integers compare numerically, everything else lexicographically.
int compare_values(std::string_view a, std::string_view b);

struct EndpointConfig {
  std::string url;
  std::chrono::milliseconds timeout{15000};
  int retries = 2;
  std::chrono::milliseconds backoff{500};
  int max_in_flight = 4;
};

/// Remote SPARQL endpoint over HTTP. Shareable across threads; at most
/// max_in_flight requests run at once.
class EndpointClient {
 public:
  explicit EndpointClient(EndpointConfig config);

  /// Throws EndpointError (Http, Timeout, Connection, MalformedResults).
  ResultSet execute(std::string_view query);

  std::size_t requests_sent() const { return requests_; }
  const EndpointConfig& config() const { return config_; }

 private:
  EndpointConfig config_;
  std::counting_semaphore<64> in_flight_;
  std::atomic<std::size_t> requests_{0};
};

/// Executes a query either remotely or against a local graph.
class QueryExecutor {
 public:
  virtual ~QueryExecutor() = default;
  virtual ResultSet execute(const sparql::QueryAst& ast) = 0;
};

class LocalExecutor : public QueryExecutor {
 public:
  explicit LocalExecutor(std::shared_ptr<const Graph> graph) : graph_(std::move(graph)) {}
  ResultSet execute(const sparql::QueryAst& ast) override;

 private:
  std::shared_ptr<const Graph> graph_;
};

class RemoteExecutor : public QueryExecutor {
 public:
  explicit RemoteExecutor(EndpointConfig config) : client_(std::move(config)) {}
  ResultSet execute(const sparql::QueryAst& ast) override;
  EndpointClient& client() { return client_; }

 private:
  EndpointClient client_;
};

}  // namespace nlqx
