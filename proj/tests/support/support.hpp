#pragma once

// Independent oracles and generators shared by the unit and acceptance tests.
// Nothing here calls into the library code it is used to check.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "nlqxform/endpoint.hpp"
#include "nlqxform/sparql.hpp"

namespace nlqx::testing {

using Rng = std::mt19937_64;

std::filesystem::path fixture_dir();
std::filesystem::path cli_path();
std::filesystem::path mock_endpoint_path();

/// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);
std::string slurp(const std::filesystem::path& path);
void spit(const std::filesystem::path& path, std::string_view text);

struct Run {
  int exit_code = -1;
  std::string out;
  std::string err;
};
/// Runs argv (no shell) with an optional working directory.
Run run_process(const std::vector<std::string>& argv, const std::filesystem::path& cwd = {});

// ---------------------------------------------------------------------------
// Strings

/// Textbook O(nm) Levenshtein table.
std::size_t dp_edit_distance(std::string_view a, std::string_view b);
double dp_similarity(std::string_view a, std::string_view b);
std::string random_string(Rng& rng, std::size_t max_len, std::string_view alphabet);

// ---------------------------------------------------------------------------
// Queries

struct AstOptions {
  bool mentions = true;
  bool placeholders = true;
  bool literals = true;
  bool filters = true;
  bool unions = true;
  bool binds = true;
  bool modifiers = true;
  int max_depth = 2;
};

/// A random query that satisfies sparql::validate().
sparql::QueryAst random_ast(Rng& rng, const AstOptions& options = {});

/// Placeholder indices in canonical text order, repeats included.
std::vector<int> placeholder_sequence(const sparql::QueryAst& ast);

// ---------------------------------------------------------------------------
// Evaluation

struct EvalInstance {
  Graph graph;
  sparql::QueryAst query;
};

/// Graph of at most `max_triples` over a small node pool, and a query of
/// one to three triple patterns with an optional comparison filter and an
/// optional COUNT or ASK form.
EvalInstance random_eval_instance(Rng& rng, std::size_t max_triples);

using Row = std::map<std::string, Node>;

/// Tries every assignment of graph nodes to the query's variables. Handles
/// the shapes random_eval_instance() produces.
ResultSet enumerate_answers(const sparql::QueryAst& query, const Graph& graph);

/// Rows sorted, for bag comparison.
std::vector<Row> sorted_rows(const ResultSet& r);

}  // namespace nlqx::testing
