#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nlqxform/sparql.hpp"

namespace nlqx {

/// The configured relation IRIs plus the IRI prefixes treated as schema or
/// class vocabulary. Everything else in an entity slot is an entity IRI.
struct RelationVocabulary {
  std::vector<std::string> relations;
  std::vector<std::string> schema_prefixes = {
      "https://dblp.org/rdf/schema#",
      "http://www.w3.org/",
      "http://purl.org/",
  };

  bool is_relation(std::string_view iri) const;
  bool is_entity_iri(std::string_view iri) const;

  /// One IRI per line; blank lines and '#' comments ignored. Angle brackets
  /// around an IRI are tolerated.
  static RelationVocabulary load(const std::filesystem::path& path);
  /// The twelve DBLP schema relations.
  static RelationVocabulary dblp_default();
};

struct Delexicalized {
  sparql::QueryAst template_ast;
  /// bindings[k-1] is the term replaced by <entity_k>.
  std::vector<sparql::Term> bindings;
};

/// Replaces mentions, entity IRIs and pre-existing placeholders with
/// <entity_k>, numbered by first appearance in canonical text order.
/// Identical terms share one placeholder.
Delexicalized delexicalize(const sparql::QueryAst& ast,
                           const RelationVocabulary& vocabulary);

/// Fills <entity_k> with terms[k-1]. Throws ArityMismatch when fewer terms
/// than the highest placeholder index are given.
sparql::QueryAst relexicalize(const sparql::QueryAst& template_ast,
                              const std::vector<sparql::Term>& terms);

/// Highest placeholder index in the query, 0 when there are none.
int max_placeholder(const sparql::QueryAst& ast);

/// Delexicalizes text that failed to parse: every bracketed non-IRI span
/// becomes <entity_k> (identical spans share k). Returns the probe string
/// and the mention surfaces in placeholder order.
std::pair<std::string, std::vector<std::string>> delexicalize_raw(
    std::string_view text);

/// Levenshtein distance over bytes. When `bound` is non-zero and the
/// distance exceeds it, some value greater than `bound` is returned early.
std::size_t edit_distance(std::string_view a, std::string_view b,
                          std::size_t bound = 0);

/// 1 - editDistance(a, b) / max(|a|, |b|); similarity("", "") == 1.
double similarity(std::string_view a, std::string_view b);

struct Template {
  std::string canonical_text;
  int placeholder_count = 0;
  int frequency = 0;
  std::vector<std::string> source_ids;

  bool operator==(const Template&) const = default;
};

struct SkippedQuery {
  std::string id;
  std::string reason;
};

/// Deduplicated delexicalized training queries, sorted by canonical text.
/// Immutable once built; safe for concurrent retrieval.
class TemplateBase {
 public:
  TemplateBase() = default;

  static TemplateBase build(
      const std::vector<std::pair<std::string, std::string>>& training_queries,
      const RelationVocabulary& vocabulary,
      std::vector<SkippedQuery>* skipped = nullptr);

  /// Reads the JSON-lines format written by save(). Throws FormatError.
  static TemplateBase load(const std::filesystem::path& path);
  static TemplateBase from_templates(std::vector<Template> templates);

  void save(const std::filesystem::path& path) const;
  std::string to_jsonl() const;

  const std::vector<Template>& templates() const { return templates_; }
  const sparql::QueryAst& ast(std::size_t i) const { return asts_[i]; }
  std::size_t size() const { return templates_.size(); }
  bool empty() const { return templates_.empty(); }
  long total_frequency() const;

 private:
  std::vector<Template> templates_;
  std::vector<sparql::QueryAst> asts_;
};

struct ScoredTemplate {
  std::size_t index;  // into TemplateBase::templates()
  double score;
};

/// Ranked by similarity descending, then frequency descending, then
/// canonical text ascending. Throws EmptyBase; k must be >= 1.
std::vector<ScoredTemplate> top_k(const TemplateBase& base,
                                  std::string_view probe, std::size_t k);

}  // namespace nlqx
