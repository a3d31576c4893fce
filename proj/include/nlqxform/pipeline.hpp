#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nlqxform/endpoint.hpp"
#include "nlqxform/entity_linking.hpp"
#include "nlqxform/evaluation.hpp"
#include "nlqxform/template_base.hpp"
#include "nlqxform/translator.hpp"

namespace nlqx {

enum class AnswerMode { Remote, Local };

struct PipelineConfig {
  int k_templates = 3;
  int max_combinations_per_template = 10;
  AnswerMode answer_mode = AnswerMode::Local;
  std::filesystem::path graph_path;
  EndpointConfig endpoint;
  Backend translator_backend = Backend::Baseline;
  NeuralConfig neural;
  bool prune_unused_entities = false;
  std::filesystem::path template_base_path;  // empty: built from training
  std::filesystem::path training_path;
  std::filesystem::path relations_path;  // empty: the built-in DBLP relations
  LinkerConfig linker;
  int jobs = 1;

  /// Throws ConfigError.
  void validate() const;
};

/// Reads the JSON config format. Relative paths resolve against
/// `base_dir`; unknown keys are rejected. Throws ConfigError.
PipelineConfig parse_pipeline_config(std::string_view json_text,
                                     const std::filesystem::path& base_dir = {});

enum class QAStatus { Answered, NoAnswer, Error };
const char* to_string(QAStatus status);

enum class QueryOutcome { Accepted, Rejected, Failed };
const char* to_string(QueryOutcome outcome);

struct TriedQuery {
  std::string query;
  QueryOutcome outcome = QueryOutcome::Rejected;
  std::string detail;
};

/// One entity slot of a logical form and what linking made of it.
struct LinkedSlot {
  std::string surface;  // mention text, or the IRI for an IRI slot
  bool is_iri = false;
  EntityType type = EntityType::Author;
  std::vector<EntityCandidate> candidates;
  std::string error;  // why linking produced nothing
};

struct RetrievedTemplate {
  std::string canonical_text;
  double score = 0;
};

/// Steps II-IV for one logical form.
struct FormTrace {
  std::string logical_form;
  bool parsed = false;
  std::string probe;
  std::vector<RetrievedTemplate> templates;
  std::vector<LinkedSlot> slots;
  std::string note;
};

struct QAResult {
  std::string question_id;
  std::string question;
  std::string logical_form;
  std::vector<std::string> alternatives;
  std::vector<FormTrace> forms;
  std::vector<TriedQuery> tried_queries;
  std::optional<std::string> chosen_query;
  /// The chosen query only won because nothing passed is_answer.
  bool fallback = false;
  AnswerSet answers;
  std::vector<std::string> linked_entities;  // the entity-linking report
  QAStatus status = QAStatus::NoAnswer;
  std::string message;
};

std::string to_json(const QAResult& result);

struct CandidateQuery {
  std::size_t template_rank = 0;   // 0-based position in the ranked list
  std::vector<int> combination;    // 1-based candidate rank per slot
  sparql::QueryAst ast;
};

/// Templates outer, candidate combinations inner in lexicographic product
/// order, at most `max_combinations` per template. Templates whose
/// placeholder count differs from the slot count are skipped. Throws
/// NoViableCandidate when nothing remains.
std::vector<CandidateQuery> enumerate_candidates(
    const TemplateBase& base, const std::vector<ScoredTemplate>& ranked,
    const std::vector<std::vector<sparql::Term>>& slot_candidates, int max_combinations);

/// ASK: always. COUNT: some count value above zero. Otherwise: any row.
bool is_answer(const ResultSet& result, const sparql::QueryAst& query);

/// Everything answer() needs; built from a config or injected by tests.
struct PipelineParts {
  std::shared_ptr<const TemplateBase> base;
  RelationVocabulary vocabulary;
  std::shared_ptr<const Translator> translator;
  std::shared_ptr<Linker> linker;
  std::shared_ptr<QueryExecutor> executor;
};

/// Loads everything a config names. Throws ConfigError or FormatError.
PipelineParts build_parts(const PipelineConfig& config);

/// Safe for concurrent answer() calls.
class Pipeline {
 public:
  explicit Pipeline(const PipelineConfig& config);
  Pipeline(PipelineConfig config, PipelineParts parts);

  /// Never throws for per-question failures.
  QAResult answer(const std::string& id, std::string_view question) const;

  /// Order preserved; malformed records become Error results.
  std::vector<QAResult> batch(const std::vector<GoldRecord>& records, int jobs = 1) const;

  const PipelineConfig& config() const { return config_; }
  const PipelineParts& parts() const { return parts_; }

 private:
  void run_form(const std::string& text, QAResult& result,
                std::optional<std::size_t>& first_success,
                std::vector<std::vector<std::string>>& fillers,
                std::vector<ResultSet>& results) const;

  PipelineConfig config_;
  PipelineParts parts_;
};

Prediction to_prediction(const QAResult& result);

struct BatchFiles {
  std::filesystem::path answers;
  std::filesystem::path entities;
  /// Reuse ids already answered in existing output files.
  bool resume = false;
};

/// Runs the batch and writes both submission files atomically.
std::vector<QAResult> run_batch(const Pipeline& pipeline, const std::vector<GoldRecord>& records,
                                const BatchFiles& files, int jobs);

}  // namespace nlqx
