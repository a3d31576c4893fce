#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace nlqx {

/// A set of answer values, or a boolean for ASK questions.
struct AnswerSet {
  bool is_boolean = false;
  bool truth = false;
  std::set<std::string> values;

  /// Booleans score as {"true"} / {"false"}.
  std::set<std::string> as_set() const;
  bool operator==(const AnswerSet&) const = default;
};

struct GoldRecord {
  std::string id;
  std::string question;
  std::vector<std::string> paraphrases;
  std::optional<std::string> gold_query;
  std::optional<std::set<std::string>> gold_entities;
  std::optional<AnswerSet> gold_answers;
  /// Lenient loading only: why this record could not be read.
  std::optional<std::string> error;
};

enum class LoadMode { Strict, Lenient };

/// Reads DBLP-QuAD JSON: either {"questions": [...]} or a bare list. Per
/// record: id, question (string or {"string"}), paraphrased_question,
/// query (string or {"sparql"}), entities (brackets stripped), answer
/// (results JSON, a list, or a boolean). Unknown fields are ignored.
/// Throws FormatError; in lenient mode a bad record is returned with
/// `error` set instead.
std::vector<GoldRecord> load_dataset(const std::filesystem::path& path,
                                     LoadMode mode = LoadMode::Strict);
std::vector<GoldRecord> parse_dataset(std::string_view text, const std::string& source,
                                      LoadMode mode = LoadMode::Strict);

struct Score {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  bool operator==(const Score&) const = default;
};

/// Values are trimmed before comparison.
Score score_sets(const std::set<std::string>& predicted, const std::set<std::string>& gold);

struct QuestionScore {
  std::string id;
  Score score;
  bool operator==(const QuestionScore&) const = default;
};

struct Metrics {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  std::vector<QuestionScore> per_question;
  bool operator==(const Metrics&) const = default;
};

/// Arithmetic mean of the per-question scores; zeros when there are none.
Metrics macro_average(std::vector<QuestionScore> per_question);

/// What a run submits for one question.
struct Prediction {
  std::string id;
  std::optional<std::set<std::string>> entities;
  std::optional<AnswerSet> answer;
};

struct RunMetrics {
  Metrics entity_linking;
  Metrics question_answering;
  bool operator==(const RunMetrics&) const = default;
};

/// Scores every gold record; absent predictions score zero. Throws
/// IdMismatch when a prediction has no gold record.
RunMetrics evaluate_run(const std::vector<Prediction>& predictions,
                        const std::vector<GoldRecord>& gold);

/// Answers file: [{"id": ..., "answer": [...] | true | false}].
std::string answers_json(const std::vector<Prediction>& predictions);
/// Entities file: [{"id": ..., "entities": [...]}].
std::string entities_json(const std::vector<Prediction>& predictions);

/// Merges the two submission files by id, answers-file order first.
/// Either path may be empty. Throws FormatError.
std::vector<Prediction> load_predictions(const std::filesystem::path& answers,
                                         const std::filesystem::path& entities);

/// Human-readable report with four decimals.
std::string render_report(const RunMetrics& metrics);
/// Machine-readable report with the per-question breakdown.
std::string report_json(const RunMetrics& metrics);
/// Throws FormatError.
RunMetrics parse_report_json(std::string_view text, const std::string& source);

/// Reference scores shown alongside a report; display only.
inline constexpr double kReferenceF1EntityLinking = 0.7961;
inline constexpr double kReferenceF1QuestionAnswering = 0.8488;

}  // namespace nlqx
