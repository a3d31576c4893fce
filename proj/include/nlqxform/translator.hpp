#pragma once

#include <chrono>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "nlqxform/sparql.hpp"
#include "nlqxform/template_base.hpp"

namespace nlqx {

enum class Backend { Baseline, Neural };

const char* to_string(Backend backend);

struct TranslationResult {
  std::string logical_form;
  /// Further candidates in preference order, never equal to logical_form.
  std::vector<std::string> alternatives;
  Backend backend = Backend::Baseline;
  /// Baseline only: some slots were filled from the neighbour's mentions.
  bool fallback_used = false;
};

class Translator {
 public:
  virtual ~Translator() = default;
  /// Throws TranslationError.
  virtual TranslationResult translate(std::string_view question) const = 0;
};

struct TrainingExample {
  std::string id;
  std::string question;
  std::string query;
};

struct Span {
  std::string text;
  std::size_t position = 0;
};

/// Candidate mention spans in priority order: quoted spans, then maximal
/// runs of capitalised words (question and function words excluded), then
/// four-digit years. Spans never overlap.
std::vector<Span> extract_spans(std::string_view question);

/// Nearest-neighbour translation over training questions. The neighbour's
/// template is refilled with mentions taken from the input question.
class BaselineTranslator : public Translator {
 public:
  /// Examples whose query does not parse are ignored.
  BaselineTranslator(const std::vector<TrainingExample>& examples,
                     const RelationVocabulary& vocabulary);

  TranslationResult translate(std::string_view question) const override;
  std::size_t size() const { return entries_.size(); }

 private:
  struct Entry {
    std::string question;
    std::string logical_form;
    sparql::QueryAst template_ast;
    std::vector<sparql::Term> bindings;
    int frequency = 0;
  };
  std::vector<Entry> entries_;
};

struct NeuralConfig {
  std::string server_url;
  int num_beams = 4;
  std::chrono::milliseconds timeout{30000};
};

/// Client for the model server's POST /translate.
class NeuralTranslator : public Translator {
 public:
  explicit NeuralTranslator(NeuralConfig config);
  TranslationResult translate(std::string_view question) const override;

 private:
  NeuralConfig config_;
  std::string endpoint_;
};

/// Maps a /translate response body to a result. Throws TranslationError
/// (MalformedServerResponse).
TranslationResult parse_translate_response(std::string_view body);

}  // namespace nlqx
