#include "nlqxform/nlqxform.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>

#include <json.hpp>

#include "io.hpp"
#include "nlqxform/errors.hpp"
#include "nlqxform/evaluation.hpp"
#include "nlqxform/pipeline.hpp"
#include "nlqxform/sparql.hpp"
#include "nlqxform/template_base.hpp"

struct nlqx_pipeline {
  std::unique_ptr<nlqx::Pipeline> impl;
};

namespace {

thread_local std::string g_last_error;

char* dup(const std::string& s) {
  auto* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

nlqx_status fail(nlqx_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <typename Fn>
nlqx_status guarded(Fn&& fn) {
  g_last_error.clear();
  try {
    fn();
    return NLQX_OK;
  } catch (const nlqx::ConfigError& e) {
    return fail(NLQX_ERR_CONFIG, e.what());
  } catch (const nlqx::FormatError& e) {
    return fail(NLQX_ERR_CONFIG, e.what());
  } catch (const nlqx::sparql::SyntaxError& e) {
    return fail(NLQX_ERR_CONFIG, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(NLQX_ERR_CONFIG, e.what());
  } catch (const std::exception& e) {
    return fail(NLQX_ERR_RUNTIME, e.what());
  } catch (...) {
    return fail(NLQX_ERR_RUNTIME, "unknown error");
  }
}

std::string str_or(const char* s, const char* fallback = "") { return s ? s : fallback; }

void require(const void* p, const char* what) {
  if (!p) throw std::invalid_argument(std::string(what) + " must not be NULL");
}

}  // namespace

extern "C" {

const char* nlqx_version(void) { return "0.1.0"; }

const char* nlqx_last_error(void) { return g_last_error.c_str(); }

void nlqx_free_string(char* s) { std::free(s); }

nlqx_status nlqx_build_templates(const char* train_path, const char* relations_path,
                                 const char* out_path, char** summary) {
  return guarded([&] {
    require(train_path, "train_path");
    require(out_path, "out_path");
    require(summary, "summary");
    const auto vocab = relations_path ? nlqx::RelationVocabulary::load(relations_path)
                                      : nlqx::RelationVocabulary::dblp_default();
    std::vector<std::pair<std::string, std::string>> queries;
    std::vector<nlqx::SkippedQuery> skipped;
    for (const auto& r : nlqx::load_dataset(train_path)) {
      if (r.gold_query)
        queries.emplace_back(r.id, *r.gold_query);
      else
        skipped.push_back({r.id, "record has no query"});
    }
    const auto base = nlqx::TemplateBase::build(queries, vocab, &skipped);
    base.save(out_path);
    nlohmann::ordered_json j;
    j["queries"] = queries.size();
    j["templates"] = base.size();
    auto list = nlohmann::ordered_json::array();
    for (const auto& s : skipped) list.push_back({{"id", s.id}, {"reason", s.reason}});
    j["skipped"] = std::move(list);
    *summary = dup(j.dump());
  });
}

nlqx_status nlqx_pipeline_create(const char* config_json, const char* base_dir,
                                 nlqx_pipeline** out) {
  return guarded([&] {
    require(config_json, "config_json");
    require(out, "out");
    *out = nullptr;
    const auto config = nlqx::parse_pipeline_config(config_json, str_or(base_dir));
    auto handle = std::make_unique<nlqx_pipeline>();
    handle->impl = std::make_unique<nlqx::Pipeline>(config);
    *out = handle.release();
  });
}

void nlqx_pipeline_destroy(nlqx_pipeline* pipeline) { delete pipeline; }

nlqx_status nlqx_pipeline_answer(nlqx_pipeline* pipeline, const char* id, const char* question,
                                 char** result) {
  return guarded([&] {
    require(pipeline, "pipeline");
    require(question, "question");
    require(result, "result");
    *result = dup(nlqx::to_json(pipeline->impl->answer(str_or(id, "q"), question)));
  });
}

nlqx_status nlqx_pipeline_batch(nlqx_pipeline* pipeline, const char* questions_path,
                                const char* answers_path, const char* entities_path, int resume,
                                int jobs, char** summary) {
  return guarded([&] {
    require(pipeline, "pipeline");
    require(questions_path, "questions_path");
    require(answers_path, "answers_path");
    require(entities_path, "entities_path");
    require(summary, "summary");
    const auto records = nlqx::load_dataset(questions_path, nlqx::LoadMode::Lenient);
    nlqx::BatchFiles files{answers_path, entities_path, resume != 0};
    const int n = jobs > 0 ? jobs : pipeline->impl->config().jobs;
    const auto results = nlqx::run_batch(*pipeline->impl, records, files, n);

    std::size_t answered = 0, no_answer = 0, errors = 0;
    auto list = nlohmann::ordered_json::array();
    for (const auto& r : results) {
      answered += r.status == nlqx::QAStatus::Answered;
      no_answer += r.status == nlqx::QAStatus::NoAnswer;
      errors += r.status == nlqx::QAStatus::Error;
      nlohmann::ordered_json item;
      item["id"] = r.question_id;
      item["status"] = nlqx::to_string(r.status);
      item["message"] = r.message;
      list.push_back(std::move(item));
    }
    nlohmann::ordered_json j;
    j["questions"] = results.size();
    j["answered"] = answered;
    j["no_answer"] = no_answer;
    j["error"] = errors;
    j["results"] = std::move(list);
    *summary = dup(j.dump());
  });
}

nlqx_status nlqx_link(const char* config_json, const char* base_dir, const char* surface,
                      const char* type, char** candidates) {
  return guarded([&] {
    require(surface, "surface");
    require(candidates, "candidates");
    const auto config = nlqx::parse_pipeline_config(str_or(config_json, "{}"), str_or(base_dir));
    auto entity_type = nlqx::EntityType::Author;
    if (type) {
      const auto parsed = nlqx::entity_type_from_string(type);
      if (!parsed) throw std::invalid_argument(std::string("unknown entity type '") + type + "'");
      entity_type = *parsed;
    }
    nlqx::EntityLinker linker(config.linker);
    auto list = nlohmann::ordered_json::array();
    for (const auto& c : linker.link(surface, entity_type)) {
      nlohmann::ordered_json item;
      item["iri"] = c.iri;
      item["label"] = c.label;
      item["rank"] = c.rank;
      item["type"] = nlqx::to_string(c.type);
      list.push_back(std::move(item));
    }
    *candidates = dup(list.dump());
  });
}

nlqx_status nlqx_evaluate(const char* answers_path, const char* entities_path,
                          const char* gold_path, const char* report_json_path, char** report) {
  return guarded([&] {
    require(gold_path, "gold_path");
    require(report, "report");
    if (!answers_path && !entities_path)
      throw std::invalid_argument("need at least one prediction file");
    const auto gold = nlqx::load_dataset(gold_path);
    const auto predictions = nlqx::load_predictions(str_or(answers_path), str_or(entities_path));
    const auto metrics = nlqx::evaluate_run(predictions, gold);
    if (report_json_path) nlqx::io::write_atomically(report_json_path, nlqx::report_json(metrics));
    *report = dup(nlqx::render_report(metrics));
  });
}

nlqx_status nlqx_special_tokens(const char* relations_path, char** tokens) {
  return guarded([&] {
    require(tokens, "tokens");
    const auto vocab = relations_path ? nlqx::RelationVocabulary::load(relations_path)
                                      : nlqx::RelationVocabulary::dblp_default();
    *tokens = dup(nlohmann::json(nlqx::sparql::special_token_vocabulary(vocab.relations)).dump());
  });
}

}  // extern "C"
