#include "nlqxform/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <map>
#include <set>
#include <thread>

#include <json.hpp>

#include "io.hpp"
#include "nlqxform/errors.hpp"

namespace nlqx {

using nlohmann::json;

namespace {

std::filesystem::path resolve_path(const json& v, const std::filesystem::path& base_dir,
                                   const char* key) {
  if (!v.is_string()) throw ConfigError(std::string("'") + key + "' must be a string");
  std::filesystem::path p = v.get<std::string>();
  if (p.empty() || p.is_absolute() || base_dir.empty()) return p;
  return base_dir / p;
}

template <typename T>
T get_as(const json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw ConfigError("'" + key + "' has the wrong type");
  }
}

void reject_unknown(const json& obj, std::initializer_list<const char*> known,
                    const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; }))
      throw ConfigError("unknown config key '" + where + key + "'");
  }
}

std::chrono::milliseconds millis(const json& v, const std::string& key) {
  const auto n = get_as<long long>(v, key);
  if (n <= 0) throw ConfigError("'" + key + "' must be positive");
  return std::chrono::milliseconds(n);
}

AnswerSet answers_of(const ResultSet& rs) {
  AnswerSet a;
  if (rs.kind == ResultSet::Kind::Boolean) {
    a.is_boolean = true;
    a.truth = rs.truth;
    return a;
  }
  for (const auto& row : rs.rows)
    for (const auto& [name, node] : row) a.values.insert(node.value);
  return a;
}

std::string describe_result(const ResultSet& rs, const sparql::QueryAst& ast) {
  if (rs.kind == ResultSet::Kind::Boolean) return rs.truth ? "true" : "false";
  if (ast.has_count() && !rs.rows.empty() && !rs.rows.front().empty())
    return "count " + rs.rows.front().begin()->second.value;
  return std::to_string(rs.rows.size()) + " row(s)";
}

nlohmann::ordered_json candidate_json(const EntityCandidate& c) {
  nlohmann::ordered_json j;
  j["iri"] = c.iri;
  j["label"] = c.label;
  j["rank"] = c.rank;
  j["type"] = to_string(c.type);
  return j;
}

// Next combination in lexicographic order, last slot fastest.
bool advance(std::vector<std::size_t>& odometer,
             const std::vector<std::vector<sparql::Term>>& slots) {
  for (std::size_t s = odometer.size(); s-- > 0;) {
    if (++odometer[s] < slots[s].size()) return true;
    odometer[s] = 0;
  }
  return false;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

void PipelineConfig::validate() const {
  if (k_templates < 1) throw ConfigError("k_templates must be >= 1");
  if (max_combinations_per_template < 1)
    throw ConfigError("max_combinations_per_template must be >= 1");
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
  if (answer_mode == AnswerMode::Local && graph_path.empty())
    throw ConfigError("local answer mode needs a graph file");
  if (answer_mode == AnswerMode::Remote && endpoint.url.empty())
    throw ConfigError("remote answer mode needs an endpoint URL");
  if (translator_backend == Backend::Baseline && training_path.empty())
    throw ConfigError("the baseline translator needs a training file");
  if (translator_backend == Backend::Neural && neural.server_url.empty())
    throw ConfigError("the neural translator needs a server URL");
  if (template_base_path.empty() && training_path.empty())
    throw ConfigError("need a template base file or a training file to build one");
  linker.validate();
}

PipelineConfig parse_pipeline_config(std::string_view json_text,
                                     const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(doc,
                 {"template_base", "training", "relations", "k_templates",
                  "max_combinations_per_template", "prune_unused_entities", "answer_mode",
                  "graph", "endpoint", "translator", "linker", "jobs"},
                 "");

  PipelineConfig c;
  if (doc.contains("template_base"))
    c.template_base_path = resolve_path(doc["template_base"], base_dir, "template_base");
  if (doc.contains("training"))
    c.training_path = resolve_path(doc["training"], base_dir, "training");
  if (doc.contains("relations"))
    c.relations_path = resolve_path(doc["relations"], base_dir, "relations");
  if (doc.contains("k_templates")) c.k_templates = get_as<int>(doc["k_templates"], "k_templates");
  if (doc.contains("max_combinations_per_template"))
    c.max_combinations_per_template =
        get_as<int>(doc["max_combinations_per_template"], "max_combinations_per_template");
  if (doc.contains("prune_unused_entities"))
    c.prune_unused_entities = get_as<bool>(doc["prune_unused_entities"], "prune_unused_entities");
  if (doc.contains("jobs")) c.jobs = get_as<int>(doc["jobs"], "jobs");
  if (doc.contains("answer_mode")) {
    const auto mode = get_as<std::string>(doc["answer_mode"], "answer_mode");
    if (mode == "local")
      c.answer_mode = AnswerMode::Local;
    else if (mode == "remote")
      c.answer_mode = AnswerMode::Remote;
    else
      throw ConfigError("answer_mode must be 'local' or 'remote'");
  }
  if (doc.contains("graph")) c.graph_path = resolve_path(doc["graph"], base_dir, "graph");

  if (doc.contains("endpoint")) {
    const auto& e = doc["endpoint"];
    if (!e.is_object()) throw ConfigError("'endpoint' must be an object");
    reject_unknown(e, {"url", "timeout_ms", "retries", "backoff_ms", "max_in_flight"},
                   "endpoint.");
    if (e.contains("url")) c.endpoint.url = get_as<std::string>(e["url"], "endpoint.url");
    if (e.contains("timeout_ms")) c.endpoint.timeout = millis(e["timeout_ms"], "endpoint.timeout_ms");
    if (e.contains("retries")) c.endpoint.retries = get_as<int>(e["retries"], "endpoint.retries");
    if (e.contains("backoff_ms"))
      c.endpoint.backoff =
          std::chrono::milliseconds(get_as<long long>(e["backoff_ms"], "endpoint.backoff_ms"));
    if (e.contains("max_in_flight"))
      c.endpoint.max_in_flight = get_as<int>(e["max_in_flight"], "endpoint.max_in_flight");
    if (c.endpoint.retries < 0) throw ConfigError("endpoint.retries must be >= 0");
    if (c.endpoint.max_in_flight < 1 || c.endpoint.max_in_flight > 64)
      throw ConfigError("endpoint.max_in_flight must be within 1..64");
  }

  if (doc.contains("translator")) {
    const auto& t = doc["translator"];
    if (!t.is_object()) throw ConfigError("'translator' must be an object");
    reject_unknown(t, {"backend", "server_url", "num_beams", "timeout_ms"}, "translator.");
    if (t.contains("backend")) {
      const auto b = get_as<std::string>(t["backend"], "translator.backend");
      if (b == "baseline")
        c.translator_backend = Backend::Baseline;
      else if (b == "neural")
        c.translator_backend = Backend::Neural;
      else
        throw ConfigError("translator.backend must be 'baseline' or 'neural'");
    }
    if (t.contains("server_url"))
      c.neural.server_url = get_as<std::string>(t["server_url"], "translator.server_url");
    if (t.contains("num_beams")) c.neural.num_beams = get_as<int>(t["num_beams"], "translator.num_beams");
    if (t.contains("timeout_ms")) c.neural.timeout = millis(t["timeout_ms"], "translator.timeout_ms");
  }

  if (doc.contains("linker")) {
    const auto& l = doc["linker"];
    if (!l.is_object()) throw ConfigError("'linker' must be an object");
    reject_unknown(l,
                   {"mode", "api_base_url", "fixtures", "cache", "requests_per_second",
                    "max_candidates", "retries", "backoff_seconds", "timeout_seconds",
                    "record_fixtures"},
                   "linker.");
    if (l.contains("mode")) {
      const auto m = get_as<std::string>(l["mode"], "linker.mode");
      if (m == "live")
        c.linker.mode = LinkMode::Live;
      else if (m == "offline")
        c.linker.mode = LinkMode::Offline;
      else
        throw ConfigError("linker.mode must be 'live' or 'offline'");
    }
    if (l.contains("api_base_url"))
      c.linker.api_base_url = get_as<std::string>(l["api_base_url"], "linker.api_base_url");
    if (l.contains("fixtures")) c.linker.fixture_path = resolve_path(l["fixtures"], base_dir, "linker.fixtures");
    if (l.contains("cache")) c.linker.cache_path = resolve_path(l["cache"], base_dir, "linker.cache");
    if (l.contains("requests_per_second"))
      c.linker.requests_per_second = get_as<double>(l["requests_per_second"], "linker.requests_per_second");
    if (l.contains("max_candidates"))
      c.linker.max_candidates = get_as<int>(l["max_candidates"], "linker.max_candidates");
    if (l.contains("retries")) c.linker.retries = get_as<int>(l["retries"], "linker.retries");
    if (l.contains("backoff_seconds"))
      c.linker.backoff_seconds = get_as<double>(l["backoff_seconds"], "linker.backoff_seconds");
    if (l.contains("timeout_seconds"))
      c.linker.timeout_seconds = get_as<double>(l["timeout_seconds"], "linker.timeout_seconds");
    if (l.contains("record_fixtures"))
      c.linker.record_fixtures = get_as<bool>(l["record_fixtures"], "linker.record_fixtures");
  }
  return c;
}

const char* to_string(QAStatus status) {
  switch (status) {
    case QAStatus::Answered: return "answered";
    case QAStatus::NoAnswer: return "no_answer";
    case QAStatus::Error: return "error";
  }
  return "error";
}

const char* to_string(QueryOutcome outcome) {
  switch (outcome) {
    case QueryOutcome::Accepted: return "accepted";
    case QueryOutcome::Rejected: return "rejected";
    case QueryOutcome::Failed: return "failed";
  }
  return "failed";
}

std::string to_json(const QAResult& r) {
  nlohmann::ordered_json j;
  j["id"] = r.question_id;
  j["question"] = r.question;
  j["status"] = to_string(r.status);
  if (!r.message.empty()) j["message"] = r.message;
  j["logical_form"] = r.logical_form;
  j["alternatives"] = r.alternatives;
  auto forms = nlohmann::ordered_json::array();
  for (const auto& f : r.forms) {
    nlohmann::ordered_json fj;
    fj["logical_form"] = f.logical_form;
    fj["parsed"] = f.parsed;
    fj["probe"] = f.probe;
    auto templates = nlohmann::ordered_json::array();
    for (const auto& t : f.templates)
      templates.push_back({{"template", t.canonical_text}, {"score", t.score}});
    fj["templates"] = std::move(templates);
    auto slots = nlohmann::ordered_json::array();
    for (const auto& s : f.slots) {
      nlohmann::ordered_json sj;
      sj["surface"] = s.surface;
      sj["kind"] = s.is_iri ? "iri" : "mention";
      sj["type"] = to_string(s.type);
      auto cands = nlohmann::ordered_json::array();
      for (const auto& c : s.candidates) cands.push_back(candidate_json(c));
      sj["candidates"] = std::move(cands);
      if (!s.error.empty()) sj["error"] = s.error;
      slots.push_back(std::move(sj));
    }
    fj["slots"] = std::move(slots);
    if (!f.note.empty()) fj["note"] = f.note;
    forms.push_back(std::move(fj));
  }
  j["forms"] = std::move(forms);
  auto tried = nlohmann::ordered_json::array();
  for (const auto& t : r.tried_queries)
    tried.push_back({{"query", t.query}, {"outcome", to_string(t.outcome)}, {"detail", t.detail}});
  j["tried_queries"] = std::move(tried);
  j["chosen_query"] = r.chosen_query ? json(*r.chosen_query) : json();
  j["fallback"] = r.fallback;
  if (r.answers.is_boolean)
    j["answers"] = r.answers.truth;
  else
    j["answers"] = r.answers.values;
  j["linked_entities"] = r.linked_entities;
  return j.dump();
}

// ---------------------------------------------------------------------------
// Step IV

std::vector<CandidateQuery> enumerate_candidates(
    const TemplateBase& base, const std::vector<ScoredTemplate>& ranked,
    const std::vector<std::vector<sparql::Term>>& slot_candidates, int max_combinations) {
  if (max_combinations < 1) throw std::invalid_argument("max_combinations must be >= 1");
  const std::size_t n = slot_candidates.size();
  const bool any_empty = std::any_of(slot_candidates.begin(), slot_candidates.end(),
                                     [](const auto& c) { return c.empty(); });
  std::vector<CandidateQuery> out;
  for (std::size_t rank = 0; rank < ranked.size(); ++rank) {
    const auto& tpl = base.templates().at(ranked[rank].index);
    if (static_cast<std::size_t>(tpl.placeholder_count) != n || any_empty) continue;
    std::vector<std::size_t> odometer(n, 0);
    for (int produced = 0; produced < max_combinations; ++produced) {
      CandidateQuery q;
      q.template_rank = rank;
      std::vector<sparql::Term> terms;
      for (std::size_t s = 0; s < n; ++s) {
        terms.push_back(slot_candidates[s][odometer[s]]);
        q.combination.push_back(static_cast<int>(odometer[s]) + 1);
      }
      q.ast = relexicalize(base.ast(ranked[rank].index), terms);
      out.push_back(std::move(q));
      if (!advance(odometer, slot_candidates)) break;
    }
  }
  if (out.empty())
    throw NoViableCandidate("no template matches the " + std::to_string(n) +
                            " entity slot(s) with linked candidates");
  return out;
}

bool is_answer(const ResultSet& result, const sparql::QueryAst& query) {
  if (query.form == sparql::QueryForm::Ask) return true;
  if (query.has_count()) {
    for (const auto& item : query.projection) {
      const auto* agg = std::get_if<sparql::Aggregate>(&item);
      if (!agg) continue;
      for (const auto& row : result.rows) {
        auto it = row.find(agg->alias.name);
        if (it != row.end() && compare_values(it->second.value, "0") > 0) return true;
      }
    }
    return false;
  }
  return !result.rows.empty();
}

// ---------------------------------------------------------------------------

PipelineParts build_parts(const PipelineConfig& config) {
  config.validate();
  PipelineParts parts;
  parts.vocabulary = config.relations_path.empty()
                         ? RelationVocabulary::dblp_default()
                         : RelationVocabulary::load(config.relations_path);

  std::vector<TrainingExample> examples;
  if (!config.training_path.empty()) {
    for (const auto& r : load_dataset(config.training_path)) {
      if (!r.gold_query) continue;
      examples.push_back({r.id, r.question, *r.gold_query});
      for (const auto& p : r.paraphrases) examples.push_back({r.id, p, *r.gold_query});
    }
  }

  if (!config.template_base_path.empty()) {
    parts.base = std::make_shared<TemplateBase>(TemplateBase::load(config.template_base_path));
  } else {
    std::vector<std::pair<std::string, std::string>> queries;
    std::set<std::string> seen;
    for (const auto& ex : examples)
      if (seen.insert(ex.id).second) queries.emplace_back(ex.id, ex.query);
    parts.base = std::make_shared<TemplateBase>(TemplateBase::build(queries, parts.vocabulary));
  }

  if (config.translator_backend == Backend::Baseline) {
    auto baseline = std::make_shared<BaselineTranslator>(examples, parts.vocabulary);
    if (baseline->size() == 0)
      throw ConfigError("training file " + config.training_path.string() +
                        " has no parsable queries for the baseline translator");
    parts.translator = std::move(baseline);
  } else {
    parts.translator = std::make_shared<NeuralTranslator>(config.neural);
  }

  parts.linker = std::make_shared<EntityLinker>(config.linker);

  if (config.answer_mode == AnswerMode::Local)
    parts.executor =
        std::make_shared<LocalExecutor>(std::make_shared<Graph>(load_graph(config.graph_path)));
  else
    parts.executor = std::make_shared<RemoteExecutor>(config.endpoint);
  return parts;
}

Pipeline::Pipeline(const PipelineConfig& config) : config_(config), parts_(build_parts(config)) {}

Pipeline::Pipeline(PipelineConfig config, PipelineParts parts)
    : config_(std::move(config)), parts_(std::move(parts)) {
  if (config_.k_templates < 1) throw ConfigError("k_templates must be >= 1");
  if (config_.max_combinations_per_template < 1)
    throw ConfigError("max_combinations_per_template must be >= 1");
  if (!parts_.base || !parts_.translator || !parts_.linker || !parts_.executor)
    throw ConfigError("pipeline is missing a component");
}

void Pipeline::run_form(const std::string& text, QAResult& result,
                        std::optional<std::size_t>& first_success,
                        std::vector<std::vector<std::string>>& fillers,
                        std::vector<ResultSet>& results) const {
  FormTrace trace;
  trace.logical_form = text;

  // Step III input: the delexicalized form and its entity slots.
  std::vector<sparql::Term> bindings;
  std::map<std::string, EntityMention> mentions;
  try {
    const auto ast = sparql::parse(text);
    auto delex = delexicalize(ast, parts_.vocabulary);
    trace.parsed = true;
    trace.probe = sparql::serialize(delex.template_ast);
    bindings = std::move(delex.bindings);
    for (auto& m : extract_mentions(ast)) mentions.emplace(m.surface, std::move(m));
  } catch (const sparql::SyntaxError& e) {
    auto [probe, surfaces] = delexicalize_raw(text);
    trace.probe = std::move(probe);
    for (auto& s : surfaces) bindings.push_back(sparql::Mention{std::move(s)});
    trace.note = std::string("logical form does not parse (") + e.what() +
                 "); retrieving by raw text";
  }

  const auto ranked = top_k(*parts_.base, trace.probe,
                            static_cast<std::size_t>(config_.k_templates));
  for (const auto& st : ranked)
    trace.templates.push_back({parts_.base->templates()[st.index].canonical_text, st.score});

  // Step II.
  std::vector<std::vector<sparql::Term>> slot_terms;
  for (const auto& term : bindings) {
    LinkedSlot slot;
    std::vector<sparql::Term> terms;
    if (const auto* iri = std::get_if<sparql::Iri>(&term)) {
      slot.surface = iri->value;
      slot.is_iri = true;
      slot.candidates.push_back({iri->value, "", 1, EntityType::Author});
      terms.push_back(*iri);
    } else if (const auto* mention = std::get_if<sparql::Mention>(&term)) {
      slot.surface = mention->surface;
      auto it = mentions.find(mention->surface);
      const EntityMention em = it != mentions.end() ? it->second
                                                    : EntityMention{mention->surface, std::nullopt};
      slot.type = classify_mention_type(em, config_.linker.type_rules);
      try {
        slot.candidates = parts_.linker->link(em);
        for (const auto& c : slot.candidates) terms.push_back(sparql::Iri{c.iri});
      } catch (const LinkError& e) {
        slot.error = e.what();
      }
    } else {
      slot.surface = sparql::to_text(term);
      slot.error = "slot has no mention to link";
    }
    trace.slots.push_back(std::move(slot));
    slot_terms.push_back(std::move(terms));
  }

  std::vector<CandidateQuery> candidates;
  try {
    candidates = enumerate_candidates(*parts_.base, ranked, slot_terms,
                                      config_.max_combinations_per_template);
  } catch (const NoViableCandidate& e) {
    std::string why = e.what();
    for (const auto& s : trace.slots)
      if (!s.error.empty()) why += "; " + s.surface + ": " + s.error;
    trace.note += (trace.note.empty() ? "" : "; ") + why;
    result.forms.push_back(std::move(trace));
    return;
  }
  result.forms.push_back(std::move(trace));

  // Step IV: first accepted query wins.
  for (const auto& cand : candidates) {
    const auto query = sparql::serialize(cand.ast);
    const bool seen = std::any_of(result.tried_queries.begin(), result.tried_queries.end(),
                                  [&](const TriedQuery& t) { return t.query == query; });
    if (seen) continue;
    TriedQuery tried{query, QueryOutcome::Failed, ""};
    std::vector<std::string> used;
    for (std::size_t s = 0; s < cand.combination.size(); ++s)
      used.push_back(std::get<sparql::Iri>(slot_terms[s][cand.combination[s] - 1]).value);
    try {
      auto rs = parts_.executor->execute(cand.ast);
      const bool ok = is_answer(rs, cand.ast);
      tried.outcome = ok ? QueryOutcome::Accepted : QueryOutcome::Rejected;
      tried.detail = describe_result(rs, cand.ast);
      if (!first_success) first_success = result.tried_queries.size();
      results.resize(result.tried_queries.size() + 1);
      results.back() = std::move(rs);
    } catch (const std::exception& e) {
      tried.detail = e.what();
      results.resize(result.tried_queries.size() + 1);
    }
    fillers.push_back(std::move(used));
    result.tried_queries.push_back(std::move(tried));
    if (result.tried_queries.back().outcome == QueryOutcome::Accepted) {
      result.chosen_query = query;
      result.answers = answers_of(results.back());
      return;
    }
  }
}

QAResult Pipeline::answer(const std::string& id, std::string_view question) const {
  QAResult result;
  result.question_id = id;
  result.question = std::string(question);
  try {
    // Step I.
    const auto translation = parts_.translator->translate(question);
    result.logical_form = translation.logical_form;
    result.alternatives = translation.alternatives;

    std::optional<std::size_t> first_success;
    std::vector<std::vector<std::string>> fillers;
    std::vector<ResultSet> results;
    std::vector<std::string> forms{translation.logical_form};
    forms.insert(forms.end(), translation.alternatives.begin(), translation.alternatives.end());
    for (const auto& form : forms) {
      run_form(form, result, first_success, fillers, results);
      if (result.chosen_query) break;
    }

    std::optional<std::size_t> chosen;
    if (result.chosen_query) {
      chosen = result.tried_queries.size() - 1;
    } else if (first_success) {
      chosen = *first_success;
      auto& t = result.tried_queries[*chosen];
      t.outcome = QueryOutcome::Accepted;
      t.detail += " (fallback: no candidate passed the answer check)";
      result.chosen_query = t.query;
      result.answers = answers_of(results[*chosen]);
      result.fallback = true;
    }

    std::set<std::string> entities;
    if (chosen) {
      entities.insert(fillers[*chosen].begin(), fillers[*chosen].end());
      result.status = QAStatus::Answered;
    } else {
      result.status = QAStatus::NoAnswer;
      if (result.tried_queries.empty()) {
        std::string why;
        for (const auto& f : result.forms)
          if (!f.note.empty()) why += (why.empty() ? "" : " | ") + f.note;
        result.message = "no executable candidate query: " + why;
      } else {
        result.message = "all " + std::to_string(result.tried_queries.size()) +
                         " candidate queries failed to execute";
      }
      if (!config_.prune_unused_entities && !result.forms.empty())
        for (const auto& slot : result.forms.front().slots)
          if (!slot.candidates.empty()) entities.insert(slot.candidates.front().iri);
    }
    result.linked_entities.assign(entities.begin(), entities.end());
  } catch (const std::exception& e) {
    result.status = QAStatus::Error;
    result.message = e.what();
    result.chosen_query.reset();
    result.answers = {};
    result.linked_entities.clear();
  }
  return result;
}

std::vector<QAResult> Pipeline::batch(const std::vector<GoldRecord>& records, int jobs) const {
  std::vector<QAResult> out(records.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < records.size(); i = next++) {
      const auto& r = records[i];
      if (r.error) {
        out[i].question_id = r.id;
        out[i].question = r.question;
        out[i].status = QAStatus::Error;
        out[i].message = "malformed record: " + *r.error;
        continue;
      }
      out[i] = answer(r.id, r.question);
    }
  };
  const auto n = static_cast<std::size_t>(std::max(1, jobs));
  std::vector<std::thread> threads;
  for (std::size_t t = 1; t < std::min(n, records.size()); ++t) threads.emplace_back(work);
  work();
  for (auto& t : threads) t.join();
  return out;
}

Prediction to_prediction(const QAResult& result) {
  Prediction p;
  p.id = result.question_id;
  p.entities = std::set<std::string>(result.linked_entities.begin(), result.linked_entities.end());
  p.answer = result.answers;
  return p;
}

std::vector<QAResult> run_batch(const Pipeline& pipeline, const std::vector<GoldRecord>& records,
                                const BatchFiles& files, int jobs) {
  std::map<std::string, Prediction> done;
  if (files.resume && std::filesystem::exists(files.answers) &&
      std::filesystem::exists(files.entities)) {
    for (auto& p : load_predictions(files.answers, files.entities)) {
      const bool answered =
          p.answer && p.entities && (p.answer->is_boolean || !p.answer->values.empty());
      if (answered) done.emplace(p.id, std::move(p));
    }
  }

  std::vector<GoldRecord> todo;
  for (const auto& r : records)
    if (r.error || !done.count(r.id)) todo.push_back(r);
  auto fresh = pipeline.batch(todo, jobs);

  std::vector<QAResult> results;
  std::vector<Prediction> predictions;
  std::size_t k = 0;
  for (const auto& r : records) {
    if (!r.error && done.count(r.id)) {
      const auto& p = done.at(r.id);
      QAResult q;
      q.question_id = r.id;
      q.question = r.question;
      q.status = QAStatus::Answered;
      q.message = "resumed from existing output";
      q.answers = *p.answer;
      q.linked_entities.assign(p.entities->begin(), p.entities->end());
      results.push_back(std::move(q));
    } else {
      results.push_back(std::move(fresh[k++]));
    }
    predictions.push_back(to_prediction(results.back()));
  }
  io::write_atomically(files.answers, answers_json(predictions));
  io::write_atomically(files.entities, entities_json(predictions));
  return results;
}

}  // namespace nlqx
