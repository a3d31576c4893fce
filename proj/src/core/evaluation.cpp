#include "nlqxform/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <numeric>

#include <json.hpp>

#include "io.hpp"
#include "nlqxform/errors.hpp"

namespace nlqx {

using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string strip_brackets(std::string s) {
  s = trim(s);
  if (s.size() >= 2 && s.front() == '<' && s.back() == '>') s = s.substr(1, s.size() - 2);
  return s;
}

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

// Reads a string field that may also be wrapped as {"<inner>": "..."}.
std::optional<std::string> text_field(const json& record, const char* key, const char* inner) {
  if (!record.contains(key) || record[key].is_null()) return std::nullopt;
  const auto& v = record[key];
  if (v.is_string()) return v.get<std::string>();
  if (v.is_object() && v.contains(inner) && v[inner].is_string())
    return v[inner].get<std::string>();
  throw std::runtime_error(std::string("'") + key + "' is neither a string nor {\"" +
                           inner + "\": string}");
}

std::string scalar_text(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number() || v.is_boolean()) return v.dump();
  throw std::runtime_error("answer value is not a scalar");
}

AnswerSet answer_from_json(const json& v) {
  AnswerSet out;
  if (v.is_boolean()) {
    out.is_boolean = true;
    out.truth = v.get<bool>();
    return out;
  }
  if (v.is_array()) {
    for (const auto& item : v) {
      if (item.is_object() && item.contains("value"))
        out.values.insert(trim(scalar_text(item["value"])));
      else
        out.values.insert(trim(scalar_text(item)));
    }
    return out;
  }
  if (v.is_object()) {
    if (v.contains("boolean")) {
      if (!v["boolean"].is_boolean()) throw std::runtime_error("'boolean' is not a boolean");
      out.is_boolean = true;
      out.truth = v["boolean"].get<bool>();
      return out;
    }
    if (v.contains("results") && v["results"].is_object() &&
        v["results"].contains("bindings") && v["results"]["bindings"].is_array()) {
      for (const auto& row : v["results"]["bindings"]) {
        if (!row.is_object()) throw std::runtime_error("binding is not an object");
        for (const auto& [name, cell] : row.items()) {
          if (!cell.is_object() || !cell.contains("value"))
            throw std::runtime_error("binding cell without value");
          out.values.insert(trim(scalar_text(cell["value"])));
        }
      }
      return out;
    }
  }
  throw std::runtime_error("unrecognised answer shape");
}

json answer_to_json(const AnswerSet& a) {
  if (a.is_boolean) return a.truth;
  return json(a.values);
}

GoldRecord record_from_json(const json& r, std::size_t index) {
  if (!r.is_object()) throw std::runtime_error("record is not an object");
  GoldRecord g;
  if (!r.contains("id")) throw std::runtime_error("missing 'id'");
  if (r["id"].is_string())
    g.id = r["id"].get<std::string>();
  else if (r["id"].is_number_integer())
    g.id = r["id"].dump();
  else
    throw std::runtime_error("'id' is not a string");
  if (trim(g.id).empty()) throw std::runtime_error("empty 'id'");
  auto question = text_field(r, "question", "string");
  if (!question) throw std::runtime_error("missing 'question'");
  g.question = *question;
  if (auto p = text_field(r, "paraphrased_question", "string"); p && !p->empty())
    g.paraphrases.push_back(*p);
  g.gold_query = text_field(r, "query", "sparql");
  if (r.contains("entities") && !r["entities"].is_null()) {
    if (!r["entities"].is_array()) throw std::runtime_error("'entities' is not a list");
    std::set<std::string> entities;
    for (const auto& e : r["entities"]) {
      if (!e.is_string()) throw std::runtime_error("entity is not a string");
      entities.insert(strip_brackets(e.get<std::string>()));
    }
    g.gold_entities = std::move(entities);
  }
  if (r.contains("answer") && !r["answer"].is_null()) g.gold_answers = answer_from_json(r["answer"]);
  (void)index;
  return g;
}

void to_json_score(json& j, const Metrics& m) {
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["f1"] = m.f1;
  json per = json::array();
  for (const auto& q : m.per_question)
    per.push_back({{"id", q.id},
                   {"precision", q.score.precision},
                   {"recall", q.score.recall},
                   {"f1", q.score.f1}});
  j["per_question"] = std::move(per);
}

Metrics metrics_from_json(const json& j) {
  Metrics m;
  m.precision = j.at("precision").get<double>();
  m.recall = j.at("recall").get<double>();
  m.f1 = j.at("f1").get<double>();
  for (const auto& q : j.at("per_question"))
    m.per_question.push_back({q.at("id").get<std::string>(),
                              {q.at("precision").get<double>(), q.at("recall").get<double>(),
                               q.at("f1").get<double>()}});
  return m;
}

json parse_json_file(const std::filesystem::path& path) {
  auto text = io::read_file(path);
  if (!text) throw FormatError(path.string(), 0, "cannot open file");
  try {
    return json::parse(*text);
  } catch (const json::exception& e) {
    throw FormatError(path.string(), 0, e.what());
  }
}

}  // namespace

std::set<std::string> AnswerSet::as_set() const {
  if (is_boolean) return {truth ? "true" : "false"};
  return values;
}

std::vector<GoldRecord> parse_dataset(std::string_view text, const std::string& source,
                                      LoadMode mode) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(source, 0, e.what());
  }
  const json* list = &doc;
  if (doc.is_object()) {
    if (!doc.contains("questions") || !doc["questions"].is_array())
      throw FormatError(source, 0, "expected a list or {\"questions\": [...]}");
    list = &doc["questions"];
  } else if (!doc.is_array()) {
    throw FormatError(source, 0, "expected a list or {\"questions\": [...]}");
  }

  std::vector<GoldRecord> records;
  std::set<std::string> seen;
  std::size_t index = 0;
  for (const auto& r : *list) {
    GoldRecord g;
    try {
      g = record_from_json(r, index);
      if (!seen.insert(g.id).second) throw std::runtime_error("duplicate id " + g.id);
    } catch (const std::exception& e) {
      if (mode == LoadMode::Strict) throw FormatError(source, index, e.what());
      GoldRecord bad;
      bad.id = r.is_object() && r.contains("id") && r["id"].is_string() &&
                       !seen.count(r["id"].get<std::string>())
                   ? r["id"].get<std::string>()
                   : "#" + std::to_string(index);
      bad.error = e.what();
      seen.insert(bad.id);
      g = std::move(bad);
    }
    records.push_back(std::move(g));
    ++index;
  }
  return records;
}

std::vector<GoldRecord> load_dataset(const std::filesystem::path& path, LoadMode mode) {
  auto text = io::read_file(path);
  if (!text) throw FormatError(path.string(), 0, "cannot open file");
  return parse_dataset(*text, path.string(), mode);
}

Score score_sets(const std::set<std::string>& predicted, const std::set<std::string>& gold) {
  std::set<std::string> p, g;
  for (const auto& v : predicted) p.insert(trim(v));
  for (const auto& v : gold) g.insert(trim(v));
  std::size_t hits = 0;
  for (const auto& v : p) hits += g.count(v);
  Score s;
  if (p.empty())
    s.precision = g.empty() ? 1.0 : 0.0;
  else
    s.precision = static_cast<double>(hits) / static_cast<double>(p.size());
  if (g.empty())
    s.recall = p.empty() ? 1.0 : 0.0;
  else
    s.recall = static_cast<double>(hits) / static_cast<double>(g.size());
  const double sum = s.precision + s.recall;
  s.f1 = sum > 0 ? 2 * s.precision * s.recall / sum : 0.0;
  return s;
}

Metrics macro_average(std::vector<QuestionScore> per_question) {
  Metrics m;
  if (!per_question.empty()) {
    const double n = static_cast<double>(per_question.size());
    for (const auto& q : per_question) {
      m.precision += q.score.precision;
      m.recall += q.score.recall;
      m.f1 += q.score.f1;
    }
    m.precision /= n;
    m.recall /= n;
    m.f1 /= n;
  }
  m.per_question = std::move(per_question);
  return m;
}

RunMetrics evaluate_run(const std::vector<Prediction>& predictions,
                        const std::vector<GoldRecord>& gold) {
  std::map<std::string, const Prediction*> by_id;
  for (const auto& p : predictions) by_id.emplace(p.id, &p);
  std::set<std::string> gold_ids;
  for (const auto& g : gold) gold_ids.insert(g.id);
  std::vector<std::string> unmatched;
  for (const auto& p : predictions)
    if (!gold_ids.count(p.id)) unmatched.push_back(p.id);
  if (!unmatched.empty()) throw IdMismatch(std::move(unmatched));

  std::vector<QuestionScore> el, qa;
  for (const auto& g : gold) {
    const auto it = by_id.find(g.id);
    const Prediction* p = it == by_id.end() ? nullptr : it->second;
    const auto gold_entities = g.gold_entities.value_or(std::set<std::string>{});
    const auto gold_answers = g.gold_answers ? g.gold_answers->as_set() : std::set<std::string>{};
    el.push_back({g.id, p && p->entities ? score_sets(*p->entities, gold_entities) : Score{}});
    qa.push_back({g.id, p && p->answer ? score_sets(p->answer->as_set(), gold_answers) : Score{}});
  }
  return {macro_average(std::move(el)), macro_average(std::move(qa))};
}

std::string answers_json(const std::vector<Prediction>& predictions) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const auto& p : predictions) {
    nlohmann::ordered_json item;
    item["id"] = p.id;
    item["answer"] = p.answer ? answer_to_json(*p.answer) : json::array();
    out.push_back(std::move(item));
  }
  return out.dump(2) + "\n";
}

std::string entities_json(const std::vector<Prediction>& predictions) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const auto& p : predictions) {
    nlohmann::ordered_json item;
    item["id"] = p.id;
    item["entities"] = p.entities ? json(*p.entities) : json::array();
    out.push_back(std::move(item));
  }
  return out.dump(2) + "\n";
}

std::vector<Prediction> load_predictions(const std::filesystem::path& answers,
                                         const std::filesystem::path& entities) {
  std::vector<Prediction> out;
  std::map<std::string, std::size_t> index;
  auto slot = [&](const std::string& id) -> Prediction& {
    auto [it, inserted] = index.try_emplace(id, out.size());
    if (inserted) out.push_back(Prediction{id, std::nullopt, std::nullopt});
    return out[it->second];
  };
  auto read_list = [](const std::filesystem::path& path) {
    auto doc = parse_json_file(path);
    if (!doc.is_array()) throw FormatError(path.string(), 0, "expected a list of records");
    return doc;
  };
  auto id_of = [](const json& r, const std::filesystem::path& path, std::size_t i) {
    if (!r.is_object() || !r.contains("id") || !r["id"].is_string())
      throw FormatError(path.string(), i, "record without string 'id'");
    return r["id"].get<std::string>();
  };

  if (!answers.empty()) {
    const auto doc = read_list(answers);
    for (std::size_t i = 0; i < doc.size(); ++i) {
      auto& p = slot(id_of(doc[i], answers, i));
      if (p.answer) throw FormatError(answers.string(), i, "duplicate id " + p.id);
      if (!doc[i].contains("answer")) throw FormatError(answers.string(), i, "missing 'answer'");
      try {
        p.answer = answer_from_json(doc[i]["answer"]);
      } catch (const std::exception& e) {
        throw FormatError(answers.string(), i, e.what());
      }
    }
  }
  if (!entities.empty()) {
    const auto doc = read_list(entities);
    for (std::size_t i = 0; i < doc.size(); ++i) {
      auto& p = slot(id_of(doc[i], entities, i));
      if (p.entities) throw FormatError(entities.string(), i, "duplicate id " + p.id);
      const auto& list = doc[i].contains("entities") ? doc[i]["entities"] : json();
      if (!list.is_array()) throw FormatError(entities.string(), i, "'entities' is not a list");
      std::set<std::string> values;
      for (const auto& e : list) {
        if (!e.is_string()) throw FormatError(entities.string(), i, "entity is not a string");
        values.insert(strip_brackets(e.get<std::string>()));
      }
      p.entities = std::move(values);
    }
  }
  return out;
}

std::string render_report(const RunMetrics& m) {
  const auto& el = m.entity_linking;
  const auto& qa = m.question_answering;
  std::string out;
  out += "questions " + std::to_string(qa.per_question.size()) + "\n";
  out += "EL P " + fixed4(el.precision) + "\n";
  out += "EL R " + fixed4(el.recall) + "\n";
  out += "EL F1 " + fixed4(el.f1) + "\n";
  out += "QA P " + fixed4(qa.precision) + "\n";
  out += "QA R " + fixed4(qa.recall) + "\n";
  out += "QA F1 " + fixed4(qa.f1) + "\n";
  out += "\n";
  out += "| Submission | F1 EL  | F1 QA  |\n";
  out += "|------------|--------|--------|\n";
  out += "| this run   | " + fixed4(el.f1) + " | " + fixed4(qa.f1) + " |\n";
  out += "| reference  | " + fixed4(kReferenceF1EntityLinking) + " | " +
         fixed4(kReferenceF1QuestionAnswering) + " |\n";
  return out;
}

std::string report_json(const RunMetrics& m) {
  json j;
  j["questions"] = m.question_answering.per_question.size();
  to_json_score(j["entity_linking"], m.entity_linking);
  to_json_score(j["question_answering"], m.question_answering);
  return j.dump(2) + "\n";
}

RunMetrics parse_report_json(std::string_view text, const std::string& source) {
  try {
    const auto j = json::parse(text);
    return {metrics_from_json(j.at("entity_linking")),
            metrics_from_json(j.at("question_answering"))};
  } catch (const json::exception& e) {
    throw FormatError(source, 0, e.what());
  }
}

}  // namespace nlqx
