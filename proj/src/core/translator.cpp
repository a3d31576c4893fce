#include "nlqxform/translator.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <tuple>

#include <json.hpp>

#include "nlqxform/errors.hpp"
#include "nlqxform/http.hpp"

namespace nlqx {

namespace {

const std::set<std::string, std::less<>>& stop_words() {
  static const std::set<std::string, std::less<>> words = {
      "A",     "An",   "And",   "Are",    "As",    "At",     "By",    "Can",
      "Could", "Did",  "Do",    "Does",   "For",   "From",   "Give",  "Had",
      "Has",   "Have", "How",   "I",      "In",    "Is",     "List",  "Me",
      "Name",  "Of",   "On",    "Or",     "Return", "Show",  "Tell",  "The",
      "To",    "Was",  "Were",  "What",   "When",  "Where",  "Which", "Who",
      "Whom",  "Whose", "Why",  "Will",   "With",  "Would",  "Find",  "Count",
  };
  return words;
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::string normalize_question(std::string_view q) {
  std::string out;
  bool pending = false;
  for (char c : q) {
    if (is_space(c)) {
      pending = !out.empty();
      continue;
    }
    if (pending) out.push_back(' ');
    pending = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

bool usable_mention(std::string_view s) {
  if (s.empty() || s.find_first_of("<>") != std::string_view::npos) return false;
  if (s.rfind("http", 0) == 0) return false;
  return !(s.rfind("entity_", 0) == 0 && s.size() > 7 && is_digit(s[7]));
}

struct Cover {
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  bool overlaps(std::size_t b, std::size_t e) const {
    return std::any_of(ranges.begin(), ranges.end(),
                       [&](const auto& r) { return b < r.second && r.first < e; });
  }
};

void quoted_spans(std::string_view q, Cover& cover, std::vector<Span>& out) {
  for (std::size_t i = 0; i < q.size(); ++i) {
    const char quote = q[i];
    if (quote != '"' && quote != '\'') continue;
    if (i > 0 && !is_space(q[i - 1]) && q[i - 1] != '(') continue;
    std::size_t j = i + 1;
    while (j < q.size()) {
      const auto close = q.find(quote, j);
      if (close == std::string_view::npos) return;
      const bool boundary = close + 1 == q.size() || is_space(q[close + 1]) ||
                            std::ispunct(static_cast<unsigned char>(q[close + 1]));
      if (boundary) {
        j = close;
        break;
      }
      j = close + 1;
    }
    if (j >= q.size()) return;
    std::string text(q.substr(i + 1, j - i - 1));
    std::string collapsed;
    for (char c : text) {
      if (is_space(c)) {
        if (!collapsed.empty() && collapsed.back() != ' ') collapsed.push_back(' ');
      } else {
        collapsed.push_back(c);
      }
    }
    while (!collapsed.empty() && collapsed.back() == ' ') collapsed.pop_back();
    if (usable_mention(collapsed)) {
      out.push_back({collapsed, i + 1});
      cover.ranges.emplace_back(i, j + 1);
    }
    i = j;
  }
}

struct Word {
  std::size_t begin;
  std::size_t end;  // exclusive, trailing punctuation removed
  bool breaks_after;
};

std::vector<Word> words_of(std::string_view q) {
  std::vector<Word> words;
  std::size_t i = 0;
  while (i < q.size()) {
    while (i < q.size() && is_space(q[i])) ++i;
    if (i >= q.size()) break;
    const std::size_t b = i;
    while (i < q.size() && !is_space(q[i])) ++i;
    std::size_t e = i;
    bool breaks = false;
    while (e > b && std::string_view(",;:?!)\"").find(q[e - 1]) != std::string_view::npos) {
      --e;
      breaks = true;
    }
    if (e >= b + 2 && q.substr(e - 2, 2) == "'s") {
      e -= 2;
      breaks = true;
    }
    words.push_back({b, e, breaks});
  }
  return words;
}

void capitalised_spans(std::string_view q, Cover& cover, std::vector<Span>& out) {
  const auto words = words_of(q);
  std::size_t run_begin = 0, run_end = 0;
  bool open = false;
  auto flush = [&] {
    if (!open) return;
    open = false;
    auto text = std::string(q.substr(run_begin, run_end - run_begin));
    std::string collapsed;
    for (char c : text) {
      if (is_space(c)) {
        if (!collapsed.empty() && collapsed.back() != ' ') collapsed.push_back(' ');
      } else {
        collapsed.push_back(c);
      }
    }
    if (usable_mention(collapsed)) {
      out.push_back({collapsed, run_begin});
      cover.ranges.emplace_back(run_begin, run_end);
    }
  };
  for (const auto& w : words) {
    const auto word = q.substr(w.begin, w.end - w.begin);
    const bool capital = !word.empty() && std::isupper(static_cast<unsigned char>(word[0])) &&
                         !stop_words().count(word) && !cover.overlaps(w.begin, w.end);
    if (!capital) {
      flush();
      continue;
    }
    if (!open) {
      open = true;
      run_begin = w.begin;
    }
    run_end = w.end;
    if (w.breaks_after) flush();
  }
  flush();
}

void year_spans(std::string_view q, Cover& cover, std::vector<Span>& out) {
  for (std::size_t i = 0; i + 4 <= q.size(); ++i) {
    if (i > 0 && (is_digit(q[i - 1]) || std::isalpha(static_cast<unsigned char>(q[i - 1]))))
      continue;
    if (!std::all_of(q.begin() + i, q.begin() + i + 4, is_digit)) continue;
    if (i + 4 < q.size() &&
        (is_digit(q[i + 4]) || std::isalpha(static_cast<unsigned char>(q[i + 4]))))
      continue;
    if (cover.overlaps(i, i + 4)) continue;
    out.push_back({std::string(q.substr(i, 4)), i});
    cover.ranges.emplace_back(i, i + 4);
    i += 3;
  }
}

}  // namespace

const char* to_string(Backend backend) {
  return backend == Backend::Neural ? "neural" : "baseline";
}

std::vector<Span> extract_spans(std::string_view question) {
  std::vector<Span> spans;
  Cover cover;
  quoted_spans(question, cover, spans);
  capitalised_spans(question, cover, spans);
  year_spans(question, cover, spans);
  return spans;
}

BaselineTranslator::BaselineTranslator(const std::vector<TrainingExample>& examples,
                                       const RelationVocabulary& vocabulary) {
  std::map<std::string, int> frequency;
  std::vector<std::string> keys;
  for (const auto& ex : examples) {
    sparql::QueryAst ast;
    try {
      ast = sparql::parse(ex.query);
    } catch (const sparql::SyntaxError&) {
      continue;
    }
    auto delex = delexicalize(ast, vocabulary);
    Entry entry;
    entry.question = normalize_question(ex.question);
    entry.logical_form = sparql::serialize(ast);
    keys.push_back(sparql::serialize(delex.template_ast));
    ++frequency[keys.back()];
    entry.template_ast = std::move(delex.template_ast);
    entry.bindings = std::move(delex.bindings);
    entries_.push_back(std::move(entry));
  }
  for (std::size_t i = 0; i < entries_.size(); ++i) entries_[i].frequency = frequency[keys[i]];
}

TranslationResult BaselineTranslator::translate(std::string_view question) const {
  const auto probe = normalize_question(question);
  if (probe.empty())
    throw TranslationError(TranslationError::Kind::EmptyQuestion, "question is empty");
  if (entries_.empty())
    throw TranslationError(TranslationError::Kind::EmptyIndex, "training index is empty");

  const Entry* best = nullptr;
  double best_score = -1;
  for (const auto& e : entries_) {
    const double score = similarity(probe, e.question);
    if (!best || std::tie(score, e.frequency) > std::tie(best_score, best->frequency) ||
        (score == best_score && e.frequency == best->frequency && e.question < best->question)) {
      best = &e;
      best_score = score;
    }
  }

  TranslationResult result;
  result.backend = Backend::Baseline;
  if (best_score == 1.0) {
    result.logical_form = best->logical_form;
    return result;
  }

  const std::size_t slots = best->bindings.size();
  auto spans = extract_spans(question);
  if (spans.size() > slots) spans.resize(slots);
  std::stable_sort(spans.begin(), spans.end(),
                   [](const Span& a, const Span& b) { return a.position < b.position; });
  std::vector<sparql::Term> terms;
  for (std::size_t i = 0; i < slots; ++i) {
    if (i < spans.size()) {
      terms.push_back(sparql::Mention{spans[i].text});
    } else {
      terms.push_back(best->bindings[i]);
      result.fallback_used = true;
    }
  }
  result.logical_form = sparql::serialize(relexicalize(best->template_ast, terms));
  return result;
}

// ---------------------------------------------------------------------------

NeuralTranslator::NeuralTranslator(NeuralConfig config) : config_(std::move(config)) {
  const auto base = http::split_url(config_.server_url);
  if (config_.num_beams < 1) throw ConfigError("num_beams must be >= 1");
  if (config_.timeout.count() <= 0) throw ConfigError("translator timeout must be positive");
  endpoint_ = base.origin + base.path + "/translate";
}

TranslationResult parse_translate_response(std::string_view body) {
  auto malformed = [](const std::string& why) {
    return TranslationError(TranslationError::Kind::MalformedServerResponse,
                            "malformed /translate response: " + why);
  };
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw malformed(e.what());
  }
  if (!doc.is_object()) throw malformed("not an object");
  if (!doc.contains("logical_form") || !doc["logical_form"].is_string())
    throw malformed("missing string 'logical_form'");
  TranslationResult result;
  result.backend = Backend::Neural;
  result.logical_form = doc["logical_form"].get<std::string>();
  if (result.logical_form.empty()) throw malformed("empty logical_form");
  if (doc.contains("beams")) {
    if (!doc["beams"].is_array()) throw malformed("'beams' is not a list");
    bool first = true;
    for (const auto& beam : doc["beams"]) {
      if (!beam.is_string()) throw malformed("beam is not a string");
      if (first) {
        first = false;
        continue;
      }
      auto text = beam.get<std::string>();
      if (text.empty() || text == result.logical_form) continue;
      if (std::find(result.alternatives.begin(), result.alternatives.end(), text) !=
          result.alternatives.end())
        continue;
      result.alternatives.push_back(std::move(text));
    }
  }
  return result;
}

TranslationResult NeuralTranslator::translate(std::string_view question) const {
  if (normalize_question(question).empty())
    throw TranslationError(TranslationError::Kind::EmptyQuestion, "question is empty");
  http::Request request;
  request.url = endpoint_;
  request.method = "POST";
  request.content_type = "application/json";
  request.body = nlohmann::json{{"question", std::string(question)},
                                {"num_beams", config_.num_beams}}
                     .dump();
  request.timeout = config_.timeout;
  const auto outcome = http::perform(request);
  if (outcome.failure != http::Failure::None)
    throw TranslationError(TranslationError::Kind::BackendUnavailable,
                           "translation server unreachable at " + endpoint_ + ": " +
                               outcome.error);
  if (outcome.response.status != 200)
    throw TranslationError(TranslationError::Kind::BackendUnavailable,
                           "translation server returned HTTP " +
                               std::to_string(outcome.response.status));
  return parse_translate_response(outcome.response.body);
}

}  // namespace nlqx
