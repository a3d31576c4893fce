#include "nlqxform/template_base.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "io.hpp"
#include "nlqxform/errors.hpp"

namespace nlqx {

using sparql::Term;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string collapse(std::string_view s) {
  std::string out;
  bool pending = false;
  for (char c : s) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      pending = !out.empty();
      continue;
    }
    if (pending) out.push_back(' ');
    pending = false;
    out.push_back(c);
  }
  return out;
}

}  // namespace

bool RelationVocabulary::is_relation(std::string_view iri) const {
  return std::find(relations.begin(), relations.end(), iri) != relations.end();
}

bool RelationVocabulary::is_entity_iri(std::string_view iri) const {
  if (is_relation(iri)) return false;
  for (const auto& prefix : schema_prefixes)
    if (iri.substr(0, prefix.size()) == prefix) return false;
  return true;
}

RelationVocabulary RelationVocabulary::dblp_default() {
  RelationVocabulary vocab;
  for (const char* name :
       {"authoredBy", "primaryAffiliation", "yearOfPublication", "title", "publishedIn",
        "numberOfCreators", "bibtexType", "webpage", "orcid", "wikidata", "doi",
        "primaryFullCreatorName"})
    vocab.relations.push_back(std::string("https://dblp.org/rdf/schema#") + name);
  return vocab;
}

RelationVocabulary RelationVocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open relations file " + path.string());
  RelationVocabulary vocab;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto entry = trim(line);
    if (entry.empty() || entry.front() == '#') continue;
    if (entry.front() == '<' && entry.back() == '>')
      entry = entry.substr(1, entry.size() - 2);
    if (entry.rfind("http", 0) != 0 ||
        entry.find_first_of(" \t<>") != std::string::npos)
      throw FormatError(path.string(), lineno, "not an IRI: " + entry);
    if (!vocab.is_relation(entry)) vocab.relations.push_back(entry);
  }
  if (vocab.relations.empty())
    throw ConfigError("relations file " + path.string() + " lists no relations");
  return vocab;
}

// ---------------------------------------------------------------------------

Delexicalized delexicalize(const sparql::QueryAst& ast,
                           const RelationVocabulary& vocabulary) {
  Delexicalized out{ast, {}};
  std::map<Term, int> assigned;
  sparql::for_each_term_mut(out.template_ast.where, [&](Term& term) {
    const bool replace =
        sparql::is_mention(term) || sparql::is_placeholder(term) ||
        (sparql::is_iri(term) &&
         vocabulary.is_entity_iri(std::get<sparql::Iri>(term).value));
    if (!replace) return;
    auto [it, inserted] =
        assigned.emplace(term, static_cast<int>(out.bindings.size()) + 1);
    if (inserted) out.bindings.push_back(term);
    term = sparql::Placeholder{it->second};
  });
  return out;
}

int max_placeholder(const sparql::QueryAst& ast) {
  int highest = 0;
  sparql::for_each_term(ast.where, [&](const Term& term) {
    if (auto* p = std::get_if<sparql::Placeholder>(&term))
      highest = std::max(highest, p->index);
  });
  return highest;
}

sparql::QueryAst relexicalize(const sparql::QueryAst& template_ast,
                              const std::vector<Term>& terms) {
  const int needed = max_placeholder(template_ast);
  if (terms.size() < static_cast<std::size_t>(needed))
    throw ArityMismatch(static_cast<std::size_t>(needed), terms.size());
  sparql::QueryAst out = template_ast;
  sparql::for_each_term_mut(out.where, [&](Term& term) {
    if (auto* p = std::get_if<sparql::Placeholder>(&term))
      term = terms[static_cast<std::size_t>(p->index - 1)];
  });
  return out;
}

std::pair<std::string, std::vector<std::string>> delexicalize_raw(
    std::string_view text) {
  std::string probe;
  std::vector<std::string> surfaces;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    const char next = i + 1 < text.size() ? text[i + 1] : '\0';
    if (c != '<' || next == '\0' || next == ' ' || next == '=' ||
        next == '\t' || next == '\n') {
      probe.push_back(c);
      ++i;
      continue;
    }
    const auto close = text.find('>', i + 1);
    const auto reopen = text.find('<', i + 1);
    if (close == std::string_view::npos || reopen < close) {
      probe.push_back(c);
      ++i;
      continue;
    }
    const auto content = text.substr(i + 1, close - i - 1);
    if (content.substr(0, 4) == "http") {
      probe.append(text.substr(i, close - i + 1));
    } else {
      const auto surface = collapse(content);
      auto it = std::find(surfaces.begin(), surfaces.end(), surface);
      std::size_t index = static_cast<std::size_t>(it - surfaces.begin());
      if (it == surfaces.end()) surfaces.push_back(surface);
      probe += "<entity_" + std::to_string(index + 1) + ">";
    }
    i = close + 1;
  }
  return {collapse(probe), std::move(surfaces)};
}

// ---------------------------------------------------------------------------

std::size_t edit_distance(std::string_view a, std::string_view b,
                          std::size_t bound) {
  if (a.size() < b.size()) std::swap(a, b);
  const std::size_t m = a.size();
  const std::size_t n = b.size();
  if (bound && m - n > bound) return bound + 1;
  std::vector<std::size_t> row(n + 1);
  for (std::size_t x = 0; x <= n; ++x) row[x] = x;
  for (std::size_t y = 1; y <= m; ++y) {
    std::size_t previous = row[0];
    row[0] = y;
    std::size_t best = row[0];
    for (std::size_t x = 1; x <= n; ++x) {
      const std::size_t old = row[x];
      const std::size_t substitute = previous + (a[y - 1] == b[x - 1] ? 0 : 1);
      row[x] = std::min({substitute, row[x - 1] + 1, old + 1});
      previous = old;
      best = std::min(best, row[x]);
    }
    if (bound && best > bound) return bound + 1;
  }
  return row[n];
}

double similarity(std::string_view a, std::string_view b) {
  const std::size_t longest = std::max(a.size(), b.size());
  if (longest == 0) return 1.0;
  return 1.0 - static_cast<double>(edit_distance(a, b)) /
                   static_cast<double>(longest);
}

// ---------------------------------------------------------------------------

TemplateBase TemplateBase::build(
    const std::vector<std::pair<std::string, std::string>>& training_queries,
    const RelationVocabulary& vocabulary, std::vector<SkippedQuery>* skipped) {
  std::map<std::string, Template> by_text;
  std::map<std::string, sparql::QueryAst> asts;
  for (const auto& [id, text] : training_queries) {
    sparql::QueryAst ast;
    try {
      ast = sparql::parse(text);
    } catch (const sparql::SyntaxError& e) {
      if (skipped) skipped->push_back({id, e.what()});
      continue;
    }
    auto delex = delexicalize(ast, vocabulary);
    auto canonical = sparql::serialize(delex.template_ast);
    auto& tmpl = by_text[canonical];
    if (tmpl.frequency == 0) {
      tmpl.canonical_text = canonical;
      tmpl.placeholder_count = static_cast<int>(delex.bindings.size());
      asts.emplace(canonical, std::move(delex.template_ast));
    }
    ++tmpl.frequency;
    tmpl.source_ids.push_back(id);
  }
  TemplateBase base;
  for (auto& [text, tmpl] : by_text) {
    base.templates_.push_back(std::move(tmpl));
    base.asts_.push_back(std::move(asts.at(text)));
  }
  return base;
}

TemplateBase TemplateBase::from_templates(std::vector<Template> templates) {
  std::sort(templates.begin(), templates.end(),
            [](const Template& a, const Template& b) {
              return a.canonical_text < b.canonical_text;
            });
  TemplateBase base;
  for (std::size_t i = 0; i < templates.size(); ++i) {
    auto& t = templates[i];
    if (i > 0 && templates[i - 1].canonical_text == t.canonical_text)
      throw FormatError("<templates>", i, "duplicate template " + t.canonical_text);
    sparql::QueryAst ast;
    try {
      ast = sparql::parse(t.canonical_text);
    } catch (const sparql::SyntaxError& e) {
      throw FormatError("<templates>", i, e.what());
    }
    std::vector<int> seen;
    bool lexical_entity = false;
    sparql::for_each_term(ast.where, [&](const Term& term) {
      if (auto* p = std::get_if<sparql::Placeholder>(&term)) {
        if (std::find(seen.begin(), seen.end(), p->index) == seen.end())
          seen.push_back(p->index);
      } else if (sparql::is_mention(term)) {
        lexical_entity = true;
      }
    });
    for (std::size_t k = 0; k < seen.size(); ++k) {
      if (seen[k] != static_cast<int>(k) + 1)
        throw FormatError("<templates>", i,
                          "placeholders are not numbered densely by first appearance");
    }
    if (lexical_entity)
      throw FormatError("<templates>", i, "template contains a mention");
    if (t.placeholder_count != static_cast<int>(seen.size()))
      throw FormatError("<templates>", i, "placeholder_count does not match text");
    if (t.frequency < 1) throw FormatError("<templates>", i, "frequency must be >= 1");
    base.asts_.push_back(std::move(ast));
  }
  base.templates_ = std::move(templates);
  return base;
}

TemplateBase TemplateBase::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open template base " + path.string());
  std::vector<Template> templates;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      Template t;
      t.canonical_text = j.at("canonical_text").get<std::string>();
      t.frequency = j.at("frequency").get<int>();
      t.source_ids = j.at("source_ids").get<std::vector<std::string>>();
      t.placeholder_count = j.value("placeholder_count", -1);
      if (t.placeholder_count < 0)
        t.placeholder_count = max_placeholder(sparql::parse(t.canonical_text));
      templates.push_back(std::move(t));
    } catch (const std::exception& e) {
      throw FormatError(path.string(), lineno, e.what());
    }
  }
  try {
    return from_templates(std::move(templates));
  } catch (const FormatError& e) {
    throw FormatError(path.string(), e.index() + 1, e.reason());
  }
}

std::string TemplateBase::to_jsonl() const {
  std::string out;
  for (const auto& t : templates_) {
    nlohmann::ordered_json j;
    j["canonical_text"] = t.canonical_text;
    j["placeholder_count"] = t.placeholder_count;
    j["frequency"] = t.frequency;
    j["source_ids"] = t.source_ids;
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

void TemplateBase::save(const std::filesystem::path& path) const {
  io::write_atomically(path, to_jsonl());
}

long TemplateBase::total_frequency() const {
  long total = 0;
  for (const auto& t : templates_) total += t.frequency;
  return total;
}

// ---------------------------------------------------------------------------

std::vector<ScoredTemplate> top_k(const TemplateBase& base,
                                  std::string_view probe, std::size_t k) {
  if (base.empty()) throw EmptyBase();
  if (k == 0) throw std::invalid_argument("top_k: k must be >= 1");
  const auto& templates = base.templates();
  auto better = [&](const ScoredTemplate& a, const ScoredTemplate& b) {
    if (a.score != b.score) return a.score > b.score;
    const auto& ta = templates[a.index];
    const auto& tb = templates[b.index];
    if (ta.frequency != tb.frequency) return ta.frequency > tb.frequency;
    return ta.canonical_text < tb.canonical_text;
  };

  std::vector<ScoredTemplate> best;
  best.reserve(k + 1);
  for (std::size_t i = 0; i < templates.size(); ++i) {
    const auto& text = templates[i].canonical_text;
    const std::size_t longest = std::max(text.size(), probe.size());
    std::size_t distance;
    if (best.size() < k || longest == 0) {
      distance = edit_distance(probe, text);
    } else {
      // Anything farther than the current k-th entry cannot enter the list;
      // the +1 keeps ties inside the exactly computed range.
      const double worst = best.back().score;
      const auto bound = static_cast<std::size_t>((1.0 - worst) * longest) + 1;
      distance = edit_distance(probe, text, bound);
      if (distance > bound) continue;
    }
    const double score =
        longest == 0 ? 1.0
                     : 1.0 - static_cast<double>(distance) / static_cast<double>(longest);
    ScoredTemplate candidate{i, score};
    if (best.size() == k && !better(candidate, best.back())) continue;
    best.insert(std::upper_bound(best.begin(), best.end(), candidate, better),
                candidate);
    if (best.size() > k) best.pop_back();
  }
  return best;
}

}  // namespace nlqx
