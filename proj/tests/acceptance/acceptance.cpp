// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mock_server.hpp"
#include "nlqxform/entity_linking.hpp"
#include "nlqxform/errors.hpp"
#include "nlqxform/evaluation.hpp"
#include "nlqxform/pipeline.hpp"
#include "support.hpp"

namespace sp = nlqx::sparql;
namespace fs = std::filesystem;
using namespace nlqx::testing;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

Outcome pass(std::string detail) { return {true, std::move(detail)}; }
Outcome fail(std::string detail) { return {false, std::move(detail)}; }

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fixed(double v, int digits = 3) {
  std::ostringstream out;
  out.precision(digits);
  out << std::fixed << v;
  return out.str();
}

const std::string kSchema = "https://dblp.org/rdf/schema#";
const std::string kWorkedQuestion = "how many research papers did Ruijie Wang and Luca Rossetto write together";

// 1. Worked example through the CLI.
Outcome worked_example() {
  const auto dir = fixture_dir() / "worked";
  nlqx::LinkerConfig offline;
  offline.mode = nlqx::LinkMode::Offline;
  offline.fixture_path = dir / "links";
  nlqx::EntityLinker linker(offline);
  if (linker.link("Ruijie Wang", nlqx::EntityType::Author).front().iri != "https://dblp.org/pid/57/5759-3" ||
      linker.link("Luca Rossetto", nlqx::EntityType::Author).front().iri != "https://dblp.org/pid/156/1623")
    return fail("fixture links do not hold the expected IRIs");
  const auto graph = nlqx::load_graph(dir / "graph.nt");
  std::map<std::string, int> authors_per_paper;
  for (const auto& t : graph.triples())
    if (t.predicate == kSchema + "authoredBy" && (t.object.value == "https://dblp.org/pid/57/5759-3" ||
                                                  t.object.value == "https://dblp.org/pid/156/1623"))
      ++authors_per_paper[t.subject];
  if (authors_per_paper.size() != 1 || authors_per_paper.begin()->second != 2)
    return fail("graph does not hold exactly one co-authored paper");

  const auto start = Clock::now();
  const auto run = run_process(
      {cli_path().string(), "--config", (dir / "config.json").string(), "ask", "--question", kWorkedQuestion});
  const double elapsed = seconds_since(start);
  if (run.exit_code != 0) return fail("exit " + std::to_string(run.exit_code) + ": " + run.err);
  if (run.out != "1\n") return fail("printed '" + run.out + "'");
  if (elapsed >= 1.0) return fail("took " + fixed(elapsed) + " s");
  return pass("answer 1 in " + fixed(elapsed) + " s");
}

// 2. parse/serialize round trip.
Outcome round_trip() {
  Rng rng(1001);
  for (int i = 0; i < 500; ++i) {
    const auto ast = random_ast(rng);
    const auto text = sp::serialize(ast);
    sp::QueryAst reparsed;
    try {
      reparsed = sp::parse(text);
    } catch (const std::exception& e) {
      return fail("case " + std::to_string(i) + " does not parse: " + e.what() + ": " + text);
    }
    if (!(reparsed == ast)) return fail("case " + std::to_string(i) + " differs after parse: " + text);
    if (sp::serialize(reparsed) != text) return fail("case " + std::to_string(i) + " is not a fixpoint: " + text);
  }
  return pass("500/500 ASTs");
}

// 3. relexicalize(delexicalize(q)) == q with dense placeholder indices.
Outcome delex_inverse() {
  Rng rng(1002);
  const auto vocab = nlqx::RelationVocabulary::dblp_default();
  std::size_t slots = 0;
  for (int i = 0; i < 500; ++i) {
    const auto ast = random_ast(rng);
    const auto d = nlqx::delexicalize(ast, vocab);
    if (!(nlqx::relexicalize(d.template_ast, d.bindings) == ast))
      return fail("case " + std::to_string(i) + " not restored: " + sp::serialize(ast));
    std::set<int> seen;
    int next = 1;
    for (int k : placeholder_sequence(d.template_ast)) {
      if (k > next) return fail("case " + std::to_string(i) + " skips an index: " + sp::serialize(d.template_ast));
      if (k == next) ++next;
      seen.insert(k);
    }
    if (seen.size() != d.bindings.size() || (!seen.empty() && *seen.rbegin() != static_cast<int>(seen.size())))
      return fail("case " + std::to_string(i) + " indices not dense");
    slots += d.bindings.size();
  }
  return pass("500/500 queries, " + std::to_string(slots) + " slots");
}

// 4. similarity against a textbook DP table.
Outcome similarity_oracle() {
  Rng rng(1003);
  const std::string alphabet = "abcdefghij <>?_.ABC0123";
  std::uniform_int_distribution<int> coin(0, 1), edits(0, 20);
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto a = random_string(rng, 200, alphabet);
    std::string b;
    if (coin(rng)) {
      b = random_string(rng, 200, alphabet);
    } else {
      b = a;
      std::uniform_int_distribution<std::size_t> pos(0, 200);
      for (int e = edits(rng); e > 0; --e) {
        const auto p = b.empty() ? 0 : pos(rng) % (b.size() + 1);
        switch (pos(rng) % 3) {
          case 0: b.insert(b.begin() + static_cast<long>(p), alphabet[p % alphabet.size()]); break;
          case 1: if (p < b.size()) b.erase(p, 1); break;
          default: if (p < b.size()) b[p] = alphabet[(p * 7) % alphabet.size()];
        }
      }
      if (b.size() > 200) b.resize(200);
    }
    const double got = nlqx::similarity(a, b);
    const double want = dp_similarity(a, b);
    worst = std::max(worst, std::abs(got - want));
    if (std::abs(got - want) > 1e-12)
      return fail("pair " + std::to_string(i) + ": " + std::to_string(got) + " vs " + std::to_string(want));
  }
  std::ostringstream d;
  d << "1000/1000 pairs, max deviation " << worst;
  return pass(d.str());
}

// 5. evaluate_local against exhaustive assignment.
Outcome evaluator_oracle() {
  Rng rng(1004);
  for (int i = 0; i < 200; ++i) {
    const auto inst = random_eval_instance(rng, 30);
    const auto patterns = std::count_if(inst.query.where.begin(), inst.query.where.end(), [](const sp::Element& e) {
      return std::holds_alternative<sp::TriplePattern>(e.node);
    });
    if (inst.graph.size() > 30 || patterns < 1 || patterns > 3)
      return fail("instance " + std::to_string(i) + " exceeds the size bounds");
    const auto want = enumerate_answers(inst.query, inst.graph);
    const auto got = nlqx::evaluate_local(inst.query, inst.graph);
    if (got.kind != want.kind || got.truth != want.truth || sorted_rows(got) != sorted_rows(want))
      return fail("instance " + std::to_string(i) + ": " + sp::serialize(inst.query));
  }
  return pass("200/200 instances");
}

// 6. First-accept laziness against a counting SPARQL endpoint.
class FixedTranslator : public nlqx::Translator {
 public:
  explicit FixedTranslator(std::string form) : form_(std::move(form)) {}
  nlqx::TranslationResult translate(std::string_view) const override { return {form_, {}, nlqx::Backend::Baseline, false}; }

 private:
  std::string form_;
};

class MapLinker : public nlqx::Linker {
 public:
  explicit MapLinker(std::map<std::string, std::vector<std::string>> table) : table_(std::move(table)) {}
  std::vector<nlqx::EntityCandidate> link(const nlqx::EntityMention& m) override {
    const auto& iris = table_.at(m.surface);
    if (iris.empty()) throw nlqx::LinkError(nlqx::LinkError::Kind::NoCandidates, "no candidates");
    std::vector<nlqx::EntityCandidate> out;
    for (std::size_t i = 0; i < iris.size(); ++i)
      out.push_back({iris[i], "", static_cast<int>(i) + 1, nlqx::EntityType::Author});
    return out;
  }

 private:
  std::map<std::string, std::vector<std::string>> table_;
};

std::string authored(const std::string& s, const std::string& o) {
  return s + " <" + kSchema + "authoredBy> " + o + " .";
}

// Answer check written from the rules, independent of is_answer().
bool oracle_accepts(const nlqx::ResultSet& rs, const sp::QueryAst& q) {
  if (q.form == sp::QueryForm::Ask) return true;
  if (q.has_count()) {
    for (const auto& row : rs.rows)
      for (const auto& [name, node] : row)
        if (node.value != "0") return true;
    return false;
  }
  return !rs.rows.empty();
}

Outcome first_accept() {
  const std::vector<std::pair<std::string, std::string>> training = {
      {"C2", "SELECT COUNT(DISTINCT ?answer) AS ?count WHERE { " + authored("?answer", "<https://dblp.org/pid/1>") +
                 " " + authored("?answer", "<https://dblp.org/pid/2>") + " }"},
      {"S2", "SELECT DISTINCT ?answer WHERE { " + authored("?answer", "<https://dblp.org/pid/1>") + " " +
                 authored("?answer", "<https://dblp.org/pid/2>") + " }"},
      {"S1", "SELECT DISTINCT ?answer WHERE { " + authored("?answer", "<https://dblp.org/pid/3>") + " }"},
      {"C1", "SELECT COUNT(DISTINCT ?answer) AS ?count WHERE { " + authored("?answer", "<https://dblp.org/pid/3>") +
                 " }"},
      {"A2", "ASK { " + authored("?x", "<https://dblp.org/pid/1>") + " " + authored("?x", "<https://dblp.org/pid/2>") +
                 " }"},
  };
  auto base = std::make_shared<nlqx::TemplateBase>(
      nlqx::TemplateBase::build(training, nlqx::RelationVocabulary::dblp_default()));
  const std::vector<std::string> forms = {
      "SELECT COUNT(DISTINCT ?answer) AS ?count WHERE { " + authored("?answer", "<M1>") + " " +
          authored("?answer", "<M2>") + " }",
      "SELECT DISTINCT ?answer WHERE { " + authored("?answer", "<M1>") + " " + authored("?answer", "<M2>") + " }",
      "SELECT DISTINCT ?answer WHERE { " + authored("?answer", "<M1>") + " }",
  };

  std::mutex graph_mutex;
  std::shared_ptr<const nlqx::Graph> graph;
  std::atomic<int> hits{0};
  MockServer endpoint;
  auto handler = [&](const httplib::Request& req, httplib::Response& res) {
    ++hits;
    std::shared_ptr<const nlqx::Graph> g;
    {
      std::lock_guard lock(graph_mutex);
      g = graph;
    }
    res.set_content(nlqx::to_results_json(nlqx::evaluate_local(sp::parse(req.get_param_value("query")), *g)),
                    "application/sparql-results+json");
  };
  endpoint.server().Get("/sparql", handler);
  endpoint.server().Post("/sparql", handler);
  endpoint.start();

  Rng rng(1006);
  std::uniform_int_distribution<int> author(0, 9), coauthors(1, 2), cands(0, 5), pick_form(0, 2), k_dist(1, 4),
      m_dist(1, 6);
  int accepted = 0, total = 0;
  for (int trial = 0; trial < 100; ++trial) {
    nlqx::Graph g;
    for (int p = 0; p < 8; ++p)
      for (int a = coauthors(rng); a > 0; --a)
        g.insert({"https://dblp.org/rec/conf/t/P" + std::to_string(p), kSchema + "authoredBy",
                  {false, "https://dblp.org/pid/90/" + std::to_string(author(rng))}});
    {
      std::lock_guard lock(graph_mutex);
      graph = std::make_shared<const nlqx::Graph>(g);
    }
    std::map<std::string, std::vector<std::string>> links;
    for (const char* m : {"M1", "M2"}) {
      std::vector<int> pool = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
      std::shuffle(pool.begin(), pool.end(), rng);
      auto& list = links[m];
      for (int c = cands(rng); c > 0; --c) list.push_back("https://dblp.org/pid/90/" + std::to_string(pool[c]));
    }
    const auto form = forms[static_cast<std::size_t>(pick_form(rng))];
    nlqx::PipelineConfig config;
    config.k_templates = k_dist(rng);
    config.max_combinations_per_template = m_dist(rng);
    nlqx::EndpointConfig ec;
    ec.url = endpoint.url() + "/sparql";
    ec.retries = 0;
    ec.timeout = std::chrono::milliseconds(5000);
    nlqx::PipelineParts parts{base, nlqx::RelationVocabulary::dblp_default(), std::make_shared<FixedTranslator>(form),
                              std::make_shared<MapLinker>(links), std::make_shared<nlqx::RemoteExecutor>(ec)};
    const nlqx::Pipeline pipeline(config, parts);

    hits = 0;
    const auto r = pipeline.answer("t" + std::to_string(trial), "question");
    const int executed = hits.load();
    const std::string where = "trial " + std::to_string(trial) + ": ";
    const int bound = config.k_templates * config.max_combinations_per_template;
    if (executed > bound) return fail(where + std::to_string(executed) + " queries > bound " + std::to_string(bound));
    if (executed != static_cast<int>(r.tried_queries.size()))
      return fail(where + "endpoint saw " + std::to_string(executed) + " queries, trace lists " +
                  std::to_string(r.tried_queries.size()));

    // Independent replay: the same candidate order, stopping at the first acceptable result.
    const auto ast = sp::parse(form);
    const auto d = nlqx::delexicalize(ast, nlqx::RelationVocabulary::dblp_default());
    const auto ranked = nlqx::top_k(*base, sp::serialize(d.template_ast), static_cast<std::size_t>(config.k_templates));
    std::vector<std::vector<std::string>> slot_iris;
    for (const auto& b : d.bindings) slot_iris.push_back(links.at(std::get<sp::Mention>(b).surface));
    std::vector<std::vector<std::size_t>> product = {{}};
    for (const auto& options : slot_iris) {
      std::vector<std::vector<std::size_t>> next;
      for (const auto& prefix : product)
        for (std::size_t c = 0; c < options.size(); ++c) {
          next.push_back(prefix);
          next.back().push_back(c);
        }
      product = std::move(next);
    }
    std::vector<std::string> seen;
    int expected = 0;
    bool expect_accept = false;
    for (const auto& st : ranked) {
      if (base->templates()[st.index].placeholder_count != static_cast<int>(slot_iris.size())) continue;
      const auto limit = std::min(product.size(), static_cast<std::size_t>(config.max_combinations_per_template));
      for (std::size_t i = 0; i < limit && !expect_accept; ++i) {
        std::vector<sp::Term> terms;
        for (std::size_t s = 0; s < slot_iris.size(); ++s) terms.push_back(sp::Iri{slot_iris[s][product[i][s]]});
        const auto q = nlqx::relexicalize(base->ast(st.index), terms);
        const auto text = sp::serialize(q);
        if (std::find(seen.begin(), seen.end(), text) != seen.end()) continue;
        seen.push_back(text);
        ++expected;
        expect_accept = oracle_accepts(nlqx::evaluate_local(q, g), q);
      }
      if (expect_accept) break;
    }
    if (executed != expected)
      return fail(where + std::to_string(executed) + " queries executed, replay expects " + std::to_string(expected));
    if (expect_accept) {
      if (!r.chosen_query || r.fallback || *r.chosen_query != r.tried_queries.back().query)
        return fail(where + "accepted query is not the last one executed");
      for (std::size_t i = 0; i + 1 < r.tried_queries.size(); ++i)
        if (r.tried_queries[i].outcome == nlqx::QueryOutcome::Accepted)
          return fail(where + "a query ran after acceptance");
      ++accepted;
    }
    total += executed;
  }
  return pass("100/100 trials, " + std::to_string(accepted) + " accepted, " + std::to_string(total) +
              " queries executed");
}

// 7. Offline batch plus CLI eval on the 20-question fixture set.
double report_value(const std::string& report, const std::string& key) {
  const auto at = report.find("\n" + key + " ");
  if (at == std::string::npos) return -1;
  return std::stod(report.substr(at + key.size() + 2));
}

Outcome offline_batch() {
  const auto dir = fixture_dir() / "dblp20";
  const auto start = Clock::now();
  std::vector<std::pair<std::string, std::string>> outputs;
  std::string report;
  for (int run = 0; run < 2; ++run) {
    const auto out = scratch_dir("acceptance_batch" + std::to_string(run));
    const auto answers = (out / "answers.json").string();
    const auto entities = (out / "entities.json").string();
    const auto batch = run_process({cli_path().string(), "--config", (dir / "config.json").string(), "batch",
                                    "--questions", (dir / "questions.json").string(), "--out-answers", answers,
                                    "--out-entities", entities});
    if (batch.exit_code != 0) return fail("batch exit " + std::to_string(batch.exit_code) + ": " + batch.err);
    const auto eval = run_process({cli_path().string(), "eval", "--pred-answers", answers, "--pred-entities",
                                   entities, "--gold", (dir / "gold.json").string()});
    if (eval.exit_code != 0) return fail("eval exit " + std::to_string(eval.exit_code) + ": " + eval.err);
    report = "\n" + eval.out;
    outputs.emplace_back(slurp(answers), slurp(entities));
  }
  const double elapsed = seconds_since(start);
  const double qa = report_value(report, "QA F1");
  const double el = report_value(report, "EL F1");
  if (report.find("\nquestions 20\n") == std::string::npos) return fail("report does not cover 20 questions");
  if (qa != 1.0 || el != 1.0) return fail("QA F1 " + fixed(qa, 4) + ", EL F1 " + fixed(el, 4));
  if (outputs[0] != outputs[1]) return fail("the two runs differ");
  if (elapsed >= 10.0) return fail("took " + fixed(elapsed) + " s");
  return pass("QA F1 1.0000, EL F1 1.0000, identical outputs, " + fixed(elapsed) + " s for two runs");
}

// 8. Metric hand values and symmetry.
Outcome metrics() {
  const auto s = nlqx::score_sets({"a"}, {"a", "b"});
  if (s.precision != 1.0 || s.recall != 0.5 || std::abs(s.f1 - 2.0 / 3.0) > 1e-12)
    return fail("({a},{a,b}) gave " + std::to_string(s.precision) + "/" + std::to_string(s.recall) + "/" +
                std::to_string(s.f1));
  const auto e = nlqx::score_sets({}, {});
  if (e.precision != 1.0 || e.recall != 1.0 || e.f1 != 1.0) return fail("empty/empty is not (1,1,1)");
  Rng rng(1008);
  std::uniform_int_distribution<int> size(0, 8), value(0, 12);
  for (int i = 0; i < 1000; ++i) {
    std::set<std::string> a, b;
    for (int n = size(rng); n > 0; --n) a.insert(std::to_string(value(rng)));
    for (int n = size(rng); n > 0; --n) b.insert(std::to_string(value(rng)));
    const auto ab = nlqx::score_sets(a, b), ba = nlqx::score_sets(b, a);
    if (ab.precision != ba.recall || ab.recall != ba.precision || std::abs(ab.f1 - ba.f1) > 1e-12)
      return fail("pair " + std::to_string(i) + " is not symmetric");
  }
  return pass("hand values exact, 1000/1000 symmetric pairs");
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"worked example answer", worked_example},
      {"parser round trip", round_trip},
      {"delexicalization inverse", delex_inverse},
      {"similarity oracle", similarity_oracle},
      {"local evaluator oracle", evaluator_oracle},
      {"first-accept semantics", first_accept},
      {"offline batch F1", offline_batch},
      {"metric correctness", metrics},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = fail(std::string("exception: ") + e.what());
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << i + 1 << ". " << criteria[i].first << ": " << o.detail
              << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
