#include <gtest/gtest.h>

#include <algorithm>
#include <tuple>
#include <unordered_set>

#include "nlqxform/errors.hpp"
#include "nlqxform/template_base.hpp"
#include "support.hpp"

namespace sp = nlqx::sparql;
using nlqx::RelationVocabulary;
using nlqx::TemplateBase;
using nlqx::testing::Rng;

namespace {

const std::string kSchema = "https://dblp.org/rdf/schema#";

std::string count_query(const std::string& a, const std::string& b) {
  return "SELECT COUNT(DISTINCT ?answer) AS ?count WHERE { ?answer <" + kSchema + "authoredBy> " +
         a + " . ?answer <" + kSchema + "authoredBy> " + b + " . }";
}

}  // namespace

TEST(EditDistance, HandValues) {
  EXPECT_EQ(nlqx::edit_distance("", ""), 0u);
  EXPECT_EQ(nlqx::edit_distance("abc", ""), 3u);
  EXPECT_EQ(nlqx::edit_distance("kitten", "sitting"), 3u);
  EXPECT_EQ(nlqx::edit_distance("flaw", "lawn"), 2u);
  EXPECT_DOUBLE_EQ(nlqx::similarity("", ""), 1.0);
  EXPECT_DOUBLE_EQ(nlqx::similarity("abcd", "abce"), 0.75);
  EXPECT_DOUBLE_EQ(nlqx::similarity("abc", "xyz"), 0.0);
}

TEST(EditDistance, MatchesDynamicProgrammingOracle) {
  Rng rng(11);
  for (int i = 0; i < 400; ++i) {
    const auto a = nlqx::testing::random_string(rng, 60, "abcAB ?<>");
    const auto b = nlqx::testing::random_string(rng, 60, "abcAB ?<>");
    ASSERT_EQ(nlqx::edit_distance(a, b), nlqx::testing::dp_edit_distance(a, b)) << a << " | " << b;
    ASSERT_EQ(nlqx::edit_distance(a, b), nlqx::edit_distance(b, a));
  }
}

TEST(EditDistance, BoundedEarlyExitNeverUnderstates) {
  Rng rng(12);
  for (int i = 0; i < 400; ++i) {
    const auto a = nlqx::testing::random_string(rng, 40, "abc");
    const auto b = nlqx::testing::random_string(rng, 40, "abc");
    const auto exact = nlqx::testing::dp_edit_distance(a, b);
    const std::size_t bound = 1 + rng() % 20;
    const auto bounded = nlqx::edit_distance(a, b, bound);
    if (exact <= bound)
      ASSERT_EQ(bounded, exact);
    else
      ASSERT_GT(bounded, bound);
  }
}

TEST(EditDistance, PropertySimilarityInUnitIntervalAndSymmetric) {
  Rng rng(13);
  for (int i = 0; i < 300; ++i) {
    const auto a = nlqx::testing::random_string(rng, 30, "xyz");
    const auto b = nlqx::testing::random_string(rng, 30, "xyz");
    const double s = nlqx::similarity(a, b);
    ASSERT_GE(s, 0.0);
    ASSERT_LE(s, 1.0);
    ASSERT_EQ(s, nlqx::similarity(b, a));
    ASSERT_EQ(nlqx::similarity(a, a), 1.0);
  }
}

TEST(Vocabulary, DefaultAndFileAgree) {
  const auto file = RelationVocabulary::load(std::filesystem::path(NLQX_SOURCE_DIR) / "data/relations.txt");
  EXPECT_EQ(file.relations, RelationVocabulary::dblp_default().relations);
}

TEST(Vocabulary, EntityIriClassification) {
  const auto v = RelationVocabulary::dblp_default();
  EXPECT_TRUE(v.is_entity_iri("https://dblp.org/pid/57/5759-3"));
  EXPECT_FALSE(v.is_entity_iri(kSchema + "authoredBy"));
  EXPECT_FALSE(v.is_entity_iri(kSchema + "Publication"));
  EXPECT_FALSE(v.is_entity_iri("http://www.w3.org/2001/XMLSchema#integer"));
}

TEST(Vocabulary, LoadRejectsGarbage) {
  const auto dir = nlqx::testing::scratch_dir("vocab");
  nlqx::testing::spit(dir / "bad.txt", "# ok\n<https://x/p>\nnot an iri\n");
  try {
    RelationVocabulary::load(dir / "bad.txt");
    FAIL();
  } catch (const nlqx::FormatError& e) {
    EXPECT_EQ(e.index(), 3u);
  }
  nlqx::testing::spit(dir / "empty.txt", "# nothing\n\n");
  EXPECT_THROW(RelationVocabulary::load(dir / "empty.txt"), nlqx::ConfigError);
}

TEST(Delexicalize, WorkedExample) {
  const auto ast = sp::parse(count_query("<Ruijie Wang>", "<Luca Rossetto>"));
  const auto d = nlqx::delexicalize(ast, RelationVocabulary::dblp_default());
  EXPECT_EQ(sp::serialize(d.template_ast), count_query("<entity_1>", "<entity_2>"));
  ASSERT_EQ(d.bindings.size(), 2u);
  EXPECT_EQ(std::get<sp::Mention>(d.bindings[0]).surface, "Ruijie Wang");
}

TEST(Delexicalize, IdenticalTermsShareAPlaceholder) {
  const auto ast = sp::parse("SELECT DISTINCT ?answer WHERE { ?p <" + kSchema +
                             "authoredBy> <https://dblp.org/pid/1> . ?p <" + kSchema +
                             "authoredBy> ?answer . FILTER(?answer != <https://dblp.org/pid/1>) }");
  const auto d = nlqx::delexicalize(ast, RelationVocabulary::dblp_default());
  EXPECT_EQ(d.bindings.size(), 1u);
  EXPECT_EQ(nlqx::testing::placeholder_sequence(d.template_ast), (std::vector<int>{1, 1}));
}

TEST(Delexicalize, ExistingPlaceholdersRenumbered) {
  const auto ast = sp::parse(count_query("<entity_3>", "<entity_1>"));
  const auto d = nlqx::delexicalize(ast, RelationVocabulary::dblp_default());
  EXPECT_EQ(sp::serialize(d.template_ast), count_query("<entity_1>", "<entity_2>"));
  EXPECT_EQ(sp::serialize(nlqx::relexicalize(d.template_ast, d.bindings)), sp::serialize(ast));
}

TEST(Delexicalize, PropertyInverseWithDenseIndices) {
  Rng rng(21);
  const auto vocab = RelationVocabulary::dblp_default();
  for (int i = 0; i < 300; ++i) {
    const auto ast = nlqx::testing::random_ast(rng);
    const auto d = nlqx::delexicalize(ast, vocab);
    ASSERT_EQ(nlqx::relexicalize(d.template_ast, d.bindings), ast) << sp::serialize(ast);
    int next = 1;
    for (int k : nlqx::testing::placeholder_sequence(d.template_ast)) {
      ASSERT_LE(k, next);
      if (k == next) ++next;
    }
    ASSERT_EQ(next - 1, static_cast<int>(d.bindings.size()));
  }
}

TEST(Relexicalize, ArityMismatch) {
  const auto tmpl = sp::parse(count_query("<entity_1>", "<entity_2>"));
  try {
    nlqx::relexicalize(tmpl, {sp::Iri{"https://dblp.org/pid/1"}});
    FAIL();
  } catch (const nlqx::ArityMismatch& e) {
    EXPECT_EQ(e.expected(), 2u);
    EXPECT_EQ(e.given(), 1u);
  }
}

TEST(DelexicalizeRaw, UnparseableText) {
  const auto [probe, surfaces] =
      nlqx::delexicalize_raw("SELECT ?x WHERE { ?x <http://p> <Ruijie  Wang> ; <Luca> <Ruijie Wang>");
  EXPECT_EQ(probe, "SELECT ?x WHERE { ?x <http://p> <entity_1> ; <entity_2> <entity_1>");
  EXPECT_EQ(surfaces, (std::vector<std::string>{"Ruijie Wang", "Luca"}));
}

TEST(TemplateBaseBuild, CountsMatchHashSetOracle) {
  Rng rng(31);
  const auto vocab = RelationVocabulary::dblp_default();
  std::vector<std::pair<std::string, std::string>> queries;
  for (int i = 0; i < 200; ++i) {
    const auto ast = nlqx::testing::random_ast(rng, {.unions = false, .max_depth = 1});
    queries.emplace_back("q" + std::to_string(i), sp::serialize(ast));
    if (i % 3 == 0) queries.emplace_back("dup" + std::to_string(i), sp::serialize(ast));
  }
  queries.emplace_back("broken", "SELECT ?x WHERE {");

  std::unordered_set<std::string> oracle;
  for (const auto& [id, text] : queries) {
    if (id == "broken") continue;
    oracle.insert(sp::serialize(nlqx::delexicalize(sp::parse(text), vocab).template_ast));
  }
  std::vector<nlqx::SkippedQuery> skipped;
  const auto base = TemplateBase::build(queries, vocab, &skipped);
  EXPECT_EQ(base.size(), oracle.size());
  EXPECT_EQ(base.total_frequency(), static_cast<long>(queries.size()) - 1);
  ASSERT_EQ(skipped.size(), 1u);
  EXPECT_EQ(skipped[0].id, "broken");
  EXPECT_TRUE(std::is_sorted(base.templates().begin(), base.templates().end(),
                             [](const auto& a, const auto& b) { return a.canonical_text < b.canonical_text; }));
  for (std::size_t i = 0; i < base.size(); ++i)
    EXPECT_EQ(base.templates()[i].placeholder_count, nlqx::max_placeholder(base.ast(i)));
}

TEST(TemplateBaseBuild, WorkedExampleMergesMentionsAndIris) {
  const auto vocab = RelationVocabulary::dblp_default();
  const auto base = TemplateBase::build(
      {{"a", count_query("<https://dblp.org/pid/1>", "<https://dblp.org/pid/2>")},
       {"b", count_query("<Anna Keller>", "<Tom Berger>")}},
      vocab);
  ASSERT_EQ(base.size(), 1u);
  EXPECT_EQ(base.templates()[0].canonical_text, count_query("<entity_1>", "<entity_2>"));
  EXPECT_EQ(base.templates()[0].frequency, 2);
  EXPECT_EQ(base.templates()[0].source_ids, (std::vector<std::string>{"a", "b"}));
}

TEST(TemplateBaseIo, SaveLoadRoundTrip) {
  Rng rng(41);
  std::vector<std::pair<std::string, std::string>> queries;
  for (int i = 0; i < 50; ++i)
    queries.emplace_back(std::to_string(i), sp::serialize(nlqx::testing::random_ast(rng)));
  const auto base = TemplateBase::build(queries, RelationVocabulary::dblp_default());
  const auto dir = nlqx::testing::scratch_dir("tb");
  base.save(dir / "templates.jsonl");
  const auto loaded = TemplateBase::load(dir / "templates.jsonl");
  EXPECT_EQ(loaded.templates(), base.templates());
  EXPECT_EQ(loaded.to_jsonl(), base.to_jsonl());
}

TEST(TemplateBaseIo, LoadReportsLine) {
  const auto dir = nlqx::testing::scratch_dir("tb-bad");
  nlqx::testing::spit(dir / "t.jsonl",
                      "{\"canonical_text\":\"ASK { ?x <http://p> <entity_1> . }\",\"frequency\":1,"
                      "\"source_ids\":[\"a\"]}\n"
                      "{\"canonical_text\":\"ASK { ?x <http://p> <entity_2> . }\",\"frequency\":1,"
                      "\"source_ids\":[\"b\"]}\n");
  try {
    TemplateBase::load(dir / "t.jsonl");
    FAIL();
  } catch (const nlqx::FormatError& e) {
    EXPECT_EQ(e.index(), 2u);
  }
  nlqx::testing::spit(dir / "m.jsonl",
                      "{\"canonical_text\":\"ASK { ?x <http://p> <Some One> . }\",\"frequency\":1,"
                      "\"source_ids\":[]}\n");
  EXPECT_THROW(TemplateBase::load(dir / "m.jsonl"), nlqx::FormatError);
}

TEST(TopK, EmptyBaseAndZeroK) {
  EXPECT_THROW(nlqx::top_k(TemplateBase{}, "x", 1), nlqx::EmptyBase);
  const auto base = TemplateBase::from_templates({{"ASK { ?x <http://p> ?y . }", 0, 1, {"a"}}});
  EXPECT_THROW(nlqx::top_k(base, "x", 0), std::invalid_argument);
}

TEST(TopK, MatchesBruteForceRanking) {
  Rng rng(51);
  for (int trial = 0; trial < 60; ++trial) {
    std::vector<nlqx::Template> templates;
    std::unordered_set<std::string> texts;
    const int n = 1 + static_cast<int>(rng() % 25);
    while (static_cast<int>(templates.size()) < n) {
      // Short variable names give many equal scores, which exercises the tie-break.
      const auto name = nlqx::testing::random_string(rng, 4, "ab");
      const std::string text = "ASK { ?x" + name + " <http://p> ?y . }";
      if (!texts.insert(text).second) continue;
      templates.push_back({text, 0, 1 + static_cast<int>(rng() % 3), {}});
    }
    const auto base = TemplateBase::from_templates(templates);
    const std::string probe = "ASK { ?x" + nlqx::testing::random_string(rng, 4, "ab") + " <http://p> ?y . }";
    const std::size_t k = 1 + rng() % 6;

    std::vector<std::tuple<double, int, std::string, std::size_t>> oracle;
    for (std::size_t i = 0; i < base.size(); ++i) {
      const auto& t = base.templates()[i];
      oracle.emplace_back(-nlqx::testing::dp_similarity(probe, t.canonical_text), -t.frequency,
                          t.canonical_text, i);
    }
    std::sort(oracle.begin(), oracle.end());
    const auto got = nlqx::top_k(base, probe, k);
    ASSERT_EQ(got.size(), std::min(k, base.size()));
    for (std::size_t r = 0; r < got.size(); ++r) {
      ASSERT_EQ(got[r].index, std::get<3>(oracle[r])) << "trial " << trial << " rank " << r;
      ASSERT_DOUBLE_EQ(got[r].score, -std::get<0>(oracle[r]));
    }
  }
}

TEST(TopK, WorkedExampleProbeRetrievesItsTemplate) {
  const auto vocab = RelationVocabulary::dblp_default();
  const auto base = TemplateBase::build(
      {{"a", count_query("<Anna Keller>", "<Tom Berger>")},
       {"b", "SELECT DISTINCT ?answer WHERE { ?answer <" + kSchema + "authoredBy> <X Y> . }"}},
      vocab);
  const auto probe = sp::serialize(
      nlqx::delexicalize(sp::parse(count_query("<Ruijie Wang>", "<Luca Rossetto>")), vocab).template_ast);
  const auto ranked = nlqx::top_k(base, probe, 2);
  EXPECT_EQ(base.templates()[ranked[0].index].canonical_text, probe);
  EXPECT_EQ(ranked[0].score, 1.0);
}
