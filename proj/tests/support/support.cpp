#include "support.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <fcntl.h>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace nlqx::testing {

namespace sp = nlqx::sparql;

std::filesystem::path fixture_dir() { return NLQX_FIXTURE_DIR; }
std::filesystem::path cli_path() { return NLQX_CLI_PATH; }
std::filesystem::path mock_endpoint_path() { return NLQX_MOCK_ENDPOINT_PATH; }

std::filesystem::path scratch_dir(const std::string& name) {
  static std::atomic<int> counter{0};
  auto dir = std::filesystem::temp_directory_path() /
             ("nlqx-" + name + "-" + std::to_string(::getpid()) + "-" +
              std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

Run run_process(const std::vector<std::string>& argv, const std::filesystem::path& cwd) {
  const auto dir = scratch_dir("proc");
  const auto out_path = dir / "stdout";
  const auto err_path = dir / "stderr";
  const pid_t pid = ::fork();
  if (pid < 0) throw std::runtime_error("fork failed");
  if (pid == 0) {
    const int out = ::open(out_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    const int err = ::open(err_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    ::dup2(out, 1);
    ::dup2(err, 2);
    if (!cwd.empty() && ::chdir(cwd.c_str()) != 0) ::_exit(127);
    std::vector<char*> args;
    for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);
    ::execv(args[0], args.data());
    ::_exit(127);
  }
  int status = 0;
  ::waitpid(pid, &status, 0);
  Run run;
  run.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  run.out = slurp(out_path);
  run.err = slurp(err_path);
  std::filesystem::remove_all(dir);
  return run;
}

// ---------------------------------------------------------------------------

std::size_t dp_edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i)
    for (std::size_t j = 1; j <= b.size(); ++j)
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1,
                          d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
  return d[a.size()][b.size()];
}

double dp_similarity(std::string_view a, std::string_view b) {
  const std::size_t longest = std::max(a.size(), b.size());
  if (longest == 0) return 1.0;
  return 1.0 - static_cast<double>(dp_edit_distance(a, b)) / static_cast<double>(longest);
}

std::string random_string(Rng& rng, std::size_t max_len, std::string_view alphabet) {
  std::uniform_int_distribution<std::size_t> len(0, max_len);
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  std::string s(len(rng), ' ');
  for (auto& c : s) c = alphabet[pick(rng)];
  return s;
}

// ---------------------------------------------------------------------------

namespace {

const std::vector<std::string> kRelations = {
    "https://dblp.org/rdf/schema#authoredBy",
    "https://dblp.org/rdf/schema#yearOfPublication",
    "https://dblp.org/rdf/schema#publishedIn",
    "https://dblp.org/rdf/schema#title",
    "https://dblp.org/rdf/schema#numberOfCreators",
};
const std::vector<std::string> kEntityIris = {
    "https://dblp.org/pid/57/5759-3",
    "https://dblp.org/pid/156/1623",
    "https://dblp.org/rec/conf/esws/WangR23",
    "http://example.org/thing?x=1&y=%20",
};
const std::vector<std::string> kSchemaIris = {
    "https://dblp.org/rdf/schema#Publication",
    "http://www.w3.org/2001/XMLSchema#integer",
};
const std::vector<std::string> kVariables = {"answer", "x", "y", "paper", "v1", "_t"};
const std::vector<std::string> kWords = {"Ruijie", "Wang", "Luca", "Rossetto", "Deep",
                                         "learning", "ISWC", "2023", "O'Brien", "Müller",
                                         "a.b", "x-y", "(draft)", "&", "entity"};

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& v) {
  return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

bool chance(Rng& rng, double p) { return std::bernoulli_distribution(p)(rng); }

int uniform(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

class AstGen {
 public:
  AstGen(Rng& rng, const AstOptions& o) : rng_(rng), o_(o) {}

  sp::QueryAst run() {
    sp::QueryAst ast;
    ast.form = chance(rng_, 0.15) ? sp::QueryForm::Ask : sp::QueryForm::Select;
    ast.where = group(0);
    if (ast.form == sp::QueryForm::Ask) return ast;

    if (bound_.empty()) {
      ast.where.insert(ast.where.begin(),
                       sp::Element{sp::TriplePattern{sp::Variable{"answer"},
                                                     sp::Iri{pick(rng_, kRelations)},
                                                     entity_term()}});
      bound_.insert("answer");
    }
    const std::vector<std::string> vars(bound_.begin(), bound_.end());
    ast.distinct = chance(rng_, 0.5);
    if (chance(rng_, 0.3)) {
      if (o_.modifiers && chance(rng_, 0.4)) {
        const auto& g = pick(rng_, vars);
        ast.group_by.push_back(sp::Variable{g});
        ast.projection.emplace_back(sp::Variable{g});
      }
      ast.projection.emplace_back(
          sp::Aggregate{sp::Count{chance(rng_, 0.7), sp::Variable{pick(rng_, vars)}},
                        sp::Variable{"count"}});
    } else {
      const int n = uniform(rng_, 1, std::min<int>(3, static_cast<int>(vars.size())));
      for (int i = 0; i < n; ++i) ast.projection.emplace_back(sp::Variable{pick(rng_, vars)});
    }
    if (o_.modifiers) {
      if (chance(rng_, 0.3)) {
        sp::OrderBy order;
        if (ast.has_count() && chance(rng_, 0.5))
          order.expression = sp::Count{chance(rng_, 0.5), sp::Variable{pick(rng_, vars)}};
        else
          order.expression = sp::Variable{pick(rng_, vars)};
        order.direction = chance(rng_, 0.5) ? sp::SortDirection::Asc : sp::SortDirection::Desc;
        ast.order_by = order;
      }
      if (chance(rng_, 0.3)) ast.limit = static_cast<std::uint64_t>(uniform(rng_, 0, 100));
      if (chance(rng_, 0.2)) ast.offset = static_cast<std::uint64_t>(uniform(rng_, 0, 20));
    }
    return ast;
  }

 private:
  sp::Group group(int depth) {
    sp::Group g;
    const int n = uniform(rng_, depth == 0 ? 1 : 0, 4);
    for (int i = 0; i < n; ++i) {
      const int roll = uniform(rng_, 0, 9);
      if (roll < 6 || depth >= o_.max_depth) {
        g.push_back(sp::Element{triple()});
      } else if (roll == 6 && o_.filters) {
        g.push_back(sp::Element{filter(depth)});
      } else if (roll == 7 && o_.unions) {
        auto left = group(depth + 1);
        auto right = group(depth + 1);
        g.push_back(sp::Element{sp::Union{std::move(left), std::move(right)}});
      } else if (roll == 8 && o_.binds) {
        const std::string target = "b" + std::to_string(next_bind_++);
        g.push_back(sp::Element{sp::Bind{term(), sp::Variable{target}}});
        bound_.insert(target);
      } else {
        g.push_back(sp::Element{triple()});
      }
    }
    return g;
  }

  sp::Filter filter(int depth) {
    if (chance(rng_, 0.25)) {
      // Variables bound only inside NOT EXISTS do not count as bound.
      auto saved = bound_;
      auto inner = group(depth + 1);
      bound_ = std::move(saved);
      return sp::Filter{sp::NotExists{std::move(inner)}};
    }
    static const std::vector<sp::CompareOp> ops = {sp::CompareOp::Eq, sp::CompareOp::Ne,
                                                   sp::CompareOp::Lt, sp::CompareOp::Le,
                                                   sp::CompareOp::Gt, sp::CompareOp::Ge};
    return sp::Filter{sp::Comparison{pick(rng_, ops), variable(false), term()}};
  }

  sp::TriplePattern triple() {
    sp::TriplePattern tp{term(), sp::Iri{pick(rng_, kRelations)}, term()};
    for (const auto* t : {&tp.subject, &tp.object})
      if (auto* v = std::get_if<sp::Variable>(t)) bound_.insert(v->name);
    return tp;
  }

  sp::Term variable(bool) { return sp::Variable{pick(rng_, kVariables)}; }

  sp::Term entity_term() {
    const int roll = uniform(rng_, 0, 3);
    if (roll == 0 && o_.mentions) return mention();
    if (roll == 1 && o_.placeholders) return sp::Placeholder{uniform(rng_, 1, 4)};
    return sp::Iri{pick(rng_, kEntityIris)};
  }

  sp::Term mention() {
    std::string s;
    const int words = uniform(rng_, 1, 3);
    for (int i = 0; i < words; ++i) {
      if (i) s += ' ';
      s += pick(rng_, kWords);
    }
    return sp::Mention{s};
  }

  sp::Term term() {
    switch (uniform(rng_, 0, 6)) {
      case 0:
      case 1:
      case 2: return variable(true);
      case 3: return entity_term();
      case 4: return sp::Iri{pick(rng_, kSchemaIris)};
      case 5:
        if (o_.literals)
          return sp::StringLiteral{random_string(rng_, 8, "ab Z'\"\\\n\t.<>?{}")};
        return variable(true);
      default: {
        if (!o_.literals) return entity_term();
        std::string lex = chance(rng_, 0.3) ? "-" : "";
        lex += std::to_string(uniform(rng_, 0, 2030));
        if (chance(rng_, 0.3)) lex += "." + std::to_string(uniform(rng_, 0, 99));
        return sp::NumericLiteral{lex};
      }
    }
  }

  Rng& rng_;
  const AstOptions& o_;
  std::set<std::string> bound_;
  int next_bind_ = 1;
};

void collect_placeholders(const sp::Group& g, std::vector<int>& out) {
  sp::for_each_term(g, [&](const sp::Term& t) {
    if (auto* p = std::get_if<sp::Placeholder>(&t)) out.push_back(p->index);
  });
}

}  // namespace

sp::QueryAst random_ast(Rng& rng, const AstOptions& options) { return AstGen(rng, options).run(); }

std::vector<int> placeholder_sequence(const sp::QueryAst& ast) {
  std::vector<int> out;
  collect_placeholders(ast.where, out);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

const std::vector<std::string> kNodes = {"http://ex.org/n0", "http://ex.org/n1",
                                         "http://ex.org/n2", "http://ex.org/n3",
                                         "http://ex.org/n4"};
const std::vector<std::string> kLiterals = {"1", "2", "10", "-3", "a", "b", "B10"};
const std::vector<std::string> kPredicates = {"http://ex.org/p", "http://ex.org/q",
                                              "http://ex.org/r"};
const std::vector<std::string> kEvalVars = {"a", "b", "c"};

Node random_object(Rng& rng) {
  if (chance(rng, 0.6)) return Node{false, pick(rng, kNodes)};
  return Node{true, pick(rng, kLiterals)};
}

sp::Term node_term(const Node& n) {
  if (!n.literal) return sp::Iri{n.value};
  const bool numeric = n.value.find_first_not_of("-0123456789") == std::string::npos;
  if (numeric) return sp::NumericLiteral{n.value};
  return sp::StringLiteral{n.value};
}

// Independent reading of the comparison rules: integers by value,
// everything else by exact node (Eq/Ne) or by string order (Lt...Ge).
bool integer_of(const std::string& s, long long& out) {
  if (s.empty() || s.size() > 18) return false;
  std::size_t i = s[0] == '-' ? 1 : 0;
  if (i == s.size()) return false;
  for (std::size_t j = i; j < s.size(); ++j)
    if (s[j] < '0' || s[j] > '9') return false;
  out = std::stoll(s);
  return true;
}

int order_of(const std::string& a, const std::string& b) {
  long long x, y;
  if (integer_of(a, x) && integer_of(b, y)) return x < y ? -1 : (x > y ? 1 : 0);
  return a < b ? -1 : (a > b ? 1 : 0);
}

bool holds(sp::CompareOp op, const Node& l, const Node& r) {
  long long x, y;
  const bool ints = l.literal && r.literal && integer_of(l.value, x) && integer_of(r.value, y);
  switch (op) {
    case sp::CompareOp::Eq: return ints ? x == y : l == r;
    case sp::CompareOp::Ne: return ints ? x != y : !(l == r);
    case sp::CompareOp::Lt: return order_of(l.value, r.value) < 0;
    case sp::CompareOp::Le: return order_of(l.value, r.value) <= 0;
    case sp::CompareOp::Gt: return order_of(l.value, r.value) > 0;
    case sp::CompareOp::Ge: return order_of(l.value, r.value) >= 0;
  }
  return false;
}

Node ground(const sp::Term& t, const Row& assignment) {
  if (auto* v = std::get_if<sp::Variable>(&t)) return assignment.at(v->name);
  if (auto* i = std::get_if<sp::Iri>(&t)) return Node{false, i->value};
  if (auto* s = std::get_if<sp::StringLiteral>(&t)) return Node{true, s->value};
  return Node{true, std::get<sp::NumericLiteral>(t).lexical};
}

}  // namespace

EvalInstance random_eval_instance(Rng& rng, std::size_t max_triples) {
  EvalInstance inst;
  const int n = uniform(rng, 0, static_cast<int>(max_triples));
  for (int i = 0; i < n; ++i)
    inst.graph.insert(Triple{pick(rng, kNodes), pick(rng, kPredicates), random_object(rng)});

  auto& q = inst.query;
  std::set<std::string> vars;
  auto term = [&](bool subject) -> sp::Term {
    if (chance(rng, 0.6)) {
      const auto& v = pick(rng, kEvalVars);
      vars.insert(v);
      return sp::Variable{v};
    }
    return subject ? sp::Term{sp::Iri{pick(rng, kNodes)}} : node_term(random_object(rng));
  };
  const int patterns = uniform(rng, 1, 3);
  for (int i = 0; i < patterns; ++i) {
    auto s = term(true);
    sp::Iri p{pick(rng, kPredicates)};
    auto o = term(false);
    q.where.push_back(sp::Element{sp::TriplePattern{std::move(s), std::move(p), std::move(o)}});
  }
  if (vars.empty()) {
    std::get<sp::TriplePattern>(q.where.back().node).subject = sp::Variable{"a"};
    vars.insert("a");
  }
  const std::vector<std::string> bound(vars.begin(), vars.end());
  if (chance(rng, 0.4)) {
    static const std::vector<sp::CompareOp> ops = {sp::CompareOp::Eq, sp::CompareOp::Ne,
                                                   sp::CompareOp::Lt, sp::CompareOp::Le,
                                                   sp::CompareOp::Gt, sp::CompareOp::Ge};
    sp::Term rhs = chance(rng, 0.5) ? sp::Term{sp::Variable{pick(rng, bound)}}
                                    : node_term(random_object(rng));
    q.where.push_back(sp::Element{
        sp::Filter{sp::Comparison{pick(rng, ops), sp::Variable{pick(rng, bound)}, rhs}}});
  }

  const int shape = uniform(rng, 0, 9);
  if (shape == 0) {
    q.form = sp::QueryForm::Ask;
  } else if (shape == 1) {
    q.projection.emplace_back(sp::Aggregate{
        sp::Count{chance(rng, 0.5), sp::Variable{pick(rng, bound)}}, sp::Variable{"count"}});
  } else {
    q.distinct = chance(rng, 0.5);
    for (const auto& v : bound)
      if (chance(rng, 0.7)) q.projection.emplace_back(sp::Variable{v});
    if (q.projection.empty()) q.projection.emplace_back(sp::Variable{bound.front()});
  }
  return inst;
}

ResultSet enumerate_answers(const sp::QueryAst& query, const Graph& graph) {
  std::set<Node> domain;
  for (const auto& t : graph.triples()) {
    domain.insert(Node{false, t.subject});
    domain.insert(t.object);
  }
  std::set<std::string> names;
  std::vector<const sp::TriplePattern*> patterns;
  std::vector<const sp::Comparison*> filters;
  for (const auto& e : query.where) {
    if (auto* tp = std::get_if<sp::TriplePattern>(&e.node)) {
      patterns.push_back(tp);
      for (const auto* t : {&tp->subject, &tp->object})
        if (auto* v = std::get_if<sp::Variable>(t)) names.insert(v->name);
    } else {
      filters.push_back(&std::get<sp::Comparison>(std::get<sp::Filter>(e.node).condition));
    }
  }
  const std::vector<std::string> vars(names.begin(), names.end());
  const std::vector<Node> values(domain.begin(), domain.end());

  std::vector<Row> solutions;
  if (!values.empty() || vars.empty()) {
    std::vector<std::size_t> index(vars.size(), 0);
    while (true) {
      Row a;
      for (std::size_t i = 0; i < vars.size(); ++i) a[vars[i]] = values[index[i]];
      bool ok = true;
      for (const auto* tp : patterns) {
        const Node s = ground(tp->subject, a);
        const Node o = ground(tp->object, a);
        if (s.literal || !graph.triples().count(Triple{s.value, tp->predicate.value, o})) {
          ok = false;
          break;
        }
      }
      for (const auto* f : filters)
        if (ok && !holds(f->op, ground(f->lhs, a), ground(f->rhs, a))) ok = false;
      if (ok) solutions.push_back(a);
      std::size_t k = 0;
      while (k < index.size() && ++index[k] == values.size()) index[k++] = 0;
      if (k == index.size()) break;
    }
  }

  ResultSet out;
  if (query.form == sp::QueryForm::Ask) {
    out.kind = ResultSet::Kind::Boolean;
    out.truth = !solutions.empty();
    return out;
  }
  if (query.has_count()) {
    const auto& agg = std::get<sp::Aggregate>(query.projection.front());
    out.variables = {agg.alias.name};
    std::set<Node> distinct;
    for (const auto& s : solutions) distinct.insert(s.at(agg.count.inner.name));
    const std::size_t n = agg.count.distinct ? distinct.size() : solutions.size();
    out.rows.push_back({{agg.alias.name, Node{true, std::to_string(n)}}});
    return out;
  }
  for (const auto& item : query.projection) out.variables.push_back(std::get<sp::Variable>(item).name);
  std::set<Row> seen;
  for (const auto& s : solutions) {
    Row row;
    for (const auto& v : out.variables) row[v] = s.at(v);
    if (query.distinct && !seen.insert(row).second) continue;
    out.rows.push_back(row);
  }
  return out;
}

std::vector<Row> sorted_rows(const ResultSet& r) {
  auto rows = r.rows;
  std::sort(rows.begin(), rows.end());
  return rows;
}

}  // namespace nlqx::testing
