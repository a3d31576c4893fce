// nlqxform command-line tool. Talks to the library only through the C API.

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "nlqxform/nlqxform.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct Owned {
  char* p = nullptr;
  ~Owned() { nlqx_free_string(p); }
  std::string str() const { return p ? p : ""; }
};

int report_failure(nlqx_status status) {
  std::cerr << "error: " << nlqx_last_error() << "\n";
  return status == NLQX_ERR_CONFIG ? kExitUsage : kExitRuntime;
}

std::string absolute(const std::string& p) { return p.empty() ? p : fs::absolute(p).string(); }

// Settings shared by the commands that build a pipeline.
struct PipelineFlags {
  std::string config_path;
  std::string templates, training, relations, graph, endpoint, backend, server, fixtures, cache;
  int k = 0;
  int max_combinations = 0;
  bool offline = false;
  bool prune_unused = false;
  int jobs = 0;

  void add_to(CLI::App* app, bool batch) {
    app->add_option("--templates", templates, "Template base file");
    app->add_option("--training", training, "Training dataset (baseline translator index)");
    app->add_option("--relations", relations, "Relation vocabulary file");
    auto* g = app->add_option("--graph", graph, "Answer against a local triple file");
    auto* e = app->add_option("--endpoint", endpoint, "Answer against a SPARQL endpoint URL");
    g->excludes(e);
    app->add_option("--backend", backend, "Translator backend")
        ->check(CLI::IsMember({"baseline", "neural"}));
    app->add_option("--server", server, "Model server URL for the neural backend");
    app->add_option("--fixtures", fixtures, "Linking fixture directory");
    app->add_option("--cache", cache, "Linking cache file");
    app->add_option("--k", k, "Templates retrieved per logical form")->check(CLI::PositiveNumber);
    app->add_option("--max-combinations", max_combinations,
                    "Entity combinations tried per template")
        ->check(CLI::PositiveNumber);
    app->add_flag("--offline", offline, "Link from fixtures only; no network access");
    app->add_flag("--prune-unused", prune_unused,
                  "Report only entities used by the chosen query");
    if (batch) app->add_option("--jobs", jobs, "Questions answered in parallel")->check(CLI::PositiveNumber);
  }

  // Config file merged with flag overrides. Returns the JSON and the
  // directory relative config paths resolve against.
  std::pair<json, std::string> build() const {
    json cfg = json::object();
    std::string base_dir;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw std::invalid_argument("cannot open config file " + config_path);
      try {
        cfg = json::parse(in);
      } catch (const json::exception& e) {
        throw std::invalid_argument("config file " + config_path + ": " + e.what());
      }
      if (!cfg.is_object()) throw std::invalid_argument("config file must hold a JSON object");
      base_dir = fs::absolute(config_path).parent_path().string();
    }
    auto section = [&](const char* key) -> json& {
      if (!cfg.contains(key)) cfg[key] = json::object();
      return cfg[key];
    };
    if (!templates.empty()) cfg["template_base"] = absolute(templates);
    if (!training.empty()) cfg["training"] = absolute(training);
    if (!relations.empty()) cfg["relations"] = absolute(relations);
    if (!graph.empty()) {
      cfg["graph"] = absolute(graph);
      cfg["answer_mode"] = "local";
    }
    if (!endpoint.empty()) {
      section("endpoint")["url"] = endpoint;
      cfg["answer_mode"] = "remote";
    }
    if (!backend.empty()) section("translator")["backend"] = backend;
    if (!server.empty()) section("translator")["server_url"] = server;
    if (!fixtures.empty()) section("linker")["fixtures"] = absolute(fixtures);
    if (!cache.empty()) section("linker")["cache"] = absolute(cache);
    if (offline) section("linker")["mode"] = "offline";
    if (k > 0) cfg["k_templates"] = k;
    if (max_combinations > 0) cfg["max_combinations_per_template"] = max_combinations;
    if (prune_unused) cfg["prune_unused_entities"] = true;
    if (jobs > 0) cfg["jobs"] = jobs;

    if (cfg.contains("linker") && cfg["linker"].value("mode", "") == "offline") {
      if (cfg.value("answer_mode", "local") == "remote")
        throw std::invalid_argument("--offline cannot be combined with a remote endpoint");
      if (cfg.contains("translator") && cfg["translator"].value("backend", "") == "neural")
        throw std::invalid_argument("--offline cannot be combined with the neural backend");
    }
    return {cfg, base_dir};
  }
};

std::string answer_text(const json& r) {
  const auto& a = r["answers"];
  if (a.is_boolean()) return a.get<bool>() ? "true" : "false";
  std::string out;
  for (const auto& v : a) out += (out.empty() ? "" : "\n") + v.get<std::string>();
  return out;
}

void print_trace(const json& r, std::ostream& out) {
  out << "Step I    logical form: " << r["logical_form"].get<std::string>() << "\n";
  for (const auto& alt : r["alternatives"])
    out << "          alternative:  " << alt.get<std::string>() << "\n";
  for (std::size_t f = 0; f < r["forms"].size(); ++f) {
    const auto& form = r["forms"][f];
    if (f > 0) out << "-- alternative " << f << ": " << form["logical_form"].get<std::string>() << "\n";
    out << "Step II   entity linking\n";
    if (form["slots"].empty()) out << "          (no entity slots)\n";
    for (const auto& s : form["slots"]) {
      out << "          <" << s["surface"].get<std::string>() << "> ("
          << s["type"].get<std::string>() << ")";
      if (s.contains("error")) out << " " << s["error"].get<std::string>();
      out << "\n";
      for (const auto& c : s["candidates"])
        out << "            " << c["rank"].get<int>() << ". " << c["iri"].get<std::string>()
            << (c["label"].get<std::string>().empty() ? "" : "  " + c["label"].get<std::string>())
            << "\n";
    }
    out << "Step III  probe: " << form["probe"].get<std::string>() << "\n";
    for (std::size_t t = 0; t < form["templates"].size(); ++t) {
      const auto& tpl = form["templates"][t];
      char score[16];
      std::snprintf(score, sizeof score, "%.4f", tpl["score"].get<double>());
      out << "          " << t + 1 << ". [" << score << "] "
          << tpl["template"].get<std::string>() << "\n";
    }
    if (form.contains("note")) out << "          note: " << form["note"].get<std::string>() << "\n";
  }
  out << "Step IV   candidate queries\n";
  if (r["tried_queries"].empty()) out << "          (none executed)\n";
  for (const auto& t : r["tried_queries"])
    out << "          [" << t["outcome"].get<std::string>() << "] " << t["query"].get<std::string>()
        << "  -> " << t["detail"].get<std::string>() << "\n";
}

void print_result(const json& r, bool verbose, std::ostream& out) {
  if (verbose) print_trace(r, out);
  const auto status = r["status"].get<std::string>();
  if (status == "answered") {
    if (verbose) out << "answer:\n";
    out << answer_text(r) << "\n";
  } else if (status == "no_answer") {
    out << "no answer";
    if (r.contains("message")) out << ": " << r["message"].get<std::string>();
    out << "\n";
  } else {
    out << "error: " << r.value("message", std::string("unknown failure")) << "\n";
  }
}

int cmd_ask(const PipelineFlags& flags, const std::string& question, bool repl, bool verbose) {
  auto [cfg, base_dir] = flags.build();
  nlqx_pipeline* pipeline = nullptr;
  if (auto st = nlqx_pipeline_create(cfg.dump().c_str(), base_dir.c_str(), &pipeline); st != NLQX_OK)
    return report_failure(st);
  std::unique_ptr<nlqx_pipeline, void (*)(nlqx_pipeline*)> guard(pipeline, nlqx_pipeline_destroy);

  auto ask_one = [&](const std::string& id, const std::string& q) -> int {
    Owned result;
    if (auto st = nlqx_pipeline_answer(pipeline, id.c_str(), q.c_str(), &result.p); st != NLQX_OK)
      return report_failure(st);
    print_result(json::parse(result.str()), verbose, std::cout);
    std::cout.flush();
    return kExitOk;
  };

  if (!repl) return ask_one("q1", question);
  const bool interactive = isatty(STDIN_FILENO);
  std::string line;
  int n = 0;
  while (true) {
    if (interactive) std::cout << "> " << std::flush;
    if (!std::getline(std::cin, line)) break;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (int rc = ask_one("q" + std::to_string(++n), line); rc != kExitOk) return rc;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Question answering over the DBLP scholarly knowledge graph"};
  app.require_subcommand(1);
  app.set_version_flag("--version", nlqx_version());
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file; flags override its values")
      ->check(CLI::ExistingFile);

  // build-templates
  auto* build = app.add_subcommand("build-templates", "Build the template base from training queries");
  std::string train, out, relations;
  build->add_option("--train", train, "Training dataset")->required()->check(CLI::ExistingFile);
  build->add_option("--out", out, "Template base file to write")->required();
  build->add_option("--relations", relations, "Relation vocabulary file")->check(CLI::ExistingFile);

  // ask
  auto* ask = app.add_subcommand("ask", "Answer one question, or read questions from stdin");
  PipelineFlags ask_flags;
  std::string question;
  bool repl = false, verbose = false;
  auto* q_opt = ask->add_option("--question", question, "Question text");
  auto* r_opt = ask->add_flag("--repl", repl, "Answer one question per input line");
  q_opt->excludes(r_opt);
  ask->add_flag("-v,--verbose", verbose, "Print the four-step trace");
  ask_flags.add_to(ask, false);

  // batch
  auto* batch = app.add_subcommand("batch", "Answer a question file and write both report files");
  PipelineFlags batch_flags;
  std::string questions, out_answers, out_entities;
  bool resume = false;
  batch->add_option("--questions", questions, "Questions dataset")->required()->check(CLI::ExistingFile);
  batch->add_option("--out-answers", out_answers, "Answers report to write")->required();
  batch->add_option("--out-entities", out_entities, "Entity-linking report to write")->required();
  batch->add_flag("--resume", resume, "Keep answers already present in the output files");
  batch_flags.add_to(batch, true);

  // link
  auto* link = app.add_subcommand("link", "Link one mention to DBLP IRIs");
  std::string surface, type = "author", link_fixtures, link_cache, api;
  bool link_offline = false;
  link->add_option("--mention", surface, "Mention text")->required();
  link->add_option("--type", type, "Entity type")->check(CLI::IsMember({"author", "publication", "venue"}));
  link->add_option("--fixtures", link_fixtures, "Linking fixture directory");
  link->add_option("--cache", link_cache, "Linking cache file");
  link->add_option("--api", api, "Search API base URL");
  link->add_flag("--offline", link_offline, "Read fixtures only");

  // eval
  auto* eval = app.add_subcommand("eval", "Score report files against gold annotations");
  std::string pred_answers, pred_entities, gold, report_json;
  eval->add_option("--pred-answers", pred_answers, "Answers report")->check(CLI::ExistingFile);
  eval->add_option("--pred-entities", pred_entities, "Entity-linking report")->check(CLI::ExistingFile);
  eval->add_option("--gold", gold, "Gold dataset")->required()->check(CLI::ExistingFile);
  eval->add_option("--report-json", report_json, "Write the per-question report here");

  // vocab
  auto* vocab = app.add_subcommand("vocab", "Print the special-token vocabulary, one per line");
  std::string vocab_relations;
  vocab->add_option("--relations", vocab_relations, "Relation vocabulary file")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*build) {
      Owned summary;
      const auto st = nlqx_build_templates(train.c_str(), relations.empty() ? nullptr : relations.c_str(),
                                           out.c_str(), &summary.p);
      if (st != NLQX_OK) return report_failure(st);
      const auto s = json::parse(summary.str());
      if (s["queries"].get<int>() == 0) std::cerr << "warning: no training queries; the base is empty\n";
      for (const auto& skipped : s["skipped"])
        std::cerr << "skipped " << skipped["id"].get<std::string>() << ": "
                  << skipped["reason"].get<std::string>() << "\n";
      std::cout << s["templates"].get<int>() << " templates from " << s["queries"].get<int>()
                << " queries, " << s["skipped"].size() << " skipped\n";
      return kExitOk;
    }

    if (*ask) {
      if (question.empty() && !repl) {
        std::cerr << "error: ask needs --question or --repl\n";
        return kExitUsage;
      }
      ask_flags.config_path = config_path;
      return cmd_ask(ask_flags, question, repl, verbose);
    }

    if (*batch) {
      batch_flags.config_path = config_path;
      auto [cfg, base_dir] = batch_flags.build();
      nlqx_pipeline* pipeline = nullptr;
      if (auto st = nlqx_pipeline_create(cfg.dump().c_str(), base_dir.c_str(), &pipeline); st != NLQX_OK)
        return report_failure(st);
      std::unique_ptr<nlqx_pipeline, void (*)(nlqx_pipeline*)> guard(pipeline, nlqx_pipeline_destroy);
      Owned summary;
      const auto st = nlqx_pipeline_batch(pipeline, questions.c_str(), out_answers.c_str(),
                                          out_entities.c_str(), resume ? 1 : 0, batch_flags.jobs,
                                          &summary.p);
      if (st != NLQX_OK) return report_failure(st);
      const auto s = json::parse(summary.str());
      for (const auto& r : s["results"])
        if (r["status"] != "answered")
          std::cerr << r["id"].get<std::string>() << ": " << r["status"].get<std::string>() << " "
                    << r["message"].get<std::string>() << "\n";
      std::cout << s["questions"].get<int>() << " questions: " << s["answered"].get<int>()
                << " answered, " << s["no_answer"].get<int>() << " without answer, "
                << s["error"].get<int>() << " errors\n";
      return kExitOk;
    }

    if (*link) {
      PipelineFlags flags;
      flags.config_path = config_path;
      auto [cfg, base_dir] = flags.build();
      auto& l = cfg["linker"];
      if (l.is_null()) l = json::object();
      if (!link_fixtures.empty()) l["fixtures"] = absolute(link_fixtures);
      if (!link_cache.empty()) l["cache"] = absolute(link_cache);
      if (!api.empty()) l["api_base_url"] = api;
      if (link_offline) l["mode"] = "offline";
      Owned candidates;
      const auto st = nlqx_link(cfg.dump().c_str(), base_dir.c_str(), surface.c_str(), type.c_str(),
                                &candidates.p);
      if (st != NLQX_OK) return report_failure(st);
      for (const auto& c : json::parse(candidates.str()))
        std::cout << c["rank"].get<int>() << "\t" << c["iri"].get<std::string>() << "\t"
                  << c["label"].get<std::string>() << "\n";
      return kExitOk;
    }

    if (*eval) {
      if (pred_answers.empty() && pred_entities.empty()) {
        std::cerr << "error: eval needs --pred-answers and/or --pred-entities\n";
        return kExitUsage;
      }
      Owned report;
      const auto st = nlqx_evaluate(pred_answers.empty() ? nullptr : pred_answers.c_str(),
                                    pred_entities.empty() ? nullptr : pred_entities.c_str(),
                                    gold.c_str(), report_json.empty() ? nullptr : report_json.c_str(),
                                    &report.p);
      if (st != NLQX_OK) return report_failure(st);
      std::cout << report.str();
      return kExitOk;
    }

    if (*vocab) {
      Owned tokens;
      const auto st =
          nlqx_special_tokens(vocab_relations.empty() ? nullptr : vocab_relations.c_str(), &tokens.p);
      if (st != NLQX_OK) return report_failure(st);
      for (const auto& t : json::parse(tokens.str())) std::cout << t.get<std::string>() << "\n";
      return kExitOk;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
