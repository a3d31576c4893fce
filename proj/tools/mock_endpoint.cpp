// Local SPARQL endpoint over a triple file, for tests and offline demos.
// Prints the bound port on stdout, then serves until killed.

#include <atomic>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <httplib.h>

#include "nlqxform/endpoint.hpp"
#include "nlqxform/errors.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Serve a triple file as a SPARQL endpoint at /sparql"};
  std::string graph_path, host = "127.0.0.1";
  int port = 0;
  app.add_option("--graph", graph_path, "Triple file")->required()->check(CLI::ExistingFile);
  app.add_option("--host", host, "Address to bind");
  app.add_option("--port", port, "Port to bind; 0 picks a free one");
  CLI11_PARSE(app, argc, argv);

  nlqx::Graph graph;
  try {
    graph = nlqx::load_graph(graph_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  std::atomic<long> served{0};
  httplib::Server server;
  auto handle = [&](const httplib::Request& req, httplib::Response& res) {
    ++served;
    if (!req.has_param("query")) {
      res.status = 400;
      res.set_content("missing query parameter", "text/plain");
      return;
    }
    try {
      const auto ast = nlqx::sparql::parse(req.get_param_value("query"));
      res.set_content(nlqx::to_results_json(nlqx::evaluate_local(ast, graph)),
                      "application/sparql-results+json");
    } catch (const std::exception& e) {
      res.status = 400;
      res.set_content(e.what(), "text/plain");
    }
  };
  server.Get("/sparql", handle);
  server.Post("/sparql", handle);
  server.Get("/stats", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content("{\"served\": " + std::to_string(served.load()) + "}", "application/json");
  });

  const int bound = port == 0 ? server.bind_to_any_port(host) : (server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) {
    std::cerr << "error: cannot bind " << host << ":" << port << "\n";
    return 1;
  }
  std::cout << bound << std::endl;
  server.listen_after_bind();
  return 0;
}
