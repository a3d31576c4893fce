#include "nlqxform/entity_linking.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>

#include <openssl/evp.h>

#include <json.hpp>

#include "io.hpp"
#include "nlqxform/errors.hpp"

namespace nlqx {

namespace {

constexpr const char* kSchema = "https://dblp.org/rdf/schema#";

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < length; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

std::string cache_key(EntityType type, std::string_view surface) {
  return std::string(to_string(type)) + "\t" + normalize_surface(surface);
}

std::string label_of(const nlohmann::json& info, EntityType type) {
  const char* field = type == EntityType::Author        ? "author"
                      : type == EntityType::Publication ? "title"
                                                        : "venue";
  if (info.contains(field) && info[field].is_string())
    return info[field].get<std::string>();
  return {};
}

}  // namespace

const char* to_string(EntityType type) {
  switch (type) {
    case EntityType::Author: return "author";
    case EntityType::Publication: return "publication";
    case EntityType::Venue: return "venue";
  }
  return "author";
}

const char* api_segment(EntityType type) {
  switch (type) {
    case EntityType::Author: return "author";
    case EntityType::Publication: return "publ";
    case EntityType::Venue: return "venue";
  }
  return "author";
}

std::optional<EntityType> entity_type_from_string(std::string_view s) {
  if (s == "author") return EntityType::Author;
  if (s == "publication" || s == "publ") return EntityType::Publication;
  if (s == "venue") return EntityType::Venue;
  return std::nullopt;
}

std::vector<EntityMention> extract_mentions(const sparql::QueryAst& logical_form) {
  std::vector<EntityMention> mentions;
  auto find = [&](const std::string& surface) {
    return std::find_if(mentions.begin(), mentions.end(),
                        [&](const EntityMention& m) { return m.surface == surface; });
  };
  // Walk terms in canonical order, remembering the enclosing triple.
  std::function<void(const sparql::Group&)> walk = [&](const sparql::Group& group) {
    for (const auto& element : group) {
      if (auto* tp = std::get_if<sparql::TriplePattern>(&element.node)) {
        for (auto [term, slot] : {std::pair{&tp->subject, Slot::Subject},
                                  std::pair{&tp->object, Slot::Object}}) {
          if (auto* m = std::get_if<sparql::Mention>(term)) {
            auto it = find(m->surface);
            if (it == mentions.end())
              mentions.push_back({m->surface, MentionContext{*tp, slot}});
            else if (!it->context)
              it->context = MentionContext{*tp, slot};
          }
        }
        continue;
      }
      sparql::Group single{element};
      if (auto* u = std::get_if<sparql::Union>(&element.node)) {
        walk(u->left);
        walk(u->right);
      } else if (auto* f = std::get_if<sparql::Filter>(&element.node);
                 f && std::holds_alternative<sparql::NotExists>(f->condition)) {
        walk(std::get<sparql::NotExists>(f->condition).group);
      } else {
        sparql::for_each_term(single, [&](const sparql::Term& term) {
          if (auto* m = std::get_if<sparql::Mention>(&term))
            if (find(m->surface) == mentions.end())
              mentions.push_back({m->surface, std::nullopt});
        });
      }
    }
  };
  walk(logical_form.where);
  return mentions;
}

std::vector<TypeRule> default_type_rules() {
  const std::string s = kSchema;
  return {
      {s + "authoredBy", Slot::Object, EntityType::Author},
      {s + "authoredBy", Slot::Subject, EntityType::Publication},
      {s + "title", Slot::Subject, EntityType::Publication},
      {s + "yearOfPublication", Slot::Subject, EntityType::Publication},
      {s + "publishedIn", Slot::Object, EntityType::Venue},
      {s + "publishedIn", Slot::Subject, EntityType::Publication},
      {s + "numberOfCreators", Slot::Subject, EntityType::Publication},
      {s + "bibtexType", Slot::Subject, EntityType::Publication},
      {s + "doi", Slot::Subject, EntityType::Publication},
  };
}

EntityType classify_mention_type(const EntityMention& mention,
                                 const std::vector<TypeRule>& rules) {
  if (!mention.context) return EntityType::Author;
  const auto& ctx = *mention.context;
  for (const auto& rule : rules)
    if (rule.slot == ctx.slot && rule.predicate == ctx.triple.predicate.value)
      return rule.type;
  return EntityType::Author;
}

void LinkerConfig::validate() const {
  if (mode == LinkMode::Offline) {
    if (fixture_path.empty() || !std::filesystem::is_directory(fixture_path))
      throw ConfigError("offline linking needs an existing fixture directory, got '" +
                        fixture_path.string() + "'");
  } else {
    http::split_url(api_base_url);
  }
  if (!(requests_per_second > 0))
    throw ConfigError("requests_per_second must be positive");
  if (max_candidates < 1) throw ConfigError("max_candidates must be >= 1");
  if (retries < 0) throw ConfigError("retries must be >= 0");
  if (!(timeout_seconds > 0)) throw ConfigError("timeout must be positive");
}

std::string normalize_surface(std::string_view surface) {
  std::string out;
  bool pending = false;
  for (char c : surface) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending = !out.empty();
      continue;
    }
    if (pending) out.push_back(' ');
    pending = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

std::filesystem::path fixture_file(const std::filesystem::path& root,
                                   EntityType type, std::string_view surface) {
  return root / to_string(type) / (sha256_hex(normalize_surface(surface)) + ".json");
}

std::vector<EntityCandidate> parse_search_response(std::string_view body,
                                                   EntityType type,
                                                   int max_candidates) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw LinkError(LinkError::Kind::MalformedResponse,
                    std::string("search response is not JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("result") || !doc["result"].is_object() ||
      !doc["result"].contains("hits") || !doc["result"]["hits"].is_object())
    throw LinkError(LinkError::Kind::MalformedResponse,
                    "search response lacks result.hits");
  const auto& hits = doc["result"]["hits"];
  std::vector<EntityCandidate> out;
  if (hits.contains("hit")) {
    const auto& list = hits["hit"];
    if (!list.is_array())
      throw LinkError(LinkError::Kind::MalformedResponse, "result.hits.hit is not a list");
    for (const auto& hit : list) {
      if (!hit.is_object() || !hit.contains("info") || !hit["info"].is_object() ||
          !hit["info"].contains("url") || !hit["info"]["url"].is_string())
        throw LinkError(LinkError::Kind::MalformedResponse, "hit without info.url");
      auto url = hit["info"]["url"].get<std::string>();
      if (url.rfind("https://dblp.org/", 0) != 0) continue;
      EntityCandidate c;
      c.iri = std::move(url);
      c.label = label_of(hit["info"], type);
      c.rank = static_cast<int>(out.size()) + 1;
      c.type = type;
      out.push_back(std::move(c));
      if (static_cast<int>(out.size()) >= max_candidates) break;
    }
  }
  if (out.empty())
    throw LinkError(LinkError::Kind::NoCandidates, "no candidates");
  return out;
}

// ---------------------------------------------------------------------------

EntityLinker::EntityLinker(LinkerConfig config) : config_(std::move(config)) {
  config_.validate();
  limiter_ = std::make_unique<http::RateLimiter>(config_.requests_per_second);
  if (!config_.cache_path.empty() && std::filesystem::exists(config_.cache_path)) {
    std::ifstream in(config_.cache_path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      try {
        auto j = nlohmann::json::parse(line);
        auto type = entity_type_from_string(j.at("type").get<std::string>());
        if (!type) throw std::runtime_error("unknown entity type");
        cache_[cache_key(*type, j.at("surface").get<std::string>())] =
            j.at("response").dump();
      } catch (const std::exception& e) {
        throw FormatError(config_.cache_path.string(), lineno, e.what());
      }
    }
  }
}

std::string EntityLinker::request_url(std::string_view surface,
                                      EntityType type) const {
  auto base = config_.api_base_url;
  while (!base.empty() && base.back() == '/') base.pop_back();
  return base + "/search/" + api_segment(type) + "/api?q=" +
         http::url_encode(surface) + "&format=json";
}

std::vector<EntityCandidate> EntityLinker::link(const EntityMention& mention) {
  return link(mention.surface, classify_mention_type(mention, config_.type_rules));
}

std::vector<EntityCandidate> EntityLinker::link(std::string_view surface,
                                                EntityType type) {
  if (normalize_surface(surface).empty())
    throw LinkError(LinkError::Kind::NoCandidates, "empty mention");
  const auto key = cache_key(type, surface);
  std::optional<std::string> body;
  {
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(key); it != cache_.end()) body = it->second;
  }
  if (!body) {
    if (config_.mode == LinkMode::Offline) {
      const auto path = fixture_file(config_.fixture_path, type, surface);
      body = io::read_file(path);
      if (!body)
        throw LinkError(LinkError::Kind::FixtureMissing,
                        "no fixture for " + std::string(to_string(type)) + " '" +
                            std::string(surface) + "' (" + path.string() + ")");
      std::lock_guard lock(mutex_);
      cache_.emplace(key, *body);
    } else {
      body = fetch(surface, type);
      // Validate before caching so malformed responses are not persisted.
      try {
        parse_search_response(*body, type, config_.max_candidates);
      } catch (const LinkError& e) {
        if (e.kind() != LinkError::Kind::NoCandidates) throw;
      }
      store(key, surface, type, *body);
    }
  }
  return parse_search_response(*body, type, config_.max_candidates);
}

std::string EntityLinker::fetch(std::string_view surface, EntityType type) {
  http::Request request;
  request.url = request_url(surface, type);
  request.headers["Accept"] = "application/json";
  request.timeout = std::chrono::milliseconds(
      static_cast<long>(config_.timeout_seconds * 1000));
  std::string last_error;
  for (int attempt = 0; attempt <= config_.retries; ++attempt) {
    if (attempt > 0)
      std::this_thread::sleep_for(std::chrono::duration<double>(
          config_.backoff_seconds * static_cast<double>(1 << (attempt - 1))));
    limiter_->acquire();
    ++network_requests_;
    auto outcome = http::perform(request);
    if (outcome.failure != http::Failure::None) {
      last_error = outcome.error;
      continue;
    }
    const int status = outcome.response.status;
    if (status == 200) return std::move(outcome.response.body);
    last_error = "HTTP " + std::to_string(status);
    if (status != 429 && status < 500) break;
  }
  throw LinkError(LinkError::Kind::Network,
                  "search request failed for '" + std::string(surface) + "': " + last_error);
}

void EntityLinker::store(const std::string& key, std::string_view surface,
                         EntityType type, const std::string& body) {
  std::lock_guard lock(mutex_);
  if (!cache_.emplace(key, body).second) return;
  if (!config_.cache_path.empty()) {
    nlohmann::ordered_json j;
    j["type"] = to_string(type);
    j["surface"] = normalize_surface(surface);
    try {
      j["response"] = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception&) {
      return;
    }
    std::ofstream out(config_.cache_path, std::ios::app);
    out << j.dump() << '\n';
  }
  if (config_.record_fixtures && !config_.fixture_path.empty()) {
    const auto path = fixture_file(config_.fixture_path, type, surface);
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << body;
  }
}

}  // namespace nlqx
