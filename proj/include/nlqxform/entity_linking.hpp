#pragma once

#include <atomic>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nlqxform/http.hpp"
#include "nlqxform/sparql.hpp"

namespace nlqx {

enum class EntityType { Author, Publication, Venue };

const char* to_string(EntityType type);
/// Path segment of the search API: author, publ or venue.
const char* api_segment(EntityType type);
std::optional<EntityType> entity_type_from_string(std::string_view s);

enum class Slot { Subject, Object };

struct MentionContext {
  sparql::TriplePattern triple;
  Slot slot = Slot::Object;
};

struct EntityMention {
  std::string surface;
  /// Absent when the mention only occurs outside triple patterns.
  std::optional<MentionContext> context;
};

/// One mention per distinct surface, in order of first appearance; the
/// first triple-pattern occurrence supplies the context.
std::vector<EntityMention> extract_mentions(const sparql::QueryAst& logical_form);

struct TypeRule {
  std::string predicate;
  Slot slot = Slot::Object;
  EntityType type = EntityType::Author;
};

/// authoredBy object -> author; authoredBy/title/year subject ->
/// publication; publishedIn object -> venue.
std::vector<TypeRule> default_type_rules();

/// First matching rule wins; author when nothing matches.
EntityType classify_mention_type(const EntityMention& mention,
                                 const std::vector<TypeRule>& rules);

struct EntityCandidate {
  std::string iri;
  std::string label;
  int rank = 1;
  EntityType type = EntityType::Author;

  bool operator==(const EntityCandidate&) const = default;
};

enum class LinkMode { Live, Offline };

struct LinkerConfig {
  std::string api_base_url = "https://dblp.org";
  LinkMode mode = LinkMode::Live;
  std::filesystem::path fixture_path;
  std::filesystem::path cache_path;  // empty: in-memory cache only
  double requests_per_second = 1.0;
  int max_candidates = 5;
  int retries = 2;
  double backoff_seconds = 0.5;
  double timeout_seconds = 10.0;
  /// Live mode only: also store every fetched response as a fixture file.
  bool record_fixtures = false;
  std::vector<TypeRule> type_rules = default_type_rules();

  /// Throws ConfigError.
  void validate() const;
};

/// Trimmed, whitespace-collapsed, ASCII-lowercased surface.
std::string normalize_surface(std::string_view surface);

/// <root>/<type>/<sha256 hex of normalized surface>.json
std::filesystem::path fixture_file(const std::filesystem::path& root,
                                   EntityType type, std::string_view surface);

/// Parses a search API response (result.hits.hit[].info.url). Hits whose
/// URL is outside https://dblp.org/ are skipped. Throws LinkError
/// (MalformedResponse or NoCandidates).
std::vector<EntityCandidate> parse_search_response(std::string_view body,
                                                   EntityType type,
                                                   int max_candidates);

/// Resolves a mention to ranked candidates. Throws LinkError.
class Linker {
 public:
  virtual ~Linker() = default;
  virtual std::vector<EntityCandidate> link(const EntityMention& mention) = 0;
};

/// Shareable across threads. Results are stable for the lifetime of one
/// instance; the cache file persists them across instances.
class EntityLinker : public Linker {
 public:
  explicit EntityLinker(LinkerConfig config);

  std::vector<EntityCandidate> link(const EntityMention& mention) override;
  std::vector<EntityCandidate> link(std::string_view surface, EntityType type);

  /// Search URL for a live lookup.
  std::string request_url(std::string_view surface, EntityType type) const;

  std::size_t network_requests() const { return network_requests_.load(); }
  const LinkerConfig& config() const { return config_; }

 private:
  std::string fetch(std::string_view surface, EntityType type);
  void store(const std::string& key, std::string_view surface, EntityType type,
             const std::string& body);

  LinkerConfig config_;
  std::unique_ptr<http::RateLimiter> limiter_;
  std::mutex mutex_;
  std::map<std::string, std::string> cache_;  // "<type>\t<normalized>" -> body
  std::atomic<std::size_t> network_requests_{0};
};

}  // namespace nlqx
