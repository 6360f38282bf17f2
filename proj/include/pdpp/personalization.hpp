#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "pdpp/common.hpp"
#include "pdpp/similarity.hpp"

namespace pdpp {

inline constexpr std::size_t kDefaultColdStartMinInteractions = 5;

// Per-user genre mass. A multi-genre item spreads one unit of mass evenly over
// its genres, so counts may be fractional.
struct UserProfile {
  UserId user_id;
  std::map<std::string, double> genre_counts;
  std::size_t interaction_count = 0;
};

struct EntropyStats {
  double h_min = 0.0;  // nats
  double h_max = 0.0;  // nats
  std::size_t population_size = 0;
};

struct PersonalizationParams {
  double alpha_0 = 0.6;
  double l = 0.0;  // nats
  std::size_t cold_start_min_interactions = kDefaultColdStartMinInteractions;

  void validate() const;  // throws ArgumentError
};

// Shannon entropy of P(g|u) in nats. nullopt for an empty profile (cold start).
std::optional<double> compute_entropy(const UserProfile& profile);

struct EntropyHistogram {
  double lo = 0.0;
  double width = 0.0;
  std::vector<std::size_t> counts;
};

struct PopulationStats {
  EntropyStats stats;
  EntropyHistogram histogram;
};

// Entropy extrema over profiles with at least `cold_start_min_interactions`
// interactions (and at least one). Throws ConfigError if none qualify.
PopulationStats compute_population_stats(const std::vector<UserProfile>& profiles,
                                         std::size_t cold_start_min_interactions,
                                         std::size_t histogram_bins = 20);

// Parameterized min-max normalization: (H - h_min + l) / (h_max - h_min + l),
// clamped to [0,1]; 1 when the denominator is zero. Throws ArgumentError for l < 0.
double normalize_f(double entropy, const EntropyStats& stats, double l);

struct AlphaDecision {
  double alpha = 0.0;
  bool cold_start = false;
  std::optional<double> entropy;
  std::optional<double> f;
};

AlphaDecision decide_alpha(const UserProfile& profile, const EntropyStats& stats,
                           const PersonalizationParams& params);

double alpha_for_user(const UserProfile& profile, const EntropyStats& stats,
                      const PersonalizationParams& params);

struct InteractionEvent {
  UserId user_id;
  ItemId item_id;
  std::optional<double> ts;
  std::string event;  // "download" or "rating"
  std::optional<double> value;
};

struct DeadLetter {
  InteractionEvent event;
  std::string reason;
};

// Folds one event into `profile`. Returns the dead-letter record (leaving the
// profile untouched) when the item is not in the catalog. Not idempotent:
// replaying an event counts it again.
std::optional<DeadLetter> apply_event(UserProfile& profile, const InteractionEvent& event,
                                      const ItemCatalog& catalog);

// Builds profiles from (user, item) interactions in input order. Unknown
// items are skipped and counted in `unknown_items` when provided.
std::vector<UserProfile> build_profiles(const std::vector<std::pair<UserId, ItemId>>& interactions,
                                        const ItemCatalog& catalog,
                                        std::size_t* unknown_items = nullptr);

// Parses one JSON-lines event. Throws IngestError on malformed input.
InteractionEvent parse_event(const std::string& line);

// Event types accepted when building profiles; empty means all.
bool event_type_accepted(const InteractionEvent& event, const std::set<std::string>& filter);

struct AlphaRecord {
  UserId user_id;
  double entropy = 0.0;
  double f = 0.0;
  double alpha = 0.0;
  std::size_t interaction_count = 0;
};

// Serving-time α lookup table plus the stats and params it was built with.
struct AlphaIndex {
  PersonalizationParams params;
  EntropyStats stats;
  std::unordered_map<UserId, AlphaRecord> records;
  std::map<std::string, std::string> metadata;  // echoed config

  // α_0 for unknown users.
  AlphaDecision lookup(const UserId& user) const;
};

AlphaRecord make_record(const UserProfile& profile, const EntropyStats& stats,
                        const PersonalizationParams& params);

// The offline "α initializer": stats over the population plus one record per
// user with at least one interaction.
AlphaIndex build_alpha_index(const std::vector<UserProfile>& profiles,
                             const PersonalizationParams& params);

// CSV with header `user_id,H,f_u,alpha_u,interaction_count`, preceded by
// `# key=value` metadata lines (params, stats, config echo). Rows are sorted
// by user id.
void write_alpha_snapshot(std::ostream& out, const AlphaIndex& index);

// Inverse of write_alpha_snapshot. Missing stats metadata is recomputed from
// the warm rows; missing params fall back to `defaults`. Throws IngestError on
// any malformed row.
AlphaIndex read_alpha_snapshot(std::istream& in, const PersonalizationParams& defaults);

}  // namespace pdpp
