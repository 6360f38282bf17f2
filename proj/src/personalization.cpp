#include "pdpp/personalization.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "pdpp/format.hpp"

namespace pdpp {

void PersonalizationParams::validate() const {
  if (!(alpha_0 >= 0.0 && alpha_0 <= 1.0)) {
    throw ArgumentError("alpha_0 must lie in [0,1], got " + format_double(alpha_0));
  }
  if (!(l >= 0.0) || !std::isfinite(l)) {
    throw ArgumentError("l must be a finite value >= 0, got " + format_double(l));
  }
}

std::optional<double> compute_entropy(const UserProfile& profile) {
  if (profile.interaction_count == 0) return std::nullopt;
  double total = 0.0;
  for (const auto& [genre, count] : profile.genre_counts) total += count;
  if (!(total > 0.0)) return std::nullopt;
  double h = 0.0;
  for (const auto& [genre, count] : profile.genre_counts) {
    if (count <= 0.0) continue;
    const double p = count / total;
    h -= p * std::log(p);
  }
  return std::max(h, 0.0);
}

PopulationStats compute_population_stats(const std::vector<UserProfile>& profiles,
                                         std::size_t cold_start_min_interactions,
                                         std::size_t histogram_bins) {
  const std::size_t threshold = std::max<std::size_t>(cold_start_min_interactions, 1);
  std::vector<double> entropies;
  for (const auto& p : profiles) {
    if (p.interaction_count < threshold) continue;
    if (auto h = compute_entropy(p)) entropies.push_back(*h);
  }
  if (entropies.empty()) {
    throw ConfigError("no user passes the cold-start threshold of " +
                      std::to_string(threshold) + " interactions");
  }
  PopulationStats out;
  const auto [lo, hi] = std::minmax_element(entropies.begin(), entropies.end());
  out.stats = EntropyStats{*lo, *hi, entropies.size()};

  const std::size_t bins = std::max<std::size_t>(histogram_bins, 1);
  out.histogram.lo = *lo;
  out.histogram.width = (*hi - *lo) / static_cast<double>(bins);
  out.histogram.counts.assign(bins, 0);
  for (double h : entropies) {
    std::size_t b = 0;
    if (out.histogram.width > 0.0) {
      b = static_cast<std::size_t>((h - *lo) / out.histogram.width);
      b = std::min(b, bins - 1);
    }
    ++out.histogram.counts[b];
  }
  return out;
}

double normalize_f(double entropy, const EntropyStats& stats, double l) {
  if (!(l >= 0.0)) throw ArgumentError("l must be >= 0, got " + format_double(l));
  const double denom = stats.h_max - stats.h_min + l;
  // 0/0 for a degenerate population with l = 0: behave like plain DPP.
  if (!(denom > 0.0)) return 1.0;
  const double f = (entropy - stats.h_min + l) / denom;
  return std::clamp(f, 0.0, 1.0);
}

AlphaDecision decide_alpha(const UserProfile& profile, const EntropyStats& stats,
                           const PersonalizationParams& params) {
  AlphaDecision d;
  d.entropy = compute_entropy(profile);
  if (!d.entropy || profile.interaction_count < params.cold_start_min_interactions) {
    d.alpha = params.alpha_0;
    d.cold_start = true;
    return d;
  }
  d.f = normalize_f(*d.entropy, stats, params.l);
  d.alpha = *d.f * params.alpha_0;
  return d;
}

double alpha_for_user(const UserProfile& profile, const EntropyStats& stats,
                      const PersonalizationParams& params) {
  return decide_alpha(profile, stats, params).alpha;
}

std::optional<DeadLetter> apply_event(UserProfile& profile, const InteractionEvent& event,
                                      const ItemCatalog& catalog) {
  auto idx = catalog.find(event.item_id);
  if (!idx) return DeadLetter{event, "unknown item " + event.item_id};
  const auto& genres = catalog[*idx].genres;
  // Count distinct non-empty labels so the unit of mass is split exactly.
  std::vector<const std::string*> labels;
  for (const auto& g : genres) {
    if (g.empty()) continue;
    if (std::none_of(labels.begin(), labels.end(), [&](auto* s) { return *s == g; })) {
      labels.push_back(&g);
    }
  }
  const double share = 1.0 / static_cast<double>(labels.size());
  for (const auto* g : labels) profile.genre_counts[*g] += share;
  ++profile.interaction_count;
  return std::nullopt;
}

std::vector<UserProfile> build_profiles(
    const std::vector<std::pair<UserId, ItemId>>& interactions, const ItemCatalog& catalog,
    std::size_t* unknown_items) {
  std::vector<UserProfile> profiles;
  std::unordered_map<UserId, std::size_t> index;
  std::size_t unknown = 0;
  for (const auto& [user, item] : interactions) {
    auto [it, inserted] = index.emplace(user, profiles.size());
    if (inserted) profiles.push_back(UserProfile{user, {}, 0});
    InteractionEvent ev{user, item, std::nullopt, "rating", std::nullopt};
    if (apply_event(profiles[it->second], ev, catalog)) ++unknown;
  }
  if (unknown_items != nullptr) *unknown_items = unknown;
  return profiles;
}

namespace {

std::string json_id(const nlohmann::json& v, const char* field) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number_unsigned()) return std::to_string(v.get<unsigned long long>());
  throw IngestError(std::string("field '") + field + "' must be a string or integer");
}

std::optional<double> json_number(const nlohmann::json& obj, const char* field) {
  auto it = obj.find(field);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_number()) throw IngestError(std::string("field '") + field + "' must be a number");
  return it->get<double>();
}

}  // namespace

InteractionEvent parse_event(const std::string& line) {
  nlohmann::json obj;
  try {
    obj = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw IngestError(std::string("invalid JSON: ") + e.what());
  }
  if (!obj.is_object()) throw IngestError("event must be a JSON object");
  for (const char* field : {"user_id", "item_id", "event"}) {
    if (!obj.contains(field)) throw IngestError(std::string("missing field '") + field + "'");
  }
  InteractionEvent ev;
  ev.user_id = json_id(obj["user_id"], "user_id");
  ev.item_id = json_id(obj["item_id"], "item_id");
  if (!obj["event"].is_string()) throw IngestError("field 'event' must be a string");
  ev.event = obj["event"].get<std::string>();
  if (ev.event != "download" && ev.event != "rating") {
    throw IngestError("field 'event' must be \"download\" or \"rating\", got \"" + ev.event + "\"");
  }
  ev.ts = json_number(obj, "ts");
  ev.value = json_number(obj, "value");
  return ev;
}

bool event_type_accepted(const InteractionEvent& event, const std::set<std::string>& filter) {
  return filter.empty() || filter.count(event.event) > 0;
}

AlphaDecision AlphaIndex::lookup(const UserId& user) const {
  auto it = records.find(user);
  if (it == records.end()) return AlphaDecision{params.alpha_0, true, std::nullopt, std::nullopt};
  const auto& r = it->second;
  AlphaDecision d;
  d.alpha = r.alpha;
  d.cold_start = r.interaction_count < params.cold_start_min_interactions;
  d.entropy = r.entropy;
  d.f = r.f;
  return d;
}

AlphaRecord make_record(const UserProfile& profile, const EntropyStats& stats,
                        const PersonalizationParams& params) {
  const auto d = decide_alpha(profile, stats, params);
  AlphaRecord r;
  r.user_id = profile.user_id;
  r.entropy = d.entropy.value_or(0.0);
  // Cold rows carry f_u = 1 so alpha_u = f_u * alpha_0 holds on every row.
  r.f = d.f.value_or(1.0);
  r.alpha = d.alpha;
  r.interaction_count = profile.interaction_count;
  return r;
}

AlphaIndex build_alpha_index(const std::vector<UserProfile>& profiles,
                             const PersonalizationParams& params) {
  params.validate();
  AlphaIndex index;
  index.params = params;
  index.stats = compute_population_stats(profiles, params.cold_start_min_interactions).stats;
  for (const auto& p : profiles) {
    if (p.interaction_count == 0) continue;
    index.records.emplace(p.user_id, make_record(p, index.stats, params));
  }
  return index;
}

void write_alpha_snapshot(std::ostream& out, const AlphaIndex& index) {
  out << "# alpha_0=" << format_double(index.params.alpha_0) << '\n'
      << "# l=" << format_double(index.params.l) << '\n'
      << "# cold_start_min_interactions=" << index.params.cold_start_min_interactions << '\n'
      << "# h_min=" << format_double(index.stats.h_min) << '\n'
      << "# h_max=" << format_double(index.stats.h_max) << '\n'
      << "# population_size=" << index.stats.population_size << '\n';
  for (const auto& [key, value] : index.metadata) out << "# " << key << '=' << value << '\n';
  out << "user_id,H,f_u,alpha_u,interaction_count\n";

  std::vector<const AlphaRecord*> rows;
  rows.reserve(index.records.size());
  for (const auto& [user, rec] : index.records) rows.push_back(&rec);
  std::sort(rows.begin(), rows.end(),
            [](auto* a, auto* b) { return a->user_id < b->user_id; });
  for (const auto* r : rows) {
    out << r->user_id << ',' << format_double(r->entropy) << ',' << format_double(r->f) << ','
        << format_double(r->alpha) << ',' << r->interaction_count << '\n';
  }
}

AlphaIndex read_alpha_snapshot(std::istream& in, const PersonalizationParams& defaults) {
  AlphaIndex index;
  index.params = defaults;
  bool have_header = false;
  bool have_hmin = false;
  bool have_hmax = false;
  bool have_pop = false;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view view = trim(line);
    if (view.empty()) continue;
    if (view.front() == '#') {
      const auto body = trim(view.substr(1));
      const auto eq = body.find('=');
      if (eq == std::string_view::npos) continue;
      const std::string key(trim(body.substr(0, eq)));
      const std::string_view value = trim(body.substr(eq + 1));
      double d = 0.0;
      std::size_t n = 0;
      auto need_double = [&] {
        if (!parse_double(value, d)) {
          throw IngestError("snapshot line " + std::to_string(lineno) + ": bad value for " + key);
        }
        return d;
      };
      if (key == "alpha_0") {
        index.params.alpha_0 = need_double();
      } else if (key == "l") {
        index.params.l = need_double();
      } else if (key == "h_min") {
        index.stats.h_min = need_double();
        have_hmin = true;
      } else if (key == "h_max") {
        index.stats.h_max = need_double();
        have_hmax = true;
      } else if (key == "cold_start_min_interactions" || key == "population_size") {
        if (!parse_size(value, n)) {
          throw IngestError("snapshot line " + std::to_string(lineno) + ": bad value for " + key);
        }
        if (key == "population_size") {
          index.stats.population_size = n;
          have_pop = true;
        } else {
          index.params.cold_start_min_interactions = n;
        }
      } else {
        index.metadata[key] = std::string(value);
      }
      continue;
    }
    if (!have_header) {
      if (view != "user_id,H,f_u,alpha_u,interaction_count") {
        throw IngestError("snapshot line " + std::to_string(lineno) + ": unexpected header");
      }
      have_header = true;
      continue;
    }
    // The last four fields are numeric; the user id is everything before them.
    std::vector<std::string_view> fields;
    std::string_view rest = view;
    for (int f = 0; f < 4; ++f) {
      const auto comma = rest.rfind(',');
      if (comma == std::string_view::npos) {
        throw IngestError("snapshot line " + std::to_string(lineno) + ": expected 5 fields");
      }
      fields.push_back(rest.substr(comma + 1));
      rest = rest.substr(0, comma);
    }
    AlphaRecord r;
    r.user_id = std::string(rest);
    if (r.user_id.empty() || !parse_double(fields[3], r.entropy) ||
        !parse_double(fields[2], r.f) || !parse_double(fields[1], r.alpha) ||
        !parse_size(fields[0], r.interaction_count) || !std::isfinite(r.alpha) ||
        r.alpha < 0.0 || r.alpha > 1.0) {
      throw IngestError("snapshot line " + std::to_string(lineno) + ": malformed record");
    }
    if (!index.records.emplace(r.user_id, r).second) {
      throw IngestError("snapshot line " + std::to_string(lineno) + ": duplicate user " +
                        r.user_id);
    }
  }
  if (!have_header) throw IngestError("snapshot has no header row");
  try {
    index.params.validate();
  } catch (const ArgumentError& e) {
    throw IngestError(std::string("snapshot parameters invalid: ") + e.what());
  }

  if (!have_hmin || !have_hmax || !have_pop) {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t warm = 0;
    for (const auto& [user, r] : index.records) {
      if (r.interaction_count < std::max<std::size_t>(index.params.cold_start_min_interactions, 1)) {
        continue;
      }
      lo = warm == 0 ? r.entropy : std::min(lo, r.entropy);
      hi = warm == 0 ? r.entropy : std::max(hi, r.entropy);
      ++warm;
    }
    if (!have_hmin) index.stats.h_min = lo;
    if (!have_hmax) index.stats.h_max = hi;
    if (!have_pop) index.stats.population_size = warm;
  }
  if (index.stats.h_min > index.stats.h_max) {
    throw IngestError("snapshot has h_min > h_max");
  }
  return index;
}

}  // namespace pdpp
