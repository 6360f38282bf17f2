#include "pdpp/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>
#include <unordered_map>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "pdpp/dpp.hpp"
#include "pdpp/format.hpp"
#include "pdpp/io.hpp"
#include "pdpp/kernel.hpp"

namespace pdpp {
namespace {

double round12(double v) { return std::round(v * 1e12) / 1e12; }

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(a[i])) !=
        std::tolower(static_cast<unsigned char>(b[i]))) {
      return false;
    }
  }
  return true;
}

double number_or_throw(std::string_view text, std::string_view context) {
  double v = 0.0;
  if (!parse_double(text, v)) {
    throw ConfigError("bad number '" + std::string(text) + "' in " + std::string(context));
  }
  return v;
}

// Strips an optional `name=` prefix when the name is one of `names`.
std::string_view strip_key(std::string_view field, std::initializer_list<std::string_view> names,
                           std::string_view context) {
  field = trim(field);
  const auto eq = field.find('=');
  if (eq == std::string_view::npos) return field;
  const auto key = trim(field.substr(0, eq));
  for (auto n : names) {
    if (iequals(key, n)) return trim(field.substr(eq + 1));
  }
  throw ConfigError("unknown parameter '" + std::string(key) + "' in " + std::string(context));
}

// Unbiased integer in [0, n) from a 64-bit engine, independent of the
// standard library's distribution implementation.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x = 0;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

std::optional<double> mean_pairwise_distance(const std::vector<ItemId>& list, std::size_t k,
                                             const auto& similarity) {
  if (k < 2) return std::nullopt;
  if (list.size() < k) throw ArgumentError("recommendation list shorter than k");
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a + 1; b < k; ++b) {
      sum += 1.0 - similarity(list[a], list[b]);
      ++pairs;
    }
  }
  return sum / static_cast<double>(pairs);
}

std::optional<double> ild_generic(const RecommendationLists& recs, std::size_t k,
                                  const auto& similarity) {
  if (k < 2) return std::nullopt;
  double sum = 0.0;
  std::size_t users = 0;
  for (const auto& [user, list] : recs) {
    sum += *mean_pairwise_distance(list, k, similarity);
    ++users;
  }
  if (users == 0) return std::nullopt;
  return sum / static_cast<double>(users);
}

std::string iso_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

}  // namespace

std::string ModelSpec::label() const {
  switch (kind) {
    case Kind::Base:
      return "BASE";
    case Kind::Dpp:
      return "DPP(a=" + format_double(alpha) + ")";
    case Kind::Pdpp:
      return "pDPP(l=" + (l ? format_double(*l) : std::string("hmin")) +
             ",a0=" + format_double(alpha) + ")";
  }
  return {};
}

ModelSpec parse_model_spec(std::string_view text) {
  const auto t = trim(text);
  if (iequals(t, "BASE")) return ModelSpec::base();
  const auto open = t.find('(');
  if (open == std::string_view::npos || t.back() != ')') {
    throw ConfigError("cannot parse model '" + std::string(t) + "'");
  }
  const auto name = trim(t.substr(0, open));
  const auto args = t.substr(open + 1, t.size() - open - 2);
  if (iequals(name, "DPP")) {
    const double a = number_or_throw(strip_key(args, {"a", "alpha"}, t), t);
    if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("DPP alpha must lie in [0,1]");
    return ModelSpec::dpp(a);
  }
  if (iequals(name, "pDPP")) {
    const auto parts = split(args, ",");
    if (parts.size() != 2) throw ConfigError("pDPP needs (l, a0): " + std::string(t));
    const auto lv = strip_key(parts[0], {"l"}, t);
    std::optional<double> l;
    if (!iequals(lv, "hmin") && !iequals(lv, "h_min")) {
      l = number_or_throw(lv, t);
      if (!(*l >= 0.0)) throw ConfigError("pDPP l must be >= 0");
    }
    const double a0 = number_or_throw(strip_key(parts[1], {"a0", "alpha_0", "alpha0"}, t), t);
    if (!(a0 >= 0.0 && a0 <= 1.0)) throw ConfigError("pDPP alpha_0 must lie in [0,1]");
    return ModelSpec::pdpp(l, a0);
  }
  throw ConfigError("unknown model kind '" + std::string(name) + "'");
}

std::vector<ModelSpec> parse_grid(std::string_view text) {
  std::vector<ModelSpec> grid;
  for (auto entry : split(text, ";")) {
    entry = trim(entry);
    if (entry.empty()) continue;
    const auto dots = entry.find("..");
    if (dots != std::string_view::npos) {
      // DPP(a=lo..hi): steps of `lo` from lo to hi inclusive.
      const auto open = entry.find('(');
      if (open == std::string_view::npos || entry.back() != ')' ||
          !iequals(trim(entry.substr(0, open)), "DPP")) {
        throw ConfigError("ranges are supported for DPP only: " + std::string(entry));
      }
      const auto range = strip_key(entry.substr(open + 1, entry.size() - open - 2),
                                   {"a", "alpha"}, entry);
      const auto d = range.find("..");
      const double lo = number_or_throw(range.substr(0, d), entry);
      const double hi = number_or_throw(range.substr(d + 2), entry);
      if (!(lo > 0.0) || hi < lo || hi > 1.0) throw ConfigError("bad DPP range " + std::string(entry));
      for (int i = 1; round12(lo * i) <= hi + 1e-12; ++i) grid.push_back(ModelSpec::dpp(round12(lo * i)));
      continue;
    }
    grid.push_back(parse_model_spec(entry));
  }
  if (grid.empty()) throw ConfigError("model grid is empty");
  return grid;
}

std::vector<ModelSpec> default_grid() {
  auto grid = parse_grid("BASE;DPP(a=0.01..0.1)");
  grid.push_back(ModelSpec::pdpp(std::nullopt, 0.04));
  grid.push_back(ModelSpec::pdpp(0.0, 0.04));
  return grid;
}

void ExperimentConfig::validate() const {
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw ConfigError("split_ratio must lie in (0,1)");
  if (k < 1) throw ConfigError("k must be >= 1");
  if (grid.empty()) throw ConfigError("model grid is empty");
  if (runs < 1) throw ConfigError("runs must be >= 1");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (neighborhood < 1) throw ConfigError("neighborhood must be >= 1");
  if (impressions_log.empty() != downloads_log.empty()) {
    throw ConfigError("impressions_log and downloads_log must be given together");
  }
}

std::vector<std::pair<std::string, std::string>> ExperimentConfig::to_key_values() const {
  std::string grid_text;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (i > 0) grid_text += ';';
    grid_text += grid[i].label();
  }
  return {
      {"ratings", ratings_path},
      {"movies", movies_path},
      {"output_dir", output_dir},
      {"split_ratio", format_double(split_ratio)},
      {"positivity_threshold", format_double(positivity_threshold)},
      {"k", std::to_string(k)},
      {"grid", grid_text},
      {"seed", std::to_string(seed)},
      {"runs", std::to_string(runs)},
      {"neighborhood", std::to_string(neighborhood)},
      {"min_item_raters", std::to_string(min_item_raters)},
      {"min_user_ratings", std::to_string(min_user_ratings)},
      {"cold_start_min_interactions", std::to_string(cold_start_min_interactions)},
      {"workers", std::to_string(workers)},
      {"impressions_log", impressions_log},
      {"downloads_log", downloads_log},
      {"logs_model", logs_model},
  };
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  auto need_size = [&] {
    std::size_t n = 0;
    if (!parse_size(value, n)) throw ConfigError("bad integer for " + key + ": " + value);
    return n;
  };
  if (key == "ratings" || key == "dataset" || key == "ratings_path") {
    ratings_path = value;
  } else if (key == "movies" || key == "catalog" || key == "movies_path") {
    movies_path = value;
  } else if (key == "output_dir") {
    output_dir = value;
  } else if (key == "split_ratio") {
    split_ratio = number_or_throw(value, key);
  } else if (key == "positivity_threshold") {
    positivity_threshold = number_or_throw(value, key);
  } else if (key == "k") {
    k = need_size();
  } else if (key == "grid") {
    grid = parse_grid(value);
  } else if (key == "seed") {
    std::uint64_t s = 0;
    std::size_t n = 0;
    if (!parse_size(value, n)) throw ConfigError("bad seed: " + value);
    s = n;
    seed = s;
  } else if (key == "runs") {
    runs = need_size();
  } else if (key == "neighborhood") {
    neighborhood = need_size();
  } else if (key == "min_item_raters") {
    min_item_raters = need_size();
  } else if (key == "min_user_ratings") {
    min_user_ratings = need_size();
  } else if (key == "cold_start_min_interactions") {
    cold_start_min_interactions = need_size();
  } else if (key == "workers") {
    workers = need_size();
  } else if (key == "impressions_log") {
    impressions_log = value;
  } else if (key == "downloads_log") {
    downloads_log = value;
  } else if (key == "logs_model") {
    logs_model = value;
  } else if (key == "keep_lists") {
    keep_lists = value == "1" || value == "true";
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    cfg.set(std::string(trim(view.substr(0, eq))), std::string(trim(view.substr(eq + 1))));
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig read_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return parse_config(in);
}

InteractionDataset filter_min_counts(const InteractionDataset& raw, std::size_t min_item_raters,
                                     std::size_t min_user_ratings) {
  InteractionDataset cur = raw;
  while (true) {
    std::unordered_map<ItemId, std::unordered_set<UserId>> raters;
    for (const auto& r : cur.records) raters[r.item].insert(r.user);
    std::unordered_map<UserId, std::size_t> per_user;
    std::vector<Interaction> kept;
    kept.reserve(cur.records.size());
    for (const auto& r : cur.records) {
      if (raters[r.item].size() >= min_item_raters) kept.push_back(r);
    }
    for (const auto& r : kept) ++per_user[r.user];
    std::vector<Interaction> next;
    next.reserve(kept.size());
    for (const auto& r : kept) {
      if (per_user[r.user] >= min_user_ratings) next.push_back(r);
    }
    const bool stable = next.size() == cur.records.size();
    cur.records = std::move(next);
    if (stable) return cur;
  }
}

Split preprocess_split(const InteractionDataset& raw, const ExperimentConfig& config,
                       std::uint64_t seed) {
  if (raw.empty()) throw ConfigError("dataset is empty");
  InteractionDataset filtered =
      filter_min_counts(raw, config.min_item_raters, config.min_user_ratings);
  if (filtered.empty()) {
    throw ConfigError("filtering (items >= " + std::to_string(config.min_item_raters) +
                      " raters, users >= " + std::to_string(config.min_user_ratings) +
                      " ratings) left no data");
  }
  filtered.positivity_threshold = config.positivity_threshold;
  filtered.sort_by_user_time();

  const std::size_t n = filtered.records.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    std::swap(order[i - 1], order[bounded(rng, i)]);
  }
  const auto n_train = static_cast<std::size_t>(std::llround(config.split_ratio * static_cast<double>(n)));
  std::vector<char> in_train(n, 0);
  for (std::size_t i = 0; i < n_train; ++i) in_train[order[i]] = 1;

  Split split;
  split.train.positivity_threshold = config.positivity_threshold;
  split.test.positivity_threshold = config.positivity_threshold;
  std::unordered_set<UserId> users;
  std::unordered_set<ItemId> items;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = filtered.records[i];
    (in_train[i] ? split.train : split.test).records.push_back(r);
    users.insert(r.user);
    items.insert(r.item);
  }
  split.users = users.size();
  split.items = items.size();
  return split;
}

PrecisionResult precision_at_k(const RecommendationLists& recs, const TruthSets& truth,
                               std::size_t k) {
  if (k < 1) throw ArgumentError("k must be >= 1");
  PrecisionResult out;
  std::size_t hits = 0;
  for (const auto& [user, list] : recs) {
    auto t = truth.find(user);
    if (t == truth.end()) {
      ++out.excluded;
      continue;
    }
    if (list.size() < k) {
      throw ArgumentError("recommendation list for user " + user + " is shorter than k");
    }
    for (std::size_t i = 0; i < k; ++i) hits += t->second.count(list[i]);
    ++out.users;
  }
  if (out.users > 0) {
    out.value = static_cast<double>(hits) / static_cast<double>(out.users * k);
  }
  return out;
}

std::optional<double> ild_at_k(const RecommendationLists& recs, const SimilarityMatrix& s,
                               std::size_t k) {
  return ild_generic(recs, k, [&](const ItemId& a, const ItemId& b) {
    auto i = s.find(a);
    auto j = s.find(b);
    if (!i || !j) throw ArgumentError("item missing from similarity matrix: " + (i ? b : a));
    return s.at(*i, *j);
  });
}

std::optional<double> ild_at_k(const RecommendationLists& recs, const GenreIndex& s,
                               std::size_t k) {
  return ild_generic(recs, k, [&](const ItemId& a, const ItemId& b) {
    const GenreSet* x = s.find(a);
    const GenreSet* y = s.find(b);
    if (x == nullptr || y == nullptr) {
      throw ArgumentError("item missing from genre index: " + (x ? b : a));
    }
    return a == b ? 1.0 : jaccard(*x, *y);
  });
}

std::vector<double> avg_standardized(
    const std::vector<std::pair<double, std::optional<double>>>& rows) {
  if (rows.size() < 2) throw ArgumentError("standardized average needs at least two models");
  double p_lo = rows[0].first;
  double p_hi = rows[0].first;
  std::optional<double> i_lo;
  std::optional<double> i_hi;
  for (const auto& [p, ild] : rows) {
    p_lo = std::min(p_lo, p);
    p_hi = std::max(p_hi, p);
    if (ild) {
      i_lo = i_lo ? std::min(*i_lo, *ild) : *ild;
      i_hi = i_hi ? std::max(*i_hi, *ild) : *ild;
    }
  }
  auto norm = [](double v, double lo, double hi) { return hi > lo ? (v - lo) / (hi - lo) : 0.5; };
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& [p, ild] : rows) {
    const double pn = norm(p, p_lo, p_hi);
    out.push_back(ild ? (pn + norm(*ild, *i_lo, *i_hi)) / 2.0 : pn);
  }
  return out;
}

LogMetrics log_metrics(const std::vector<std::pair<UserId, ItemId>>& impressions,
                       const std::vector<std::pair<UserId, ItemId>>& downloads) {
  std::unordered_set<std::string> shown;
  std::unordered_set<UserId> users;
  for (const auto& [u, i] : impressions) {
    shown.insert(u + '\x1f' + i);
    users.insert(u);
  }
  for (const auto& [u, i] : downloads) {
    if (shown.count(u + '\x1f' + i) == 0) {
      throw ArgumentError("download (" + u + ", " + i + ") has no matching impression");
    }
  }
  LogMetrics out;
  if (impressions.empty()) return out;
  out.download_ratio =
      static_cast<double>(downloads.size()) / static_cast<double>(impressions.size());
  out.average_downloads = static_cast<double>(downloads.size()) / static_cast<double>(users.size());
  return out;
}

std::string dataset_hash(const InteractionDataset& data) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ULL;
    }
  };
  for (const auto& r : data.records) {
    mix(r.user);
    mix("\x1f");
    mix(r.item);
    mix("\x1f");
    mix(r.rating ? format_double(*r.rating) : std::string());
    mix("\x1f");
    mix(format_double(r.timestamp));
    mix("\n");
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

EvalReport run_experiment(const ExperimentConfig& config) {
  config.validate();
  if (config.ratings_path.empty() || config.movies_path.empty()) {
    throw ConfigError("[load] ratings and movies paths are required");
  }
  MovieLensData data;
  try {
    data = parse_movielens(config.ratings_path, config.movies_path);
  } catch (const Error& e) {
    throw IngestError(std::string("[load] ") + e.what());
  }
  return run_experiment(config, data.ratings, data.catalog);
}

namespace {

struct RunResult {
  std::vector<double> precision;
  std::vector<std::optional<double>> ild;
  std::vector<RecommendationLists> lists;
  EntropyStats stats;
  EntropyHistogram histogram;
  std::size_t users = 0;
  std::size_t items = 0;
  std::size_t train = 0;
  std::size_t test = 0;
};

template <typename F>
auto stage(const char* name, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(std::string("[") + name + "] " + e.what());
  }
}

RunResult run_once(const ExperimentConfig& config, const InteractionDataset& raw,
                   const std::shared_ptr<const GenreIndex>& genres, std::uint64_t seed) {
  const Split split = stage("preprocess", [&] { return preprocess_split(raw, config, seed); });
  const ItemCFModel cf = stage("fit", [&] { return fit_item_cf(split.train, config.neighborhood); });

  // Candidate universe: every surviving item that the catalog knows, id order.
  std::vector<ItemId> universe;
  {
    std::unordered_set<ItemId> seen;
    std::size_t unknown = 0;
    for (const auto* part : {&split.train, &split.test}) {
      for (const auto& r : part->records) {
        if (!seen.insert(r.item).second) continue;
        if (genres->find(r.item) == nullptr) {
          ++unknown;
          continue;
        }
        universe.push_back(r.item);
      }
    }
    if (unknown > 0) spdlog::warn("{} rated item(s) missing from the catalog were dropped", unknown);
    std::sort(universe.begin(), universe.end());
  }

  std::unordered_map<UserId, std::unordered_set<ItemId>> history;
  std::vector<std::pair<UserId, ItemId>> train_pairs;
  train_pairs.reserve(split.train.records.size());
  for (const auto& r : split.train.records) {
    train_pairs.emplace_back(r.user, r.item);
    if (split.train.is_positive(r)) history[r.user].insert(r.item);
  }
  TruthSets truth;
  for (const auto& r : split.test.records) {
    if (split.test.is_positive(r)) truth[r.user].insert(r.item);
  }

  const auto profiles = build_profiles(train_pairs, genres->catalog());
  std::unordered_map<UserId, const UserProfile*> profile_of;
  for (const auto& p : profiles) profile_of.emplace(p.user_id, &p);
  const auto population = stage("personalize", [&] {
    return compute_population_stats(profiles, config.cold_start_min_interactions);
  });

  std::vector<UserId> users;
  users.reserve(truth.size());
  for (const auto& [u, t] : truth) users.push_back(u);

  const std::size_t models = config.grid.size();
  const std::size_t k = config.k;
  std::vector<std::vector<std::vector<ItemId>>> results(
      users.size(), std::vector<std::vector<ItemId>>(models));

  const UserProfile empty_profile;
  const std::unordered_set<ItemId> no_history;
  auto work = [&](std::size_t u) {
    const auto& user = users[u];
    auto h = history.find(user);
    const auto& hist = h == history.end() ? no_history : h->second;
    auto scores = std::make_shared<const RelevanceScores>(score_candidates(cf, hist, universe));
    if (scores->size() < k) {
      throw ConfigError("user " + user + " has fewer than k candidates");
    }
    auto sim = std::make_shared<const GenreSimilarity>(genres, scores->ids);
    auto p = profile_of.find(user);
    const UserProfile& profile = p == profile_of.end() ? empty_profile : *p->second;

    for (std::size_t m = 0; m < models; ++m) {
      const auto& spec = config.grid[m];
      auto& out = results[u][m];
      if (spec.kind == ModelSpec::Kind::Base) {
        std::vector<std::size_t> idx(scores->size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                          [&](std::size_t a, std::size_t b) {
                            if (scores->q[a] != scores->q[b]) return scores->q[a] > scores->q[b];
                            return a < b;
                          });
        for (std::size_t i = 0; i < k; ++i) out.push_back(scores->ids[idx[i]]);
        continue;
      }
      double alpha = spec.alpha;
      if (spec.kind == ModelSpec::Kind::Pdpp) {
        PersonalizationParams params;
        params.alpha_0 = spec.alpha;
        params.l = spec.l.value_or(population.stats.h_min);
        params.cold_start_min_interactions = config.cold_start_min_interactions;
        alpha = alpha_for_user(profile, population.stats, params);
      }
      out = fast_greedy_map(KernelSpec(scores, sim, alpha), k).items;
    }
  };

  stage("rerank", [&] {
    const std::size_t workers = std::min(config.workers, std::max<std::size_t>(users.size(), 1));
    if (workers <= 1) {
      for (std::size_t u = 0; u < users.size(); ++u) work(u);
      return 0;
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t u = w; u < users.size(); u += workers) work(u);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
    return 0;
  });

  RunResult out;
  out.stats = population.stats;
  out.histogram = population.histogram;
  out.users = users.size();
  out.items = universe.size();
  out.train = split.train.records.size();
  out.test = split.test.records.size();
  stage("metrics", [&] {
    for (std::size_t m = 0; m < models; ++m) {
      RecommendationLists lists;
      for (std::size_t u = 0; u < users.size(); ++u) lists.emplace(users[u], std::move(results[u][m]));
      out.precision.push_back(precision_at_k(lists, truth, k).value);
      out.ild.push_back(ild_at_k(lists, *genres, k));
      if (config.keep_lists) out.lists.push_back(std::move(lists));
    }
    return 0;
  });
  return out;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

EvalReport run_experiment(const ExperimentConfig& config, const InteractionDataset& raw,
                          const ItemCatalog& catalog) {
  config.validate();
  auto genres = std::make_shared<const GenreIndex>(catalog);

  std::vector<RunResult> runs;
  for (std::size_t r = 0; r < config.runs; ++r) {
    runs.push_back(run_once(config, raw, genres, config.seed + r));
  }

  EvalReport report;
  report.generated_at = iso_now();
  report.metadata = config.to_key_values();
  report.metadata.emplace_back("dataset_hash", dataset_hash(raw));
  report.metadata.emplace_back("raw_records", std::to_string(raw.records.size()));
  report.metadata.emplace_back("train_records", std::to_string(runs.back().train));
  report.metadata.emplace_back("test_records", std::to_string(runs.back().test));
  report.metadata.emplace_back("evaluated_users", std::to_string(runs.back().users));
  report.metadata.emplace_back("candidate_items", std::to_string(runs.back().items));
  report.entropy_stats = runs.back().stats;
  report.entropy_histogram = runs.back().histogram;

  std::vector<std::pair<double, std::optional<double>>> summary;
  for (std::size_t m = 0; m < config.grid.size(); ++m) {
    std::vector<double> ps;
    std::vector<double> is;
    for (const auto& run : runs) {
      ps.push_back(run.precision[m]);
      if (run.ild[m]) is.push_back(*run.ild[m]);
    }
    ReportRow row;
    row.model = config.grid[m].label();
    row.precision = mean_of(ps);
    row.precision_std = std_of(ps);
    if (!is.empty()) {
      row.ild = mean_of(is);
      row.ild_std = std_of(is);
    }
    summary.emplace_back(row.precision, row.ild);
    report.rows.push_back(row);
  }
  if (report.rows.size() >= 2) {
    const auto avgs = avg_standardized(summary);
    for (std::size_t m = 0; m < avgs.size(); ++m) report.rows[m].avg = avgs[m];
  }

  if (!config.impressions_log.empty()) {
    const auto online = stage("logs", [&] {
      return log_metrics(read_pair_log(config.impressions_log),
                         read_pair_log(config.downloads_log));
    });
    report.online = online;
    for (auto& row : report.rows) {
      if (row.model == config.logs_model) {
        row.download_ratio = online.download_ratio;
        row.average_downloads = online.average_downloads;
      }
    }
  }
  if (config.keep_lists) report.lists = std::move(runs.back().lists);
  return report;
}

namespace {

nlohmann::json opt_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::string opt_csv(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

void write_metadata_comments(std::ostream& out, const EvalReport& report) {
  for (const auto& [key, value] : report.metadata) out << "# " << key << '=' << value << '\n';
  out << "# generated_at=" << report.generated_at << '\n';
}

}  // namespace

void write_report_json(std::ostream& out, const EvalReport& report) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json meta = nlohmann::ordered_json::object();
  for (const auto& [key, value] : report.metadata) meta[key] = value;
  j["config"] = meta;
  j["generated_at"] = report.generated_at;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& r : report.rows) {
    nlohmann::ordered_json row;
    row["model"] = r.model;
    row["precision"] = r.precision;
    row["ild"] = opt_json(r.ild);
    row["avg"] = opt_json(r.avg);
    row["precision_std"] = r.precision_std;
    row["ild_std"] = r.ild_std;
    row["download_ratio"] = opt_json(r.download_ratio);
    row["average_downloads"] = opt_json(r.average_downloads);
    rows.push_back(row);
  }
  j["rows"] = rows;
  j["entropy"] = {{"h_min", report.entropy_stats.h_min},
                  {"h_max", report.entropy_stats.h_max},
                  {"population_size", report.entropy_stats.population_size}};
  if (report.online) {
    j["online"] = {{"download_ratio", opt_json(report.online->download_ratio)},
                   {"average_downloads", opt_json(report.online->average_downloads)}};
  }
  out << j.dump(2) << '\n';
}

void write_report_csv(std::ostream& out, const EvalReport& report) {
  write_metadata_comments(out, report);
  out << "model,precision,ild,avg,precision_std,ild_std,download_ratio,average_downloads\n";
  for (const auto& r : report.rows) {
    out << r.model << ',' << format_double(r.precision) << ',' << opt_csv(r.ild) << ','
        << opt_csv(r.avg) << ',' << format_double(r.precision_std) << ','
        << format_double(r.ild_std) << ',' << opt_csv(r.download_ratio) << ','
        << opt_csv(r.average_downloads) << '\n';
  }
}

void write_entropy_histogram(std::ostream& out, const EvalReport& report) {
  write_metadata_comments(out, report);
  out << "# h_min=" << format_double(report.entropy_stats.h_min) << '\n'
      << "# h_max=" << format_double(report.entropy_stats.h_max) << '\n';
  out << "bin_lo,bin_hi,count,fraction\n";
  const auto& h = report.entropy_histogram;
  std::size_t total = 0;
  for (auto c : h.counts) total += c;
  for (std::size_t b = 0; b < h.counts.size(); ++b) {
    const double lo = h.lo + h.width * static_cast<double>(b);
    const double frac = total == 0 ? 0.0 : static_cast<double>(h.counts[b]) / static_cast<double>(total);
    out << format_double(lo) << ',' << format_double(lo + h.width) << ',' << h.counts[b] << ','
        << format_double(frac) << '\n';
  }
}

void print_report_table(std::ostream& out, const EvalReport& report) {
  std::string k = "k";
  for (const auto& [key, value] : report.metadata) {
    if (key == "k") k = value;
  }
  out << std::left << std::setw(24) << "model" << std::right << std::setw(10) << ("P@" + k)
      << std::setw(10) << ("ILD@" + k) << std::setw(10) << "avg" << '\n';
  out << std::fixed << std::setprecision(4);
  for (const auto& r : report.rows) {
    out << std::left << std::setw(24) << r.model << std::right << std::setw(10) << r.precision;
    if (r.ild) {
      out << std::setw(10) << *r.ild;
    } else {
      out << std::setw(10) << "-";
    }
    if (r.avg) {
      out << std::setw(10) << *r.avg;
    } else {
      out << std::setw(10) << "-";
    }
    out << '\n';
  }
  out.unsetf(std::ios::fixed);
}

void write_report_files(const std::filesystem::path& dir, const EvalReport& report) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream f(dir / name);
    if (!f) throw IngestError("cannot write " + (dir / name).string());
    return f;
  };
  {
    auto f = open("report.json");
    write_report_json(f, report);
  }
  {
    auto f = open("report.csv");
    write_report_csv(f, report);
  }
  {
    auto f = open("entropy_hist.csv");
    write_entropy_histogram(f, report);
  }
}

}  // namespace pdpp
