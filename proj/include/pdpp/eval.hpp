#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "pdpp/common.hpp"
#include "pdpp/personalization.hpp"
#include "pdpp/ranker.hpp"
#include "pdpp/similarity.hpp"

namespace pdpp {

// One entry of the model grid: BASE (score order), DPP with a shared alpha,
// or pDPP with per-user alpha_u = f_u * alpha_0.
struct ModelSpec {
  enum class Kind { Base, Dpp, Pdpp };
  Kind kind = Kind::Base;
  double alpha = 0.0;       // DPP alpha or pDPP alpha_0
  std::optional<double> l;  // pDPP only; nullopt means l = h_min

  static ModelSpec base() { return {}; }
  static ModelSpec dpp(double alpha) { return {Kind::Dpp, alpha, std::nullopt}; }
  static ModelSpec pdpp(std::optional<double> l, double alpha_0) {
    return {Kind::Pdpp, alpha_0, l};
  }

  // BASE | DPP(a=0.04) | pDPP(l=0,a0=0.02) | pDPP(l=hmin,a0=0.02)
  std::string label() const;
};

// Accepts the label syntax plus shorthands `DPP(0.04)` and
// `pDPP(0,0.02)`. Throws ConfigError.
ModelSpec parse_model_spec(std::string_view text);

// Entries separated by ';'. `DPP(a=0.01..0.1)` expands to the 0.01-step grid.
std::vector<ModelSpec> parse_grid(std::string_view text);

// BASE, DPP(0.01..0.1), pDPP(l=hmin,a0=0.04), pDPP(l=0,a0=0.04).
std::vector<ModelSpec> default_grid();

struct ExperimentConfig {
  std::string ratings_path;
  std::string movies_path;
  std::string output_dir = ".";
  double split_ratio = 0.7;
  double positivity_threshold = kDefaultPositivityThreshold;
  std::size_t k = 5;
  std::vector<ModelSpec> grid = default_grid();
  std::uint64_t seed = 42;
  std::size_t runs = 1;
  std::size_t neighborhood = kDefaultNeighborhood;
  std::size_t min_item_raters = 10;
  std::size_t min_user_ratings = 20;
  std::size_t cold_start_min_interactions = kDefaultColdStartMinInteractions;
  std::size_t workers = 1;
  // Optional impression/download logs for DR and AD; attached to the row
  // labelled `logs_model` (or reported alone when that is empty).
  std::string impressions_log;
  std::string downloads_log;
  std::string logs_model;
  bool keep_lists = false;  // retain per-model recommendation lists in the report

  void validate() const;  // throws ConfigError
  std::vector<std::pair<std::string, std::string>> to_key_values() const;
  void set(const std::string& key, const std::string& value);  // throws ConfigError
};

// Flat `key = value` lines; '#' starts a comment.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig read_config(const std::filesystem::path& path);

struct Split {
  InteractionDataset train;
  InteractionDataset test;
  std::size_t users = 0;
  std::size_t items = 0;
};

// Alternately drops items with fewer than `min_item_raters` raters and users
// with fewer than `min_user_ratings` ratings until neither rule removes anything.
InteractionDataset filter_min_counts(const InteractionDataset& raw, std::size_t min_item_raters,
                                     std::size_t min_user_ratings);

// Filtering, then a seeded random split by rating. Throws ConfigError if the
// filters leave nothing.
Split preprocess_split(const InteractionDataset& raw, const ExperimentConfig& config,
                       std::uint64_t seed);

using RecommendationLists = std::map<UserId, std::vector<ItemId>>;
using TruthSets = std::map<UserId, std::unordered_set<ItemId>>;

struct PrecisionResult {
  double value = 0.0;
  std::size_t users = 0;     // users counted
  std::size_t excluded = 0;  // users with recommendations but no truth entry
};

// Micro-averaged: total hits in the top k over total k * users.
PrecisionResult precision_at_k(const RecommendationLists& recs, const TruthSets& truth,
                               std::size_t k);

// Mean over users of the mean (1 - S_ij) over unordered pairs in the top k.
// nullopt when k < 2 (no pairs). Throws ArgumentError for items missing from S.
std::optional<double> ild_at_k(const RecommendationLists& recs, const SimilarityMatrix& s,
                               std::size_t k);
std::optional<double> ild_at_k(const RecommendationLists& recs, const GenreIndex& s,
                               std::size_t k);

// Min-max normalizes each metric across the compared models, then averages
// the two. A metric constant across models normalizes to 0.5. Rows whose ILD
// is absent are averaged on precision alone. Throws ArgumentError for fewer
// than two rows.
std::vector<double> avg_standardized(
    const std::vector<std::pair<double, std::optional<double>>>& rows);

struct LogMetrics {
  std::optional<double> download_ratio;     // downloads / impressions
  std::optional<double> average_downloads;  // downloads / distinct users shown
};

// Throws ArgumentError if a download has no matching impression.
LogMetrics log_metrics(const std::vector<std::pair<UserId, ItemId>>& impressions,
                       const std::vector<std::pair<UserId, ItemId>>& downloads);

struct ReportRow {
  std::string model;
  double precision = 0.0;
  std::optional<double> ild;
  std::optional<double> avg;
  double precision_std = 0.0;
  double ild_std = 0.0;
  std::optional<double> download_ratio;
  std::optional<double> average_downloads;
};

struct EvalReport {
  std::vector<ReportRow> rows;
  // Config echo plus run facts (seed, dataset hash, user counts, ...).
  std::vector<std::pair<std::string, std::string>> metadata;
  std::string generated_at;
  EntropyStats entropy_stats;
  EntropyHistogram entropy_histogram;
  std::optional<LogMetrics> online;
  // Present when config.keep_lists: per model (grid order), last run's lists.
  std::vector<RecommendationLists> lists;
};

EvalReport run_experiment(const ExperimentConfig& config);
EvalReport run_experiment(const ExperimentConfig& config, const InteractionDataset& raw,
                          const ItemCatalog& catalog);

void write_report_json(std::ostream& out, const EvalReport& report);
void write_report_csv(std::ostream& out, const EvalReport& report);
void write_entropy_histogram(std::ostream& out, const EvalReport& report);
void print_report_table(std::ostream& out, const EvalReport& report);

// Writes report.json, report.csv and entropy_hist.csv into `dir`.
void write_report_files(const std::filesystem::path& dir, const EvalReport& report);

// FNV-1a over the normalized records; stable across runs and platforms.
std::string dataset_hash(const InteractionDataset& data);

}  // namespace pdpp
