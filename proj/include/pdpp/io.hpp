#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "pdpp/ranker.hpp"
#include "pdpp/similarity.hpp"

namespace pdpp {

// Runs abort when more than this fraction of data lines is malformed.
inline constexpr double kMaxMalformedFraction = 0.001;

struct ParseReport {
  std::size_t lines = 0;      // non-empty data lines seen
  std::size_t malformed = 0;  // lines skipped
  std::string first_error;    // diagnostic for the first skipped line
};

// `item_id<sep>title<sep>genre1|genre2|...` with sep "::" or a tab. Lines
// starting with '#' are metadata and skipped (also for ratings).
ItemCatalog parse_catalog(std::istream& in, ParseReport& report);

// MovieLens `UserID::MovieID::Rating::Timestamp`, or CSV with a header row
// naming at least user_id and item_id (rating and timestamp optional).
InteractionDataset parse_ratings(std::istream& in, ParseReport& report);

// Throws IngestError if the malformed fraction exceeds kMaxMalformedFraction.
void check_malformed(const ParseReport& report, const std::string& what);

ItemCatalog read_catalog(const std::filesystem::path& path, ParseReport* report = nullptr);
InteractionDataset read_ratings(const std::filesystem::path& path,
                                ParseReport* report = nullptr);

struct MovieLensData {
  InteractionDataset ratings;
  ItemCatalog catalog;
  ParseReport ratings_report;
  ParseReport catalog_report;
};

MovieLensData parse_movielens(const std::filesystem::path& ratings_path,
                              const std::filesystem::path& movies_path);

// Normalized forms written by `ingest`: CSV ratings with header
// `user_id,item_id,rating,timestamp` and a tab-separated catalog.
void write_ratings_csv(std::ostream& out, const InteractionDataset& data);
void write_catalog(std::ostream& out, const ItemCatalog& catalog);

// Two-column `user_id,item_id` CSV with header (impression and download logs).
std::vector<std::pair<UserId, ItemId>> read_pair_log(const std::filesystem::path& path);

}  // namespace pdpp
