#include "pdpp/io.hpp"

#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "pdpp/format.hpp"

namespace pdpp {
namespace {

void note_malformed(ParseReport& report, std::size_t lineno, const std::string& why) {
  if (report.malformed == 0) {
    report.first_error = "line " + std::to_string(lineno) + ": " + why;
  }
  ++report.malformed;
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IngestError("cannot open " + path.string());
  return in;
}

std::optional<std::size_t> column(const std::vector<std::string_view>& header,
                                  std::initializer_list<std::string_view> names) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    for (auto n : names) {
      if (trim(header[i]) == n) return i;
    }
  }
  return std::nullopt;
}

}  // namespace

ItemCatalog parse_catalog(std::istream& in, ParseReport& report) {
  std::vector<CatalogItem> items;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    ++report.lines;
    const std::string_view sep = view.find("::") != std::string_view::npos ? "::" : "\t";
    const auto fields = split(view, sep);
    if (fields.size() < 3) {
      note_malformed(report, lineno, "expected item_id, title and genres");
      continue;
    }
    CatalogItem item;
    item.id = std::string(trim(fields.front()));
    for (std::size_t f = 1; f + 1 < fields.size(); ++f) {
      if (f > 1) item.title += sep;
      item.title += fields[f];
    }
    for (auto g : split(trim(fields.back()), "|")) {
      g = trim(g);
      if (!g.empty()) item.genres.emplace_back(g);
    }
    if (item.id.empty()) {
      note_malformed(report, lineno, "empty item id");
      continue;
    }
    if (item.genres.empty()) {
      note_malformed(report, lineno, "item " + item.id + " has no genres");
      continue;
    }
    if (!seen.insert(item.id).second) {
      note_malformed(report, lineno, "duplicate item " + item.id);
      continue;
    }
    items.push_back(std::move(item));
  }
  return ItemCatalog(std::move(items));
}

InteractionDataset parse_ratings(std::istream& in, ParseReport& report) {
  InteractionDataset data;
  std::string line;
  std::size_t lineno = 0;
  enum class Mode { Unknown, MovieLens, Csv } mode = Mode::Unknown;
  std::size_t c_user = 0;
  std::size_t c_item = 0;
  std::optional<std::size_t> c_rating;
  std::optional<std::size_t> c_ts;

  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    if (mode == Mode::Unknown) {
      if (view.find("::") != std::string_view::npos) {
        mode = Mode::MovieLens;
      } else {
        const auto header = split(view, ",");
        auto u = column(header, {"user_id", "userId", "user", "UserID"});
        auto i = column(header, {"item_id", "itemId", "item", "movieId", "movie_id", "MovieID"});
        if (!u || !i) {
          throw IngestError("ratings CSV header must name user_id and item_id columns");
        }
        c_user = *u;
        c_item = *i;
        c_rating = column(header, {"rating", "Rating", "value"});
        c_ts = column(header, {"timestamp", "Timestamp", "ts"});
        mode = Mode::Csv;
        continue;
      }
    }
    ++report.lines;
    Interaction r;
    if (mode == Mode::MovieLens) {
      const auto f = split(view, "::");
      double rating = 0.0;
      if (f.size() != 4 || !parse_double(f[2], rating) || !parse_double(f[3], r.timestamp)) {
        note_malformed(report, lineno, "expected UserID::MovieID::Rating::Timestamp");
        continue;
      }
      r.user = std::string(trim(f[0]));
      r.item = std::string(trim(f[1]));
      r.rating = rating;
    } else {
      const auto f = split(view, ",");
      const std::size_t need = std::max({c_user, c_item, c_rating.value_or(0), c_ts.value_or(0)});
      if (f.size() <= need) {
        note_malformed(report, lineno, "too few columns");
        continue;
      }
      r.user = std::string(trim(f[c_user]));
      r.item = std::string(trim(f[c_item]));
      bool ok = true;
      if (c_rating && !trim(f[*c_rating]).empty()) {
        double rating = 0.0;
        ok = parse_double(f[*c_rating], rating);
        r.rating = rating;
      }
      if (ok && c_ts && !trim(f[*c_ts]).empty()) ok = parse_double(f[*c_ts], r.timestamp);
      if (!ok) {
        note_malformed(report, lineno, "non-numeric rating or timestamp");
        continue;
      }
    }
    if (r.user.empty() || r.item.empty()) {
      note_malformed(report, lineno, "empty user or item id");
      continue;
    }
    data.records.push_back(std::move(r));
  }
  return data;
}

void check_malformed(const ParseReport& report, const std::string& what) {
  if (report.malformed == 0) return;
  const double frac = report.lines == 0 ? 1.0
                                        : static_cast<double>(report.malformed) /
                                              static_cast<double>(report.lines);
  if (frac > kMaxMalformedFraction) {
    throw IngestError(what + ": " + std::to_string(report.malformed) + " of " +
                      std::to_string(report.lines) + " lines malformed (first: " +
                      report.first_error + ")");
  }
  spdlog::warn("{}: skipped {} malformed line(s); first: {}", what, report.malformed,
               report.first_error);
}

ItemCatalog read_catalog(const std::filesystem::path& path, ParseReport* report) {
  auto in = open_or_throw(path);
  ParseReport local;
  auto catalog = parse_catalog(in, local);
  check_malformed(local, path.string());
  if (report != nullptr) *report = local;
  return catalog;
}

InteractionDataset read_ratings(const std::filesystem::path& path, ParseReport* report) {
  auto in = open_or_throw(path);
  ParseReport local;
  auto data = parse_ratings(in, local);
  check_malformed(local, path.string());
  if (report != nullptr) *report = local;
  return data;
}

MovieLensData parse_movielens(const std::filesystem::path& ratings_path,
                              const std::filesystem::path& movies_path) {
  MovieLensData out;
  out.catalog = read_catalog(movies_path, &out.catalog_report);
  out.ratings = read_ratings(ratings_path, &out.ratings_report);
  return out;
}

void write_ratings_csv(std::ostream& out, const InteractionDataset& data) {
  out << "user_id,item_id,rating,timestamp\n";
  for (const auto& r : data.records) {
    out << r.user << ',' << r.item << ',';
    if (r.rating) out << format_double(*r.rating);
    out << ',' << format_double(r.timestamp) << '\n';
  }
}

void write_catalog(std::ostream& out, const ItemCatalog& catalog) {
  for (const auto& item : catalog.items()) {
    out << item.id << '\t' << item.title << '\t';
    for (std::size_t g = 0; g < item.genres.size(); ++g) {
      if (g > 0) out << '|';
      out << item.genres[g];
    }
    out << '\n';
  }
}

std::vector<std::pair<UserId, ItemId>> read_pair_log(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  std::vector<std::pair<UserId, ItemId>> out;
  std::string line;
  std::size_t lineno = 0;
  bool header = true;
  while (std::getline(in, line)) {
    ++lineno;
    const auto view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    if (header) {
      header = false;
      continue;
    }
    const auto f = split(view, ",");
    if (f.size() < 2 || trim(f[0]).empty() || trim(f[1]).empty()) {
      throw IngestError(path.string() + " line " + std::to_string(lineno) +
                        ": expected user_id,item_id");
    }
    out.emplace_back(std::string(trim(f[0])), std::string(trim(f[1])));
  }
  return out;
}

}  // namespace pdpp
