#include "pdpp/similarity.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <unordered_set>

namespace pdpp {

void GenreSet::insert(std::size_t genre) {
  const std::size_t word = genre / 64;
  if (words_.size() <= word) words_.resize(word + 1, 0);
  words_[word] |= std::uint64_t{1} << (genre % 64);
}

bool GenreSet::contains(std::size_t genre) const {
  const std::size_t word = genre / 64;
  return word < words_.size() && ((words_[word] >> (genre % 64)) & 1U) != 0;
}

std::size_t GenreSet::count() const {
  std::size_t n = 0;
  for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

std::size_t GenreSet::intersection_count(const GenreSet& other) const {
  const std::size_t n = std::min(words_.size(), other.words_.size());
  std::size_t c = 0;
  for (std::size_t i = 0; i < n; ++i) {
    c += static_cast<std::size_t>(std::popcount(words_[i] & other.words_[i]));
  }
  return c;
}

std::size_t GenreSet::union_count(const GenreSet& other) const {
  return count() + other.count() - intersection_count(other);
}

double jaccard(const GenreSet& a, const GenreSet& b) {
  const std::size_t u = a.union_count(b);
  if (u == 0) return 0.0;
  return static_cast<double>(a.intersection_count(b)) / static_cast<double>(u);
}

ItemCatalog::ItemCatalog(std::vector<CatalogItem> items) : items_(std::move(items)) {
  std::unordered_map<std::string, std::size_t> genre_ids;
  genre_sets_.reserve(items_.size());
  for (std::size_t i = 0; i < items_.size(); ++i) {
    const auto& item = items_[i];
    if (!index_.emplace(item.id, i).second) {
      throw IngestError("duplicate item id in catalog: " + item.id);
    }
    GenreSet set;
    for (const auto& g : item.genres) {
      if (g.empty()) continue;
      auto [it, inserted] = genre_ids.emplace(g, genre_names_.size());
      if (inserted) genre_names_.push_back(g);
      set.insert(it->second);
    }
    if (set.empty()) {
      throw IngestError("item " + item.id + " has an empty genre set");
    }
    genre_sets_.push_back(std::move(set));
  }
}

std::optional<std::size_t> ItemCatalog::find(const ItemId& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

SimilarityMatrix::SimilarityMatrix(std::vector<ItemId> ids, std::vector<double> values)
    : ids_(std::move(ids)), values_(std::move(values)) {
  if (values_.size() != ids_.size() * ids_.size()) {
    throw ArgumentError("similarity values must be an n x n matrix");
  }
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!index_.emplace(ids_[i], i).second) {
      throw ArgumentError("duplicate item id in similarity index: " + ids_[i]);
    }
  }
}

std::optional<std::size_t> SimilarityMatrix::find(const ItemId& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

SimilarityMatrix build_genre_similarity(const ItemCatalog& catalog) {
  if (catalog.empty()) throw ConfigError("cannot build similarity from an empty catalog");
  const std::size_t n = catalog.size();
  std::vector<double> values(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    values[i * n + i] = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double s = jaccard(catalog.genre_set(i), catalog.genre_set(j));
      values[i * n + j] = s;
      values[j * n + i] = s;
    }
  }
  std::vector<ItemId> ids;
  ids.reserve(n);
  for (const auto& item : catalog.items()) ids.push_back(item.id);
  return SimilarityMatrix(std::move(ids), std::move(values));
}

SimilarityMatrix build_interaction_similarity(
    std::span<const std::pair<UserId, ItemId>> interactions) {
  if (interactions.empty()) throw ConfigError("no interactions to build similarity from");

  std::vector<ItemId> ids;
  std::unordered_map<ItemId, std::size_t> item_index;
  std::unordered_map<UserId, std::vector<std::size_t>> by_user;
  std::unordered_set<std::string> seen;
  for (const auto& [user, item] : interactions) {
    auto [it, inserted] = item_index.emplace(item, ids.size());
    if (inserted) ids.push_back(item);
    // '\x1f' cannot appear in either id as read from our file formats.
    if (seen.insert(user + '\x1f' + item).second) by_user[user].push_back(it->second);
  }

  const std::size_t n = ids.size();
  std::vector<double> degree(n, 0.0);
  std::vector<double> co(n * n, 0.0);
  for (const auto& [user, items] : by_user) {
    for (std::size_t a = 0; a < items.size(); ++a) {
      degree[items[a]] += 1.0;
      for (std::size_t b = a + 1; b < items.size(); ++b) {
        co[items[a] * n + items[b]] += 1.0;
        co[items[b] * n + items[a]] += 1.0;
      }
    }
  }

  std::vector<double> values(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    values[i * n + i] = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double c = co[i * n + j];
      double s = c == 0.0 ? 0.0 : c / std::sqrt(degree[i] * degree[j]);
      s = std::clamp(s, 0.0, 1.0);
      values[i * n + j] = s;
      values[j * n + i] = s;
    }
  }
  return SimilarityMatrix(std::move(ids), std::move(values));
}

GenreIndex::GenreIndex(ItemCatalog catalog) : catalog_(std::move(catalog)) {}

const GenreSet* GenreIndex::find(const ItemId& id) const {
  auto i = catalog_.find(id);
  if (!i) return nullptr;
  return &catalog_.genre_set(*i);
}

}  // namespace pdpp
