#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pdpp/common.hpp"

namespace pdpp {

struct CatalogItem {
  ItemId id;
  std::string title;
  std::vector<std::string> genres;
};

// Bitset over a catalog's genre vocabulary.
class GenreSet {
 public:
  GenreSet() = default;

  void insert(std::size_t genre);
  bool contains(std::size_t genre) const;
  std::size_t count() const;
  bool empty() const { return count() == 0; }

  std::size_t intersection_count(const GenreSet& other) const;
  std::size_t union_count(const GenreSet& other) const;

  std::span<const std::uint64_t> words() const { return words_; }

 private:
  std::vector<std::uint64_t> words_;
};

// |A ∩ B| / |A ∪ B|; two empty sets are defined as similarity 0.
double jaccard(const GenreSet& a, const GenreSet& b);

// Items with their genre labels. Ids are unique and every item carries at
// least one genre; the constructor throws IngestError otherwise.
class ItemCatalog {
 public:
  ItemCatalog() = default;
  explicit ItemCatalog(std::vector<CatalogItem> items);

  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  const CatalogItem& operator[](std::size_t i) const { return items_[i]; }
  const std::vector<CatalogItem>& items() const { return items_; }

  std::optional<std::size_t> find(const ItemId& id) const;

  // Genre vocabulary in first-seen order.
  const std::vector<std::string>& genre_names() const { return genre_names_; }
  const GenreSet& genre_set(std::size_t i) const { return genre_sets_[i]; }

 private:
  std::vector<CatalogItem> items_;
  std::unordered_map<ItemId, std::size_t> index_;
  std::vector<std::string> genre_names_;
  std::vector<GenreSet> genre_sets_;
};

// Dense symmetric item-item similarity over an ordered id index. Values are
// in [0,1] with a unit diagonal.
class SimilarityMatrix {
 public:
  SimilarityMatrix() = default;
  SimilarityMatrix(std::vector<ItemId> ids, std::vector<double> values);

  std::size_t size() const { return ids_.size(); }
  const std::vector<ItemId>& ids() const { return ids_; }
  std::optional<std::size_t> find(const ItemId& id) const;

  double at(std::size_t i, std::size_t j) const { return values_[i * ids_.size() + j]; }
  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * ids_.size(), ids_.size()};
  }
  const std::vector<double>& values() const { return values_; }

 private:
  std::vector<ItemId> ids_;
  std::unordered_map<ItemId, std::size_t> index_;
  std::vector<double> values_;
};

// Jaccard similarity of genre sets; equals the same-genre indicator when
// every item has exactly one genre.
SimilarityMatrix build_genre_similarity(const ItemCatalog& catalog);

// Cosine similarity of binary user-incidence vectors. Items are indexed in
// first-seen order; duplicate (user, item) pairs count once.
SimilarityMatrix build_interaction_similarity(
    std::span<const std::pair<UserId, ItemId>> interactions);

// Serving-side similarity lookup: Jaccard on demand from per-item genre
// bitsets, so no dense matrix is held for the whole catalog.
class GenreIndex {
 public:
  GenreIndex() = default;
  explicit GenreIndex(ItemCatalog catalog);

  const ItemCatalog& catalog() const { return catalog_; }
  // nullptr when the item is not in the catalog.
  const GenreSet* find(const ItemId& id) const;

 private:
  ItemCatalog catalog_;
};

}  // namespace pdpp
