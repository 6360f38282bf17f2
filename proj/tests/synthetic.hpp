#pragma once

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "pdpp/ranker.hpp"
#include "pdpp/similarity.hpp"

namespace pdpp::test {

struct SyntheticData {
  InteractionDataset ratings;
  ItemCatalog catalog;
};

// Users with 1 to 4 favourite genres rate mostly items from those genres,
// rating favourites high. Sized to survive the default 10/20 filters.
inline SyntheticData synthetic_movielens(std::size_t users, std::size_t items, std::uint64_t seed,
                                         std::size_t ratings_per_user = 40) {
  static const std::vector<std::string> vocab = {"Action", "Comedy", "Drama",   "Horror",
                                                 "Romance", "SciFi", "Thriller", "Western"};
  std::mt19937_64 rng(seed);
  std::vector<CatalogItem> cat;
  std::vector<std::vector<std::size_t>> by_genre(vocab.size());
  for (std::size_t i = 0; i < items; ++i) {
    CatalogItem it{"m" + std::to_string(i), "Movie " + std::to_string(i), {}};
    const std::size_t g0 = rng() % vocab.size();
    it.genres.push_back(vocab[g0]);
    by_genre[g0].push_back(i);
    if (rng() % 4 == 0) {
      const std::size_t g1 = (g0 + 1 + rng() % (vocab.size() - 1)) % vocab.size();
      it.genres.push_back(vocab[g1]);
      by_genre[g1].push_back(i);
    }
    cat.push_back(std::move(it));
  }

  SyntheticData out;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t user = 0; user < users; ++user) {
    const std::size_t breadth = 1 + rng() % 4;
    std::vector<std::size_t> genres(vocab.size());
    for (std::size_t g = 0; g < genres.size(); ++g) genres[g] = g;
    std::shuffle(genres.begin(), genres.end(), rng);
    genres.resize(breadth);
    std::vector<char> seen(items, 0);
    for (std::size_t r = 0; r < ratings_per_user; ++r) {
      std::size_t item = 0;
      bool liked = u(rng) < 0.8;
      if (liked) {
        const auto& pool = by_genre[genres[rng() % breadth]];
        if (pool.empty()) continue;
        item = pool[rng() % pool.size()];
      } else {
        item = rng() % items;
      }
      if (seen[item]) continue;
      seen[item] = 1;
      const double rating = liked ? (u(rng) < 0.85 ? 4.0 + (rng() % 2) : 3.0) : 1.0 + (rng() % 3);
      out.ratings.records.push_back({"u" + std::to_string(user), cat[item].id, rating,
                                     static_cast<double>(1000 * user + r)});
    }
  }
  out.catalog = ItemCatalog(std::move(cat));
  return out;
}

}  // namespace pdpp::test
