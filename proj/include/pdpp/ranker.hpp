#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "pdpp/common.hpp"
#include "pdpp/kernel.hpp"

namespace pdpp {

inline constexpr std::size_t kDefaultNeighborhood = 50;
inline constexpr double kDefaultPositivityThreshold = 4.0;

struct Interaction {
  UserId user;
  ItemId item;
  std::optional<double> rating;  // absent for implicit feedback
  double timestamp = 0.0;
};

struct InteractionDataset {
  std::vector<Interaction> records;
  double positivity_threshold = kDefaultPositivityThreshold;

  // Unrated (implicit) records always count as positive.
  bool is_positive(const Interaction& r) const {
    return !r.rating || *r.rating >= positivity_threshold;
  }
  bool empty() const { return records.empty(); }

  // Stable sort by (user, timestamp).
  void sort_by_user_time();
};

struct Neighbor {
  std::size_t item;  // index into ItemCFModel::ids
  double weight;
};

struct ItemCFModel {
  std::vector<ItemId> ids;
  std::unordered_map<ItemId, std::size_t> index;
  // Per item: top-n neighbors by cosine weight, descending; ties by item id.
  std::vector<std::vector<Neighbor>> neighbors;
  std::size_t n = kDefaultNeighborhood;

  std::optional<double> weight(const ItemId& from, const ItemId& to) const;
};

// Item-item cosine over the binary incidence of positive interactions.
// Throws TrainingError when there are no positives.
ItemCFModel fit_item_cf(const InteractionDataset& data, std::size_t n = kDefaultNeighborhood);

// q_i = sum over history items j of weight(j -> i), floored at kMinRelevance.
// History items are dropped from the candidate list.
RelevanceScores score_candidates(const ItemCFModel& model,
                                 const std::unordered_set<ItemId>& history,
                                 std::span<const ItemId> candidates);

struct PopularityModel {
  std::unordered_map<ItemId, double> scores;  // positive count / max count

  double score(const ItemId& item) const;
};

PopularityModel fit_popularity(const InteractionDataset& data);

// Upstream relevance model. Implementations are final; external models plug
// in through ExternalScorer.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual RelevanceScores score(const UserId& user, const std::unordered_set<ItemId>& history,
                                std::span<const ItemId> candidates) const = 0;
};

class ItemCFScorer final : public Scorer {
 public:
  explicit ItemCFScorer(ItemCFModel model) : model_(std::move(model)) {}
  RelevanceScores score(const UserId& user, const std::unordered_set<ItemId>& history,
                        std::span<const ItemId> candidates) const override;
  const ItemCFModel& model() const { return model_; }

 private:
  ItemCFModel model_;
};

class PopularityScorer final : public Scorer {
 public:
  explicit PopularityScorer(PopularityModel model) : model_(std::move(model)) {}
  RelevanceScores score(const UserId& user, const std::unordered_set<ItemId>& history,
                        std::span<const ItemId> candidates) const override;

 private:
  PopularityModel model_;
};

// Scores supplied from outside, keyed by (user, item). Missing pairs score
// kMinRelevance.
class ExternalScorer final : public Scorer {
 public:
  void set(const UserId& user, const ItemId& item, double score);
  RelevanceScores score(const UserId& user, const std::unordered_set<ItemId>& history,
                        std::span<const ItemId> candidates) const override;

 private:
  std::unordered_map<UserId, std::unordered_map<ItemId, double>> table_;
};

}  // namespace pdpp
