#include "pdpp/ranker.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace pdpp {

void InteractionDataset::sort_by_user_time() {
  std::stable_sort(records.begin(), records.end(), [](const Interaction& a, const Interaction& b) {
    if (a.user != b.user) return a.user < b.user;
    return a.timestamp < b.timestamp;
  });
}

std::optional<double> ItemCFModel::weight(const ItemId& from, const ItemId& to) const {
  auto f = index.find(from);
  auto t = index.find(to);
  if (f == index.end() || t == index.end()) return std::nullopt;
  for (const auto& nb : neighbors[f->second]) {
    if (nb.item == t->second) return nb.weight;
  }
  return std::nullopt;
}

ItemCFModel fit_item_cf(const InteractionDataset& data, std::size_t n) {
  ItemCFModel model;
  model.n = n;
  std::unordered_map<UserId, std::size_t> user_index;
  std::vector<std::vector<std::size_t>> user_items;
  for (const auto& r : data.records) {
    auto [it, inserted] = model.index.emplace(r.item, model.ids.size());
    if (inserted) model.ids.push_back(r.item);
    if (!data.is_positive(r)) continue;
    auto [u, new_user] = user_index.emplace(r.user, user_items.size());
    if (new_user) user_items.emplace_back();
    user_items[u->second].push_back(it->second);
  }
  if (user_items.empty()) throw TrainingError("no positive interactions to fit item CF on");

  const std::size_t items = model.ids.size();
  std::vector<std::vector<std::size_t>> item_users(items);
  for (std::size_t u = 0; u < user_items.size(); ++u) {
    auto& list = user_items[u];
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
    for (std::size_t i : list) item_users[i].push_back(u);
  }

  model.neighbors.assign(items, {});
  std::vector<std::uint32_t> co(items, 0);
  std::vector<std::size_t> touched;
  std::vector<Neighbor> candidates;
  for (std::size_t i = 0; i < items; ++i) {
    if (item_users[i].empty()) continue;
    touched.clear();
    for (std::size_t u : item_users[i]) {
      for (std::size_t j : user_items[u]) {
        if (j == i) continue;
        if (co[j]++ == 0) touched.push_back(j);
      }
    }
    candidates.clear();
    const double di = static_cast<double>(item_users[i].size());
    for (std::size_t j : touched) {
      const double dj = static_cast<double>(item_users[j].size());
      const double w = std::min(1.0, static_cast<double>(co[j]) / std::sqrt(di * dj));
      candidates.push_back({j, w});
      co[j] = 0;
    }
    auto better = [&](const Neighbor& a, const Neighbor& b) {
      if (a.weight != b.weight) return a.weight > b.weight;
      return model.ids[a.item] < model.ids[b.item];
    };
    const std::size_t keep = std::min(n, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                      candidates.end(), better);
    candidates.resize(keep);
    model.neighbors[i] = candidates;
  }
  return model;
}

RelevanceScores score_candidates(const ItemCFModel& model,
                                 const std::unordered_set<ItemId>& history,
                                 std::span<const ItemId> candidates) {
  std::vector<std::size_t> hist;
  hist.reserve(history.size());
  for (const auto& h : history) {
    auto it = model.index.find(h);
    if (it != model.index.end()) hist.push_back(it->second);
  }
  // Fixed summation order regardless of hash-set iteration order.
  std::sort(hist.begin(), hist.end());
  std::vector<double> acc(model.ids.size(), 0.0);
  for (std::size_t j : hist) {
    for (const auto& nb : model.neighbors[j]) acc[nb.item] += nb.weight;
  }

  RelevanceScores out;
  out.ids.reserve(candidates.size());
  out.q.reserve(candidates.size());
  for (const auto& c : candidates) {
    if (history.count(c) > 0) continue;
    auto it = model.index.find(c);
    const double q = it == model.index.end() ? 0.0 : acc[it->second];
    out.ids.push_back(c);
    out.q.push_back(std::max(q, kMinRelevance));
  }
  return out;
}

double PopularityModel::score(const ItemId& item) const {
  auto it = scores.find(item);
  return it == scores.end() ? kMinRelevance : it->second;
}

PopularityModel fit_popularity(const InteractionDataset& data) {
  std::unordered_map<ItemId, double> counts;
  double max_count = 0.0;
  for (const auto& r : data.records) {
    if (!data.is_positive(r)) continue;
    max_count = std::max(max_count, counts[r.item] += 1.0);
  }
  PopularityModel model;
  for (const auto& [item, c] : counts) {
    model.scores.emplace(item, std::max(c / max_count, kMinRelevance));
  }
  return model;
}

RelevanceScores ItemCFScorer::score(const UserId& /*user*/,
                                    const std::unordered_set<ItemId>& history,
                                    std::span<const ItemId> candidates) const {
  return score_candidates(model_, history, candidates);
}

RelevanceScores PopularityScorer::score(const UserId& /*user*/,
                                        const std::unordered_set<ItemId>& history,
                                        std::span<const ItemId> candidates) const {
  RelevanceScores out;
  for (const auto& c : candidates) {
    if (history.count(c) > 0) continue;
    out.ids.push_back(c);
    out.q.push_back(model_.score(c));
  }
  return out;
}

void ExternalScorer::set(const UserId& user, const ItemId& item, double score) {
  table_[user][item] = score;
}

RelevanceScores ExternalScorer::score(const UserId& user,
                                      const std::unordered_set<ItemId>& history,
                                      std::span<const ItemId> candidates) const {
  std::vector<ItemId> ids;
  std::vector<double> q;
  auto row = table_.find(user);
  for (const auto& c : candidates) {
    if (history.count(c) > 0) continue;
    double s = kMinRelevance;
    if (row != table_.end()) {
      auto it = row->second.find(c);
      if (it != row->second.end()) s = it->second;
    }
    ids.push_back(c);
    q.push_back(s);
  }
  return make_relevance(std::move(ids), std::move(q));
}

}  // namespace pdpp
