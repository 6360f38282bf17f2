#include "pdpp/kernel.hpp"

#include <bit>

#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include <spdlog/spdlog.h>

namespace pdpp {

RelevanceScores make_relevance(std::vector<ItemId> ids, std::vector<double> q) {
  if (ids.size() != q.size()) {
    throw ArgumentError("relevance ids and scores differ in length");
  }
  std::size_t clamped = 0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (!std::isfinite(q[i])) {
      throw ArgumentError("non-finite relevance score for item " + ids[i]);
    }
    if (q[i] <= 0.0) {
      q[i] = kMinRelevance;
      ++clamped;
    }
  }
  if (clamped > 0) {
    spdlog::warn("clamped {} non-positive relevance score(s) to {}", clamped, kMinRelevance);
  }
  return RelevanceScores{std::move(ids), std::move(q)};
}

DenseSimilarity::DenseSimilarity(std::size_t n, std::vector<double> values)
    : n_(n), values_(std::move(values)) {
  if (values_.size() != n_ * n_) throw ArgumentError("dense similarity must be n x n");
}

DenseSimilarity DenseSimilarity::identity(std::size_t n) {
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
  return DenseSimilarity(n, std::move(v));
}

namespace {
constexpr std::size_t kUnknownRow = std::numeric_limits<std::size_t>::max();
}

MatrixSimilarity::MatrixSimilarity(std::shared_ptr<const SimilarityMatrix> matrix,
                                   std::span<const ItemId> ids)
    : matrix_(std::move(matrix)) {
  rows_.reserve(ids.size());
  for (const auto& id : ids) {
    auto row = matrix_->find(id);
    if (!row) ++unknown_;
    rows_.push_back(row.value_or(kUnknownRow));
  }
  if (unknown_ > 0) {
    spdlog::warn("{} candidate(s) missing from the similarity index; using S=0", unknown_);
  }
}

double MatrixSimilarity::at(std::size_t i, std::size_t j) const {
  if (i == j) return 1.0;
  const std::size_t a = rows_[i];
  const std::size_t b = rows_[j];
  if (a == kUnknownRow || b == kUnknownRow) return 0.0;
  return matrix_->at(a, b);
}

GenreSimilarity::GenreSimilarity(std::shared_ptr<const GenreIndex> index,
                                 std::span<const ItemId> ids)
    : index_(std::move(index)) {
  sets_.reserve(ids.size());
  word_.reserve(ids.size());
  count_.reserve(ids.size());
  for (const auto& id : ids) {
    const GenreSet* set = index_->find(id);
    std::uint64_t word = 0;
    std::uint32_t count = 0;
    if (set == nullptr) {
      ++unknown_;
    } else {
      const auto words = set->words();
      if (!words.empty()) word = words[0];
      single_word_ = single_word_ && words.size() <= 1;
      count = static_cast<std::uint32_t>(set->count());
    }
    sets_.push_back(set);
    word_.push_back(word);
    count_.push_back(count);
  }
  if (unknown_ > 0) {
    spdlog::warn("{} candidate(s) missing from the genre index; using S=0", unknown_);
  }
}

double GenreSimilarity::at(std::size_t i, std::size_t j) const {
  if (i == j) return 1.0;
  if (single_word_) {
    // Unknown candidates carry an empty word, so their intersection is 0.
    const auto inter = static_cast<std::uint32_t>(std::popcount(word_[i] & word_[j]));
    if (inter == 0) return 0.0;
    return static_cast<double>(inter) / static_cast<double>(count_[i] + count_[j] - inter);
  }
  const GenreSet* a = sets_[i];
  const GenreSet* b = sets_[j];
  if (a == nullptr || b == nullptr) return 0.0;
  return jaccard(*a, *b);
}

KernelSpec::KernelSpec(std::shared_ptr<const RelevanceScores> scores,
                       std::shared_ptr<const CandidateSimilarity> similarity, double alpha)
    : scores_(std::move(scores)), similarity_(std::move(similarity)), alpha_(alpha) {
  if (!(alpha_ >= 0.0 && alpha_ <= 1.0)) {
    throw ArgumentError("alpha must lie in [0,1], got " + std::to_string(alpha_));
  }
  if (!scores_ || scores_->ids.size() != scores_->q.size()) {
    throw ArgumentError("relevance ids and scores differ in length");
  }
  if (!similarity_ || similarity_->size() != scores_->size()) {
    throw ArgumentError("similarity does not cover the candidate list");
  }
}

KernelSpec::KernelSpec(RelevanceScores scores,
                       std::shared_ptr<const CandidateSimilarity> similarity, double alpha)
    : KernelSpec(std::make_shared<const RelevanceScores>(std::move(scores)),
                 std::move(similarity), alpha) {}

double KernelSpec::entry(std::size_t i, std::size_t j) const {
  const auto& q = scores_->q;
  if (i == j) return q[i] * q[i];
  // Fixed operand order keeps L exactly symmetric.
  const std::size_t a = i < j ? i : j;
  const std::size_t b = i < j ? j : i;
  return alpha_ * q[a] * q[b] * similarity_->at(a, b);
}

DenseMatrix::DenseMatrix(std::size_t size, std::vector<double> v)
    : n(size), values(std::move(v)) {
  if (values.size() != n * n) throw ArgumentError("dense matrix must be n x n");
}

void kernel_row(const KernelSpec& spec, std::size_t j, std::span<double> out) {
  const std::size_t n = spec.size();
  if (j >= n) throw ArgumentError("kernel row index out of range");
  if (out.size() != n) throw ArgumentError("kernel row buffer has the wrong length");
  for (std::size_t i = 0; i < n; ++i) out[i] = spec.entry(j, i);
}

std::vector<double> kernel_row(const KernelSpec& spec, std::size_t j) {
  std::vector<double> row(spec.size());
  kernel_row(spec, j, row);
  return row;
}

DenseMatrix build_dense_kernel(const KernelSpec& spec, std::size_t cap) {
  const std::size_t n = spec.size();
  if (n > cap) {
    throw SizeError("dense kernel requested for " + std::to_string(n) +
                    " candidates (cap " + std::to_string(cap) +
                    "); use the lazy kernel_row path");
  }
  DenseMatrix l(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) l(i, j) = spec.entry(i, j);
  }
  return l;
}

}  // namespace pdpp
