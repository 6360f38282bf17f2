#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "pdpp/common.hpp"
#include "pdpp/similarity.hpp"

namespace pdpp {

inline constexpr std::size_t kDefaultDenseKernelCap = 2048;

// Candidate items with strictly positive relevance scores.
struct RelevanceScores {
  std::vector<ItemId> ids;
  std::vector<double> q;

  std::size_t size() const { return q.size(); }
};

// Builds RelevanceScores, clamping q <= 0 up to kMinRelevance (logged).
// Throws ArgumentError on length mismatch or non-finite scores.
RelevanceScores make_relevance(std::vector<ItemId> ids, std::vector<double> q);

// Similarity between two candidates, addressed by candidate position.
class CandidateSimilarity {
 public:
  virtual ~CandidateSimilarity() = default;
  virtual std::size_t size() const = 0;
  virtual double at(std::size_t i, std::size_t j) const = 0;
};

// Explicit n x n similarity values (row-major); mostly for tests and oracles.
class DenseSimilarity final : public CandidateSimilarity {
 public:
  DenseSimilarity(std::size_t n, std::vector<double> values);
  static DenseSimilarity identity(std::size_t n);

  std::size_t size() const override { return n_; }
  double at(std::size_t i, std::size_t j) const override { return values_[i * n_ + j]; }

 private:
  std::size_t n_;
  std::vector<double> values_;
};

// Candidates resolved against a precomputed SimilarityMatrix. Ids missing
// from the matrix get similarity 0 to everything else.
class MatrixSimilarity final : public CandidateSimilarity {
 public:
  MatrixSimilarity(std::shared_ptr<const SimilarityMatrix> matrix, std::span<const ItemId> ids);

  std::size_t size() const override { return rows_.size(); }
  double at(std::size_t i, std::size_t j) const override;
  std::size_t unknown_count() const { return unknown_; }

 private:
  std::shared_ptr<const SimilarityMatrix> matrix_;
  std::vector<std::size_t> rows_;
  std::size_t unknown_ = 0;
};

// Candidates resolved against a GenreIndex (Jaccard computed per pair).
// Unknown ids get similarity 0 to everything else. Genre bits and counts are
// cached per candidate so a pair costs one popcount when the vocabulary fits
// in a single word.
class GenreSimilarity final : public CandidateSimilarity {
 public:
  GenreSimilarity(std::shared_ptr<const GenreIndex> index, std::span<const ItemId> ids);

  std::size_t size() const override { return sets_.size(); }
  double at(std::size_t i, std::size_t j) const override;
  std::size_t unknown_count() const { return unknown_; }

 private:
  std::shared_ptr<const GenreIndex> index_;
  std::vector<const GenreSet*> sets_;
  std::vector<std::uint64_t> word_;  // first bitset word per candidate
  std::vector<std::uint32_t> count_;
  bool single_word_ = true;
  std::size_t unknown_ = 0;
};

// L_ii = q_i^2, L_ij = alpha * q_i * q_j * S_ij. Rows are produced on demand.
class KernelSpec {
 public:
  // Throws ArgumentError if alpha is outside [0,1] or sizes disagree.
  KernelSpec(std::shared_ptr<const RelevanceScores> scores,
             std::shared_ptr<const CandidateSimilarity> similarity, double alpha);
  KernelSpec(RelevanceScores scores, std::shared_ptr<const CandidateSimilarity> similarity,
             double alpha);

  std::size_t size() const { return scores_->size(); }
  const RelevanceScores& scores() const { return *scores_; }
  const CandidateSimilarity& similarity() const { return *similarity_; }
  double alpha() const { return alpha_; }

  double entry(std::size_t i, std::size_t j) const;

 private:
  std::shared_ptr<const RelevanceScores> scores_;
  std::shared_ptr<const CandidateSimilarity> similarity_;
  double alpha_;
};

// Row-major square matrix.
struct DenseMatrix {
  std::size_t n = 0;
  std::vector<double> values;

  DenseMatrix() = default;
  explicit DenseMatrix(std::size_t size) : n(size), values(size * size, 0.0) {}
  DenseMatrix(std::size_t size, std::vector<double> v);

  double& operator()(std::size_t i, std::size_t j) { return values[i * n + j]; }
  double operator()(std::size_t i, std::size_t j) const { return values[i * n + j]; }
};

void kernel_row(const KernelSpec& spec, std::size_t j, std::span<double> out);
std::vector<double> kernel_row(const KernelSpec& spec, std::size_t j);

// Throws SizeError above `cap` candidates; use kernel_row for large lists.
DenseMatrix build_dense_kernel(const KernelSpec& spec,
                               std::size_t cap = kDefaultDenseKernelCap);

}  // namespace pdpp
