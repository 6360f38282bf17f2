#pragma once

#include <cstddef>
#include <vector>

#include "pdpp/kernel.hpp"

namespace pdpp {

// Greedy stops once the best residual d_i^2 falls below this (absolute).
inline constexpr double kExhaustionThreshold = 1e-10;

// Log-gains closer than this are treated as tied; ties go to the higher
// relevance score, then the lower candidate index.
inline constexpr double kGainTieTolerance = 1e-12;

// Smallest pivot accepted as "zero" when factoring a PSD submatrix.
inline constexpr double kPsdPivotTolerance = 1e-8;

inline constexpr std::size_t kDefaultNaiveCap = 2048;

// Re-ranked list. `indices` are candidate positions in selection order;
// `items` holds the matching ids when the caller supplied them. `gains[t]` is
// log det(L_{Y_t}) - log det(L_{Y_{t-1}}) for greedy steps and -inf for the
// trailing `fallback_fill` slots filled by relevance order.
struct Selection {
  std::vector<std::size_t> indices;
  std::vector<ItemId> items;
  std::vector<double> gains;
  std::size_t fallback_fill = 0;
};

// Incremental greedy MAP inference over a lazily evaluated kernel. Touches
// only the diagonal and the rows of selected items: O(k^2 M) work.
// Throws ArgumentError for k < 1 or no candidates, NumericError on a
// non-finite kernel entry.
Selection fast_greedy_map(const KernelSpec& spec, std::size_t k);

// Reference greedy that recomputes log det(L_{Y+i}) from scratch for every
// candidate. Same tie-breaking and exhaustion policy as fast_greedy_map.
// Throws NumericError if L is detectably not PSD.
Selection naive_greedy_map(const DenseMatrix& l, std::size_t k,
                           std::size_t cap = kDefaultNaiveCap);

struct ExactMap {
  std::vector<std::size_t> indices;  // ascending
  double det = 0.0;
};

// Brute force over all k-subsets (M <= 15, k <= 5). Ties resolve to the
// lexicographically smallest index set.
ExactMap exhaustive_map(const DenseMatrix& l, std::size_t k);

// log det of the principal submatrix on `subset` (in the given order) via
// Cholesky; -inf when a pivot is numerically zero. Throws NumericError when a
// pivot is below -kPsdPivotTolerance.
double log_det_subset(const DenseMatrix& l, const std::vector<std::size_t>& subset);

// det of the principal submatrix via LU with partial pivoting.
double det_subset(const DenseMatrix& l, const std::vector<std::size_t>& subset);

}  // namespace pdpp
