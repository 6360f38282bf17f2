#include "pdpp/dpp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace pdpp {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Fills the remaining slots of `sel` by descending `relevance`, lower index
// first on ties.
void fill_by_relevance(Selection& sel, std::vector<char>& taken,
                       const std::vector<double>& relevance, std::size_t k) {
  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < taken.size(); ++i) {
    if (!taken[i]) rest.push_back(i);
  }
  std::stable_sort(rest.begin(), rest.end(), [&](std::size_t a, std::size_t b) {
    return relevance[a] > relevance[b];
  });
  for (std::size_t i : rest) {
    if (sel.indices.size() >= k) break;
    sel.indices.push_back(i);
    sel.gains.push_back(kNegInf);
    taken[i] = 1;
    ++sel.fallback_fill;
  }
}

// Tie-aware preference between candidates a and b given their residuals.
bool residual_better(double da, double db, double qa, double qb, std::size_t a,
                     std::size_t b) {
  const double scale = std::max(std::abs(da), std::abs(db));
  if (std::abs(da - db) > kGainTieTolerance * scale) return da > db;
  if (qa != qb) return qa > qb;
  return a < b;
}

bool log_gain_better(double ga, double gb, double qa, double qb, std::size_t a,
                     std::size_t b) {
  if (ga != gb && !(std::abs(ga - gb) <= kGainTieTolerance)) return ga > gb;
  if (qa != qb) return qa > qb;
  return a < b;
}

void validate_k(std::size_t k, std::size_t n) {
  if (k < 1) throw ArgumentError("k must be at least 1");
  if (n == 0) throw ArgumentError("no candidates to select from");
}

}  // namespace

Selection fast_greedy_map(const KernelSpec& spec, std::size_t k) {
  const std::size_t n = spec.size();
  validate_k(k, n);
  const std::size_t target = std::min(k, n);
  const auto& q = spec.scores().q;
  const auto& ids = spec.scores().ids;

  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) {
    d2[i] = spec.entry(i, i);
    if (!std::isfinite(d2[i])) {
      throw NumericError("non-finite kernel entry at (" + ids[i] + ", " + ids[i] + ")");
    }
  }

  // coeffs[t * n + i]: component of candidate i along the t-th selected
  // direction (the incremental Cholesky factor, one row per step).
  std::vector<double> coeffs;
  coeffs.reserve(target * n);
  std::vector<double> row(n);
  std::vector<char> taken(n, 0);

  Selection sel;
  sel.indices.reserve(target);
  sel.gains.reserve(target);

  while (sel.indices.size() < target) {
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      if (best == n || residual_better(d2[i], d2[best], q[i], q[best], i, best)) best = i;
    }
    if (d2[best] < kExhaustionThreshold) break;

    const std::size_t j = best;
    const std::size_t step = sel.indices.size();
    sel.indices.push_back(j);
    sel.gains.push_back(std::log(d2[j]));
    taken[j] = 1;
    if (sel.indices.size() == target) break;

    kernel_row(spec, j, row);
    for (std::size_t i = 0; i < n; ++i) {
      if (!taken[i] && !std::isfinite(row[i])) {
        throw NumericError("non-finite kernel entry at (" + ids[j] + ", " + ids[i] + ")");
      }
    }
    // row <- L_j. - sum_s c_s[j] * c_s[.]
    for (std::size_t s = 0; s < step; ++s) {
      const double* c = coeffs.data() + s * n;
      const double cj = c[j];
      for (std::size_t i = 0; i < n; ++i) row[i] -= cj * c[i];
    }
    const double dj = std::sqrt(d2[j]);
    coeffs.resize((step + 1) * n, 0.0);
    double* e = coeffs.data() + step * n;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      e[i] = row[i] / dj;
      d2[i] -= e[i] * e[i];
    }
  }

  if (sel.indices.size() < target) fill_by_relevance(sel, taken, q, target);

  sel.items.reserve(sel.indices.size());
  for (std::size_t i : sel.indices) sel.items.push_back(ids[i]);
  return sel;
}

double log_det_subset(const DenseMatrix& l, const std::vector<std::size_t>& subset) {
  const std::size_t m = subset.size();
  std::vector<double> a(m * m);
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < m; ++c) a[r * m + c] = l(subset[r], subset[c]);
  }
  double logdet = 0.0;
  for (std::size_t c = 0; c < m; ++c) {
    double pivot = a[c * m + c];
    for (std::size_t t = 0; t < c; ++t) pivot -= a[c * m + t] * a[c * m + t];
    if (pivot < -kPsdPivotTolerance) {
      throw NumericError("kernel is not positive semi-definite (pivot " +
                         std::to_string(pivot) + ")");
    }
    if (pivot <= 0.0) return kNegInf;
    const double root = std::sqrt(pivot);
    a[c * m + c] = root;
    logdet += std::log(pivot);
    for (std::size_t r = c + 1; r < m; ++r) {
      double v = a[r * m + c];
      for (std::size_t t = 0; t < c; ++t) v -= a[r * m + t] * a[c * m + t];
      a[r * m + c] = v / root;
    }
  }
  return logdet;
}

double det_subset(const DenseMatrix& l, const std::vector<std::size_t>& subset) {
  const std::size_t m = subset.size();
  std::vector<double> a(m * m);
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < m; ++c) a[r * m + c] = l(subset[r], subset[c]);
  }
  double det = 1.0;
  for (std::size_t c = 0; c < m; ++c) {
    std::size_t p = c;
    for (std::size_t r = c + 1; r < m; ++r) {
      if (std::abs(a[r * m + c]) > std::abs(a[p * m + c])) p = r;
    }
    if (a[p * m + c] == 0.0) return 0.0;
    if (p != c) {
      for (std::size_t t = 0; t < m; ++t) std::swap(a[p * m + t], a[c * m + t]);
      det = -det;
    }
    const double pivot = a[c * m + c];
    det *= pivot;
    for (std::size_t r = c + 1; r < m; ++r) {
      const double f = a[r * m + c] / pivot;
      for (std::size_t t = c; t < m; ++t) a[r * m + t] -= f * a[c * m + t];
    }
  }
  return det;
}

Selection naive_greedy_map(const DenseMatrix& l, std::size_t k, std::size_t cap) {
  const std::size_t n = l.n;
  validate_k(k, n);
  if (n > cap) {
    throw SizeError("naive greedy limited to " + std::to_string(cap) + " candidates");
  }
  const std::size_t target = std::min(k, n);
  std::vector<double> diag(n);
  for (std::size_t i = 0; i < n; ++i) {
    diag[i] = l(i, i);
    if (!std::isfinite(diag[i])) throw NumericError("non-finite kernel diagonal");
  }
  const double exhausted_log = std::log(kExhaustionThreshold);

  Selection sel;
  std::vector<char> taken(n, 0);
  std::vector<std::size_t> subset;
  double base = 0.0;  // log det(L_Y); log det of the empty matrix is 0
  while (sel.indices.size() < target) {
    std::size_t best = n;
    double best_gain = kNegInf;
    subset = sel.indices;
    subset.push_back(0);
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      subset.back() = i;
      const double gain = log_det_subset(l, subset) - base;
      if (best == n || log_gain_better(gain, best_gain, diag[i], diag[best], i, best)) {
        best = i;
        best_gain = gain;
      }
    }
    if (!(best_gain >= exhausted_log)) break;
    sel.indices.push_back(best);
    sel.gains.push_back(best_gain);
    taken[best] = 1;
    base = log_det_subset(l, sel.indices);
  }

  if (sel.indices.size() < target) fill_by_relevance(sel, taken, diag, target);
  return sel;
}

ExactMap exhaustive_map(const DenseMatrix& l, std::size_t k) {
  const std::size_t n = l.n;
  if (n == 0 || n > 15) throw ArgumentError("exhaustive MAP needs 1..15 candidates");
  if (k < 1 || k > 5 || k > n) throw ArgumentError("exhaustive MAP needs 1 <= k <= min(5, M)");

  std::vector<std::size_t> combo(k);
  std::iota(combo.begin(), combo.end(), std::size_t{0});
  ExactMap best;
  bool have = false;
  while (true) {
    const double det = det_subset(l, combo);
    if (!have || det > best.det + 1e-12 * std::abs(best.det)) {
      best.indices = combo;
      best.det = det;
      have = true;
    }
    // next combination in lexicographic order
    std::size_t pos = k;
    while (pos > 0 && combo[pos - 1] == n - k + (pos - 1)) --pos;
    if (pos == 0) break;
    ++combo[pos - 1];
    for (std::size_t t = pos; t < k; ++t) combo[t] = combo[t - 1] + 1;
  }
  return best;
}

}  // namespace pdpp
