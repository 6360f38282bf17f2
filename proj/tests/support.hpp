#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pdpp/dpp.hpp"
#include "pdpp/kernel.hpp"

namespace pdpp::test {

// Unit-diagonal PSD similarity with entries in [0,1]: Gram matrix of random
// non-negative unit vectors.
inline std::vector<double> random_similarity(std::size_t m, std::mt19937_64& rng,
                                             std::size_t dim = 4) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::vector<double>> v(m, std::vector<double>(dim));
  for (auto& row : v) {
    double norm = 0.0;
    for (auto& x : row) {
      x = u(rng);
      norm += x * x;
    }
    norm = std::sqrt(norm);
    for (auto& x : row) x /= norm;
  }
  std::vector<double> s(m * m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      double dot = 0.0;
      for (std::size_t d = 0; d < dim; ++d) dot += v[i][d] * v[j][d];
      s[i * m + j] = i == j ? 1.0 : std::min(dot, 1.0);
    }
  }
  return s;
}

inline std::vector<ItemId> numbered_ids(std::size_t m) {
  std::vector<ItemId> ids;
  for (std::size_t i = 0; i < m; ++i) ids.push_back("i" + std::to_string(i));
  return ids;
}

struct RandomSpec {
  KernelSpec spec;
  std::vector<double> s;
};

inline RandomSpec random_spec(std::size_t m, double alpha, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uq(0.05, 1.0);
  std::vector<double> q(m);
  for (auto& x : q) x = uq(rng);
  auto s = random_similarity(m, rng);
  auto sim = std::make_shared<const DenseSimilarity>(m, s);
  return {KernelSpec(make_relevance(numbered_ids(m), q), sim, alpha), s};
}

// Kernel assembled directly from the closed form, independent of KernelSpec.
inline Eigen::MatrixXd oracle_kernel(const std::vector<double>& q, const std::vector<double>& s,
                                     double alpha) {
  const auto m = static_cast<Eigen::Index>(q.size());
  Eigen::MatrixXd l(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      l(i, j) = i == j ? q[i] * q[i] : alpha * q[i] * q[j] * s[i * q.size() + j];
    }
  }
  return l;
}

inline double oracle_det(const DenseMatrix& l, const std::vector<std::size_t>& subset) {
  const auto n = static_cast<Eigen::Index>(subset.size());
  Eigen::MatrixXd sub(n, n);
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = 0; b < n; ++b) sub(a, b) = l(subset[a], subset[b]);
  }
  return n == 0 ? 1.0 : sub.determinant();
}

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("pdpp_" + tag + "_" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

}  // namespace pdpp::test
