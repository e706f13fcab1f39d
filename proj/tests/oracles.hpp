#pragma once

// Straightforward reference computations, written independently of the
// library's implementations and shared by unit and acceptance tests.

#include <cmath>
#include <limits>
#include <vector>

#include "gogan/tensor.hpp"

namespace gogan::testing {

inline double oracle_psnr(const Tensor& a, const Tensor& b) {
  long double se = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) se += static_cast<long double>(a[i] - b[i]) * (a[i] - b[i]);
  if (se == 0.0L) return std::numeric_limits<double>::infinity();
  const long double mse = se / a.size();
  return static_cast<double>(-10.0L * std::log10(mse));
}

// 11x11 Gaussian (sigma 1.5) SSIM with a full 2-D window per position and
// explicit means, variances and covariance.
inline double oracle_ssim(const Tensor& a, const Tensor& b) {
  constexpr int n = 11;
  const double sigma = 1.5, c1 = 1e-4, c2 = 9e-4;
  double w1[n], total = 0.0;
  for (int i = 0; i < n; ++i) {
    w1[i] = std::exp(-((i - 5.0) * (i - 5.0)) / (2.0 * sigma * sigma));
    total += w1[i];
  }
  double w[n][n];
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) w[i][j] = w1[i] * w1[j] / (total * total);
  }
  const int h = static_cast<int>(a.rows()), wd = static_cast<int>(a.cols());
  double acc = 0.0;
  int count = 0;
  for (int r = 0; r + n <= h; ++r) {
    for (int c = 0; c + n <= wd; ++c) {
      double ma = 0, mb = 0;
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          ma += w[i][j] * a.at(r + i, c + j);
          mb += w[i][j] * b.at(r + i, c + j);
        }
      }
      double va = 0, vb = 0, cov = 0;
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          const double da = a.at(r + i, c + j) - ma, db = b.at(r + i, c + j) - mb;
          va += w[i][j] * da * da;
          vb += w[i][j] * db * db;
          cov += w[i][j] * da * db;
        }
      }
      acc += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  }
  return acc / count;
}

// sum over observed pixels of |g - y|, for a flat generated image g.
inline double oracle_contextual(const std::vector<double>& g, const Tensor& y, const Tensor& mask) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (mask[i] != 0.0) s += std::abs(g[i] - y[i]);
  }
  return s;
}

}  // namespace gogan::testing
