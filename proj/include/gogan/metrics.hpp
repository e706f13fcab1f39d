#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "gogan/errors.hpp"
#include "gogan/tensor.hpp"

namespace gogan {

namespace detail {

inline void require_same_image_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw UsageError(std::string(what) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

}  // namespace detail

// Peak signal-to-noise ratio in dB. Identical images give +infinity.
inline double psnr(const Tensor& a, const Tensor& b, double peak = 1.0) {
  detail::require_same_image_shape(a, b, "psnr");
  if (a.empty()) throw DomainError("psnr of empty images");
  double se = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    se += d * d;
  }
  const double mse = se / static_cast<double>(a.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

struct SsimOptions {
  std::size_t window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

// Normalized 1-D Gaussian taps.
inline std::vector<double> gaussian_taps(std::size_t n, double sigma) {
  std::vector<double> w(n);
  const double center = (static_cast<double>(n) - 1.0) / 2.0;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(i) - center;
    w[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    total += w[i];
  }
  for (double& v : w) v /= total;
  return w;
}

// Mean structural similarity over every position where the Gaussian
// window fits entirely inside the image (no padding).
inline double ssim(const Tensor& a, const Tensor& b, const SsimOptions& opt = {}) {
  detail::require_same_image_shape(a, b, "ssim");
  if (a.rank() != 2) throw DimensionError("ssim expects single-channel H x W images");
  const std::size_t h = a.rows(), w = a.cols(), n = opt.window;
  if (h < n || w < n) throw DomainError("ssim: image smaller than the " + std::to_string(n) + "x" + std::to_string(n) + " window");

  const std::vector<double> taps = gaussian_taps(n, opt.sigma);
  const std::size_t oh = h - n + 1, ow = w - n + 1;

  // Separable valid-mode filtering of a, b, a^2, b^2, ab.
  auto filter = [&](auto pixel) {
    std::vector<double> horiz(h * ow, 0.0);
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t c = 0; c < ow; ++c) {
        double s = 0.0;
        for (std::size_t k = 0; k < n; ++k) s += taps[k] * pixel(r, c + k);
        horiz[r * ow + c] = s;
      }
    }
    std::vector<double> out(oh * ow, 0.0);
    for (std::size_t r = 0; r < oh; ++r) {
      for (std::size_t c = 0; c < ow; ++c) {
        double s = 0.0;
        for (std::size_t k = 0; k < n; ++k) s += taps[k] * horiz[(r + k) * ow + c];
        out[r * ow + c] = s;
      }
    }
    return out;
  };

  const auto mu_a = filter([&](std::size_t r, std::size_t c) { return a.at(r, c); });
  const auto mu_b = filter([&](std::size_t r, std::size_t c) { return b.at(r, c); });
  const auto aa = filter([&](std::size_t r, std::size_t c) { return a.at(r, c) * a.at(r, c); });
  const auto bb = filter([&](std::size_t r, std::size_t c) { return b.at(r, c) * b.at(r, c); });
  const auto ab = filter([&](std::size_t r, std::size_t c) { return a.at(r, c) * b.at(r, c); });

  const double c1 = (opt.k1 * opt.dynamic_range) * (opt.k1 * opt.dynamic_range);
  const double c2 = (opt.k2 * opt.dynamic_range) * (opt.k2 * opt.dynamic_range);
  double total = 0.0;
  for (std::size_t i = 0; i < oh * ow; ++i) {
    const double var_a = aa[i] - mu_a[i] * mu_a[i];
    const double var_b = bb[i] - mu_b[i] * mu_b[i];
    const double cov = ab[i] - mu_a[i] * mu_b[i];
    total += ((2.0 * mu_a[i] * mu_b[i] + c1) * (2.0 * cov + c2)) /
             ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (var_a + var_b + c2));
  }
  return total / static_cast<double>(oh * ow);
}

}  // namespace gogan
