#include "awd/constraints.hpp"

#include <cmath>
#include <numbers>

#include "awd/errors.hpp"

namespace awd {

namespace {

// |H(w)|^2 pieces at w = 2 pi k / N for k = 1..N (k = N aliases w = 0).
struct Spectrum {
  std::vector<double> re, im;  // H(w_k) = re + i im, with H(w) = sum_n h[n] e^{-iwn}
};

Spectrum dft(std::span<const double> h) {
  const std::size_t n = h.size();
  Spectrum s{std::vector<double>(n + 1), std::vector<double>(n + 1)};
  for (std::size_t k = 1; k <= n; ++k) {
    const double w = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    double re = 0.0, im = 0.0;
    for (std::size_t m = 0; m < n; ++m) {
      re += h[m] * std::cos(w * static_cast<double>(m));
      im -= h[m] * std::sin(w * static_cast<double>(m));
    }
    s.re[k] = re;
    s.im[k] = im;
  }
  return s;
}

// Index of w + pi on the grid: k + N/2 wrapped into 1..N.
std::size_t opposite(std::size_t k, std::size_t n) {
  std::size_t o = k + n / 2;
  return o > n ? o - n : o;
}

double autocorr(std::span<const double> h, std::size_t lag) {
  double s = 0.0;
  for (std::size_t m = lag; m < h.size(); ++m) s += h[m] * h[m - lag];
  return s;
}

}  // namespace

PenaltyBreakdown wavelet_penalties(const FilterPair& filters) {
  const auto& h = filters.lowpass();
  const auto& g = filters.highpass();
  const std::size_t n = h.size();
  PenaltyBreakdown p;

  double sh = 0.0, sg = 0.0, norm2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sh += h[i];
    sg += g[i];
    norm2 += h[i] * h[i];
  }
  p.sum_h = (sh - std::numbers::sqrt2) * (sh - std::numbers::sqrt2);
  p.sum_g = sg * sg;
  p.unit_norm = (norm2 - 1.0) * (norm2 - 1.0);

  const Spectrum s = dft(h);
  for (std::size_t k = 1; k <= n; ++k) {
    const std::size_t o = opposite(k, n);
    const double r = s.re[k] * s.re[k] + s.im[k] * s.im[k] + s.re[o] * s.re[o] + s.im[o] * s.im[o] - 2.0;
    p.cmf += r * r;
  }

  for (std::size_t k = 0; 2 * k <= n - 1; ++k) {
    const double r = autocorr(h, 2 * k) - (k == 0 ? 1.0 : 0.0);
    p.shift_orth += r * r;
  }
  p.total = p.validity();
  return p;
}

double sparsity_term(const WaveletCoeffs& coeffs, double lambda) {
  if (!(lambda >= 0.0)) throw InvalidArgument("sparsity weight lambda must be >= 0");
  double s = 0.0;
  for (double v : coeffs.approx) s += std::abs(v);
  for (const auto& d : coeffs.details) {
    for (double v : d) s += std::abs(v);
  }
  return lambda * s;
}

double sparsity_term(const WaveletCoeffs2D& coeffs, double lambda) {
  if (!(lambda >= 0.0)) throw InvalidArgument("sparsity weight lambda must be >= 0");
  double s = 0.0;
  for (double v : coeffs.flatten()) s += std::abs(v);
  return lambda * s;
}

PenaltyBreakdown wavelet_loss(const FilterPair& filters, std::span<const double> x, double lambda,
                              const TransformConfig& config) {
  if (!(lambda >= 0.0)) throw InvalidArgument("sparsity weight lambda must be >= 0");
  PenaltyBreakdown p = wavelet_penalties(filters);
  p.sparsity = sparsity_term(dwt1d(x, filters, config), lambda);
  p.total = p.sparsity + p.validity();
  return p;
}

std::vector<double> penalty_grad(const FilterPair& filters) {
  const auto& h = filters.lowpass();
  const auto& g = filters.highpass();
  const std::size_t n = h.size();
  std::vector<double> grad(n, 0.0);

  double sh = 0.0, sg = 0.0, norm2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sh += h[i];
    sg += g[i];
    norm2 += h[i] * h[i];
  }
  // d(sum g)/dh[m] = (-1)^(N-1-m).
  for (std::size_t m = 0; m < n; ++m) {
    const double dsg = ((n - 1 - m) % 2 == 0) ? 1.0 : -1.0;
    grad[m] += 2.0 * (sh - std::numbers::sqrt2) + 2.0 * sg * dsg + 4.0 * (norm2 - 1.0) * h[m];
  }

  // d|H(w)|^2/dh[m] = 2 (re cos(wm) - im sin(wm)).
  const Spectrum s = dft(h);
  auto dpower = [&](std::size_t k, std::size_t m) {
    const double w = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    return 2.0 * (s.re[k] * std::cos(w * static_cast<double>(m)) - s.im[k] * std::sin(w * static_cast<double>(m)));
  };
  for (std::size_t k = 1; k <= n; ++k) {
    const std::size_t o = opposite(k, n);
    const double r = s.re[k] * s.re[k] + s.im[k] * s.im[k] + s.re[o] * s.re[o] + s.im[o] * s.im[o] - 2.0;
    for (std::size_t m = 0; m < n; ++m) grad[m] += 2.0 * r * (dpower(k, m) + dpower(o, m));
  }

  for (std::size_t k = 0; 2 * k <= n - 1; ++k) {
    const std::size_t lag = 2 * k;
    const double r = autocorr(h, lag) - (k == 0 ? 1.0 : 0.0);
    for (std::size_t m = 0; m < n; ++m) {
      double d = 0.0;
      if (m >= lag) d += h[m - lag];
      if (m + lag < n) d += h[m + lag];
      grad[m] += 2.0 * r * d;
    }
  }
  return grad;
}

}  // namespace awd
