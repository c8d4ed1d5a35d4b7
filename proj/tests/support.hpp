#pragma once

// Oracles and generators shared by the unit tests. Nothing here calls into the
// library's transform code.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <span>
#include <vector>

namespace awd::testing {

using Vec = std::vector<double>;
using Dense = std::vector<Vec>;  // row-major, rows of equal length

inline Vec random_vec(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Vec v(n);
  for (double& x : v) x = d(rng);
  return v;
}

inline double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// max |a - b| / max(max |b|, floor)
inline double rel_err(std::span<const double> a, std::span<const double> b, double floor = 1e-8) {
  double scale = floor;
  for (double x : b) scale = std::max(scale, std::abs(x));
  return max_abs_diff(a, b) / scale;
}

inline Dense matmul(const Dense& a, const Dense& b) {
  Dense out(a.size(), Vec(b.front().size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < b.size(); ++k)
      for (std::size_t j = 0; j < b.front().size(); ++j) out[i][j] += a[i][k] * b[k][j];
  return out;
}

inline Vec matvec(const Dense& a, std::span<const double> x) {
  Vec out(a.size(), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j) out[i] += a[i][j] * x[j];
  return out;
}

inline Dense transpose(const Dense& a) {
  Dense out(a.front().size(), Vec(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) out[j][i] = a[i][j];
  return out;
}

inline Vec qmf(std::span<const double> h) {
  const std::size_t n = h.size();
  Vec g(n);
  for (std::size_t k = 0; k < n; ++k) g[k] = (k % 2 == 0 ? 1.0 : -1.0) * h[n - 1 - k];
  return g;
}

/// Rows are the periodized discrete basis vectors: row p of the level matrix
/// is the filter wrapped onto a length-L circle starting at 2p.
inline Dense periodized_rows(std::span<const double> f, std::size_t len) {
  Dense m(len / 2, Vec(len, 0.0));
  for (std::size_t p = 0; p < len / 2; ++p)
    for (std::size_t n = 0; n < f.size(); ++n) m[p][(2 * p + n) % len] += f[n];
  return m;
}

/// Full multilevel analysis matrix, rows ordered as approx then details from
/// the coarsest to the finest level.
inline Dense basis_matrix(std::span<const double> h, std::size_t len, int levels) {
  const Vec g = qmf(h);
  std::vector<Dense> details;  // finest first
  Dense lowpath;               // maps x to the current approximation
  std::size_t cur = len;
  for (int j = 0; j < levels; ++j) {
    const Dense lo = periodized_rows(h, cur);
    const Dense hi = periodized_rows(g, cur);
    if (j == 0) {
      details.push_back(hi);
      lowpath = lo;
    } else {
      details.push_back(matmul(hi, lowpath));
      lowpath = matmul(lo, lowpath);
    }
    cur /= 2;
  }
  Dense out = lowpath;
  for (auto it = details.rbegin(); it != details.rend(); ++it) out.insert(out.end(), it->begin(), it->end());
  return out;
}

/// Random orthonormal lowpass filter of length 2K from a rotation lattice of
/// the polyphase matrix. Angles sum to pi/4 so that sum h = sqrt 2.
inline Vec lattice_filter(std::size_t k, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-std::numbers::pi, std::numbers::pi);
  Vec theta(k);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < k; ++i) {
    theta[i] = u(rng);
    total += theta[i];
  }
  theta[k - 1] = std::numbers::pi / 4.0 - total;

  // E[r][c] are polynomials in z^-1.
  std::vector<std::vector<Vec>> e = {{{std::cos(theta[0])}, {std::sin(theta[0])}},
                                     {{-std::sin(theta[0])}, {std::cos(theta[0])}}};
  for (std::size_t i = 1; i < k; ++i) {
    for (auto& p : e[1]) p.insert(p.begin(), 0.0);  // delay the second row
    for (auto& p : e[0]) p.push_back(0.0);
    const double c = std::cos(theta[i]), s = std::sin(theta[i]);
    std::vector<std::vector<Vec>> next = e;
    for (std::size_t col = 0; col < 2; ++col) {
      for (std::size_t m = 0; m < e[0][col].size(); ++m) {
        next[0][col][m] = c * e[0][col][m] + s * e[1][col][m];
        next[1][col][m] = -s * e[0][col][m] + c * e[1][col][m];
      }
    }
    e = std::move(next);
  }
  Vec h(2 * k);
  for (std::size_t m = 0; m < k; ++m) {
    h[2 * m] = e[0][0][m];
    h[2 * m + 1] = e[0][1][m];
  }
  return h;
}

/// Central differences of a scalar function.
inline Vec fd_grad(const std::function<double(const Vec&)>& f, Vec x, double step = 1e-6) {
  Vec g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + step;
    const double fp = f(x);
    x[i] = x0 - step;
    const double fm = f(x);
    x[i] = x0;
    g[i] = (fp - fm) / (2.0 * step);
  }
  return g;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace awd::testing
