#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "awd/errors.hpp"
#include "awd/evalkit.hpp"
#include "models.hpp"
#include "support.hpp"

using namespace awd;
using awd::testing::Vec;

namespace {

// Exhaustive shift/flip search built from std::rotate and std::reverse.
double brute_distance(Vec a, Vec b) {
  const std::size_t len = std::max(a.size(), b.size());
  a.resize(len, 0.0);
  b.resize(len, 0.0);
  double best = 1e300;
  for (int flip = 0; flip < 2; ++flip) {
    Vec s = a;
    if (flip) std::reverse(s.begin(), s.end());
    for (std::size_t k = 0; k < len; ++k) {
      double d = 0.0;
      for (std::size_t i = 0; i < len; ++i) d += (s[i] - b[i]) * (s[i] - b[i]);
      best = std::min(best, std::sqrt(d));
      std::rotate(s.begin(), s.begin() + 1, s.end());
    }
  }
  return best;
}

WaveletCurve curve(Vec v, int iterations = 4) {
  WaveletCurve c;
  c.iterations = iterations;
  for (std::size_t i = 0; i < v.size(); ++i) c.grid.push_back(static_cast<double>(i) / 16.0);
  c.values = std::move(v);
  return c;
}

// Solves a small dense system by Gaussian elimination with partial pivoting.
Vec solve(testing::Dense a, Vec b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r][c]) > std::abs(a[p][c])) p = r;
    std::swap(a[c], a[p]);
    std::swap(b[c], b[p]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  Vec x(n);
  for (std::size_t c = n; c-- > 0;) {
    double s = b[c];
    for (std::size_t k = c + 1; k < n; ++k) s -= a[c][k] * x[k];
    x[c] = s / a[c][c];
  }
  return x;
}

// max_k |phi(t_k) - sqrt2 sum_n h[n] phi(2 t_k - n)| on the cascade grid.
double two_scale_error(const FilterPair& f, int iterations) {
  const auto p = cascade(f, iterations).phi.values;
  const long per = 1L << iterations;
  double err = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    double s = 0.0;
    for (std::size_t n = 0; n < f.size(); ++n) {
      const long idx = 2 * static_cast<long>(k) - static_cast<long>(n) * per;
      if (idx >= 0 && idx < static_cast<long>(p.size())) s += std::numbers::sqrt2 * f.lowpass()[n] * p[idx];
    }
    err = std::max(err, std::abs(s - p[k]));
  }
  return err;
}

}  // namespace

TEST_CASE("haar cascade is exact") {
  for (int it : {1, 4, 8}) {
    const auto c = cascade(standard_bank("haar"), it);
    const std::size_t n = std::size_t{1} << it;
    REQUIRE(c.phi.values.size() == n);
    REQUIRE(c.psi.values.size() == n);
    CHECK(c.phi.spacing() == std::ldexp(1.0, -it));
    for (std::size_t k = 0; k < n; ++k) {
      CHECK(c.phi.grid[k] == static_cast<double>(k) * c.phi.spacing());
      CHECK(std::abs(c.phi.values[k] - 1.0) < 1e-14);
      CHECK(std::abs(c.psi.values[k] - (k < n / 2 ? 1.0 : -1.0)) < 1e-14);
    }
  }
  CHECK_THROWS_AS(cascade(standard_bank("haar"), 0), InvalidArgument);
  CHECK_THROWS_AS(cascade(standard_bank("haar"), 17), InvalidArgument);
}

TEST_CASE("cascade integrals and two-scale relation") {
  for (const auto& name : {"db5", "sym5", "coif2"}) {
    const auto f = standard_bank(name);
    const auto c = cascade(f, 8);
    const double dt = c.phi.spacing();
    CHECK(c.phi.grid.size() == c.phi.values.size());
    CHECK(c.psi.grid.size() == c.psi.values.size());
    double ip = 0.0, iq = 0.0;
    for (double v : c.phi.values) ip += v * dt;
    for (double v : c.psi.values) iq += v * dt;
    CHECK(std::abs(ip - 1.0) < 1e-3);
    CHECK(std::abs(iq) < 1e-3);

    // Refinement error decays at first order in the grid spacing; only db5 is
    // smooth enough to be under 1e-2 at 8 iterations.
    const double e8 = two_scale_error(f, 8), e9 = two_scale_error(f, 9);
    CHECK(e9 < 0.6 * e8);
    if (std::string(name) == "db5") CHECK(e8 < 1e-2);
  }
  CHECK(two_scale_error(standard_bank("haar"), 8) < 1e-6);
}

TEST_CASE("wavelet_distance") {
  const auto db5 = cascade(standard_bank("db5"), 8).psi;
  CHECK(wavelet_distance(db5, db5) == 0.0);

  Vec shifted = db5.values;
  std::rotate(shifted.begin(), shifted.begin() + 5, shifted.end());
  WaveletCurve s = db5;
  s.values = shifted;
  CHECK(wavelet_distance(s, db5) < 1e-12);
  WaveletCurve fl = db5;
  std::reverse(fl.values.begin(), fl.values.end());
  CHECK(wavelet_distance(fl, db5) < 1e-12);

  const auto haar = cascade(standard_bank("haar"), 8).psi;
  const double d = wavelet_distance(haar, db5);
  CHECK(d > 0.0);
  CHECK(d == doctest::Approx(brute_distance(haar.values, db5.values)).epsilon(1e-12));
  CHECK(filter_distance(standard_bank("haar"), standard_bank("db5")) == d);

  std::mt19937_64 rng(61);
  for (int t = 0; t < 30; ++t) {
    const auto a = curve(testing::random_vec(8 + t % 5, rng));
    const auto b = curve(testing::random_vec(10, rng));
    const auto c = curve(testing::random_vec(6 + t % 7, rng));
    const double ab = wavelet_distance(a, b);
    CHECK(ab == doctest::Approx(brute_distance(a.values, b.values)).epsilon(1e-12));
    CHECK(std::abs(ab - wavelet_distance(b, a)) < 1e-12);
    CHECK(ab <= wavelet_distance(a, c) + wavelet_distance(c, b) + 1e-9);
  }
  CHECK_THROWS_AS(wavelet_distance(curve({1.0}, 3), curve({1.0}, 4)), ShapeError);
}

TEST_CASE("compression_rate") {
  std::mt19937_64 rng(62);
  std::vector<WaveletCoeffs> zeros(3, WaveletCoeffs::zeros(16, 2));
  CHECK(compression_rate(zeros, zeros, 1e-3) == 0.0);

  std::vector<WaveletCoeffs> ones = zeros;
  for (auto& c : ones) c.assign_flat(Vec(16, 1.0));
  CHECK(compression_rate(ones, ones, 1e-3) == 1.0);

  std::vector<WaveletCoeffs> c(4, WaveletCoeffs::zeros(16, 2)), a(4, WaveletCoeffs::zeros(16, 2));
  std::size_t expect = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    const Vec cv = testing::random_vec(16, rng, 0.01), av = testing::random_vec(16, rng, 0.01);
    c[i].assign_flat(cv);
    a[i].assign_flat(av);
    for (std::size_t k = 0; k < 16; ++k) expect += std::abs(cv[k]) > 0.005 && std::abs(av[k]) > 0.005;
  }
  CHECK(compression_rate(c, a, 0.005) == static_cast<double>(expect) / 64.0);
  double prev = 1.0;
  for (double th = 1e-4; th < 0.05; th *= 1.5) {
    const double r = compression_rate(c, a, th);
    CHECK(r <= prev);
    CHECK(r >= 0.0);
    prev = r;
  }
  CHECK_THROWS_AS(compression_rate(c, a, 0.0), InvalidArgument);
  CHECK_THROWS_AS(compression_rate(c, std::vector<WaveletCoeffs>(3, WaveletCoeffs::zeros(16, 2)), 1e-3), ShapeError);
  CHECK_THROWS_AS(compression_rate(c, std::vector<WaveletCoeffs>(4, WaveletCoeffs::zeros(16, 1)), 1e-3), ShapeError);
}

TEST_CASE("max_coeff_features") {
  std::mt19937_64 rng(63);
  const auto db5 = standard_bank("db5");
  const Vec x = testing::random_vec(256, rng);
  const auto c = dwt1d(x, db5, TransformConfig{5});
  const Vec f = max_coeff_features(c, 6);
  REQUIRE(f.size() == 30);
  // Coarse to fine, each block sorted descending and equal to the top of its band.
  for (int j = 5; j >= 1; --j) {
    Vec band = c.details[j - 1];
    std::sort(band.begin(), band.end(), std::greater<>());
    const std::size_t off = static_cast<std::size_t>(5 - j) * 6;
    for (std::size_t i = 0; i < 6; ++i) CHECK(f[off + i] == band[i]);
  }
  const Vec fm = max_coeff_features(c, 6, MaxMode::magnitude);
  for (double v : fm) CHECK(v >= 0.0);
  for (std::size_t i = 0; i < 30; ++i) CHECK(fm[i] >= std::abs(f[i]) - 1e-300);

  for (double v : max_coeff_features(dwt1d(Vec(256, 3.0), db5, TransformConfig{5}), 6)) CHECK(std::abs(v) < 1e-10);

  for (int t = 0; t < 5; ++t) {
    const Vec y = testing::random_vec(128, rng);
    Vec ys = y;
    std::rotate(ys.rbegin(), ys.rbegin() + 8, ys.rend());
    const auto a = max_coeff_features(dwt1d(y, db5, TransformConfig{3}), 4);
    const auto b = max_coeff_features(dwt1d(ys, db5, TransformConfig{3}), 4);
    CHECK(testing::max_abs_diff(a, b) < 1e-12);
  }
  CHECK_THROWS_AS(max_coeff_features(c, 9), ShapeError);
  CHECK_THROWS_AS(max_coeff_features(c, 0), InvalidArgument);
}

TEST_CASE("linear head") {
  std::mt19937_64 rng(64);
  std::vector<Vec> x;
  Vec y, noisy;
  const Vec w = {1.5, -2.0, 0.25, 0.0, 3.0};
  for (int i = 0; i < 50; ++i) {
    x.push_back(testing::random_vec(5, rng));
    y.push_back(testing::dot(x.back(), w) - 0.75);
    noisy.push_back(y.back() + testing::random_vec(1, rng, 0.5)[0]);
  }
  const auto exact = linear_head_fit(x, y, 0.0);
  double res = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) res += std::pow(exact.predict(x[i]) - y[i], 2);
  CHECK(std::sqrt(res) < 1e-8);
  CHECK(exact.intercept == doctest::Approx(-0.75));

  double mean = 0.0;
  for (double v : noisy) mean += v / 50.0;
  const auto flat = linear_head_fit(x, noisy, 1e14);
  for (double v : flat.weights) CHECK(std::abs(v) < 1e-9);
  CHECK(flat.predict(x[0]) == doctest::Approx(mean).epsilon(1e-8));

  // Normal equations on centred data, ridge on the weights only.
  const double ridge = 2.5;
  Vec mx(5, 0.0);
  for (const auto& r : x)
    for (std::size_t k = 0; k < 5; ++k) mx[k] += r[k] / 50.0;
  testing::Dense gram(5, Vec(5, 0.0));
  Vec rhs(5, 0.0);
  for (std::size_t i = 0; i < 50; ++i) {
    for (std::size_t a = 0; a < 5; ++a) {
      rhs[a] += (x[i][a] - mx[a]) * (noisy[i] - mean);
      for (std::size_t b = 0; b < 5; ++b) gram[a][b] += (x[i][a] - mx[a]) * (x[i][b] - mx[b]);
    }
  }
  for (std::size_t a = 0; a < 5; ++a) gram[a][a] += ridge;
  const Vec oracle = solve(gram, rhs);
  const auto head = linear_head_fit(x, noisy, ridge);
  CHECK(testing::max_abs_diff(head.weights, oracle) < 1e-9);
  CHECK(std::abs(head.intercept - (mean - testing::dot(mx, oracle))) < 1e-9);

  const Vec grid = {1e-6, 1.0, 1e6};
  const auto cv = ridge_cv(x, y, grid, 5);
  CHECK(cv.ridge == 1e-6);
  CHECK(cv.cv_r2 > 0.999);
  CHECK(cv.head.weights == linear_head_fit(x, y, 1e-6).weights);
  CHECK_THROWS_AS(ridge_cv(x, y, Vec{}, 5), InvalidArgument);
  CHECK_THROWS_AS(ridge_cv(x, y, grid, 1), InvalidArgument);
  CHECK_THROWS_AS(linear_head_fit(x, Vec(3, 0.0), 0.0), ShapeError);
  CHECK_THROWS_AS(exact.predict(Vec(4, 0.0)), ShapeError);
}

TEST_CASE("integrated gradients") {
  std::mt19937_64 rng(65);
  const auto f = standard_bank("db5");
  const auto m = testing::random_model({64, 8, 1}, Activation::tanh, rng);
  Matrix x(8, 8);
  x.data = testing::random_vec(64, rng);
  const auto c = dwt2d(x, f, TransformConfig{1});
  const Vec w = c.flatten();
  const int steps = 7;
  Vec oracle(w.size(), 0.0);
  for (int k = 1; k <= steps; ++k) {
    auto s = c;
    Vec ws = w;
    for (double& v : ws) v *= static_cast<double>(k) / steps;
    s.assign_flat(ws);
    const Vec g = saliency(m, s, f).flatten();
    for (std::size_t i = 0; i < w.size(); ++i) oracle[i] += w[i] * g[i] / steps;
  }
  CHECK(testing::max_abs_diff(integrated_gradients(m, c, f, steps).flatten(), oracle) < 1e-12);

  // Completeness holds approximately for the Riemann sum.
  double total = 0.0;
  for (double v : integrated_gradients(m, c, f, 400).flatten()) total += v;
  CHECK(total == doctest::Approx(forward(m, x.data) - forward(m, Vec(64, 0.0))).epsilon(1e-2));
  CHECK_THROWS_AS(integrated_gradients(m, c, f, 0), InvalidArgument);
}

TEST_CASE("activation_map") {
  std::mt19937_64 rng(66);
  const auto f = standard_bank("sym5");
  Matrix x(8, 8);
  x.data = testing::random_vec(64, rng);
  const auto m = testing::random_model({64, 8, 1}, Activation::relu, rng);
  const TransformConfig cfg{1};

  const auto full = activation_map(x, m, f, cfg, 64, 10);
  CHECK(testing::max_abs_diff(full.data, x.data) < 1e-10);
  for (double v : activation_map(x, m, f, cfg, 0, 10).data) CHECK(v == 0.0);
  CHECK_THROWS_AS(activation_map(x, m, f, cfg, 65, 10), InvalidArgument);

  // Linear teacher: IG is exactly coefficient times saliency.
  const Vec wt = testing::random_vec(64, rng);
  const auto lin = testing::linear_model(wt);
  const auto c = dwt2d(x, f, cfg);
  Matrix wm(8, 8);
  wm.data = wt;
  const Vec sal = dwt2d(wm, f, cfg).flatten();
  const Vec cf = c.flatten();
  std::size_t arg = 0;
  for (std::size_t i = 1; i < cf.size(); ++i)
    if (std::abs(cf[i] * sal[i]) > std::abs(cf[arg] * sal[arg])) arg = i;
  Vec one(cf.size(), 0.0);
  one[arg] = cf[arg];
  auto kept = c;
  kept.assign_flat(one);
  const Matrix expect = idwt2d(kept, f);
  CHECK(testing::max_abs_diff(activation_map(x, lin, f, cfg, 1).data, expect.data) < 1e-12);
}
