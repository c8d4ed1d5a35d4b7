#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "awd/errors.hpp"
#include "awd/peakcount.hpp"
#include "support.hpp"

using namespace awd;
using namespace awd::peaks;
using awd::testing::Vec;

namespace {

Matrix random_map(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  Matrix m(r, c);
  m.data = testing::random_vec(r * c, rng);
  return m;
}

std::vector<Peak> brute_peaks(const Matrix& m) {
  std::vector<Peak> out;
  for (std::size_t r = 1; r + 1 < m.rows; ++r) {
    for (std::size_t c = 1; c + 1 < m.cols; ++c) {
      bool is_max = true;
      for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc)
          if ((dr || dc) && !(m(r, c) > m(r + dr, c + dc))) is_max = false;
      if (is_max) out.push_back({r, c});
    }
  }
  return out;
}

// Roberts magnitude of the 2x2 block with top-left corner (r, c).
double block(const Matrix& m, std::size_t r, std::size_t c) {
  const double gx = m(r, c + 1) - m(r + 1, c);
  const double gy = m(r, c) - m(r + 1, c + 1);
  return std::sqrt(gx * gx + gy * gy);
}

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

PeakHistogram counts_histogram(const std::vector<std::size_t>& counts) {
  PeakHistogram h;
  h.counts = counts;
  for (std::size_t i = 0; i <= counts.size(); ++i) h.bin_edges.push_back(static_cast<double>(i));
  return h;
}

}  // namespace

TEST_CASE("find_peaks") {
  CHECK(find_peaks(Matrix(6, 7, 2.0)).empty());
  Matrix spike(5, 5, 0.0);
  spike(2, 2) = 1.0;
  CHECK(find_peaks(spike) == std::vector<Peak>{{2, 2}});
  // Boundary maxima are not peaks.
  Matrix edge(5, 5, 0.0);
  edge(0, 2) = 1.0;
  edge(4, 4) = 1.0;
  CHECK(find_peaks(edge).empty());
  // Plateaus are not strict maxima.
  Matrix plateau(5, 5, 0.0);
  plateau(2, 2) = plateau(2, 3) = 1.0;
  CHECK(find_peaks(plateau).empty());

  std::mt19937_64 rng(71);
  for (int t = 0; t < 20; ++t) {
    const auto m = random_map(16, 16 + t % 3, rng);
    const auto p = find_peaks(m);
    CHECK(p == brute_peaks(m));
    const auto h = steepness(m, p, PeakFilter::height());
    CHECK(h.skipped == 0);
    for (std::size_t i = 0; i < p.size(); ++i)
      for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc) CHECK(h.values[i] >= m(p[i].row + dr, p[i].col + dc));
  }
  CHECK_THROWS_AS(find_peaks(Matrix(2, 5)), ShapeError);
}

TEST_CASE("steepness filters") {
  Matrix m(7, 7, 0.0);
  m(3, 3) = 7.0;
  const std::vector<Peak> p = {{3, 3}};
  CHECK(steepness(m, p, PeakFilter::height()).values == Vec{7.0});

  m(3, 3) = 1.0;
  CHECK(steepness(m, p, PeakFilter::laplace()).values[0] == doctest::Approx(10.0 / 3.0).epsilon(1e-15));

  // Each of the four blocks containing an isolated spike has magnitude 1.
  CHECK(steepness(m, p, PeakFilter::roberts_cross()).values[0] == doctest::Approx(4.0));

  std::mt19937_64 rng(72);
  for (int t = 0; t < 10; ++t) {
    const auto r = random_map(12, 12, rng);
    const auto peaks = find_peaks(r);
    const auto lap = steepness(r, peaks, PeakFilter::laplace());
    const auto rob = steepness(r, peaks, PeakFilter::roberts_cross());
    Kernel3 k;
    for (double& v : k) v = testing::random_vec(1, rng)[0];
    const auto sub = steepness(r, peaks, PeakFilter::subfilter(k));
    REQUIRE(lap.values.size() == peaks.size());
    for (std::size_t i = 0; i < peaks.size(); ++i) {
      const std::size_t pr = peaks[i].row, pc = peaks[i].col;
      double l = 0.0, s = 0.0;
      for (std::size_t a = 0; a < 3; ++a) {
        for (std::size_t b = 0; b < 3; ++b) {
          l += kLaplace[3 * a + b] * r(pr + a - 1, pc + b - 1);
          s += k[3 * a + b] * r(pr + a - 1, pc + b - 1);
        }
      }
      CHECK(l < 0.0);
      CHECK(lap.values[i] == doctest::Approx(std::abs(l)).epsilon(1e-14));
      CHECK(sub.values[i] == doctest::Approx(s).epsilon(1e-14));
      const double blocks = block(r, pr - 1, pc - 1) + block(r, pr - 1, pc) + block(r, pr, pc - 1) + block(r, pr, pc);
      CHECK(rob.values[i] == doctest::Approx(blocks).epsilon(1e-14));
    }
  }

  // Footprints that leave the map are skipped.
  Matrix z(5, 5, 0.0);
  const std::vector<Peak> corner = {{0, 0}, {2, 2}, {4, 1}};
  const auto hs = steepness(z, corner, PeakFilter::height());
  CHECK(hs.values.size() == 3);
  const auto ls = steepness(z, corner, PeakFilter::laplace());
  CHECK(ls.values.size() == 1);
  CHECK(ls.skipped == 2);
  CHECK_THROWS_AS(steepness(z, std::vector<Peak>{{5, 0}}, PeakFilter::height()), ShapeError);
}

TEST_CASE("histogram") {
  const auto h = histogram(Vec{0.005, 0.015}, 0.0, 0.22, 0.01);
  REQUIRE(h.counts.size() == 22);
  REQUIRE(h.bin_edges.size() == 23);
  CHECK(h.counts[0] == 1);
  CHECK(h.counts[1] == 1);
  for (std::size_t i = 2; i < 22; ++i) CHECK(h.counts[i] == 0);
  for (std::size_t i = 1; i < h.bin_edges.size(); ++i)
    CHECK(h.bin_edges[i] - h.bin_edges[i - 1] == doctest::Approx(0.01).epsilon(1e-12));

  const auto e = histogram(Vec{}, 0.0, 0.22, 0.01);
  for (auto c : e.counts) CHECK(c == 0);

  std::mt19937_64 rng(73);
  std::uniform_real_distribution<double> u(0.0, 0.22);
  Vec v(1000);
  for (double& x : v) x = u(rng);
  const auto full = histogram(v, 0.0, 0.22, 0.01);
  std::size_t total = 0;
  for (auto c : full.counts) total += c;
  CHECK(total == 1000);

  // Left-closed, right-open; outside values are dropped.
  const auto edges = histogram(Vec{0.0, 0.1, 0.22, -0.01, 0.5}, 0.0, 0.2, 0.1);
  CHECK(edges.counts == std::vector<std::size_t>{1, 1});
  CHECK_THROWS_AS(histogram(v, 0.0, 0.22, 0.03), InvalidArgument);
  CHECK_THROWS_AS(histogram(v, 0.2, 0.1, 0.01), InvalidArgument);
  CHECK_THROWS_AS(histogram(v, 0.0, 0.2, 0.0), InvalidArgument);
}

TEST_CASE("fit_classes") {
  std::mt19937_64 rng(74);
  std::poisson_distribution<std::size_t> pois(6.0);
  LabeledHistograms same{"a", {}};
  for (int i = 0; i < 4; ++i) same.histograms.push_back(counts_histogram({1, 2, 3}));
  LabeledHistograms pair{"b", {counts_histogram({1, 4, 0}), counts_histogram({2, 1, 5})}};
  LabeledHistograms big{"c", {}};
  for (int i = 0; i < 50; ++i) {
    std::vector<std::size_t> c(5);
    for (auto& x : c) x = pois(rng);
    big.histograms.push_back(counts_histogram(c));
  }
  const std::vector<LabeledHistograms> groups = {same, pair};
  const auto models = fit_classes(groups);
  REQUIRE(models.size() == 2);
  CHECK(models[0].label == "a");
  CHECK(models[0].mean == Vec{1, 2, 3});
  for (double v : models[0].covariance.data) CHECK(v == 0.0);
  for (double v : models[0].inverse.data) CHECK(std::isfinite(v));
  CHECK(models[1].mean == Vec{1.5, 2.5, 2.5});
  const std::vector<LabeledHistograms> mixed = {same, big};
  CHECK_THROWS_AS(fit_classes(mixed), ShapeError);

  // Welford streaming recomputation.
  Vec mean(5, 0.0);
  testing::Dense m2(5, Vec(5, 0.0));
  for (std::size_t n = 0; n < 50; ++n) {
    const Vec x = big.histograms[n].as_vector();
    Vec delta(5);
    for (std::size_t i = 0; i < 5; ++i) {
      delta[i] = x[i] - mean[i];
      mean[i] += delta[i] / static_cast<double>(n + 1);
    }
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 5; ++j) m2[i][j] += delta[i] * (x[j] - mean[j]);
  }
  const std::vector<LabeledHistograms> big_group = {big};
  const auto c = fit_classes(big_group).front();
  CHECK(testing::max_abs_diff(c.mean, mean) < 1e-10);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      CHECK(std::abs(c.covariance(i, j) - m2[i][j] / 49.0) < 1e-10);
      CHECK(std::abs(c.covariance(i, j) - c.covariance(j, i)) < 1e-12);
    }
  }

  const std::vector<LabeledHistograms> single = {{"x", {counts_histogram({1, 2})}}};
  CHECK_THROWS_AS(fit_classes(single), InvalidArgument);
}

TEST_CASE("Mahalanobis distance and classification") {
  std::mt19937_64 rng(75);
  const std::size_t dim = 6;
  testing::Dense a(dim, Vec(dim));
  for (auto& r : a) r = testing::random_vec(dim, rng);
  Matrix cov(dim, dim);
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j < dim; ++j) {
      for (std::size_t k = 0; k < dim; ++k) cov(i, j) += a[i][k] * a[j][k];
      if (i == j) cov(i, j) += 0.5;
    }
  const Vec mu = testing::random_vec(dim, rng);
  const auto model = make_class_model("m", mu, cov, 0.0);
  CHECK(model.distance(mu) == doctest::Approx(0.0));

  testing::Dense cd(dim, Vec(dim));
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j < dim; ++j) cd[i][j] = cov(i, j);
  for (int t = 0; t < 10; ++t) {
    const Vec h = testing::random_vec(dim, rng);
    Vec d(dim);
    for (std::size_t i = 0; i < dim; ++i) d[i] = h[i] - mu[i];
    const double oracle = testing::dot(d, solve(cd, d));
    CHECK(model.distance(h) == doctest::Approx(oracle).epsilon(1e-10));

    // Re-binning h -> B h, mu -> B mu, cov -> B cov B^T leaves d unchanged.
    testing::Dense b(dim, Vec(dim));
    for (auto& r : b) r = testing::random_vec(dim, rng);
    Matrix bcov(dim, dim);
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t j = 0; j < dim; ++j)
        for (std::size_t k = 0; k < dim; ++k)
          for (std::size_t l = 0; l < dim; ++l) bcov(i, j) += b[i][k] * cov(k, l) * b[j][l];
    const auto rebinned = make_class_model("m", testing::matvec(b, mu), bcov, 0.0);
    CHECK(rebinned.distance(testing::matvec(b, h)) == doctest::Approx(model.distance(h)).epsilon(1e-8));
  }
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j < dim; ++j) CHECK(std::abs(model.inverse(i, j) - model.inverse(j, i)) < 1e-12);
  CHECK_THROWS_AS(model.distance(Vec(dim + 1, 0.0)), ShapeError);
  CHECK_THROWS_AS(make_class_model("z", Vec(3, 0.0), Matrix(3, 3, 0.0), 0.0), InvalidArgument);

  // Single class always wins; means classify to themselves.
  const std::vector<ClassModel> one = {model};
  CHECK(classify(counts_histogram({9, 9, 9, 9, 9, 9}), one) == "m");
}

TEST_CASE("two Poisson histogram classes") {
  std::mt19937_64 rng(76);
  const Vec lo_rate = {8, 12, 10, 6, 4, 2}, hi_rate = {3, 6, 12, 12, 10, 7};
  const auto draw = [&](const Vec& rate) {
    std::vector<std::size_t> c;
    for (double r : rate) c.push_back(std::poisson_distribution<std::size_t>(r)(rng));
    return counts_histogram(c);
  };
  std::vector<LabeledHistograms> train = {{"lo", {}}, {"hi", {}}};
  for (int i = 0; i < 300; ++i) {
    train[0].histograms.push_back(draw(lo_rate));
    train[1].histograms.push_back(draw(hi_rate));
  }
  const auto models = fit_classes(train);
  const std::vector<ClassModel> swapped = {models[1], models[0]};
  std::size_t correct = 0, total = 0;
  for (int i = 0; i < 400; ++i) {
    const bool is_hi = i % 2 == 1;
    const auto h = draw(is_hi ? hi_rate : lo_rate);
    const std::string& got = classify(h, models);
    // Exhaustive evaluation of both distances.
    const double d0 = models[0].distance(h.as_vector()), d1 = models[1].distance(h.as_vector());
    CHECK(got == (d1 < d0 ? "hi" : "lo"));
    CHECK(classify(h, swapped) == got);
    correct += got == (is_hi ? "hi" : "lo");
    ++total;
  }
  CHECK(static_cast<double>(correct) / static_cast<double>(total) > 0.95);

  // Ties go to the first class.
  const auto twin = make_class_model("twin", models[0].mean, models[0].covariance);
  const std::vector<ClassModel> tied = {models[0], twin};
  CHECK(classify(counts_histogram({1, 1, 1, 1, 1, 1}), tied) == "lo");
  CHECK_THROWS_AS(classify(counts_histogram({1, 1}), models), ShapeError);
}

TEST_CASE("extract_subfilters") {
  CHECK_THROWS_AS(extract_subfilters(standard_bank("haar")), InvalidFilter);
  for (const auto& name : {"db5", "sym5", "coif2"}) {
    const auto f = standard_bank(name);
    const auto s = extract_subfilters(f);
    const auto& h = f.lowpass();
    const auto& g = f.highpass();
    const std::array<std::pair<const Vec*, const Vec*>, 4> pairs = {{{&h, &h}, {&h, &g}, {&g, &h}, {&g, &g}}};
    const std::array<const Kernel3*, 4> kernels = {&s.ll, &s.lh, &s.hl, &s.hh};
    const std::size_t n = h.size();
    for (std::size_t q = 0; q < 4; ++q) {
      const Vec& first = *pairs[q].first;
      const Vec& second = *pairs[q].second;
      double best = -1.0;
      for (std::size_t r = 0; r + 3 <= n; ++r) {
        for (std::size_t c = 0; c + 3 <= n; ++c) {
          double mass = 0.0;
          for (std::size_t a = 0; a < 3; ++a)
            for (std::size_t b = 0; b < 3; ++b) mass += std::pow(first[r + a] * second[c + b], 2);
          best = std::max(best, mass);
        }
      }
      const std::size_t r0 = s.row_offset[q], c0 = s.col_offset[q];
      double mass = 0.0;
      for (std::size_t a = 0; a < 3; ++a) {
        for (std::size_t b = 0; b < 3; ++b) {
          CHECK((*kernels[q])[3 * a + b] == first[r0 + a] * second[c0 + b]);
          mass += std::pow((*kernels[q])[3 * a + b], 2);
        }
      }
      CHECK(mass == doctest::Approx(best).epsilon(1e-12));
    }
  }
}

TEST_CASE("subfilter ties go to the smallest window") {
  // A symmetric filter gives mirror-image windows of equal mass.
  const double a = 0.1, b = 0.6;
  const Vec h = {a, b, b, a};
  const auto s = extract_subfilters(FilterPair(h));
  CHECK(s.row_offset[0] == 0);
  CHECK(s.col_offset[0] == 0);
}

TEST_CASE("peak counter on hand-built maps") {
  // Two classes: isolated spikes of height 0.05 or 0.15 on a zero background.
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<std::size_t> pos(2, 29);
  const auto make = [&](double height) {
    Matrix m(32, 32, 0.0);
    for (int k = 0; k < 6; ++k) m(pos(rng), pos(rng)) = height + 0.001 * testing::random_vec(1, rng)[0];
    return m;
  };
  std::vector<LabeledMaps> train = {{"low", {}}, {"high", {}}}, test = train;
  for (int i = 0; i < 20; ++i) {
    train[0].maps.push_back(make(0.05));
    train[1].maps.push_back(make(0.15));
    test[0].maps.push_back(make(0.05));
    test[1].maps.push_back(make(0.15));
  }
  const BinSpec bins;
  const auto models = fit_peak_counter(train, PeakFilter::height(), bins);
  const auto conf = evaluate_peak_counter(test, models, PeakFilter::height(), bins);
  CHECK(conf.labels == std::vector<std::string>{"low", "high"});
  CHECK(conf.counts[0][0] + conf.counts[0][1] == 20);
  CHECK(conf.accuracy() == 1.0);

  const Vec los = {0.0, 0.04}, his = {0.2, 0.22};
  const auto chosen = select_bin_range(train, test, PeakFilter::height(), los, his, 22);
  CHECK(chosen.lo == 0.0);
  CHECK(chosen.hi == 0.2);
  CHECK(chosen.width == doctest::Approx(0.2 / 22.0));
}
