#include <doctest.h>

#include <cmath>

#include "awd/errors.hpp"
#include "awd/trim.hpp"
#include "models.hpp"
#include "support.hpp"

using namespace awd;
using awd::testing::Vec;

namespace {

// Interpretation loss written with explicit basis matrices:
// ||A grad f(A^T A x)||_1, where A is the periodized analysis matrix of h.
double matrix_interp_loss(const TeacherModel& m, const Vec& h, const Vec& x, int levels) {
  const auto a = testing::basis_matrix(h, x.size(), levels);
  const Vec w = testing::matvec(a, x);
  const Vec rec = testing::matvec(testing::transpose(a), w);
  const Vec s = testing::matvec(a, input_grad(m, rec));
  double total = 0.0;
  for (double v : s) total += std::abs(v);
  return total;
}

double min_abs(const Vec& v) {
  double m = 1e300;
  for (double x : v) m = std::min(m, std::abs(x));
  return m;
}

}  // namespace

TEST_CASE("reparam_forward") {
  std::mt19937_64 rng(41);
  const auto m = testing::random_model({16, 8, 1}, Activation::tanh, rng);
  for (const auto& name : {"haar", "db5", "sym5", "coif2"}) {
    const auto f = standard_bank(name);
    const TransformConfig cfg{2};
    const Vec x = testing::random_vec(16, rng);
    const Vec zero(16, 0.0);
    CHECK(reparam_forward(m, dwt1d(x, f, cfg), f, zero) == doctest::Approx(forward(m, x)).epsilon(1e-10));
    CHECK(reparam_forward(m, WaveletCoeffs::zeros(16, 2), f, x) == doctest::Approx(forward(m, x)).epsilon(1e-12));

    const Vec x1 = testing::random_vec(16, rng);
    Vec r(16);
    for (std::size_t i = 0; i < 16; ++i) r[i] = x[i] - x1[i];
    CHECK(reparam_forward(m, dwt1d(x1, f, cfg), f, r) == doctest::Approx(forward(m, x)).epsilon(1e-10));

    // Exact reconstruction: the residual is zero.
    const Vec back = idwt1d(dwt1d(x, f, cfg), f);
    for (std::size_t i = 0; i < 16; ++i) CHECK(std::abs(back[i] - x[i]) < 1e-12);
  }
  CHECK_THROWS_AS(reparam_forward(m, WaveletCoeffs::zeros(8, 1), standard_bank("haar"), Vec(8, 0.0)), ShapeError);
  CHECK_THROWS_AS(reparam_forward(m, WaveletCoeffs::zeros(16, 1), standard_bank("haar"), Vec(8, 0.0)), ShapeError);
}

TEST_CASE("saliency of a linear teacher is the transformed weight vector") {
  std::mt19937_64 rng(42);
  for (const auto& name : {"haar", "db5", "sym5", "coif2"}) {
    const auto f = standard_bank(name);
    const Vec w = testing::random_vec(32, rng);
    const auto m = testing::linear_model(w, 0.7);
    const auto a = testing::basis_matrix(f.lowpass(), 32, 3);
    const Vec expect = testing::matvec(a, w);
    for (int t = 0; t < 3; ++t) {
      const Vec x = testing::random_vec(32, rng);
      const auto c = dwt1d(x, f, TransformConfig{3});
      const Vec s = saliency(m, c, f).flatten();
      CHECK(testing::max_abs_diff(s, expect) < 1e-12);
      // Completeness: <saliency, coeffs> = f(x) - f(0).
      CHECK(std::abs(testing::dot(s, c.flatten()) - (forward(m, x) - 0.7)) < 1e-9);
    }
  }
  Layer zl{Matrix(4, 16), Vec(4, 0.0), Activation::relu};
  Layer zo{Matrix(1, 4), Vec(1, 0.0), Activation::identity};
  const TeacherModel zero({zl, zo});
  const auto c = dwt1d(testing::random_vec(16, rng), standard_bank("db5"), TransformConfig{2});
  for (double v : saliency(zero, c, standard_bank("db5")).flatten()) CHECK(v == 0.0);
}

TEST_CASE("saliency layout and adjoint identity") {
  std::mt19937_64 rng(43);
  for (const auto& name : {"haar", "db5", "sym5", "coif2"}) {
    const auto f = standard_bank(name);
    for (int levels = 1; levels <= 3; ++levels) {
      const auto m = testing::random_model({32, 12, 12, 1}, Activation::relu, rng);
      const Vec x = testing::random_vec(32, rng);
      const auto c = dwt1d(x, f, TransformConfig{levels});
      const auto s = saliency(m, c, f);
      REQUIRE(s.levels() == c.levels());
      CHECK(s.approx.size() == c.approx.size());
      for (int j = 0; j < levels; ++j) CHECK(s.details[j].size() == c.details[j].size());
      const auto viaGrad = dwt1d(input_grad(m, x), f, TransformConfig{levels});
      CHECK(testing::max_abs_diff(s.flatten(), viaGrad.flatten()) < 1e-10);
    }
  }
}

TEST_CASE("saliency matches finite differences in coefficient space") {
  std::mt19937_64 rng(44);
  const auto f = standard_bank("db5");
  for (int t = 0; t < 10; ++t) {
    const auto m = testing::random_model({16, 10, 1}, Activation::tanh, rng);
    const Vec x = testing::random_vec(16, rng);
    const auto c = dwt1d(x, f, TransformConfig{2});
    const auto fn = [&](const Vec& flat) {
      auto cc = c;
      cc.assign_flat(flat);
      return reparam_forward(m, cc, f, Vec(16, 0.0));
    };
    CHECK(testing::rel_err(saliency(m, c, f).flatten(), testing::fd_grad(fn, c.flatten())) < 1e-5);
  }
}

TEST_CASE("2D saliency") {
  std::mt19937_64 rng(45);
  const auto f = standard_bank("sym5");
  const auto m = testing::random_model({64, 10, 1}, Activation::tanh, rng);
  Matrix x(8, 8);
  x.data = testing::random_vec(64, rng);
  const auto c = dwt2d(x, f, TransformConfig{1});
  const auto s = saliency(m, c, f);
  Matrix g(8, 8);
  g.data = input_grad(m, x.data);
  CHECK(testing::max_abs_diff(s.flatten(), dwt2d(g, f, TransformConfig{1}).flatten()) < 1e-10);
}

TEST_CASE("interpretation loss matches the basis-matrix form") {
  std::mt19937_64 rng(46);
  for (const auto& name : {"haar", "db5"}) {
    const auto f = standard_bank(name);
    const auto m = testing::random_model({16, 8, 1}, Activation::tanh, rng);
    const Vec x = testing::random_vec(16, rng);
    CHECK(interpretation_loss(m, x, f, TransformConfig{2}) ==
          doctest::Approx(matrix_interp_loss(m, f.lowpass(), x, 2)).epsilon(1e-12));
  }
}

TEST_CASE("saliency_grad_filters matches finite differences") {
  std::mt19937_64 rng(47);
  int checked = 0;
  for (int t = 0; t < 40 && checked < 24; ++t) {
    const std::size_t len = t % 2 == 0 ? 8 : 16;
    const int levels = t % 3 == 0 ? 2 : 1;
    Vec h;
    if (t % 4 == 0) h = standard_bank("haar").lowpass();
    else h = testing::lattice_filter(1 + t % 3, rng);
    // Move off the orthogonal manifold so the synthesis path is exercised too.
    for (double& v : h) v += 0.05 * testing::random_vec(1, rng)[0];
    const auto act = t % 2 == 0 ? Activation::tanh : Activation::square;
    const auto m = testing::random_model({len, 6, 1}, act, rng);
    const Vec x = testing::random_vec(len, rng);
    const FilterPair f(h);
    const auto g = saliency_grad_filters(m, x, f, TransformConfig{levels});
    if (min_abs(g.attributions.flatten()) < 1e-4) continue;
    const auto oracle = [&](const Vec& hh) { return matrix_interp_loss(m, hh, x, levels); };
    CHECK(g.loss == doctest::Approx(oracle(h)).epsilon(1e-12));
    CHECK(testing::rel_err(g.grad_lowpass, testing::fd_grad(oracle, h, 1e-6)) < 1e-4);
    ++checked;
  }
  CHECK(checked >= 20);
}

TEST_CASE("saliency_grad_filters for linear teachers and scaled teachers") {
  std::mt19937_64 rng(48);
  const Vec w = testing::random_vec(16, rng);
  const auto lin = testing::linear_model(w);
  const FilterPair f(testing::lattice_filter(3, rng));
  const Vec x = testing::random_vec(16, rng);
  const auto oracle = [&](const Vec& hh) {
    double s = 0.0;
    for (double v : testing::matvec(testing::basis_matrix(hh, 16, 2), w)) s += std::abs(v);
    return s;
  };
  const auto g = saliency_grad_filters(lin, x, f, TransformConfig{2});
  CHECK(testing::rel_err(g.grad_lowpass, testing::fd_grad(oracle, f.lowpass())) < 1e-6);
  // No dependence on the signal.
  const auto g2 = saliency_grad_filters(lin, testing::random_vec(16, rng), f, TransformConfig{2});
  CHECK(testing::max_abs_diff(g.grad_lowpass, g2.grad_lowpass) < 1e-12);

  const auto m = testing::random_model({16, 8, 1}, Activation::tanh, rng);
  const auto base = saliency_grad_filters(m, x, f, TransformConfig{2});
  const auto tripled = saliency_grad_filters(m.scaled(3.0), x, f, TransformConfig{2});
  for (std::size_t i = 0; i < f.size(); ++i) CHECK(tripled.grad_lowpass[i] == doctest::Approx(3.0 * base.grad_lowpass[i]));
  CHECK(tripled.loss == doctest::Approx(3.0 * base.loss));
}
