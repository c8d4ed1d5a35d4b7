#include "awd/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

#include <Eigen/Dense>

#include "awd/errors.hpp"

namespace awd {

namespace {

// v_next[k] = sqrt2 * sum_n f[n] v[k - n*step]
std::vector<double> refine(std::span<const double> v, std::span<const double> f, std::size_t step) {
  std::vector<double> out(v.size() + (f.size() - 1) * step, 0.0);
  for (std::size_t n = 0; n < f.size(); ++n) {
    const double c = std::numbers::sqrt2 * f[n];
    for (std::size_t k = 0; k < v.size(); ++k) out[k + n * step] += c * v[k];
  }
  return out;
}

WaveletCurve make_curve(std::vector<double> values, int iterations) {
  WaveletCurve c;
  c.iterations = iterations;
  const double dt = std::ldexp(1.0, -iterations);
  c.grid.resize(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) c.grid[k] = static_cast<double>(k) * dt;
  c.values = std::move(values);
  return c;
}

double r2(std::span<const double> y, std::span<const double> pred) {
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  double res = 0.0, tot = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    res += (y[i] - pred[i]) * (y[i] - pred[i]);
    tot += (y[i] - mean) * (y[i] - mean);
  }
  return tot > 0.0 ? 1.0 - res / tot : 0.0;
}

}  // namespace

double WaveletCurve::spacing() const { return std::ldexp(1.0, -iterations); }

CascadeResult cascade(const FilterPair& filters, int iterations) {
  if (iterations < 1 || iterations > 16) {
    throw InvalidArgument("cascade iterations must be in 1..16, got " + std::to_string(iterations));
  }
  std::vector<double> phi{1.0};
  std::vector<double> coarse;
  for (int i = 0; i < iterations; ++i) {
    if (i == iterations - 1) coarse = phi;
    phi = refine(phi, filters.lowpass(), std::size_t{1} << i);
  }
  std::vector<double> psi = refine(coarse, filters.highpass(), std::size_t{1} << (iterations - 1));
  return {make_curve(std::move(phi), iterations), make_curve(std::move(psi), iterations)};
}

double wavelet_distance(const WaveletCurve& a, const WaveletCurve& b) {
  if (a.iterations != b.iterations) throw ShapeError("wavelet curves are sampled at different grid spacings");
  const std::size_t len = std::max(a.values.size(), b.values.size());
  if (len == 0) return 0.0;
  std::vector<double> pa(len, 0.0), pb(len, 0.0);
  std::copy(a.values.begin(), a.values.end(), pa.begin());
  std::copy(b.values.begin(), b.values.end(), pb.begin());
  std::vector<double> fa(pa.rbegin(), pa.rend());

  double best = std::numeric_limits<double>::infinity();
  for (const auto* src : {&pa, &fa}) {
    const auto& s = *src;
    for (std::size_t k = 0; k < len; ++k) {
      // roll(s, k)[i] = s[(i - k) mod len]
      double d = 0.0;
      for (std::size_t i = 0; i < len && d < best; ++i) {
        const double diff = s[(i + len - k) % len] - pb[i];
        d += diff * diff;
      }
      best = std::min(best, d);
    }
  }
  return std::sqrt(best);
}

double filter_distance(const FilterPair& a, const FilterPair& b, int iterations) {
  return wavelet_distance(cascade(a, iterations).psi, cascade(b, iterations).psi);
}

double compression_rate(std::span<const WaveletCoeffs> coeffs, std::span<const AttributionMap> attributions,
                        double threshold) {
  if (!(threshold > 0.0)) throw InvalidArgument("compression threshold must be positive");
  if (coeffs.size() != attributions.size()) throw ShapeError("coefficient and attribution lists differ in length");
  std::size_t kept = 0, total = 0;
  for (std::size_t i = 0; i < coeffs.size(); ++i) {
    const Signal c = coeffs[i].flatten();
    const Signal a = attributions[i].flatten();
    bool aligned = c.size() == a.size() && coeffs[i].levels() == attributions[i].levels();
    for (int j = 0; aligned && j < coeffs[i].levels(); ++j) {
      aligned = coeffs[i].details[j].size() == attributions[i].details[j].size();
    }
    if (!aligned) throw ShapeError("attribution map " + std::to_string(i) + " does not match its coefficients");
    for (std::size_t k = 0; k < c.size(); ++k) {
      if (std::abs(c[k]) > threshold && std::abs(a[k]) > threshold) ++kept;
    }
    total += c.size();
  }
  return total == 0 ? 0.0 : static_cast<double>(kept) / static_cast<double>(total);
}

Signal max_coeff_features(const WaveletCoeffs& coeffs, std::size_t per_scale, MaxMode mode) {
  if (per_scale < 1) throw InvalidArgument("per_scale must be >= 1");
  Signal out;
  for (int j = coeffs.levels(); j >= 1; --j) {
    Signal band = coeffs.details[static_cast<std::size_t>(j - 1)];
    if (band.size() < per_scale) {
      throw ShapeError("detail band at level " + std::to_string(j) + " has " + std::to_string(band.size()) +
                       " coefficients, fewer than " + std::to_string(per_scale));
    }
    if (mode == MaxMode::magnitude) {
      for (double& v : band) v = std::abs(v);
    }
    std::partial_sort(band.begin(), band.begin() + static_cast<std::ptrdiff_t>(per_scale), band.end(),
                      std::greater<>());
    out.insert(out.end(), band.begin(), band.begin() + static_cast<std::ptrdiff_t>(per_scale));
  }
  return out;
}

double LinearHead::predict(std::span<const double> features) const {
  if (features.size() != weights.size()) throw ShapeError("feature vector length does not match the linear head");
  double s = intercept;
  for (std::size_t i = 0; i < weights.size(); ++i) s += weights[i] * features[i];
  return s;
}

LinearHead linear_head_fit(std::span<const Signal> features, std::span<const double> targets, double ridge) {
  if (features.empty() || features.size() != targets.size()) throw ShapeError("features and targets must align");
  if (!(ridge >= 0.0)) throw InvalidArgument("ridge must be >= 0");
  const auto n = static_cast<Eigen::Index>(features.size());
  const auto p = static_cast<Eigen::Index>(features.front().size());
  Eigen::MatrixXd x(n, p);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = features[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(row.size()) != p) throw ShapeError("ragged feature matrix");
    for (Eigen::Index k = 0; k < p; ++k) x(i, k) = row[static_cast<std::size_t>(k)];
    y(i) = targets[static_cast<std::size_t>(i)];
  }
  const Eigen::RowVectorXd mean_x = x.colwise().mean();
  const double mean_y = y.mean();
  x.rowwise() -= mean_x;
  y.array() -= mean_y;

  Eigen::VectorXd w;
  if (ridge == 0.0) {
    w = x.completeOrthogonalDecomposition().solve(y);
  } else {
    Eigen::MatrixXd gram = x.transpose() * x;
    gram.diagonal().array() += ridge;
    w = gram.ldlt().solve(x.transpose() * y);
  }
  LinearHead head;
  head.weights.assign(w.data(), w.data() + w.size());
  head.intercept = mean_y - mean_x.dot(w);
  return head;
}

RidgeCvResult ridge_cv(std::span<const Signal> features, std::span<const double> targets,
                       std::span<const double> ridge_grid, std::size_t folds) {
  if (ridge_grid.empty()) throw InvalidArgument("ridge grid is empty");
  if (folds < 2 || folds > features.size()) throw InvalidArgument("fold count must be in 2..n");
  const std::size_t n = features.size();
  RidgeCvResult best;
  best.cv_r2 = -std::numeric_limits<double>::infinity();
  for (double ridge : ridge_grid) {
    std::vector<double> pred(n);
    for (std::size_t f = 0; f < folds; ++f) {
      const std::size_t lo = f * n / folds;
      const std::size_t hi = (f + 1) * n / folds;
      std::vector<Signal> xs;
      std::vector<double> ys;
      for (std::size_t i = 0; i < n; ++i) {
        if (i < lo || i >= hi) {
          xs.push_back(features[i]);
          ys.push_back(targets[i]);
        }
      }
      const LinearHead head = linear_head_fit(xs, ys, ridge);
      for (std::size_t i = lo; i < hi; ++i) pred[i] = head.predict(features[i]);
    }
    const double score = r2(targets, pred);
    if (score > best.cv_r2) {
      best.cv_r2 = score;
      best.ridge = ridge;
    }
  }
  best.head = linear_head_fit(features, targets, best.ridge);
  return best;
}

AttributionMap2D integrated_gradients(const TeacherModel& model, const WaveletCoeffs2D& coeffs,
                                      const FilterPair& filters, int steps) {
  if (steps < 1) throw InvalidArgument("integrated gradients needs >= 1 step");
  const Signal w = coeffs.flatten();
  Signal avg(w.size(), 0.0);
  WaveletCoeffs2D scaled = coeffs;
  for (int k = 1; k <= steps; ++k) {
    const double alpha = static_cast<double>(k) / static_cast<double>(steps);
    Signal ws(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) ws[i] = alpha * w[i];
    scaled.assign_flat(ws);
    const Signal g = saliency(model, scaled, filters).flatten();
    for (std::size_t i = 0; i < w.size(); ++i) avg[i] += g[i] / static_cast<double>(steps);
  }
  for (std::size_t i = 0; i < w.size(); ++i) avg[i] *= w[i];
  AttributionMap2D out = WaveletCoeffs2D::zeros_like(coeffs);
  out.assign_flat(avg);
  return out;
}

Matrix activation_map(const Matrix& x, const TeacherModel& model, const FilterPair& filters,
                      const TransformConfig& config, std::size_t top_k, int ig_steps) {
  WaveletCoeffs2D coeffs = dwt2d(x, filters, config);
  if (top_k > coeffs.size()) {
    throw InvalidArgument("top_k " + std::to_string(top_k) + " exceeds the coefficient count " +
                          std::to_string(coeffs.size()));
  }
  const Signal attr = integrated_gradients(model, coeffs, filters, ig_steps).flatten();
  std::vector<std::size_t> order(attr.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(attr[a]) > std::abs(attr[b]); });
  const Signal flat = coeffs.flatten();
  Signal kept(flat.size(), 0.0);
  for (std::size_t i = 0; i < top_k; ++i) kept[order[i]] = flat[order[i]];
  coeffs.assign_flat(kept);
  return idwt2d(coeffs, filters);
}

}  // namespace awd
