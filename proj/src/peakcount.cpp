#include "awd/peakcount.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "awd/errors.hpp"

namespace awd::peaks {

namespace {

double correlate3(const Matrix& map, const Peak& p, const Kernel3& k) {
  double s = 0.0;
  for (std::size_t dr = 0; dr < 3; ++dr) {
    for (std::size_t dc = 0; dc < 3; ++dc) s += k[dr * 3 + dc] * map(p.row + dr - 1, p.col + dc - 1);
  }
  return s;
}

double roberts_block(const Matrix& map, std::size_t r, std::size_t c) {
  const double b00 = map(r, c), b01 = map(r, c + 1), b10 = map(r + 1, c), b11 = map(r + 1, c + 1);
  const double gx = kRobertsX[0] * b00 + kRobertsX[1] * b01 + kRobertsX[2] * b10 + kRobertsX[3] * b11;
  const double gy = kRobertsY[0] * b00 + kRobertsY[1] * b01 + kRobertsY[2] * b10 + kRobertsY[3] * b11;
  return std::sqrt(gx * gx + gy * gy);
}

Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(m.rows), static_cast<Eigen::Index>(m.cols));
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t c = 0; c < m.cols; ++c) out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = m(r, c);
  }
  return out;
}

Matrix from_eigen(const Eigen::MatrixXd& m) {
  Matrix out(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
  for (std::size_t r = 0; r < out.rows; ++r) {
    for (std::size_t c = 0; c < out.cols; ++c) out(r, c) = m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  }
  return out;
}

struct Window {
  Kernel3 kernel{};
  std::size_t row = 0, col = 0;
};

Window best_window(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  Window best;
  double best_mass = -1.0;
  for (std::size_t r = 0; r + 3 <= n; ++r) {
    for (std::size_t c = 0; c + 3 <= n; ++c) {
      double mass = 0.0;
      for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) mass += (a[r + i] * b[c + j]) * (a[r + i] * b[c + j]);
      }
      // Near-equal masses count as ties so rounding cannot move the window.
      if (mass > best_mass * (1.0 + 1e-12) + 1e-300) {
        best_mass = mass;
        best.row = r;
        best.col = c;
      }
    }
  }
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) best.kernel[i * 3 + j] = a[best.row + i] * b[best.col + j];
  }
  return best;
}

}  // namespace

PeakFilter PeakFilter::height() { return {FilterKind::height, {}, "height"}; }
PeakFilter PeakFilter::laplace() { return {FilterKind::laplace, kLaplace, "laplace"}; }
PeakFilter PeakFilter::roberts_cross() { return {FilterKind::roberts_cross, {}, "roberts"}; }
PeakFilter PeakFilter::subfilter(const Kernel3& kernel, std::string name) {
  return {FilterKind::subfilter, kernel, std::move(name)};
}

std::vector<Peak> find_peaks(const Matrix& map) {
  if (map.rows < 3 || map.cols < 3) {
    throw ShapeError("peak finding needs a map of at least 3x3, got " + std::to_string(map.rows) + "x" +
                     std::to_string(map.cols));
  }
  std::vector<Peak> out;
  for (std::size_t r = 1; r + 1 < map.rows; ++r) {
    for (std::size_t c = 1; c + 1 < map.cols; ++c) {
      const double v = map(r, c);
      bool peak = true;
      for (std::size_t dr = 0; dr < 3 && peak; ++dr) {
        for (std::size_t dc = 0; dc < 3; ++dc) {
          if ((dr != 1 || dc != 1) && !(v > map(r + dr - 1, c + dc - 1))) {
            peak = false;
            break;
          }
        }
      }
      if (peak) out.push_back({r, c});
    }
  }
  return out;
}

SteepnessResult steepness(const Matrix& map, std::span<const Peak> peaks, const PeakFilter& filter) {
  SteepnessResult out;
  out.values.reserve(peaks.size());
  const std::size_t margin = filter.kind == FilterKind::height ? 0 : 1;
  for (const Peak& p : peaks) {
    if (p.row >= map.rows || p.col >= map.cols) throw ShapeError("peak lies outside the map");
    if (p.row < margin || p.col < margin || p.row + margin >= map.rows || p.col + margin >= map.cols) {
      ++out.skipped;
      continue;
    }
    switch (filter.kind) {
      case FilterKind::height:
        out.values.push_back(map(p.row, p.col));
        break;
      case FilterKind::laplace:
        out.values.push_back(std::abs(correlate3(map, p, filter.kernel)));
        break;
      case FilterKind::subfilter:
        out.values.push_back(correlate3(map, p, filter.kernel));
        break;
      case FilterKind::roberts_cross:
        out.values.push_back(roberts_block(map, p.row - 1, p.col - 1) + roberts_block(map, p.row - 1, p.col) +
                             roberts_block(map, p.row, p.col - 1) + roberts_block(map, p.row, p.col));
        break;
    }
  }
  return out;
}

PeakHistogram histogram(std::span<const double> values, double lo, double hi, double width) {
  if (!(hi > lo) || !(width > 0.0)) throw InvalidArgument("histogram needs hi > lo and width > 0");
  const double q = (hi - lo) / width;
  const double nb = std::round(q);
  if (std::abs(q - nb) > 1e-9 || nb < 1.0) {
    throw InvalidArgument("bin width does not divide the range into an integral number of bins");
  }
  const auto bins = static_cast<std::size_t>(nb);
  PeakHistogram h;
  h.bin_edges.resize(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i) h.bin_edges[i] = lo + static_cast<double>(i) * width;
  h.bin_edges[bins] = hi;
  h.counts.assign(bins, 0);
  for (double v : values) {
    if (!(v >= lo) || !(v < hi)) continue;
    auto idx = std::min(bins - 1, static_cast<std::size_t>(std::floor((v - lo) / width)));
    if (v < h.bin_edges[idx] && idx > 0) --idx;
    if (v >= h.bin_edges[idx + 1] && idx + 1 < bins) ++idx;
    ++h.counts[idx];
  }
  return h;
}

double ClassModel::distance(std::span<const double> h) const {
  if (h.size() != mean.size()) {
    throw ShapeError("histogram has " + std::to_string(h.size()) + " bins, class '" + label + "' expects " +
                     std::to_string(mean.size()));
  }
  const std::size_t n = mean.size();
  double d = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) row += inverse(i, j) * (h[j] - mean[j]);
    d += (h[i] - mean[i]) * row;
  }
  return d;
}

ClassModel make_class_model(std::string label, std::vector<double> mean, Matrix covariance, double ridge_scale) {
  const std::size_t n = mean.size();
  if (n == 0 || covariance.rows != n || covariance.cols != n) throw ShapeError("covariance does not match the mean");
  if (!(ridge_scale >= 0.0)) throw InvalidArgument("ridge scale must be >= 0");
  Eigen::MatrixXd cov = to_eigen(covariance);
  cov = 0.5 * (cov + cov.transpose());
  const double trace = cov.trace();
  const double eps = trace > 0.0 ? ridge_scale * trace / static_cast<double>(n) : ridge_scale;
  cov.diagonal().array() += eps;
  Eigen::MatrixXd inv;
  if (eps > 0.0) {
    inv = cov.ldlt().solve(Eigen::MatrixXd::Identity(cov.rows(), cov.cols()));
  } else {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(cov);
    if (!lu.isInvertible()) throw InvalidArgument("covariance of class '" + label + "' is singular");
    inv = lu.inverse();
  }
  inv = 0.5 * (inv + inv.transpose());
  ClassModel m;
  m.label = std::move(label);
  m.mean = std::move(mean);
  m.covariance = std::move(covariance);
  m.inverse = from_eigen(inv);
  return m;
}

std::vector<ClassModel> fit_classes(std::span<const LabeledHistograms> groups) {
  if (groups.empty()) throw InvalidArgument("no classes to fit");
  std::vector<ClassModel> out;
  std::size_t dim = 0;
  for (const auto& g : groups) {
    if (g.histograms.size() < 2) {
      throw InvalidArgument("class '" + g.label + "' has " + std::to_string(g.histograms.size()) +
                            " histogram(s); at least 2 are needed");
    }
    if (dim == 0) dim = g.histograms.front().counts.size();
    const auto n = static_cast<double>(g.histograms.size());
    std::vector<double> mean(dim, 0.0);
    for (const auto& h : g.histograms) {
      if (h.counts.size() != dim) throw ShapeError("histograms have inconsistent bin counts");
      for (std::size_t i = 0; i < dim; ++i) mean[i] += static_cast<double>(h.counts[i]);
    }
    for (double& v : mean) v /= n;
    Matrix cov(dim, dim);
    for (const auto& h : g.histograms) {
      for (std::size_t i = 0; i < dim; ++i) {
        const double di = static_cast<double>(h.counts[i]) - mean[i];
        for (std::size_t j = 0; j < dim; ++j) cov(i, j) += di * (static_cast<double>(h.counts[j]) - mean[j]);
      }
    }
    for (double& v : cov.data) v /= n - 1.0;
    out.push_back(make_class_model(g.label, std::move(mean), std::move(cov)));
  }
  return out;
}

const std::string& classify(const PeakHistogram& h, std::span<const ClassModel> classes) {
  if (classes.empty()) throw InvalidArgument("no class models");
  const std::vector<double> hv = h.as_vector();
  const ClassModel* best = nullptr;
  double best_d = 0.0;
  for (const auto& c : classes) {
    const double d = c.distance(hv);
    if (best == nullptr || d < best_d) {
      best = &c;
      best_d = d;
    }
  }
  return best->label;
}

Subfilters extract_subfilters(const FilterPair& filters) {
  if (filters.size() < 3) {
    throw InvalidFilter("subfilter extraction needs support >= 3, got " + std::to_string(filters.size()));
  }
  const auto& h = filters.lowpass();
  const auto& g = filters.highpass();
  Subfilters out;
  const std::array<std::pair<const std::vector<double>*, const std::vector<double>*>, 4> pairs = {
      std::pair{&h, &h}, std::pair{&h, &g}, std::pair{&g, &h}, std::pair{&g, &g}};
  std::array<Kernel3*, 4> dst = {&out.ll, &out.lh, &out.hl, &out.hh};
  for (std::size_t k = 0; k < 4; ++k) {
    const Window w = best_window(*pairs[k].first, *pairs[k].second);
    *dst[k] = w.kernel;
    out.row_offset[k] = w.row;
    out.col_offset[k] = w.col;
  }
  return out;
}

PeakHistogram map_histogram(const Matrix& map, const PeakFilter& filter, const BinSpec& bins) {
  const auto peaks = find_peaks(map);
  return histogram(steepness(map, peaks, filter).values, bins.lo, bins.hi, bins.width);
}

std::vector<ClassModel> fit_peak_counter(std::span<const LabeledMaps> train, const PeakFilter& filter,
                                         const BinSpec& bins) {
  std::vector<LabeledHistograms> groups;
  for (const auto& cls : train) {
    LabeledHistograms g{cls.label, {}};
    for (const auto& m : cls.maps) g.histograms.push_back(map_histogram(m, filter, bins));
    groups.push_back(std::move(g));
  }
  return fit_classes(groups);
}

double Confusion::accuracy() const {
  std::size_t right = 0, total = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    for (std::size_t j = 0; j < counts[i].size(); ++j) {
      total += counts[i][j];
      if (i == j) right += counts[i][j];
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(right) / static_cast<double>(total);
}

Confusion evaluate_peak_counter(std::span<const LabeledMaps> test, std::span<const ClassModel> classes,
                                const PeakFilter& filter, const BinSpec& bins) {
  Confusion conf;
  for (const auto& c : classes) conf.labels.push_back(c.label);
  conf.counts.assign(classes.size(), std::vector<std::size_t>(classes.size(), 0));
  auto index_of = [&](const std::string& label) {
    const auto it = std::find(conf.labels.begin(), conf.labels.end(), label);
    if (it == conf.labels.end()) throw InvalidArgument("label '" + label + "' has no class model");
    return static_cast<std::size_t>(it - conf.labels.begin());
  };
  for (const auto& cls : test) {
    const std::size_t truth = index_of(cls.label);
    for (const auto& m : cls.maps) ++conf.counts[truth][index_of(classify(map_histogram(m, filter, bins), classes))];
  }
  return conf;
}

BinSpec select_bin_range(std::span<const LabeledMaps> train, std::span<const LabeledMaps> validation,
                         const PeakFilter& filter, std::span<const double> lo_candidates,
                         std::span<const double> hi_candidates, std::size_t bin_count) {
  if (bin_count < 1) throw InvalidArgument("bin count must be >= 1");
  BinSpec best;
  double best_acc = -1.0;
  for (double lo : lo_candidates) {
    for (double hi : hi_candidates) {
      if (!(hi > lo)) continue;
      const BinSpec bins{lo, hi, (hi - lo) / static_cast<double>(bin_count)};
      const auto classes = fit_peak_counter(train, filter, bins);
      const double acc = evaluate_peak_counter(validation, classes, filter, bins).accuracy();
      if (acc > best_acc) {
        best_acc = acc;
        best = bins;
      }
    }
  }
  if (best_acc < 0.0) throw InvalidArgument("no candidate bin range with hi > lo");
  return best;
}

}  // namespace awd::peaks
