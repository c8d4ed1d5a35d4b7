#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "awd/filters.hpp"
#include "awd/matrix.hpp"

namespace awd::peaks {

struct Peak {
  std::size_t row = 0;
  std::size_t col = 0;
  bool operator==(const Peak&) const = default;
};

using Kernel3 = std::array<double, 9>;  // row-major 3x3

/// Isotropic Laplace kernel, -10/3 * [[-.05 -.2 -.05] [-.2 1 -.2] [-.05 -.2 -.05]].
inline constexpr Kernel3 kLaplace = {
    -10.0 / 3.0 * -0.05, -10.0 / 3.0 * -0.2, -10.0 / 3.0 * -0.05,
    -10.0 / 3.0 * -0.2,  -10.0 / 3.0 * 1.0,  -10.0 / 3.0 * -0.2,
    -10.0 / 3.0 * -0.05, -10.0 / 3.0 * -0.2, -10.0 / 3.0 * -0.05};

// Roberts cross, row-major 2x2.
inline constexpr std::array<double, 4> kRobertsX = {0.0, 1.0, -1.0, 0.0};
inline constexpr std::array<double, 4> kRobertsY = {1.0, 0.0, 0.0, -1.0};

enum class FilterKind { height, laplace, roberts_cross, subfilter };

struct PeakFilter {
  FilterKind kind = FilterKind::height;
  Kernel3 kernel{};  // used by laplace and subfilter
  std::string name = "height";

  static PeakFilter height();
  static PeakFilter laplace();
  static PeakFilter roberts_cross();
  static PeakFilter subfilter(const Kernel3& kernel, std::string name = "subfilter");
};

/// Interior pixels strictly greater than all 8 neighbours, row-major order.
std::vector<Peak> find_peaks(const Matrix& map);

struct SteepnessResult {
  std::vector<double> values;
  std::size_t skipped = 0;  // peaks whose filter footprint leaves the map
};

/// height: pixel value. laplace: magnitude of the 3x3 Laplace response at the
/// peak (peak minus weighted surround). subfilter: signed 3x3 correlation.
/// roberts_cross: sum over the four 2x2 blocks touching the peak of
/// sqrt(Gx^2 + Gy^2).
SteepnessResult steepness(const Matrix& map, std::span<const Peak> peaks, const PeakFilter& filter);

struct PeakHistogram {
  std::vector<double> bin_edges;
  std::vector<std::size_t> counts;

  std::vector<double> as_vector() const { return {counts.begin(), counts.end()}; }
};

/// Uniform left-closed bins on [lo, hi); values outside are dropped.
PeakHistogram histogram(std::span<const double> values, double lo, double hi, double width);

struct ClassModel {
  std::string label;
  std::vector<double> mean;
  Matrix covariance;
  Matrix inverse;  // (covariance + eps I)^-1

  double distance(std::span<const double> h) const;
};

inline constexpr double kCovarianceRidge = 1e-8;

/// Builds the cached inverse with eps = ridge_scale * trace/dim (ridge_scale
/// itself when the trace is zero). ridge_scale = 0 inverts the covariance as is.
ClassModel make_class_model(std::string label, std::vector<double> mean, Matrix covariance,
                            double ridge_scale = kCovarianceRidge);

struct LabeledHistograms {
  std::string label;
  std::vector<PeakHistogram> histograms;
};

/// Sample mean and covariance (n - 1 denominator) per label.
std::vector<ClassModel> fit_classes(std::span<const LabeledHistograms> groups);

/// Label with the smallest Mahalanobis distance; ties go to the first class.
const std::string& classify(const PeakHistogram& h, std::span<const ClassModel> classes);

struct Subfilters {
  Kernel3 ll{}, lh{}, hl{}, hh{};
  // Top-left corner of each selected window in the full N x N kernel.
  std::array<std::size_t, 4> row_offset{}, col_offset{};
};

/// Crops each separable 2D kernel (hh^T, hg^T, gh^T, gg^T) to its 3x3 window
/// of maximal squared mass; ties go to the smallest top-left index.
Subfilters extract_subfilters(const FilterPair& filters);

struct BinSpec {
  double lo = 0.0;
  double hi = 0.22;
  double width = 0.01;
};

struct LabeledMaps {
  std::string label;
  std::vector<Matrix> maps;
};

PeakHistogram map_histogram(const Matrix& map, const PeakFilter& filter, const BinSpec& bins);

std::vector<ClassModel> fit_peak_counter(std::span<const LabeledMaps> train, const PeakFilter& filter,
                                         const BinSpec& bins);

struct Confusion {
  std::vector<std::string> labels;
  std::vector<std::vector<std::size_t>> counts;  // [true][predicted]
  double accuracy() const;
};

Confusion evaluate_peak_counter(std::span<const LabeledMaps> test, std::span<const ClassModel> classes,
                                const PeakFilter& filter, const BinSpec& bins);

/// Grid over (lo, hi) with a fixed bin count; keeps the best validation accuracy
/// (first candidate wins ties).
BinSpec select_bin_range(std::span<const LabeledMaps> train, std::span<const LabeledMaps> validation,
                         const PeakFilter& filter, std::span<const double> lo_candidates,
                         std::span<const double> hi_candidates, std::size_t bin_count = 22);

}  // namespace awd::peaks
