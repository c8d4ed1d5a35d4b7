#pragma once

#include <span>
#include <vector>

#include "awd/filters.hpp"
#include "awd/matrix.hpp"
#include "awd/nnet.hpp"
#include "awd/transform.hpp"
#include "awd/trim.hpp"

namespace awd {

/// Sampled scaling or wavelet function on t = k * 2^-iterations.
struct WaveletCurve {
  std::vector<double> grid;
  std::vector<double> values;
  int iterations = 0;

  double spacing() const;
};

struct CascadeResult {
  WaveletCurve phi;
  WaveletCurve psi;
};

inline constexpr int kDefaultCascadeIterations = 8;

/// Cascade algorithm: phi_{i+1}(t) = sqrt2 sum_n h[n] phi_i(2t - n) starting
/// from the unit indicator, psi from one refinement step with g.
CascadeResult cascade(const FilterPair& filters, int iterations = kDefaultCascadeIterations);

/// min over circular shifts and left/right flips of ||a - b||_2, the shorter
/// curve zero-padded to the longer one. Both curves must share the spacing.
double wavelet_distance(const WaveletCurve& a, const WaveletCurve& b);

/// Distance between the cascade wavelets of two filter pairs.
double filter_distance(const FilterPair& a, const FilterPair& b, int iterations = kDefaultCascadeIterations);

/// Fraction of entries where both |coefficient| and |attribution| exceed threshold.
double compression_rate(std::span<const WaveletCoeffs> coeffs, std::span<const AttributionMap> attributions,
                        double threshold);

enum class MaxMode { signed_value, magnitude };

/// The per_scale largest detail coefficients of every level (descending),
/// concatenated from the coarsest level to the finest.
Signal max_coeff_features(const WaveletCoeffs& coeffs, std::size_t per_scale, MaxMode mode = MaxMode::signed_value);

struct LinearHead {
  std::vector<double> weights;
  double intercept = 0.0;

  double predict(std::span<const double> features) const;
};

/// Closed-form ridge regression with an unpenalized intercept.
LinearHead linear_head_fit(std::span<const Signal> features, std::span<const double> targets, double ridge);

struct RidgeCvResult {
  double ridge = 0.0;
  double cv_r2 = 0.0;
  LinearHead head;  // refit on all rows with the chosen ridge
};

/// k-fold cross-validation over ridge_grid (contiguous folds).
RidgeCvResult ridge_cv(std::span<const Signal> features, std::span<const double> targets,
                       std::span<const double> ridge_grid, std::size_t folds);

/// Riemann-sum integrated gradients in coefficient space, zero baseline:
/// IG_i = w_i * mean_{k=1..steps} df'/dw_i (k/steps * w). An approximation.
AttributionMap2D integrated_gradients(const TeacherModel& model, const WaveletCoeffs2D& coeffs,
                                      const FilterPair& filters, int steps = 50);

/// Keeps the top_k coefficients by |IG attribution| and transforms back.
Matrix activation_map(const Matrix& x, const TeacherModel& model, const FilterPair& filters,
                      const TransformConfig& config, std::size_t top_k, int ig_steps = 50);

}  // namespace awd
