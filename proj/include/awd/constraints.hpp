#pragma once

#include <span>
#include <vector>

#include "awd/filters.hpp"
#include "awd/transform.hpp"

namespace awd {

/// Terms of the wavelet loss. Every field is a square or an l1 norm.
struct PenaltyBreakdown {
  double sparsity = 0.0;
  double sum_h = 0.0;       // (sum h - sqrt 2)^2
  double sum_g = 0.0;       // (sum g)^2
  double unit_norm = 0.0;   // (||h||^2 - 1)^2
  double cmf = 0.0;         // sum_w (|H(w)|^2 + |H(w+pi)|^2 - 2)^2 on the DFT grid
  double shift_orth = 0.0;  // sum_k (sum_n h[n] h[n-2k] - 1{k=0})^2
  double total = 0.0;

  /// Everything except sparsity.
  double validity() const { return sum_h + sum_g + unit_norm + cmf + shift_orth; }
};

/// The five validity penalties; sparsity is left at zero.
PenaltyBreakdown wavelet_penalties(const FilterPair& filters);

/// lambda * sum of |c| over every band.
double sparsity_term(const WaveletCoeffs& coeffs, double lambda);
double sparsity_term(const WaveletCoeffs2D& coeffs, double lambda);

/// Penalties plus lambda * ||dwt(x)||_1.
PenaltyBreakdown wavelet_loss(const FilterPair& filters, std::span<const double> x, double lambda,
                              const TransformConfig& config);

/// Gradient of the validity penalties (sum_h + sum_g + unit_norm + cmf +
/// shift_orth) w.r.t. the lowpass taps, with g(h) chained through.
std::vector<double> penalty_grad(const FilterPair& filters);

}  // namespace awd
