#pragma once

#include <span>
#include <vector>

#include "awd/filters.hpp"
#include "awd/matrix.hpp"

namespace awd {

/// Multilevel decomposition. Boundary handling is always periodic.
struct TransformConfig {
  int levels = 1;
};

/// 1D coefficients: details[j-1] holds d_j, finest level first.
struct WaveletCoeffs {
  Signal approx;
  std::vector<Signal> details;
  std::size_t original_length = 0;

  int levels() const { return static_cast<int>(details.size()); }
  std::size_t size() const;

  // Flat order is approx, then details from coarsest to finest.
  Signal flatten() const;
  void assign_flat(std::span<const double> flat);

  static WaveletCoeffs zeros(std::size_t length, int levels);
  static WaveletCoeffs zeros_like(const WaveletCoeffs& like);
};

struct DetailBands {
  Matrix lh;  // lowpass along rows index, highpass along columns index
  Matrix hl;
  Matrix hh;
};

/// 2D coefficients, same level ordering as the 1D layout.
struct WaveletCoeffs2D {
  Matrix approx;
  std::vector<DetailBands> details;
  std::size_t original_rows = 0;
  std::size_t original_cols = 0;

  int levels() const { return static_cast<int>(details.size()); }
  std::size_t size() const;
  Signal flatten() const;
  void assign_flat(std::span<const double> flat);

  static WaveletCoeffs2D zeros(std::size_t rows, std::size_t cols, int levels);
  static WaveletCoeffs2D zeros_like(const WaveletCoeffs2D& like);
};

WaveletCoeffs dwt1d(std::span<const double> x, const FilterPair& filters, const TransformConfig& config);
Signal idwt1d(const WaveletCoeffs& coeffs, const FilterPair& filters);

WaveletCoeffs2D dwt2d(const Matrix& x, const FilterPair& filters, const TransformConfig& config);
Matrix idwt2d(const WaveletCoeffs2D& coeffs, const FilterPair& filters);

// Reverse-mode derivatives. The transform is bilinear in (signal, taps);
// gradients w.r.t. the lowpass include the highpass dependence g(h).

/// Gradients of <upstream, dwt(x)>.
struct DwtGrad {
  Signal grad_x;
  std::vector<double> grad_lowpass;
};
DwtGrad dwt_grad(std::span<const double> x, const FilterPair& filters, const TransformConfig& config,
                 const WaveletCoeffs& upstream);

/// Gradients of <upstream, idwt(coeffs)>.
struct IdwtGrad {
  WaveletCoeffs grad_coeffs;
  std::vector<double> grad_lowpass;
};
IdwtGrad idwt_grad(const WaveletCoeffs& coeffs, const FilterPair& filters, std::span<const double> upstream);

struct DwtGrad2D {
  Matrix grad_x;
  std::vector<double> grad_lowpass;
};
DwtGrad2D dwt_grad(const Matrix& x, const FilterPair& filters, const TransformConfig& config,
                   const WaveletCoeffs2D& upstream);

struct IdwtGrad2D {
  WaveletCoeffs2D grad_coeffs;
  std::vector<double> grad_lowpass;
};
IdwtGrad2D idwt_grad(const WaveletCoeffs2D& coeffs, const FilterPair& filters, const Matrix& upstream);

/// Folds a highpass gradient into a lowpass gradient through g[n] = (-1)^n h[N-1-n].
void chain_highpass_grad(std::span<const double> grad_highpass, std::span<double> grad_lowpass);

}  // namespace awd
