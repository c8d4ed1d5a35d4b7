#include "awd/trim.hpp"

#include <cmath>

#include "awd/errors.hpp"

namespace awd {

double reparam_forward(const TeacherModel& model, const WaveletCoeffs& coeffs, const FilterPair& filters,
                       std::span<const double> residual) {
  Signal x = idwt1d(coeffs, filters);
  if (residual.size() != x.size()) throw ShapeError("residual length does not match reconstruction");
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += residual[i];
  return forward(model, x);
}

AttributionMap saliency(const TeacherModel& model, const WaveletCoeffs& coeffs, const FilterPair& filters) {
  const Signal x = idwt1d(coeffs, filters);
  const Signal v = input_grad(model, x);
  return idwt_grad(coeffs, filters, v).grad_coeffs;
}

AttributionMap2D saliency(const TeacherModel& model, const WaveletCoeffs2D& coeffs, const FilterPair& filters) {
  const Matrix x = idwt2d(coeffs, filters);
  Matrix v(x.rows, x.cols);
  v.data = input_grad(model, x.data);
  return idwt_grad(coeffs, filters, v).grad_coeffs;
}

double interpretation_loss(const TeacherModel& model, std::span<const double> x, const FilterPair& filters,
                           const TransformConfig& config) {
  double s = 0.0;
  for (double a : saliency(model, dwt1d(x, filters, config), filters).flatten()) s += std::abs(a);
  return s;
}

InterpretationGrad saliency_grad_filters(const TeacherModel& model, std::span<const double> x,
                                         const FilterPair& filters, const TransformConfig& config) {
  const WaveletCoeffs w = dwt1d(x, filters, config);
  const Signal x_rec = idwt1d(w, filters);
  const Signal v = input_grad(model, x_rec);

  InterpretationGrad out;
  out.attributions = idwt_grad(w, filters, v).grad_coeffs;

  WaveletCoeffs sign = WaveletCoeffs::zeros_like(out.attributions);
  {
    Signal flat = out.attributions.flatten();
    for (double& a : flat) {
      out.loss += std::abs(a);
      a = (a > 0.0) ? 1.0 : (a < 0.0 ? -1.0 : 0.0);
    }
    sign.assign_flat(flat);
  }

  // Taps through the synthesis operator with the gradient held fixed.
  out.grad_lowpass = idwt_grad(sign, filters, v).grad_lowpass;

  // Taps through the reconstruction x_rec = idwt(dwt(x)) via the Hessian.
  const Signal direction = idwt1d(sign, filters);
  const Signal q = grad_of_grad(model, x_rec, direction);
  const IdwtGrad through_synthesis = idwt_grad(w, filters, q);
  const DwtGrad through_analysis = dwt_grad(x, filters, config, through_synthesis.grad_coeffs);
  for (std::size_t n = 0; n < out.grad_lowpass.size(); ++n) {
    out.grad_lowpass[n] += through_synthesis.grad_lowpass[n] + through_analysis.grad_lowpass[n];
  }
  return out;
}

}  // namespace awd
