#pragma once

#include <span>
#include <vector>

#include "awd/filters.hpp"
#include "awd/nnet.hpp"
#include "awd/transform.hpp"

namespace awd {

/// Per-coefficient attribution scores laid out exactly like the coefficients.
using AttributionMap = WaveletCoeffs;
using AttributionMap2D = WaveletCoeffs2D;

/// f'(w) = f(idwt(w) + residual).
double reparam_forward(const TeacherModel& model, const WaveletCoeffs& coeffs, const FilterPair& filters,
                       std::span<const double> residual);

/// Gradient of f(idwt(w)) w.r.t. every coefficient w, taken through the
/// synthesis path (the residual is zero for an exactly invertible transform).
AttributionMap saliency(const TeacherModel& model, const WaveletCoeffs& coeffs, const FilterPair& filters);

/// 2D variant; the model consumes the row-major flattened map.
AttributionMap2D saliency(const TeacherModel& model, const WaveletCoeffs2D& coeffs, const FilterPair& filters);

/// ||saliency(model, dwt(x), filters)||_1.
double interpretation_loss(const TeacherModel& model, std::span<const double> x, const FilterPair& filters,
                           const TransformConfig& config);

struct InterpretationGrad {
  double loss = 0.0;
  AttributionMap attributions;
  std::vector<double> grad_lowpass;
};

/// Exact gradient of interpretation_loss w.r.t. the lowpass taps. Chains the
/// analysis dependence of the coefficients, the synthesis dependence of the
/// reconstruction, and the teacher Hessian (via grad_of_grad). d|s|/ds = 0 at 0.
InterpretationGrad saliency_grad_filters(const TeacherModel& model, std::span<const double> x,
                                         const FilterPair& filters, const TransformConfig& config);

}  // namespace awd
