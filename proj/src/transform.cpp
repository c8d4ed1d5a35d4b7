#include "awd/transform.hpp"

#include <algorithm>
#include <string>

#include "awd/errors.hpp"

namespace awd {

namespace {

// a followed by its first `extra` samples repeated periodically, so that
// ext[i] = a[i mod L] for i < L + extra.
Signal periodic_extend(std::span<const double> a, std::size_t extra) {
  Signal ext(a.size() + extra);
  for (std::size_t i = 0; i < ext.size(); ++i) ext[i] = a[i % a.size()];
  return ext;
}

// One analysis step with periodic indexing:
//   lo[p] = sum_n h[n] a[(n + 2p) mod L],  hi[p] = sum_n g[n] a[(n + 2p) mod L].
void analyze_level(std::span<const double> a, std::span<const double> h, std::span<const double> g,
                   std::span<double> lo, std::span<double> hi) {
  const std::size_t half = a.size() / 2;
  const Signal ext = periodic_extend(a, h.size());
  for (std::size_t p = 0; p < half; ++p) {
    const double* v = ext.data() + 2 * p;
    double sl = 0.0;
    double sh = 0.0;
    for (std::size_t n = 0; n < h.size(); ++n) {
      sl += h[n] * v[n];
      sh += g[n] * v[n];
    }
    lo[p] = sl;
    hi[p] = sh;
  }
}

// Synthesis step, the exact adjoint of analyze_level:
//   a[(n + 2p) mod L] += h[n] lo[p] + g[n] hi[p].
void synthesize_level(std::span<const double> lo, std::span<const double> hi, std::span<const double> h,
                      std::span<const double> g, std::span<double> a) {
  const std::size_t len = a.size();
  Signal ext(len + h.size(), 0.0);
  for (std::size_t p = 0; p < lo.size(); ++p) {
    double* out = ext.data() + 2 * p;
    for (std::size_t n = 0; n < h.size(); ++n) out[n] += h[n] * lo[p] + g[n] * hi[p];
  }
  std::fill(a.begin(), a.end(), 0.0);
  for (std::size_t i = 0; i < ext.size(); ++i) a[i % len] += ext[i];
}

// grad[n] += sum_p band[p] * sig[(n + 2p) mod L]. Both the analysis and the
// synthesis tap gradients have this form.
void accumulate_tap_grad(std::span<const double> band, std::span<const double> sig, std::span<double> grad) {
  const Signal ext = periodic_extend(sig, grad.size());
  for (std::size_t n = 0; n < grad.size(); ++n) {
    double s = 0.0;
    for (std::size_t p = 0; p < band.size(); ++p) s += band[p] * ext[n + 2 * p];
    grad[n] += s;
  }
}

void check_levels(int levels) {
  if (levels < 1) throw InvalidArgument("transform needs levels >= 1, got " + std::to_string(levels));
}

void check_dyadic(std::size_t length, int levels, const char* what) {
  check_levels(levels);
  std::size_t cur = length;
  for (int j = 1; j <= levels; ++j) {
    if (cur < 2 || cur % 2 != 0) {
      throw ShapeError(std::string(what) + " length " + std::to_string(length) +
                       " is not divisible by 2^" + std::to_string(levels) + " (fails at level " +
                       std::to_string(j) + " with length " + std::to_string(cur) + ")");
    }
    cur /= 2;
  }
}

Signal column(const Matrix& m, std::size_t c) {
  Signal out(m.rows);
  for (std::size_t r = 0; r < m.rows; ++r) out[r] = m(r, c);
  return out;
}

void set_column(Matrix& m, std::size_t c, std::span<const double> v) {
  for (std::size_t r = 0; r < m.rows; ++r) m(r, c) = v[r];
}

struct Split2D {
  Matrix ll, lh, hl, hh;
};

// Rows first (axis 1), then columns (axis 0).
Split2D analyze_level_2d(const Matrix& a, const FilterPair& f) {
  const std::size_t r = a.rows;
  const std::size_t c = a.cols;
  Matrix lo_c(r, c / 2), hi_c(r, c / 2);
  for (std::size_t i = 0; i < r; ++i) analyze_level(a.row(i), f.lowpass(), f.highpass(), lo_c.row(i), hi_c.row(i));

  Split2D out{Matrix(r / 2, c / 2), Matrix(r / 2, c / 2), Matrix(r / 2, c / 2), Matrix(r / 2, c / 2)};
  Signal lo(r / 2), hi(r / 2);
  for (std::size_t j = 0; j < c / 2; ++j) {
    analyze_level(column(lo_c, j), f.lowpass(), f.highpass(), lo, hi);
    set_column(out.ll, j, lo);
    set_column(out.hl, j, hi);
    analyze_level(column(hi_c, j), f.lowpass(), f.highpass(), lo, hi);
    set_column(out.lh, j, lo);
    set_column(out.hh, j, hi);
  }
  return out;
}

Matrix synthesize_level_2d(const Matrix& ll, const DetailBands& d, const FilterPair& f) {
  const std::size_t r = ll.rows * 2;
  const std::size_t c = ll.cols * 2;
  Matrix lo_c(r, ll.cols), hi_c(r, ll.cols);
  Signal col(r);
  for (std::size_t j = 0; j < ll.cols; ++j) {
    synthesize_level(column(ll, j), column(d.hl, j), f.lowpass(), f.highpass(), col);
    set_column(lo_c, j, col);
    synthesize_level(column(d.lh, j), column(d.hh, j), f.lowpass(), f.highpass(), col);
    set_column(hi_c, j, col);
  }
  Matrix out(r, c);
  for (std::size_t i = 0; i < r; ++i) synthesize_level(lo_c.row(i), hi_c.row(i), f.lowpass(), f.highpass(), out.row(i));
  return out;
}

void check_band(const Matrix& m, std::size_t rows, std::size_t cols, const char* what, int level) {
  if (m.rows != rows || m.cols != cols) {
    throw ShapeError(std::string(what) + " band at level " + std::to_string(level) + " has shape " +
                     std::to_string(m.rows) + "x" + std::to_string(m.cols) + ", expected " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  }
}

void check_layout(const WaveletCoeffs& c) {
  check_levels(c.levels());
  std::size_t expected = c.approx.size();
  for (int j = c.levels(); j >= 1; --j) {
    const auto& d = c.details[static_cast<std::size_t>(j - 1)];
    if (d.size() != expected) {
      throw ShapeError("detail band at level " + std::to_string(j) + " has length " + std::to_string(d.size()) +
                       ", expected " + std::to_string(expected));
    }
    expected *= 2;
  }
  if (expected == 0) throw ShapeError("empty coefficient set");
}

void check_layout(const WaveletCoeffs2D& c) {
  check_levels(c.levels());
  std::size_t rows = c.approx.rows;
  std::size_t cols = c.approx.cols;
  for (int j = c.levels(); j >= 1; --j) {
    const auto& d = c.details[static_cast<std::size_t>(j - 1)];
    check_band(d.lh, rows, cols, "LH", j);
    check_band(d.hl, rows, cols, "HL", j);
    check_band(d.hh, rows, cols, "HH", j);
    rows *= 2;
    cols *= 2;
  }
  if (rows == 0 || cols == 0) throw ShapeError("empty coefficient set");
}

void check_same_layout(const WaveletCoeffs& a, const WaveletCoeffs& b) {
  bool ok = a.approx.size() == b.approx.size() && a.details.size() == b.details.size();
  for (std::size_t j = 0; ok && j < a.details.size(); ++j) ok = a.details[j].size() == b.details[j].size();
  if (!ok) throw ShapeError("coefficient layouts differ");
}

void check_same_layout(const WaveletCoeffs2D& a, const WaveletCoeffs2D& b) {
  bool ok = a.approx.same_shape(b.approx) && a.details.size() == b.details.size();
  for (std::size_t j = 0; ok && j < a.details.size(); ++j) {
    ok = a.details[j].lh.same_shape(b.details[j].lh) && a.details[j].hl.same_shape(b.details[j].hl) &&
         a.details[j].hh.same_shape(b.details[j].hh);
  }
  if (!ok) throw ShapeError("coefficient layouts differ");
}

}  // namespace

// ---------------------------------------------------------------------------
// Coefficient containers

std::size_t WaveletCoeffs::size() const {
  std::size_t n = approx.size();
  for (const auto& d : details) n += d.size();
  return n;
}

Signal WaveletCoeffs::flatten() const {
  Signal out;
  out.reserve(size());
  out.insert(out.end(), approx.begin(), approx.end());
  for (auto it = details.rbegin(); it != details.rend(); ++it) out.insert(out.end(), it->begin(), it->end());
  return out;
}

void WaveletCoeffs::assign_flat(std::span<const double> flat) {
  if (flat.size() != size()) throw ShapeError("flat coefficient vector has the wrong length");
  std::size_t k = 0;
  for (double& v : approx) v = flat[k++];
  for (auto it = details.rbegin(); it != details.rend(); ++it) {
    for (double& v : *it) v = flat[k++];
  }
}

WaveletCoeffs WaveletCoeffs::zeros(std::size_t length, int levels) {
  check_dyadic(length, levels, "signal");
  WaveletCoeffs c;
  c.original_length = length;
  std::size_t cur = length;
  for (int j = 0; j < levels; ++j) {
    cur /= 2;
    c.details.emplace_back(cur, 0.0);
  }
  c.approx.assign(cur, 0.0);
  return c;
}

WaveletCoeffs WaveletCoeffs::zeros_like(const WaveletCoeffs& like) {
  WaveletCoeffs c = like;
  std::fill(c.approx.begin(), c.approx.end(), 0.0);
  for (auto& d : c.details) std::fill(d.begin(), d.end(), 0.0);
  return c;
}

std::size_t WaveletCoeffs2D::size() const {
  std::size_t n = approx.size();
  for (const auto& d : details) n += d.lh.size() + d.hl.size() + d.hh.size();
  return n;
}

Signal WaveletCoeffs2D::flatten() const {
  Signal out;
  out.reserve(size());
  out.insert(out.end(), approx.data.begin(), approx.data.end());
  for (auto it = details.rbegin(); it != details.rend(); ++it) {
    for (const Matrix* m : {&it->lh, &it->hl, &it->hh}) out.insert(out.end(), m->data.begin(), m->data.end());
  }
  return out;
}

void WaveletCoeffs2D::assign_flat(std::span<const double> flat) {
  if (flat.size() != size()) throw ShapeError("flat coefficient vector has the wrong length");
  std::size_t k = 0;
  for (double& v : approx.data) v = flat[k++];
  for (auto it = details.rbegin(); it != details.rend(); ++it) {
    for (Matrix* m : {&it->lh, &it->hl, &it->hh}) {
      for (double& v : m->data) v = flat[k++];
    }
  }
}

WaveletCoeffs2D WaveletCoeffs2D::zeros(std::size_t rows, std::size_t cols, int levels) {
  check_dyadic(rows, levels, "row");
  check_dyadic(cols, levels, "column");
  WaveletCoeffs2D c;
  c.original_rows = rows;
  c.original_cols = cols;
  std::size_t r = rows;
  std::size_t k = cols;
  for (int j = 0; j < levels; ++j) {
    r /= 2;
    k /= 2;
    c.details.push_back({Matrix(r, k), Matrix(r, k), Matrix(r, k)});
  }
  c.approx = Matrix(r, k);
  return c;
}

WaveletCoeffs2D WaveletCoeffs2D::zeros_like(const WaveletCoeffs2D& like) {
  WaveletCoeffs2D c = like;
  std::fill(c.approx.data.begin(), c.approx.data.end(), 0.0);
  for (auto& d : c.details) {
    for (Matrix* m : {&d.lh, &d.hl, &d.hh}) std::fill(m->data.begin(), m->data.end(), 0.0);
  }
  return c;
}

void chain_highpass_grad(std::span<const double> grad_highpass, std::span<double> grad_lowpass) {
  const std::size_t n = grad_highpass.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double sign = (i % 2 == 0) ? 1.0 : -1.0;
    grad_lowpass[n - 1 - i] += sign * grad_highpass[i];
  }
}

// ---------------------------------------------------------------------------
// 1D

WaveletCoeffs dwt1d(std::span<const double> x, const FilterPair& filters, const TransformConfig& config) {
  check_dyadic(x.size(), config.levels, "signal");
  WaveletCoeffs out;
  out.original_length = x.size();
  Signal a(x.begin(), x.end());
  for (int j = 0; j < config.levels; ++j) {
    Signal lo(a.size() / 2), hi(a.size() / 2);
    analyze_level(a, filters.lowpass(), filters.highpass(), lo, hi);
    out.details.push_back(std::move(hi));
    a = std::move(lo);
  }
  out.approx = std::move(a);
  return out;
}

Signal idwt1d(const WaveletCoeffs& coeffs, const FilterPair& filters) {
  check_layout(coeffs);
  Signal a = coeffs.approx;
  for (int j = coeffs.levels(); j >= 1; --j) {
    const auto& d = coeffs.details[static_cast<std::size_t>(j - 1)];
    Signal next(a.size() * 2);
    synthesize_level(a, d, filters.lowpass(), filters.highpass(), next);
    a = std::move(next);
  }
  return a;
}

DwtGrad dwt_grad(std::span<const double> x, const FilterPair& filters, const TransformConfig& config,
                 const WaveletCoeffs& upstream) {
  check_dyadic(x.size(), config.levels, "signal");
  const auto zero_layout = WaveletCoeffs::zeros(x.size(), config.levels);
  check_same_layout(zero_layout, upstream);

  const auto& h = filters.lowpass();
  const auto& g = filters.highpass();
  std::vector<Signal> inputs;
  inputs.emplace_back(x.begin(), x.end());
  for (int j = 0; j < config.levels - 1; ++j) {
    const Signal& a = inputs.back();
    Signal lo(a.size() / 2), hi(a.size() / 2);
    analyze_level(a, h, g, lo, hi);
    inputs.push_back(std::move(lo));
  }

  std::vector<double> grad_h(h.size(), 0.0), grad_g(g.size(), 0.0);
  Signal a_bar = upstream.approx;
  for (int j = config.levels; j >= 1; --j) {
    const Signal& a = inputs[static_cast<std::size_t>(j - 1)];
    const Signal& d_bar = upstream.details[static_cast<std::size_t>(j - 1)];
    accumulate_tap_grad(a_bar, a, grad_h);
    accumulate_tap_grad(d_bar, a, grad_g);
    Signal prev(a.size());
    synthesize_level(a_bar, d_bar, h, g, prev);
    a_bar = std::move(prev);
  }
  chain_highpass_grad(grad_g, grad_h);
  return {std::move(a_bar), std::move(grad_h)};
}

IdwtGrad idwt_grad(const WaveletCoeffs& coeffs, const FilterPair& filters, std::span<const double> upstream) {
  check_layout(coeffs);
  const auto& h = filters.lowpass();
  const auto& g = filters.highpass();
  // Synthesis inputs: approximations at levels J, J-1, ..., 1.
  std::vector<Signal> approx(static_cast<std::size_t>(coeffs.levels()) + 1);
  approx[static_cast<std::size_t>(coeffs.levels())] = coeffs.approx;
  for (int j = coeffs.levels(); j >= 1; --j) {
    const auto& a = approx[static_cast<std::size_t>(j)];
    Signal next(a.size() * 2);
    synthesize_level(a, coeffs.details[static_cast<std::size_t>(j - 1)], h, g, next);
    approx[static_cast<std::size_t>(j - 1)] = std::move(next);
  }
  if (upstream.size() != approx[0].size()) {
    throw ShapeError("upstream length " + std::to_string(upstream.size()) + " does not match reconstruction length " +
                     std::to_string(approx[0].size()));
  }

  IdwtGrad out{WaveletCoeffs::zeros_like(coeffs), std::vector<double>(h.size(), 0.0)};
  std::vector<double> grad_g(g.size(), 0.0);
  Signal a_bar(upstream.begin(), upstream.end());
  for (int j = 1; j <= coeffs.levels(); ++j) {
    const auto& lo = approx[static_cast<std::size_t>(j)];
    const auto& hi = coeffs.details[static_cast<std::size_t>(j - 1)];
    accumulate_tap_grad(lo, a_bar, out.grad_lowpass);
    accumulate_tap_grad(hi, a_bar, grad_g);
    Signal lo_bar(lo.size()), hi_bar(lo.size());
    analyze_level(a_bar, h, g, lo_bar, hi_bar);
    out.grad_coeffs.details[static_cast<std::size_t>(j - 1)] = std::move(hi_bar);
    a_bar = std::move(lo_bar);
  }
  out.grad_coeffs.approx = std::move(a_bar);
  chain_highpass_grad(grad_g, out.grad_lowpass);
  return out;
}

// ---------------------------------------------------------------------------
// 2D

WaveletCoeffs2D dwt2d(const Matrix& x, const FilterPair& filters, const TransformConfig& config) {
  check_dyadic(x.rows, config.levels, "row");
  check_dyadic(x.cols, config.levels, "column");
  WaveletCoeffs2D out;
  out.original_rows = x.rows;
  out.original_cols = x.cols;
  Matrix a = x;
  for (int j = 0; j < config.levels; ++j) {
    Split2D s = analyze_level_2d(a, filters);
    out.details.push_back({std::move(s.lh), std::move(s.hl), std::move(s.hh)});
    a = std::move(s.ll);
  }
  out.approx = std::move(a);
  return out;
}

Matrix idwt2d(const WaveletCoeffs2D& coeffs, const FilterPair& filters) {
  check_layout(coeffs);
  Matrix a = coeffs.approx;
  for (int j = coeffs.levels(); j >= 1; --j) {
    a = synthesize_level_2d(a, coeffs.details[static_cast<std::size_t>(j - 1)], filters);
  }
  return a;
}

namespace {

// Backward of analyze_level_2d given cotangents on the four output bands.
// Returns the cotangent on the input; accumulates tap gradients.
Matrix analyze_level_2d_backward(const Matrix& a, const Matrix& ll_bar, const DetailBands& d_bar,
                                 const FilterPair& f, std::span<double> grad_h, std::span<double> grad_g) {
  const auto& h = f.lowpass();
  const auto& g = f.highpass();
  const std::size_t r = a.rows;
  const std::size_t c = a.cols;
  // Recompute the row stage.
  Matrix lo_c(r, c / 2), hi_c(r, c / 2);
  for (std::size_t i = 0; i < r; ++i) analyze_level(a.row(i), h, g, lo_c.row(i), hi_c.row(i));

  // Column stage backward.
  Matrix lo_c_bar(r, c / 2), hi_c_bar(r, c / 2);
  Signal col(r);
  for (std::size_t j = 0; j < c / 2; ++j) {
    const Signal ll_j = column(ll_bar, j), hl_j = column(d_bar.hl, j);
    const Signal lh_j = column(d_bar.lh, j), hh_j = column(d_bar.hh, j);
    const Signal lo_col = column(lo_c, j), hi_col = column(hi_c, j);
    accumulate_tap_grad(ll_j, lo_col, grad_h);
    accumulate_tap_grad(hl_j, lo_col, grad_g);
    accumulate_tap_grad(lh_j, hi_col, grad_h);
    accumulate_tap_grad(hh_j, hi_col, grad_g);
    synthesize_level(ll_j, hl_j, h, g, col);
    set_column(lo_c_bar, j, col);
    synthesize_level(lh_j, hh_j, h, g, col);
    set_column(hi_c_bar, j, col);
  }

  // Row stage backward.
  Matrix a_bar(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    accumulate_tap_grad(lo_c_bar.row(i), a.row(i), grad_h);
    accumulate_tap_grad(hi_c_bar.row(i), a.row(i), grad_g);
    synthesize_level(lo_c_bar.row(i), hi_c_bar.row(i), h, g, a_bar.row(i));
  }
  return a_bar;
}

}  // namespace

DwtGrad2D dwt_grad(const Matrix& x, const FilterPair& filters, const TransformConfig& config,
                   const WaveletCoeffs2D& upstream) {
  const auto zero_layout = WaveletCoeffs2D::zeros(x.rows, x.cols, config.levels);
  check_same_layout(zero_layout, upstream);

  std::vector<Matrix> inputs{x};
  for (int j = 0; j < config.levels - 1; ++j) inputs.push_back(analyze_level_2d(inputs.back(), filters).ll);

  std::vector<double> grad_h(filters.size(), 0.0), grad_g(filters.size(), 0.0);
  Matrix a_bar = upstream.approx;
  for (int j = config.levels; j >= 1; --j) {
    a_bar = analyze_level_2d_backward(inputs[static_cast<std::size_t>(j - 1)], a_bar,
                                      upstream.details[static_cast<std::size_t>(j - 1)], filters, grad_h, grad_g);
  }
  chain_highpass_grad(grad_g, grad_h);
  return {std::move(a_bar), std::move(grad_h)};
}

IdwtGrad2D idwt_grad(const WaveletCoeffs2D& coeffs, const FilterPair& filters, const Matrix& upstream) {
  check_layout(coeffs);
  const auto& h = filters.lowpass();
  const auto& g = filters.highpass();
  const auto levels = static_cast<std::size_t>(coeffs.levels());
  std::vector<Matrix> approx(levels + 1);
  approx[levels] = coeffs.approx;
  for (std::size_t j = levels; j >= 1; --j) approx[j - 1] = synthesize_level_2d(approx[j], coeffs.details[j - 1], filters);
  if (!upstream.same_shape(approx[0])) throw ShapeError("upstream shape does not match reconstruction shape");

  IdwtGrad2D out{WaveletCoeffs2D::zeros_like(coeffs), std::vector<double>(h.size(), 0.0)};
  std::vector<double> grad_g(g.size(), 0.0);
  Matrix a_bar = upstream;
  for (std::size_t j = 1; j <= levels; ++j) {
    const Matrix& ll = approx[j];
    const DetailBands& d = coeffs.details[j - 1];
    const std::size_t r = a_bar.rows;
    const std::size_t c = a_bar.cols;
    // Forward intermediates of the synthesis step (column stage output).
    Matrix lo_c(r, c / 2), hi_c(r, c / 2);
    Signal col(r);
    for (std::size_t k = 0; k < c / 2; ++k) {
      synthesize_level(column(ll, k), column(d.hl, k), h, g, col);
      set_column(lo_c, k, col);
      synthesize_level(column(d.lh, k), column(d.hh, k), h, g, col);
      set_column(hi_c, k, col);
    }
    // Row stage backward: out.row(i) = synth(lo_c.row(i), hi_c.row(i)).
    Matrix lo_c_bar(r, c / 2), hi_c_bar(r, c / 2);
    for (std::size_t i = 0; i < r; ++i) {
      accumulate_tap_grad(lo_c.row(i), a_bar.row(i), out.grad_lowpass);
      accumulate_tap_grad(hi_c.row(i), a_bar.row(i), grad_g);
      analyze_level(a_bar.row(i), h, g, lo_c_bar.row(i), hi_c_bar.row(i));
    }
    // Column stage backward.
    DetailBands& d_bar = out.grad_coeffs.details[j - 1];
    Matrix ll_bar(r / 2, c / 2);
    Signal lo(r / 2), hi(r / 2);
    for (std::size_t k = 0; k < c / 2; ++k) {
      const Signal lcb = column(lo_c_bar, k), hcb = column(hi_c_bar, k);
      accumulate_tap_grad(column(ll, k), lcb, out.grad_lowpass);
      accumulate_tap_grad(column(d.hl, k), lcb, grad_g);
      accumulate_tap_grad(column(d.lh, k), hcb, out.grad_lowpass);
      accumulate_tap_grad(column(d.hh, k), hcb, grad_g);
      analyze_level(lcb, h, g, lo, hi);
      set_column(ll_bar, k, lo);
      set_column(d_bar.hl, k, hi);
      analyze_level(hcb, h, g, lo, hi);
      set_column(d_bar.lh, k, lo);
      set_column(d_bar.hh, k, hi);
    }
    a_bar = std::move(ll_bar);
  }
  out.grad_coeffs.approx = std::move(a_bar);
  chain_highpass_grad(grad_g, out.grad_lowpass);
  return out;
}

}  // namespace awd
