#include "awd/distill.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "awd/errors.hpp"
#include "awd/evalkit.hpp"
#include "awd/trim.hpp"

namespace awd {

namespace {

double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void check_batch(std::span<const Signal> batch) {
  if (batch.empty()) throw InvalidArgument("empty batch");
}

bool diverged(const AwdLoss& loss) { return !std::isfinite(loss.total) || loss.total > kDivergenceThreshold; }

}  // namespace

void validate(const AwdConfig& config) {
  if (!(config.lambda >= 0.0)) throw InvalidArgument("lambda must be >= 0");
  if (!(config.gamma >= 0.0)) throw InvalidArgument("gamma must be >= 0");
  if (!(config.learning_rate > 0.0)) throw InvalidArgument("learning rate must be positive");
  if (config.epochs < 1) throw InvalidArgument("epochs must be >= 1");
  if (config.batch_size < 1) throw InvalidArgument("batch size must be >= 1");
  if (config.levels < 1) throw InvalidArgument("levels must be >= 1");
  if (!(config.init_sigma >= 0.0)) throw InvalidArgument("init sigma must be >= 0");
}

AwdLoss awd_loss(const FilterPair& filters, std::span<const Signal> batch, const TeacherModel& model, double lambda,
                 double gamma, const TransformConfig& config) {
  check_batch(batch);
  if (!(lambda >= 0.0) || !(gamma >= 0.0)) throw InvalidArgument("lambda and gamma must be >= 0");
  const double inv_m = 1.0 / static_cast<double>(batch.size());
  AwdLoss out;
  out.wavelet = wavelet_penalties(filters);
  double sparsity = 0.0;
  for (const auto& x : batch) {
    const WaveletCoeffs w = dwt1d(x, filters, config);
    const Signal x_rec = idwt1d(w, filters);
    double err = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) err += (x[i] - x_rec[i]) * (x[i] - x_rec[i]);
    out.recon += err * inv_m;
    sparsity += sparsity_term(w, lambda) * inv_m;
    if (gamma > 0.0) {
      double l1 = 0.0;
      for (double a : saliency(model, w, filters).flatten()) l1 += std::abs(a);
      out.interp += gamma * l1;
    }
  }
  out.wavelet.sparsity = sparsity;
  out.wavelet.total = sparsity + out.wavelet.validity();
  out.total = out.recon + out.wavelet.total + out.interp;
  return out;
}

AwdLossGrad awd_loss_grad(const FilterPair& filters, std::span<const Signal> batch, const TeacherModel& model,
                          double lambda, double gamma, const TransformConfig& config) {
  check_batch(batch);
  if (!(lambda >= 0.0) || !(gamma >= 0.0)) throw InvalidArgument("lambda and gamma must be >= 0");
  const double inv_m = 1.0 / static_cast<double>(batch.size());
  AwdLossGrad out;
  out.loss.wavelet = wavelet_penalties(filters);
  out.grad_lowpass = penalty_grad(filters);
  auto& grad = out.grad_lowpass;
  double sparsity = 0.0;

  for (const auto& x : batch) {
    const WaveletCoeffs w = dwt1d(x, filters, config);
    const Signal x_rec = idwt1d(w, filters);

    // Cotangent on the reconstruction: recon term plus the Hessian path of the
    // interpretation term.
    Signal q(x.size());
    double err = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double e = x_rec[i] - x[i];
      err += e * e;
      q[i] = 2.0 * e * inv_m;
    }
    out.loss.recon += err * inv_m;
    sparsity += sparsity_term(w, lambda) * inv_m;

    if (gamma > 0.0) {
      const Signal v = input_grad(model, x_rec);
      WaveletCoeffs sal = idwt_grad(w, filters, v).grad_coeffs;
      Signal flat = sal.flatten();
      double l1 = 0.0;
      for (double& a : flat) {
        l1 += std::abs(a);
        a = sign_of(a);
      }
      out.loss.interp += gamma * l1;
      WaveletCoeffs sign = WaveletCoeffs::zeros_like(sal);
      sign.assign_flat(flat);
      const auto direct = idwt_grad(sign, filters, v).grad_lowpass;
      for (std::size_t n = 0; n < grad.size(); ++n) grad[n] += gamma * direct[n];
      const Signal hv = grad_of_grad(model, x_rec, idwt1d(sign, filters));
      for (std::size_t i = 0; i < q.size(); ++i) q[i] += gamma * hv[i];
    }

    const IdwtGrad through_synthesis = idwt_grad(w, filters, q);
    WaveletCoeffs w_bar = through_synthesis.grad_coeffs;
    if (lambda > 0.0) {
      for (std::size_t i = 0; i < w.approx.size(); ++i) w_bar.approx[i] += lambda * inv_m * sign_of(w.approx[i]);
      for (std::size_t j = 0; j < w.details.size(); ++j) {
        for (std::size_t i = 0; i < w.details[j].size(); ++i) {
          w_bar.details[j][i] += lambda * inv_m * sign_of(w.details[j][i]);
        }
      }
    }
    const DwtGrad through_analysis = dwt_grad(x, filters, config, w_bar);
    for (std::size_t n = 0; n < grad.size(); ++n) {
      grad[n] += through_synthesis.grad_lowpass[n] + through_analysis.grad_lowpass[n];
    }
  }
  out.loss.wavelet.sparsity = sparsity;
  out.loss.wavelet.total = sparsity + out.loss.wavelet.validity();
  out.loss.total = out.loss.recon + out.loss.wavelet.total + out.loss.interp;
  return out;
}

AwdRunRecord distill(std::span<const Signal> dataset, const TeacherModel& model, const AwdConfig& config,
                     const FilterPair& init) {
  validate(config);
  if (dataset.empty()) throw InvalidArgument("distillation dataset is empty");
  const TransformConfig tconfig{config.levels};

  AwdRunRecord record(config, init);
  std::vector<double> h = init.lowpass();
  std::vector<double> m(h.size(), 0.0), v(h.size(), 0.0);
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Signal> batch;
  long step = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const FilterPair current(h, init.name());
    AwdLoss entering = awd_loss(current, dataset, model, config.lambda, config.gamma, tconfig);
    if (diverged(entering)) {
      throw DivergenceError("distillation diverged at step " + std::to_string(step) + " (epoch " +
                                std::to_string(epoch) + "), loss " + std::to_string(entering.total),
                            step);
    }
    record.history.push_back(entering);

    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(dataset[order[i]]);
      const AwdLossGrad lg =
          awd_loss_grad(FilterPair(h, init.name()), batch, model, config.lambda, config.gamma, tconfig);
      const bool bad_grad = std::any_of(lg.grad_lowpass.begin(), lg.grad_lowpass.end(),
                                        [](double g) { return !std::isfinite(g); });
      if (diverged(lg.loss) || bad_grad) {
        throw DivergenceError("distillation diverged at step " + std::to_string(step) + ", loss " +
                                  std::to_string(lg.loss.total),
                              step);
      }
      // A batch already at the global minimum carries only rounding noise,
      // which Adam's normalization would blow up to full-size steps.
      if (lg.loss.total <= kStationaryLoss) continue;
      ++step;
      const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      for (std::size_t n = 0; n < h.size(); ++n) {
        const double g = lg.grad_lowpass[n];
        m[n] = beta1 * m[n] + (1.0 - beta1) * g;
        v[n] = beta2 * v[n] + (1.0 - beta2) * g * g;
        h[n] -= config.learning_rate * (m[n] / c1) / (std::sqrt(v[n] / c2) + eps);
      }
    }
  }

  record.final_filters = FilterPair(h, "awd");
  record.final_loss = awd_loss(record.final_filters, dataset, model, config.lambda, config.gamma, tconfig);
  if (diverged(record.final_loss)) {
    throw DivergenceError("distillation diverged at step " + std::to_string(step), step);
  }
  return record;
}

std::vector<AwdRunRecord> sweep(std::span<const Signal> dataset, const TeacherModel& model,
                                std::span<const double> lambda_grid, std::span<const double> gamma_grid,
                                const AwdConfig& base_config, const FilterPair& init) {
  if (lambda_grid.empty() || gamma_grid.empty()) throw InvalidArgument("sweep grids must be nonempty");
  std::vector<AwdRunRecord> records;
  FilterPair current = init;
  for (std::size_t li = 0; li < lambda_grid.size(); ++li) {
    for (std::size_t step = 0; step < gamma_grid.size(); ++step) {
      const std::size_t gi = (li % 2 == 0) ? step : gamma_grid.size() - 1 - step;
      AwdConfig cfg = base_config;
      cfg.lambda = lambda_grid[li];
      cfg.gamma = gamma_grid[gi];
      try {
        AwdRunRecord rec = distill(dataset, model, cfg, current);
        rec.lambda_index = li;
        rec.gamma_index = gi;
        current = rec.final_filters;
        records.push_back(std::move(rec));
      } catch (const DivergenceError& e) {
        AwdRunRecord rec(cfg, current);
        rec.failed = true;
        rec.error = e.what();
        rec.lambda_index = li;
        rec.gamma_index = gi;
        records.push_back(std::move(rec));
      }
    }
  }
  return records;
}

SelectionCriterion by_groundtruth_distance(const FilterPair& target, int iterations) {
  const WaveletCurve target_psi = cascade(target, iterations).psi;
  return [target_psi, iterations](const AwdRunRecord& r) {
    return wavelet_distance(cascade(r.final_filters, iterations).psi, target_psi);
  };
}

SelectionCriterion by_cv_score(std::function<double(const FilterPair&)> score) {
  return [score = std::move(score)](const AwdRunRecord& r) { return -score(r.final_filters); };
}

const AwdRunRecord& select_best(std::span<const AwdRunRecord> records, const SelectionCriterion& criterion) {
  const AwdRunRecord* best = nullptr;
  double best_score = 0.0;
  for (const auto& r : records) {
    if (r.failed) continue;
    const double s = criterion(r);
    const bool better =
        best == nullptr || s < best_score ||
        (s == best_score && std::pair(r.config.lambda, r.config.gamma) < std::pair(best->config.lambda, best->config.gamma));
    if (better) {
      best = &r;
      best_score = s;
    }
  }
  if (best == nullptr) throw InvalidArgument("no successful run to select from");
  return *best;
}

std::vector<double> log_grid(double lo, double hi, std::size_t n) {
  if (n == 0 || !(lo > 0.0) || !(hi > 0.0)) throw InvalidArgument("log grid needs n >= 1 and positive bounds");
  if (n == 1) return {lo};
  std::vector<double> out(n);
  const double a = std::log(lo), b = std::log(hi);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
  }
  return out;
}

}  // namespace awd
