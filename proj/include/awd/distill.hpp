#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "awd/constraints.hpp"
#include "awd/filters.hpp"
#include "awd/nnet.hpp"
#include "awd/transform.hpp"

namespace awd {

struct AwdConfig {
  double lambda = 0.005;  // sparsity weight
  double gamma = 0.04;    // interpretation weight
  double learning_rate = 1e-3;
  int epochs = 50;
  std::size_t batch_size = 128;
  int levels = 3;
  std::string init = "db5";  // bank name or filter file
  double init_sigma = 0.0;   // noise added to the init taps
  std::uint64_t seed = 0;
};

void validate(const AwdConfig& config);

/// One evaluation of the distillation objective on a batch of m signals:
///   recon  = (1/m) sum ||x - idwt(dwt(x))||^2
///   wavelet = (1/m) sum W(h, g, x; lambda)   (sparsity is the batch mean)
///   interp = gamma * sum ||saliency(dwt(x))||_1   (unnormalized over the batch)
struct AwdLoss {
  double recon = 0.0;
  PenaltyBreakdown wavelet;
  double interp = 0.0;
  double total = 0.0;
};

AwdLoss awd_loss(const FilterPair& filters, std::span<const Signal> batch, const TeacherModel& model, double lambda,
                 double gamma, const TransformConfig& config);

struct AwdLossGrad {
  AwdLoss loss;
  std::vector<double> grad_lowpass;
};

AwdLossGrad awd_loss_grad(const FilterPair& filters, std::span<const Signal> batch, const TeacherModel& model,
                          double lambda, double gamma, const TransformConfig& config);

struct AwdRunRecord {
  AwdRunRecord(AwdConfig c, const FilterPair& init) : config(std::move(c)), initial(init), final_filters(init) {}

  AwdConfig config;
  FilterPair initial;
  FilterPair final_filters;
  std::vector<AwdLoss> history;  // full-dataset loss entering each epoch
  AwdLoss final_loss;
  bool failed = false;
  std::string error;
  std::size_t lambda_index = 0;
  std::size_t gamma_index = 0;
};

/// Adam on the lowpass taps; the highpass is re-derived after every step.
/// Throws DivergenceError if the loss leaves [0, 1e6] or turns non-finite.
AwdRunRecord distill(std::span<const Signal> dataset, const TeacherModel& model, const AwdConfig& config,
                     const FilterPair& init);

inline constexpr double kDivergenceThreshold = 1e6;
/// Batches whose loss is at or below this produce no optimizer step.
inline constexpr double kStationaryLoss = 1e-20;

/// Warm-started grid sweep in serpentine order: lambda rows, gamma ascending
/// on even rows and descending on odd rows. Each cell starts from the
/// previous cell's final filters. Diverged cells are marked failed and the
/// sweep continues from the last good filters.
std::vector<AwdRunRecord> sweep(std::span<const Signal> dataset, const TeacherModel& model,
                                std::span<const double> lambda_grid, std::span<const double> gamma_grid,
                                const AwdConfig& base_config, const FilterPair& init);

/// Lower is better.
using SelectionCriterion = std::function<double(const AwdRunRecord&)>;

SelectionCriterion by_groundtruth_distance(const FilterPair& target, int iterations = 8);
/// `score` is higher-is-better (e.g. a cross-validated R^2).
SelectionCriterion by_cv_score(std::function<double(const FilterPair&)> score);

/// Argmin over non-failed records; ties go to the smaller (lambda, gamma).
const AwdRunRecord& select_best(std::span<const AwdRunRecord> records, const SelectionCriterion& criterion);

/// n points evenly spaced on a log scale between lo and hi inclusive.
std::vector<double> log_grid(double lo, double hi, std::size_t n);

}  // namespace awd
