#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "awd/distill.hpp"
#include "awd/filters.hpp"
#include "awd/matrix.hpp"
#include "awd/nnet.hpp"

namespace awd::synth {

struct SynthSpec {
  std::size_t n_train = 5000;
  std::size_t n_test = 1000;
  std::size_t dim = 64;
  std::string bank = "db5";
  double beta_value = 2.0;
  std::size_t n_active = 3;
  int active_scale = 2;  // detail level carrying the active coefficients
  int levels = 3;
  double noise_sigma = 0.1;
  std::uint64_t seed = 0;

  /// 50000 / 5000 samples instead of the desk-scale 5000 / 1000.
  static SynthSpec full_scale(std::uint64_t seed = 0);
};

void validate(const SynthSpec& spec);

struct GroundTruth {
  std::string bank;
  int levels = 3;
  int active_scale = 2;
  double beta_value = 2.0;
  std::vector<std::size_t> active_indices;  // positions inside the active detail band
  std::vector<double> beta;                 // flat coefficient layout, length dim
};

struct Dataset {
  std::vector<Signal> x;
  std::vector<double> y;
};

struct SynthData {
  Dataset train;
  Dataset test;
  GroundTruth truth;
};

/// x ~ N(0, I), y = <dwt(x), beta> + N(0, sigma^2). Train rows are drawn before test rows.
SynthData generate(const SynthSpec& spec);

/// Noise-free target <dwt(x), beta> recomputed from the groundtruth record.
double clean_target(const GroundTruth& truth, std::span<const double> x);

inline constexpr double kTeacherGate = 0.99;

struct TeacherReport {
  TeacherModel model;
  double train_mse = 0.0;
  double test_r2 = 0.0;
  std::vector<double> epoch_mse;
};

/// dim -> hidden -> hidden -> 1 ReLU network trained with Adam.
TeacherReport train_teacher(const SynthData& data, const TrainConfig& config, std::size_t hidden = 32);

/// Throws PreconditionError when test R^2 is not above the gate.
void require_teacher_gate(const TeacherReport& report, double gate = kTeacherGate);

/// "db5_noise" perturbs db5 by `sigma`; any other name is looked up as a bank or file.
FilterPair initial_filters(const std::string& init, double sigma, std::uint64_t seed);

struct RecoveryConfig {
  std::string init = "db5_noise";
  double init_sigma = kDefaultPerturbSigma;
  std::vector<double> lambda_grid;
  std::vector<double> gamma_grid;
  AwdConfig base;
  TrainConfig teacher;
  std::size_t hidden = 32;
  int cascade_iterations = 8;
};

/// 4x4 log grids spanning a decade around lambda = 0.005 and gamma = 0.04.
RecoveryConfig default_recovery_config(std::uint64_t seed = 0);

struct RecoveryCell {
  double lambda = 0.0;
  double gamma = 0.0;
  double distance = 0.0;
  bool failed = false;
};

struct RecoveryReport {
  RecoveryReport(FilterPair t, FilterPair i) : truth(std::move(t)), init(std::move(i)) {}

  double teacher_r2 = 0.0;
  FilterPair truth;
  FilterPair init;
  double initial_distance = 0.0;
  std::vector<RecoveryCell> cells;  // sweep order
  std::vector<AwdRunRecord> records;
  std::size_t best = 0;  // index into cells

  double best_distance() const { return cells.at(best).distance; }
};

/// Teacher training, gate, warm-started sweep and distance to the groundtruth
/// wavelet for every cell. A trained teacher can be passed in to skip training.
RecoveryReport recovery_experiment(const SynthData& data, const RecoveryConfig& config,
                                   const TeacherModel* teacher = nullptr);

struct BumpMapSpec {
  std::size_t rows = 64;
  std::size_t cols = 64;
  std::size_t n_bumps = 40;
  double amplitude_mean = 0.1;
  double amplitude_sd = 0.02;
  double bump_width = 1.5;  // Gaussian standard deviation in pixels
  double noise_sigma = 0.002;
};

/// Sum of isotropic Gaussian bumps at uniform positions (periodic) plus white noise.
Matrix bump_map(const BumpMapSpec& spec, std::uint64_t seed);

std::vector<Matrix> bump_maps(const BumpMapSpec& spec, std::size_t count, std::uint64_t seed);

}  // namespace awd::synth
