#include "awd/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "awd/errors.hpp"
#include "awd/evalkit.hpp"
#include "awd/transform.hpp"

namespace awd::synth {

namespace {

// Offset of detail level `scale` inside the flat coefficient layout.
std::size_t band_offset(std::size_t dim, int levels, int scale) {
  std::size_t offset = dim >> levels;  // approx
  for (int j = levels; j > scale; --j) offset += dim >> j;
  return offset;
}

std::vector<Signal> gaussian_rows(std::size_t n, std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Signal> out(n, Signal(dim));
  for (auto& row : out) {
    for (double& v : row) v = normal(rng);
  }
  return out;
}

}  // namespace

SynthSpec SynthSpec::full_scale(std::uint64_t seed) {
  SynthSpec s;
  s.n_train = 50000;
  s.n_test = 5000;
  s.seed = seed;
  return s;
}

void validate(const SynthSpec& spec) {
  if (spec.levels < 1) throw InvalidArgument("levels must be >= 1");
  if (spec.dim == 0 || spec.dim % (std::size_t{1} << spec.levels) != 0) {
    throw InvalidArgument("dim " + std::to_string(spec.dim) + " is not divisible by 2^" + std::to_string(spec.levels));
  }
  if (spec.active_scale < 1 || spec.active_scale > spec.levels) {
    throw InvalidArgument("active scale must be in 1.." + std::to_string(spec.levels));
  }
  const std::size_t band = spec.dim >> spec.active_scale;
  if (spec.n_active > band) {
    throw InvalidArgument(std::to_string(spec.n_active) + " active locations do not fit in a band of length " +
                          std::to_string(band));
  }
  if (!(spec.noise_sigma >= 0.0)) throw InvalidArgument("noise sigma must be >= 0");
  if (spec.n_train == 0) throw InvalidArgument("n_train must be positive");
  standard_bank(spec.bank);
}

SynthData generate(const SynthSpec& spec) {
  validate(spec);
  SynthData out;
  GroundTruth& t = out.truth;
  t.bank = spec.bank;
  t.levels = spec.levels;
  t.active_scale = spec.active_scale;
  t.beta_value = spec.beta_value;
  const std::size_t band = spec.dim >> spec.active_scale;
  if (spec.n_active > 0) {
    const std::size_t rotation = static_cast<std::size_t>(spec.seed % band);
    for (std::size_t k = 0; k < spec.n_active; ++k) t.active_indices.push_back((k * band / spec.n_active + rotation) % band);
    std::sort(t.active_indices.begin(), t.active_indices.end());
  }
  t.beta.assign(spec.dim, 0.0);
  const std::size_t offset = band_offset(spec.dim, spec.levels, spec.active_scale);
  for (std::size_t i : t.active_indices) t.beta[offset + i] = spec.beta_value;

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  auto fill = [&](Dataset& d, std::size_t n) {
    d.x = gaussian_rows(n, spec.dim, rng);
    d.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) d.y[i] = clean_target(t, d.x[i]) + spec.noise_sigma * noise(rng);
  };
  fill(out.train, spec.n_train);
  fill(out.test, spec.n_test);
  return out;
}

double clean_target(const GroundTruth& truth, std::span<const double> x) {
  if (x.size() != truth.beta.size()) throw ShapeError("signal length does not match the groundtruth");
  const Signal w = dwt1d(x, standard_bank(truth.bank), TransformConfig{truth.levels}).flatten();
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * truth.beta[i];
  return s;
}

TeacherReport train_teacher(const SynthData& data, const TrainConfig& config, std::size_t hidden) {
  const std::size_t dim = data.train.x.front().size();
  TeacherModel init = TeacherModel::dense({dim, hidden, hidden, 1}, Activation::relu, config.seed);
  TrainResult r = train(std::move(init), data.train.x, data.train.y, config);
  TeacherReport rep;
  rep.model = std::move(r.model);
  rep.train_mse = r.final_mse;
  rep.epoch_mse = std::move(r.epoch_mse);
  const Dataset& eval = data.test.x.empty() ? data.train : data.test;
  rep.test_r2 = r2_score(eval.y, predict(rep.model, eval.x));
  return rep;
}

void require_teacher_gate(const TeacherReport& report, double gate) {
  if (!(report.test_r2 > gate)) {
    throw PreconditionError("teacher test R^2 " + std::to_string(report.test_r2) + " does not exceed " +
                            std::to_string(gate));
  }
}

FilterPair initial_filters(const std::string& init, double sigma, std::uint64_t seed) {
  if (init == "db5_noise") return perturb(standard_bank("db5"), sigma, seed);
  return resolve_filter(init);
}

RecoveryConfig default_recovery_config(std::uint64_t seed) {
  RecoveryConfig c;
  const double s = std::sqrt(10.0);
  c.lambda_grid = log_grid(0.005 / s, 0.005 * s, 4);
  c.gamma_grid = log_grid(0.04 / s, 0.04 * s, 4);
  c.base.seed = seed;
  c.teacher.seed = seed;
  return c;
}

RecoveryReport recovery_experiment(const SynthData& data, const RecoveryConfig& config, const TeacherModel* teacher) {
  RecoveryReport rep(standard_bank(data.truth.bank), standard_bank(data.truth.bank));
  TeacherModel trained;
  if (teacher == nullptr) {
    TeacherReport t = train_teacher(data, config.teacher, config.hidden);
    require_teacher_gate(t);
    rep.teacher_r2 = t.test_r2;
    trained = std::move(t.model);
    teacher = &trained;
  } else {
    const Dataset& eval = data.test.x.empty() ? data.train : data.test;
    rep.teacher_r2 = r2_score(eval.y, predict(*teacher, eval.x));
  }

  rep.init = initial_filters(config.init, config.init_sigma, config.base.seed);
  AwdConfig base = config.base;
  base.levels = data.truth.levels;
  const WaveletCurve target = cascade(rep.truth, config.cascade_iterations).psi;
  rep.initial_distance = wavelet_distance(cascade(rep.init, config.cascade_iterations).psi, target);
  rep.records = sweep(data.train.x, *teacher, config.lambda_grid, config.gamma_grid, base, rep.init);

  bool have_best = false;
  for (std::size_t i = 0; i < rep.records.size(); ++i) {
    const auto& r = rep.records[i];
    RecoveryCell cell{r.config.lambda, r.config.gamma, 0.0, r.failed};
    if (!r.failed) {
      cell.distance = wavelet_distance(cascade(r.final_filters, config.cascade_iterations).psi, target);
      if (!have_best || cell.distance < rep.cells[rep.best].distance) {
        rep.best = i;
        have_best = true;
      }
    }
    rep.cells.push_back(cell);
  }
  if (!have_best) throw DivergenceError("every sweep cell diverged", 0);
  return rep;
}

Matrix bump_map(const BumpMapSpec& spec, std::uint64_t seed) {
  if (spec.rows < 3 || spec.cols < 3) throw InvalidArgument("bump maps must be at least 3x3");
  if (!(spec.bump_width > 0.0)) throw InvalidArgument("bump width must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ur(0.0, static_cast<double>(spec.rows));
  std::uniform_real_distribution<double> uc(0.0, static_cast<double>(spec.cols));
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(spec.rows, spec.cols);
  const double inv2s2 = 1.0 / (2.0 * spec.bump_width * spec.bump_width);
  const auto rows = static_cast<double>(spec.rows), cols = static_cast<double>(spec.cols);
  for (std::size_t b = 0; b < spec.n_bumps; ++b) {
    const double r0 = ur(rng), c0 = uc(rng);
    const double amp = spec.amplitude_mean + spec.amplitude_sd * normal(rng);
    for (std::size_t r = 0; r < spec.rows; ++r) {
      double dr = std::abs(static_cast<double>(r) - r0);
      dr = std::min(dr, rows - dr);
      for (std::size_t c = 0; c < spec.cols; ++c) {
        double dc = std::abs(static_cast<double>(c) - c0);
        dc = std::min(dc, cols - dc);
        m(r, c) += amp * std::exp(-(dr * dr + dc * dc) * inv2s2);
      }
    }
  }
  for (double& v : m.data) v += spec.noise_sigma * normal(rng);
  return m;
}

std::vector<Matrix> bump_maps(const BumpMapSpec& spec, std::size_t count, std::uint64_t seed) {
  std::vector<Matrix> out;
  out.reserve(count);
  std::vector<std::uint64_t> seeds(count);
  std::mt19937_64 rng(seed);
  for (auto& s : seeds) s = rng();
  for (auto s : seeds) out.push_back(bump_map(spec, s));
  return out;
}

}  // namespace awd::synth
