#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "awd/matrix.hpp"

namespace awd {

/// relu and identity are what the teachers use. tanh and square are smooth
/// activations with a nonzero second derivative, needed to exercise the
/// Hessian-vector path on something other than a piecewise-linear network.
enum class Activation { relu, identity, tanh, square };

struct Layer {
  Matrix weight;  // out x in
  std::vector<double> bias;
  Activation activation = Activation::identity;
};

/// Feedforward regressor with a scalar output.
class TeacherModel {
 public:
  TeacherModel() = default;
  explicit TeacherModel(std::vector<Layer> layers);

  /// dims = {input, hidden..., 1}. Hidden layers use `hidden`, the last layer
  /// is identity. Weights are U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  static TeacherModel dense(const std::vector<std::size_t>& dims, Activation hidden, std::uint64_t seed);

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& mutable_layers() { return layers_; }

  /// Multiplies the last layer by c, so the output scales by c.
  TeacherModel scaled(double c) const;

 private:
  std::vector<Layer> layers_;
};

double forward(const TeacherModel& model, std::span<const double> x);

/// df/dx by reverse accumulation. ReLU'(0) = 0.
Signal input_grad(const TeacherModel& model, std::span<const double> x);

/// Hessian-vector product H f(x) * cotangent (forward-over-reverse).
/// ReLU'' is taken as 0 everywhere.
Signal grad_of_grad(const TeacherModel& model, std::span<const double> x, std::span<const double> cotangent);

struct TrainConfig {
  double learning_rate = 0.01;
  int epochs = 20;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
};

struct TrainResult {
  TeacherModel model;
  double final_mse = 0.0;
  std::vector<double> epoch_mse;  // mean minibatch loss per epoch
};

/// Adam (0.9, 0.999, 1e-8) on mean squared error with seeded shuffling.
TrainResult train(TeacherModel model, std::span<const Signal> x, std::span<const double> y, const TrainConfig& config);

std::vector<double> predict(const TeacherModel& model, std::span<const Signal> x);
double mean_squared_error(std::span<const double> y, std::span<const double> pred);
double r2_score(std::span<const double> y, std::span<const double> pred);

void save_model(const TeacherModel& model, const std::filesystem::path& path);
TeacherModel load_model(const std::filesystem::path& path);

}  // namespace awd
