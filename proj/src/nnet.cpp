#include "awd/nnet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <string>

#include <json.hpp>

#include "awd/errors.hpp"

namespace awd {

namespace {

double act(Activation a, double z) {
  switch (a) {
    case Activation::relu: return z > 0.0 ? z : 0.0;
    case Activation::identity: return z;
    case Activation::tanh: return std::tanh(z);
    case Activation::square: return z * z;
  }
  return z;
}

double act_d1(Activation a, double z) {
  switch (a) {
    case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::identity: return 1.0;
    case Activation::tanh: {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
    case Activation::square: return 2.0 * z;
  }
  return 1.0;
}

double act_d2(Activation a, double z) {
  switch (a) {
    case Activation::relu:
    case Activation::identity: return 0.0;
    case Activation::tanh: {
      const double t = std::tanh(z);
      return -2.0 * t * (1.0 - t * t);
    }
    case Activation::square: return 2.0;
  }
  return 0.0;
}

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::identity: return "identity";
    case Activation::tanh: return "tanh";
    case Activation::square: return "square";
  }
  return "identity";
}

Activation activation_from_name(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "identity") return Activation::identity;
  if (s == "tanh") return Activation::tanh;
  if (s == "square") return Activation::square;
  throw Error("unknown activation '" + s + "'");
}

// Pre-activations z_l and activations a_l for every layer (a_0 = x).
struct Trace {
  std::vector<Signal> z;
  std::vector<Signal> a;
};

Trace run_forward(const TeacherModel& model, std::span<const double> x) {
  if (x.size() != model.input_dim()) {
    throw ShapeError("model expects " + std::to_string(model.input_dim()) + " inputs, got " +
                     std::to_string(x.size()));
  }
  Trace t;
  t.a.emplace_back(x.begin(), x.end());
  for (const auto& layer : model.layers()) {
    const Signal& in = t.a.back();
    Signal z(layer.weight.rows);
    Signal out(layer.weight.rows);
    for (std::size_t i = 0; i < layer.weight.rows; ++i) {
      double s = layer.bias[i];
      const auto w = layer.weight.row(i);
      for (std::size_t k = 0; k < w.size(); ++k) s += w[k] * in[k];
      z[i] = s;
      out[i] = act(layer.activation, s);
    }
    t.z.push_back(std::move(z));
    t.a.push_back(std::move(out));
  }
  return t;
}

// v <- W^T e
Signal transpose_apply(const Matrix& w, std::span<const double> e) {
  Signal out(w.cols, 0.0);
  for (std::size_t i = 0; i < w.rows; ++i) {
    const auto row = w.row(i);
    for (std::size_t k = 0; k < w.cols; ++k) out[k] += row[k] * e[i];
  }
  return out;
}

}  // namespace

TeacherModel::TeacherModel(std::vector<Layer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw ShapeError("model needs at least one layer");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.bias.size() != layer.weight.rows) throw ShapeError("bias length does not match layer width");
    if (l > 0 && layer.weight.cols != layers_[l - 1].weight.rows) {
      throw ShapeError("layer " + std::to_string(l) + " input width does not chain");
    }
  }
}

TeacherModel TeacherModel::dense(const std::vector<std::size_t>& dims, Activation hidden, std::uint64_t seed) {
  if (dims.size() < 2) throw InvalidArgument("dense model needs at least input and output dims");
  std::mt19937_64 rng(seed);
  std::vector<Layer> layers;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(dims[l]));
    std::uniform_real_distribution<double> u(-bound, bound);
    Layer layer{Matrix(dims[l + 1], dims[l]), std::vector<double>(dims[l + 1]),
                l + 2 == dims.size() ? Activation::identity : hidden};
    for (double& w : layer.weight.data) w = u(rng);
    for (double& b : layer.bias) b = u(rng);
    layers.push_back(std::move(layer));
  }
  return TeacherModel(std::move(layers));
}

std::size_t TeacherModel::input_dim() const { return layers_.empty() ? 0 : layers_.front().weight.cols; }
std::size_t TeacherModel::output_dim() const { return layers_.empty() ? 0 : layers_.back().weight.rows; }

TeacherModel TeacherModel::scaled(double c) const {
  TeacherModel m = *this;
  auto& last = m.layers_.back();
  for (double& w : last.weight.data) w *= c;
  for (double& b : last.bias) b *= c;
  return m;
}

double forward(const TeacherModel& model, std::span<const double> x) {
  const Trace t = run_forward(model, x);
  return t.a.back()[0];
}

Signal input_grad(const TeacherModel& model, std::span<const double> x) {
  const Trace t = run_forward(model, x);
  const auto& layers = model.layers();
  Signal g(1, 1.0);
  for (std::size_t l = layers.size(); l-- > 0;) {
    Signal e(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) e[i] = act_d1(layers[l].activation, t.z[l][i]) * g[i];
    g = transpose_apply(layers[l].weight, e);
  }
  return g;
}

Signal grad_of_grad(const TeacherModel& model, std::span<const double> x, std::span<const double> cotangent) {
  if (cotangent.size() != model.input_dim()) throw ShapeError("cotangent length does not match model input");
  if (x.size() != model.input_dim()) throw ShapeError("input length does not match model input");
  // Piecewise-linear networks have a zero Hessian.
  const bool piecewise_linear = std::all_of(model.layers().begin(), model.layers().end(), [](const Layer& l) {
    return l.activation == Activation::relu || l.activation == Activation::identity;
  });
  if (piecewise_linear) return Signal(x.size(), 0.0);
  const Trace t = run_forward(model, x);
  const auto& layers = model.layers();

  // Forward tangents of z along the cotangent direction.
  std::vector<Signal> zdot;
  Signal adot(cotangent.begin(), cotangent.end());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& w = layers[l].weight;
    Signal zd(w.rows, 0.0);
    for (std::size_t i = 0; i < w.rows; ++i) {
      const auto row = w.row(i);
      for (std::size_t k = 0; k < w.cols; ++k) zd[i] += row[k] * adot[k];
    }
    adot.assign(w.rows, 0.0);
    for (std::size_t i = 0; i < w.rows; ++i) adot[i] = act_d1(layers[l].activation, t.z[l][i]) * zd[i];
    zdot.push_back(std::move(zd));
  }

  // Reverse pass carrying the gradient g and its tangent gdot.
  Signal g(1, 1.0);
  Signal gdot(1, 0.0);
  for (std::size_t l = layers.size(); l-- > 0;) {
    const auto act_l = layers[l].activation;
    Signal e(g.size()), edot(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double z = t.z[l][i];
      e[i] = act_d1(act_l, z) * g[i];
      edot[i] = act_d2(act_l, z) * zdot[l][i] * g[i] + act_d1(act_l, z) * gdot[i];
    }
    g = transpose_apply(layers[l].weight, e);
    gdot = transpose_apply(layers[l].weight, edot);
  }
  return gdot;
}

std::vector<double> predict(const TeacherModel& model, std::span<const Signal> x) {
  std::vector<double> out;
  out.reserve(x.size());
  for (const auto& xi : x) out.push_back(forward(model, xi));
  return out;
}

double mean_squared_error(std::span<const double> y, std::span<const double> pred) {
  if (y.size() != pred.size() || y.empty()) throw ShapeError("mse needs equal, nonempty vectors");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - pred[i]) * (y[i] - pred[i]);
  return s / static_cast<double>(y.size());
}

double r2_score(std::span<const double> y, std::span<const double> pred) {
  if (y.size() != pred.size() || y.empty()) throw ShapeError("r2 needs equal, nonempty vectors");
  const double mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    ss_res += (y[i] - pred[i]) * (y[i] - pred[i]);
    ss_tot += (y[i] - mean) * (y[i] - mean);
  }
  return ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 0.0;
}

TrainResult train(TeacherModel model, std::span<const Signal> x, std::span<const double> y, const TrainConfig& config) {
  if (x.size() != y.size()) throw ShapeError("inputs and targets differ in length");
  if (!(config.learning_rate > 0.0)) throw InvalidArgument("learning rate must be positive");
  if (config.batch_size < 1) throw InvalidArgument("batch size must be >= 1");
  if (config.epochs < 0) throw InvalidArgument("epochs must be >= 0");

  TrainResult result;
  if (config.epochs == 0 || x.empty()) {
    result.model = std::move(model);
    if (!x.empty()) result.final_mse = mean_squared_error(y, predict(result.model, x));
    return result;
  }

  auto& layers = model.mutable_layers();
  // Flat parameter views: per layer weight then bias.
  struct Moments {
    std::vector<double> m, v;
  };
  std::vector<Moments> mw(layers.size()), mb(layers.size());
  std::vector<Matrix> gw(layers.size());
  std::vector<std::vector<double>> gb(layers.size());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    mw[l] = {std::vector<double>(layers[l].weight.size(), 0.0), std::vector<double>(layers[l].weight.size(), 0.0)};
    mb[l] = {std::vector<double>(layers[l].bias.size(), 0.0), std::vector<double>(layers[l].bias.size(), 0.0)};
  }

  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  long step = 0;

  auto adam = [&](std::vector<double>& param, std::span<const double> grad, Moments& mom) {
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < param.size(); ++i) {
      mom.m[i] = beta1 * mom.m[i] + (1.0 - beta1) * grad[i];
      mom.v[i] = beta2 * mom.v[i] + (1.0 - beta2) * grad[i] * grad[i];
      param[i] -= config.learning_rate * (mom.m[i] / c1) / (std::sqrt(mom.v[i] / c2) + eps);
    }
  };

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const double inv_b = 1.0 / static_cast<double>(end - start);
      for (std::size_t l = 0; l < layers.size(); ++l) {
        gw[l] = Matrix(layers[l].weight.rows, layers[l].weight.cols);
        gb[l].assign(layers[l].bias.size(), 0.0);
      }
      double batch_loss = 0.0;
      for (std::size_t s = start; s < end; ++s) {
        const std::size_t idx = order[s];
        const Trace t = run_forward(model, x[idx]);
        const double err = t.a.back()[0] - y[idx];
        batch_loss += err * err * inv_b;
        Signal g(1, 2.0 * err * inv_b);
        for (std::size_t l = layers.size(); l-- > 0;) {
          Signal e(g.size());
          for (std::size_t i = 0; i < g.size(); ++i) e[i] = act_d1(layers[l].activation, t.z[l][i]) * g[i];
          const Signal& in = t.a[l];
          for (std::size_t i = 0; i < e.size(); ++i) {
            gb[l][i] += e[i];
            auto row = gw[l].row(i);
            for (std::size_t k = 0; k < in.size(); ++k) row[k] += e[i] * in[k];
          }
          if (l > 0) g = transpose_apply(layers[l].weight, e);
        }
      }
      ++step;
      for (std::size_t l = 0; l < layers.size(); ++l) {
        adam(layers[l].weight.data, gw[l].data, mw[l]);
        adam(layers[l].bias, gb[l], mb[l]);
      }
      epoch_loss += batch_loss;
      ++batches;
    }
    result.epoch_mse.push_back(epoch_loss / static_cast<double>(batches));
  }
  result.final_mse = mean_squared_error(y, predict(model, x));
  result.model = std::move(model);
  return result;
}

void save_model(const TeacherModel& model, const std::filesystem::path& path) {
  nlohmann::json j;
  j["layers"] = nlohmann::json::array();
  for (const auto& layer : model.layers()) {
    j["layers"].push_back({{"in", layer.weight.cols},
                           {"out", layer.weight.rows},
                           {"activation", activation_name(layer.activation)},
                           {"weight", layer.weight.data},
                           {"bias", layer.bias}});
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write model checkpoint " + path.string());
  out << j.dump() << '\n';
}

TeacherModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read model checkpoint " + path.string());
  try {
    nlohmann::json j;
    in >> j;
    std::vector<Layer> layers;
    for (const auto& lj : j.at("layers")) {
      Layer layer;
      const auto rows = lj.at("out").get<std::size_t>();
      const auto cols = lj.at("in").get<std::size_t>();
      layer.weight = Matrix(rows, cols);
      layer.weight.data = lj.at("weight").get<std::vector<double>>();
      if (layer.weight.data.size() != rows * cols) throw ShapeError("weight array has the wrong size");
      layer.bias = lj.at("bias").get<std::vector<double>>();
      layer.activation = activation_from_name(lj.at("activation").get<std::string>());
      layers.push_back(std::move(layer));
    }
    return TeacherModel(std::move(layers));
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed model checkpoint " + path.string() + ": " + e.what());
  }
}

}  // namespace awd
