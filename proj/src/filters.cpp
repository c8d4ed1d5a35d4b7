#include "awd/filters.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <random>

#include <json.hpp>

#include "awd/errors.hpp"

namespace awd {

namespace {

// Scaling (reconstruction lowpass) filters, standard orientation.
constexpr std::array<double, 2> kHaar = {0.7071067811865476, 0.7071067811865476};

constexpr std::array<double, 10> kDb5 = {
    0.16010239797419293,   0.6038292697971896,    0.7243085284377729,   0.13842814590132074,
    -0.24229488706638203,  -0.032244869584638375, 0.07757149384004572,  -0.006241490212798274,
    -0.012580751999081999, 0.0033357252854737712};

constexpr std::array<double, 10> kSym5 = {
    0.019538882735286728, -0.021101834024758855, -0.17532808990845047, 0.01660210576452232,
    0.6339789634582119,   0.7234076904024206,    0.1993975339773936,   -0.039134249302383094,
    0.029519490925774643, 0.027333068345077982};

constexpr std::array<double, 12> kCoif2 = {
    0.01638733646320364,  -0.04146493678687178,   -0.0673725547237256,   0.3861100668227629,
    0.8127236354494135,   0.4170051844232391,     -0.07648859907828076,  -0.05943441864643109,
    0.02368017194684777,  0.005611434819368834,   -0.0018232088709110323, -0.000720549445520347};

template <std::size_t N>
std::vector<double> taps(const std::array<double, N>& a) {
  return {a.begin(), a.end()};
}

}  // namespace

std::vector<double> derive_highpass(std::span<const double> lowpass) {
  const std::size_t n = lowpass.size();
  if (n < 2) throw InvalidFilter("filter needs at least 2 taps, got " + std::to_string(n));
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double sign = (i % 2 == 0) ? 1.0 : -1.0;
    g[i] = sign * lowpass[n - 1 - i];
  }
  return g;
}

FilterPair::FilterPair(std::vector<double> lowpass, std::string name)
    : lowpass_(std::move(lowpass)), name_(std::move(name)) {
  if (lowpass_.size() < 2 || lowpass_.size() % 2 != 0) {
    throw InvalidFilter("filter support must be even and >= 2, got " +
                        std::to_string(lowpass_.size()));
  }
  for (double v : lowpass_) {
    if (!std::isfinite(v)) throw InvalidFilter("filter tap is not finite");
  }
  highpass_ = derive_highpass(lowpass_);
}

FilterPair standard_bank(std::string_view name) {
  if (name == "haar") return FilterPair(taps(kHaar), "haar");
  if (name == "db5") return FilterPair(taps(kDb5), "db5");
  if (name == "sym5") return FilterPair(taps(kSym5), "sym5");
  if (name == "coif2") return FilterPair(taps(kCoif2), "coif2");
  throw UnknownBank("unknown filter bank '" + std::string(name) + "'");
}

std::vector<std::string> standard_bank_names() { return {"haar", "db5", "sym5", "coif2"}; }

FilterPair perturb(const FilterPair& pair, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw InvalidArgument("perturbation sigma must be >= 0");
  if (sigma == 0.0) return pair;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  std::vector<double> h = pair.lowpass();
  for (double& v : h) v += noise(rng);
  return FilterPair(std::move(h), pair.name() + "+noise");
}

void save_filter(const FilterPair& pair, const std::filesystem::path& path) {
  nlohmann::json j;
  j["name"] = pair.name();
  j["lowpass"] = pair.lowpass();
  std::ofstream out(path);
  if (!out) throw Error("cannot write filter file " + path.string());
  out << j.dump(2) << '\n';
}

FilterPair load_filter(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read filter file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
    return FilterPair(j.at("lowpass").get<std::vector<double>>(), j.value("name", std::string{}));
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed filter file " + path.string() + ": " + e.what());
  }
}

FilterPair resolve_filter(const std::string& name_or_path) {
  for (const auto& n : standard_bank_names()) {
    if (n == name_or_path) return standard_bank(n);
  }
  if (std::filesystem::exists(name_or_path)) return load_filter(name_or_path);
  throw UnknownBank("'" + name_or_path + "' is neither a known bank nor a filter file");
}

}  // namespace awd
