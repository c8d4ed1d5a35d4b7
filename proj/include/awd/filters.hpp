#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace awd {

/// g[n] = (-1)^n h[N-1-n]. Throws InvalidFilter for fewer than two taps.
std::vector<double> derive_highpass(std::span<const double> lowpass);

/// Lowpass/highpass pair of an orthogonal two-channel filter bank.
///
/// Taps are stored in natural order n = 0..N-1. The highpass is always the
/// quadrature mirror of the lowpass; it is never an independent quantity.
class FilterPair {
 public:
  explicit FilterPair(std::vector<double> lowpass, std::string name = {});

  const std::vector<double>& lowpass() const { return lowpass_; }
  const std::vector<double>& highpass() const { return highpass_; }
  const std::string& name() const { return name_; }
  std::size_t size() const { return lowpass_.size(); }

  FilterPair renamed(std::string name) const { return FilterPair(lowpass_, std::move(name)); }

 private:
  std::vector<double> lowpass_;
  std::vector<double> highpass_;
  std::string name_;
};

/// Known orthogonal banks: haar, db5, sym5, coif2.
FilterPair standard_bank(std::string_view name);
std::vector<std::string> standard_bank_names();

/// Adds N(0, sigma^2) noise to every lowpass tap and re-derives the highpass.
FilterPair perturb(const FilterPair& pair, double sigma, std::uint64_t seed);

inline constexpr double kDefaultPerturbSigma = 0.05;

// Filter files: {"name": ..., "lowpass": [...]}; the highpass is rebuilt on load.
void save_filter(const FilterPair& pair, const std::filesystem::path& path);
FilterPair load_filter(const std::filesystem::path& path);

/// Accepts either a standard bank name or a path to a filter file.
FilterPair resolve_filter(const std::string& name_or_path);

}  // namespace awd
