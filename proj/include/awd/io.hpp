#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "awd/distill.hpp"
#include "awd/evalkit.hpp"
#include "awd/peakcount.hpp"
#include "awd/synth.hpp"
#include "awd/transform.hpp"

namespace awd::io {

/// Shortest text that round-trips a double ("%.17g").
std::string format_number(double v);

/// Columns: level, band, index, value[, attribution]. The approximation band
/// is written at level J with band "approx".
void write_coeffs_csv(const std::filesystem::path& path, const WaveletCoeffs& coeffs,
                      const AttributionMap* attributions = nullptr);

/// Columns: level, band, row, col, value[, attribution].
void write_coeffs2d_csv(const std::filesystem::path& path, const WaveletCoeffs2D& coeffs,
                        const AttributionMap2D* attributions = nullptr);

/// Columns: t, value.
void write_curve_csv(const std::filesystem::path& path, const WaveletCurve& curve);

void write_matrix_csv(const std::filesystem::path& path, const Matrix& m);
Matrix read_matrix_csv(const std::filesystem::path& path);

/// 8-bit binary PGM, linearly rescaled from [min, max].
void write_pgm(const std::filesystem::path& path, const Matrix& m);

/// Columns: epoch, recon, sparsity, sum_h, sum_g, unit_norm, cmf, shift_orth,
/// interp, total. One row per epoch entering loss plus a final row.
void write_run_log(const std::filesystem::path& path, const AwdRunRecord& record);

/// Columns: x0..x{d-1}, y.
void write_dataset_csv(const std::filesystem::path& path, const synth::Dataset& data);
synth::Dataset read_dataset_csv(const std::filesystem::path& path);

void save_groundtruth(const synth::GroundTruth& truth, const std::filesystem::path& path);
synth::GroundTruth load_groundtruth(const std::filesystem::path& path);

void save_class_models(std::span<const peaks::ClassModel> classes, const peaks::BinSpec& bins,
                       const std::filesystem::path& path);

/// Columns: label, map, bin_lo, bin_hi, count; one row per bin of each histogram.
void write_histograms_csv(const std::filesystem::path& path, std::span<const peaks::LabeledHistograms> groups);

/// Writes text, creating parent directories.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace awd::io
