#include "awd/io.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "awd/errors.hpp"

namespace awd::io {

namespace {

using nlohmann::json;

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, sep)) out.push_back(cell);
  return out;
}

double parse_number(const std::string& s, const std::filesystem::path& path) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw InvalidArgument("bad number '" + s + "' in " + path.string());
  }
}

std::vector<std::vector<double>> read_numeric_csv(const std::filesystem::path& path, bool skip_header) {
  std::istringstream in(read_text(path));
  std::string line;
  std::vector<std::vector<double>> rows;
  std::size_t width = 0;
  if (skip_header && std::getline(in, line)) width = split(line, ',').size();
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    for (const auto& cell : split(line, ',')) row.push_back(parse_number(cell, path));
    if (width == 0) width = row.size();
    if (row.size() != width) throw ShapeError("ragged rows in " + path.string());
    rows.push_back(std::move(row));
  }
  return rows;
}

void append_band(std::string& out, int level, const char* band, std::span<const double> v, const double* attr) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    out += fmt::format("{},{},{},{}", level, band, i, format_number(v[i]));
    if (attr != nullptr) out += "," + format_number(attr[i]);
    out += '\n';
  }
}

void append_band2d(std::string& out, int level, const char* band, const Matrix& m, const Matrix* attr) {
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t c = 0; c < m.cols; ++c) {
      out += fmt::format("{},{},{},{},{}", level, band, r, c, format_number(m(r, c)));
      if (attr != nullptr) out += "," + format_number((*attr)(r, c));
      out += '\n';
    }
  }
}

}  // namespace

std::string format_number(double v) { return fmt::format("{:.17g}", v); }

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  out << text;
  if (!out) throw InvalidArgument("failed writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_coeffs_csv(const std::filesystem::path& path, const WaveletCoeffs& coeffs, const AttributionMap* attributions) {
  if (attributions != nullptr && attributions->size() != coeffs.size()) {
    throw ShapeError("attribution map does not match the coefficients");
  }
  std::string out = attributions ? "level,band,index,value,attribution\n" : "level,band,index,value\n";
  const int levels = coeffs.levels();
  append_band(out, levels, "approx", coeffs.approx, attributions ? attributions->approx.data() : nullptr);
  for (int j = levels; j >= 1; --j) {
    const auto k = static_cast<std::size_t>(j - 1);
    append_band(out, j, "detail", coeffs.details[k], attributions ? attributions->details[k].data() : nullptr);
  }
  write_text(path, out);
}

void write_coeffs2d_csv(const std::filesystem::path& path, const WaveletCoeffs2D& coeffs,
                        const AttributionMap2D* attributions) {
  if (attributions != nullptr && attributions->size() != coeffs.size()) {
    throw ShapeError("attribution map does not match the coefficients");
  }
  std::string out = attributions ? "level,band,row,col,value,attribution\n" : "level,band,row,col,value\n";
  const int levels = coeffs.levels();
  append_band2d(out, levels, "LL", coeffs.approx, attributions ? &attributions->approx : nullptr);
  for (int j = levels; j >= 1; --j) {
    const auto k = static_cast<std::size_t>(j - 1);
    const DetailBands& d = coeffs.details[k];
    const DetailBands* a = attributions ? &attributions->details[k] : nullptr;
    append_band2d(out, j, "LH", d.lh, a ? &a->lh : nullptr);
    append_band2d(out, j, "HL", d.hl, a ? &a->hl : nullptr);
    append_band2d(out, j, "HH", d.hh, a ? &a->hh : nullptr);
  }
  write_text(path, out);
}

void write_curve_csv(const std::filesystem::path& path, const WaveletCurve& curve) {
  std::string out = "t,value\n";
  for (std::size_t i = 0; i < curve.values.size(); ++i) {
    out += format_number(curve.grid[i]) + "," + format_number(curve.values[i]) + "\n";
  }
  write_text(path, out);
}

void write_matrix_csv(const std::filesystem::path& path, const Matrix& m) {
  std::string out;
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t c = 0; c < m.cols; ++c) {
      if (c > 0) out += ',';
      out += format_number(m(r, c));
    }
    out += '\n';
  }
  write_text(path, out);
}

Matrix read_matrix_csv(const std::filesystem::path& path) {
  const auto rows = read_numeric_csv(path, false);
  if (rows.empty()) return {};
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < m.rows; ++r) std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
  return m;
}

void write_pgm(const std::filesystem::path& path, const Matrix& m) {
  std::string out = fmt::format("P5\n{} {}\n255\n", m.cols, m.rows);
  const auto [lo, hi] = std::minmax_element(m.data.begin(), m.data.end());
  const double a = m.data.empty() ? 0.0 : *lo;
  const double span = m.data.empty() || *hi == *lo ? 1.0 : *hi - *lo;
  for (double v : m.data) out += static_cast<char>(static_cast<unsigned char>(std::lround(255.0 * (v - a) / span)));
  write_text(path, out);
}

void write_run_log(const std::filesystem::path& path, const AwdRunRecord& record) {
  std::string out = "epoch,recon,sparsity,sum_h,sum_g,unit_norm,cmf,shift_orth,interp,total\n";
  auto row = [&](std::size_t epoch, const AwdLoss& l) {
    const auto& w = l.wavelet;
    for (double v : {static_cast<double>(epoch), l.recon, w.sparsity, w.sum_h, w.sum_g, w.unit_norm, w.cmf,
                     w.shift_orth, l.interp}) {
      out += format_number(v) + ",";
    }
    out += format_number(l.total) + "\n";
  };
  for (std::size_t e = 0; e < record.history.size(); ++e) row(e, record.history[e]);
  if (!record.failed) row(record.history.size(), record.final_loss);
  write_text(path, out);
}

void write_dataset_csv(const std::filesystem::path& path, const synth::Dataset& data) {
  if (data.x.size() != data.y.size()) throw ShapeError("dataset inputs and targets differ in length");
  std::string out;
  const std::size_t dim = data.x.empty() ? 0 : data.x.front().size();
  for (std::size_t i = 0; i < dim; ++i) out += fmt::format("x{},", i);
  out += "y\n";
  for (std::size_t r = 0; r < data.x.size(); ++r) {
    for (double v : data.x[r]) out += format_number(v) + ",";
    out += format_number(data.y[r]) + "\n";
  }
  write_text(path, out);
}

synth::Dataset read_dataset_csv(const std::filesystem::path& path) {
  synth::Dataset d;
  for (auto& row : read_numeric_csv(path, true)) {
    if (row.size() < 2) throw ShapeError("dataset rows need at least one input and a target: " + path.string());
    d.y.push_back(row.back());
    row.pop_back();
    d.x.push_back(std::move(row));
  }
  return d;
}

void save_groundtruth(const synth::GroundTruth& truth, const std::filesystem::path& path) {
  const json j = {{"bank", truth.bank},
                  {"levels", truth.levels},
                  {"active_scale", truth.active_scale},
                  {"beta_value", truth.beta_value},
                  {"active_indices", truth.active_indices},
                  {"beta", truth.beta}};
  write_text(path, j.dump(2) + "\n");
}

synth::GroundTruth load_groundtruth(const std::filesystem::path& path) {
  try {
    const json j = json::parse(read_text(path));
    synth::GroundTruth t;
    t.bank = j.at("bank").get<std::string>();
    t.levels = j.at("levels").get<int>();
    t.active_scale = j.at("active_scale").get<int>();
    t.beta_value = j.at("beta_value").get<double>();
    t.active_indices = j.at("active_indices").get<std::vector<std::size_t>>();
    t.beta = j.at("beta").get<std::vector<double>>();
    return t;
  } catch (const json::exception& e) {
    throw InvalidArgument("malformed groundtruth file " + path.string() + ": " + e.what());
  }
}

void save_class_models(std::span<const peaks::ClassModel> classes, const peaks::BinSpec& bins,
                       const std::filesystem::path& path) {
  json j;
  j["bins"] = {{"lo", bins.lo}, {"hi", bins.hi}, {"width", bins.width}};
  j["classes"] = json::array();
  for (const auto& c : classes) {
    json rows = json::array();
    for (std::size_t r = 0; r < c.covariance.rows; ++r) {
      const auto row = c.covariance.row(r);
      rows.push_back(std::vector<double>(row.begin(), row.end()));
    }
    j["classes"].push_back({{"label", c.label}, {"mean", c.mean}, {"covariance", rows}});
  }
  write_text(path, j.dump(2) + "\n");
}

void write_histograms_csv(const std::filesystem::path& path, std::span<const peaks::LabeledHistograms> groups) {
  std::string out = "label,map,bin_lo,bin_hi,count\n";
  for (const auto& g : groups) {
    for (std::size_t m = 0; m < g.histograms.size(); ++m) {
      const auto& h = g.histograms[m];
      for (std::size_t b = 0; b < h.counts.size(); ++b) {
        out += fmt::format("{},{},{},{},{}\n", g.label, m, format_number(h.bin_edges[b]),
                           format_number(h.bin_edges[b + 1]), h.counts[b]);
      }
    }
  }
  write_text(path, out);
}

}  // namespace awd::io
