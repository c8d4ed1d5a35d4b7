#include "cli.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <set>

#include <CLI11.hpp>

#include "awd/distill.hpp"
#include "awd/errors.hpp"
#include "awd/evalkit.hpp"
#include "awd/io.hpp"
#include "awd/peakcount.hpp"
#include "awd/synth.hpp"
#include "awd/trim.hpp"

namespace awd::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class Config {
 public:
  Config(json j, const std::string& command, std::set<std::string> allowed) : j_(std::move(j)) {
    if (!j_.is_object()) throw ConfigError(command + " config must be a JSON object");
    allowed.insert("seed");
    for (const auto& [key, value] : j_.items()) {
      if (!allowed.contains(key)) throw ConfigError("unknown config key '" + key + "' for " + command);
    }
    if (!j_.contains("seed")) throw ConfigError("missing required config key 'seed'");
  }

  template <class T>
  T get(const std::string& key, T fallback) const {
    if (!j_.contains(key) || j_.at(key).is_null()) return fallback;
    return require<T>(key);
  }

  template <class T>
  T require(const std::string& key) const {
    if (!j_.contains(key)) throw ConfigError("missing required config key '" + key + "'");
    try {
      return j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config key '" + key + "' has the wrong type");
    }
  }

  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }
  const json& raw(const std::string& key) const { return j_.at(key); }

 private:
  json j_;
};

struct Context {
  fs::path out;
  std::uint64_t seed = 0;
  RunManifest* manifest = nullptr;

  fs::path artifact(const std::string& rel) const {
    manifest->artifacts.push_back(rel);
    return out / rel;
  }

  template <class F>
  auto timed(const std::string& stage, F&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      record(stage, t0);
    } else {
      auto r = fn();
      record(stage, t0);
      return r;
    }
  }

 private:
  void record(const std::string& stage, std::chrono::steady_clock::time_point t0) {
    manifest->timings.emplace_back(stage, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
};

std::string fnum(double v) { return io::format_number(v); }

synth::SynthData load_data(const fs::path& dir) {
  synth::SynthData d;
  if (!fs::exists(dir / "train.csv")) throw PreconditionError("missing input " + (dir / "train.csv").string());
  synth::Dataset train = io::read_dataset_csv(dir / "train.csv");
  synth::Dataset test;
  if (fs::exists(dir / "test.csv")) test = io::read_dataset_csv(dir / "test.csv");
  if (train.x.empty()) throw PreconditionError("training set in " + dir.string() + " is empty");
  d.train = std::move(train);
  d.test = std::move(test);
  if (fs::exists(dir / "groundtruth.json")) d.truth = io::load_groundtruth(dir / "groundtruth.json");
  return d;
}

TeacherModel load_teacher(const fs::path& path) {
  if (!fs::exists(path)) throw PreconditionError("missing teacher checkpoint " + path.string());
  return load_model(path);
}

FilterPair load_filters(const std::string& spec, double sigma = 0.0, std::uint64_t seed = 0) {
  if (spec != "db5_noise" && !fs::exists(spec)) {
    const auto names = standard_bank_names();
    if (std::find(names.begin(), names.end(), spec) == names.end()) {
      throw PreconditionError("filter '" + spec + "' is neither a standard bank nor an existing file");
    }
  }
  return synth::initial_filters(spec, sigma, seed);
}

// ---------------------------------------------------------------------------

void cmd_gen(const Config& cfg, Context& ctx) {
  synth::SynthSpec spec = cfg.get("full_scale", false) ? synth::SynthSpec::full_scale() : synth::SynthSpec{};
  spec.seed = ctx.seed;
  spec.n_train = cfg.get("n_train", spec.n_train);
  spec.n_test = cfg.get("n_test", spec.n_test);
  spec.dim = cfg.get("dim", spec.dim);
  spec.bank = cfg.get("bank", spec.bank);
  spec.beta_value = cfg.get("beta_value", spec.beta_value);
  spec.n_active = cfg.get("n_active", spec.n_active);
  spec.active_scale = cfg.get("active_scale", spec.active_scale);
  spec.levels = cfg.get("levels", spec.levels);
  spec.noise_sigma = cfg.get("noise_sigma", spec.noise_sigma);

  const synth::SynthData data = ctx.timed("generate", [&] { return synth::generate(spec); });
  ctx.timed("write", [&] {
    io::write_dataset_csv(ctx.artifact("train.csv"), data.train);
    io::write_dataset_csv(ctx.artifact("test.csv"), data.test);
    io::save_groundtruth(data.truth, ctx.artifact("groundtruth.json"));
  });
}

void cmd_train_teacher(const Config& cfg, Context& ctx) {
  const synth::SynthData data = load_data(cfg.require<std::string>("data"));
  TrainConfig tc;
  tc.seed = ctx.seed;
  tc.learning_rate = cfg.get("learning_rate", tc.learning_rate);
  tc.epochs = cfg.get("epochs", tc.epochs);
  tc.batch_size = cfg.get("batch_size", tc.batch_size);
  const auto hidden = cfg.get<std::size_t>("hidden", 32);
  const double gate = cfg.get("gate", synth::kTeacherGate);

  const synth::TeacherReport rep = ctx.timed("train", [&] { return synth::train_teacher(data, tc, hidden); });
  save_model(rep.model, ctx.artifact("teacher.json"));
  json metrics = {{"train_mse", rep.train_mse}, {"test_r2", rep.test_r2}, {"gate", gate}, {"epoch_mse", rep.epoch_mse}};
  io::write_text(ctx.artifact("metrics.json"), metrics.dump(2) + "\n");
  if (cfg.get("enforce_gate", true)) synth::require_teacher_gate(rep, gate);
}

void cmd_distill(const Config& cfg, Context& ctx) {
  synth::SynthData data = load_data(cfg.require<std::string>("data"));
  const TeacherModel teacher = load_teacher(cfg.require<std::string>("teacher"));
  AwdConfig base;
  base.seed = ctx.seed;
  base.learning_rate = cfg.get("learning_rate", base.learning_rate);
  base.epochs = cfg.get("epochs", base.epochs);
  base.batch_size = cfg.get("batch_size", base.batch_size);
  base.levels = cfg.get("levels", data.truth.levels > 0 ? data.truth.levels : base.levels);
  base.init = cfg.get("init", std::string("db5_noise"));
  base.init_sigma = cfg.get("init_sigma", kDefaultPerturbSigma);
  const auto lambda_grid = cfg.get("lambda_grid", std::vector<double>{base.lambda});
  const auto gamma_grid = cfg.get("gamma_grid", std::vector<double>{base.gamma});
  const int iterations = cfg.get("cascade_iterations", kDefaultCascadeIterations);
  const auto max_samples = cfg.get<std::size_t>("max_samples", 0);
  if (max_samples > 0 && max_samples < data.train.x.size()) {
    data.train.x.resize(max_samples);
    data.train.y.resize(max_samples);
  }

  const FilterPair init = load_filters(base.init, base.init_sigma, base.seed);
  save_filter(init, ctx.artifact("init.filt.json"));
  const auto records = ctx.timed(
      "sweep", [&] { return sweep(data.train.x, teacher, lambda_grid, gamma_grid, base, init); });

  std::optional<FilterPair> truth;
  const std::string gt = cfg.get("groundtruth", std::string());
  if (!gt.empty()) truth = load_filters(gt);

  SelectionCriterion criterion;
  std::string selection;
  if (truth) {
    criterion = by_groundtruth_distance(*truth, iterations);
    selection = "groundtruth_distance";
  } else {
    const TransformConfig tcfg{base.levels};
    const auto per_scale = cfg.get<std::size_t>("per_scale", 6);
    criterion = by_cv_score([&](const FilterPair& f) {
      std::vector<Signal> feats;
      for (const auto& x : data.train.x) feats.push_back(max_coeff_features(dwt1d(x, f, tcfg), per_scale));
      const std::vector<double> ridge = {1e-3, 1e-2, 1e-1, 1.0, 10.0};
      return ridge_cv(feats, data.train.y, ridge, 5).cv_r2;
    });
    selection = "cv_r2";
  }

  json cells = json::array();
  std::string csv = "cell,lambda,gamma,failed,final_total,score\n";
  bool any_ok = false;
  ctx.timed("score", [&] {
    for (std::size_t k = 0; k < records.size(); ++k) {
      const auto& r = records[k];
      const std::string dir = fmt::format("cells/{:02d}_l{}_g{}", k, r.lambda_index, r.gamma_index);
      json cell = {{"cell", k},
                   {"lambda", r.config.lambda},
                   {"gamma", r.config.gamma},
                   {"lambda_index", r.lambda_index},
                   {"gamma_index", r.gamma_index},
                   {"failed", r.failed}};
      io::write_run_log(ctx.artifact(dir + "/run_log.csv"), r);
      cell["run_log"] = dir + "/run_log.csv";
      double score = 0.0;
      if (r.failed) {
        cell["error"] = r.error;
      } else {
        any_ok = true;
        save_filter(r.final_filters, ctx.artifact(dir + "/filter.filt.json"));
        cell["filter"] = dir + "/filter.filt.json";
        cell["final_total"] = r.final_loss.total;
        score = criterion(r);
        cell["score"] = score;
      }
      csv += fmt::format("{},{},{},{},{},{}\n", k, fnum(r.config.lambda), fnum(r.config.gamma), r.failed ? 1 : 0,
                         r.failed ? "" : fnum(r.final_loss.total), r.failed ? "" : fnum(score));
      cells.push_back(cell);
    }
  });
  if (!any_ok) throw DivergenceError("every sweep cell diverged", 0);
  const AwdRunRecord& best = select_best(records, criterion);
  save_filter(best.final_filters, ctx.artifact("best.filt.json"));
  const json sweep_json = {{"selection", selection},
                           {"init", base.init},
                           {"best", {{"lambda", best.config.lambda}, {"gamma", best.config.gamma}}},
                           {"cells", cells}};
  io::write_text(ctx.artifact("sweep.json"), sweep_json.dump(2) + "\n");
  io::write_text(ctx.artifact("sweep.csv"), csv);
}

void cmd_eval(const Config& cfg, Context& ctx) {
  const synth::SynthData data = load_data(cfg.require<std::string>("data"));
  const TeacherModel teacher = load_teacher(cfg.require<std::string>("teacher"));
  const int iterations = cfg.get("cascade_iterations", kDefaultCascadeIterations);
  const TransformConfig tcfg{cfg.get("levels", data.truth.levels > 0 ? data.truth.levels : 3)};
  const double threshold = cfg.get("threshold", 1e-3);
  const auto per_scale = cfg.get<std::size_t>("per_scale", 6);
  const FilterPair truth = load_filters(cfg.require<std::string>("groundtruth"));

  std::vector<std::pair<std::string, FilterPair>> filters;
  filters.emplace_back("learned", load_filters(cfg.require<std::string>("learned")));
  if (cfg.has("init")) filters.emplace_back("init", load_filters(cfg.require<std::string>("init")));
  filters.emplace_back("groundtruth", truth);

  const synth::Dataset& eval = data.test.x.empty() ? data.train : data.test;
  const WaveletCurve target = cascade(truth, iterations).psi;
  std::string dist_csv = "filter,distance\n";
  std::string comp_csv = "filter,threshold,compression_rate\n";
  std::string head_csv = "filter,ridge,cv_r2,test_r2\n";
  ctx.timed("evaluate", [&] {
    for (const auto& [name, f] : filters) {
      const CascadeResult c = cascade(f, iterations);
      io::write_curve_csv(ctx.artifact("curves/" + name + "_phi.csv"), c.phi);
      io::write_curve_csv(ctx.artifact("curves/" + name + "_psi.csv"), c.psi);
      dist_csv += name + "," + fnum(wavelet_distance(c.psi, target)) + "\n";

      std::vector<WaveletCoeffs> coeffs;
      std::vector<AttributionMap> attrs;
      for (const auto& x : eval.x) {
        coeffs.push_back(dwt1d(x, f, tcfg));
        attrs.push_back(saliency(teacher, coeffs.back(), f));
      }
      comp_csv += name + "," + fnum(threshold) + "," + fnum(compression_rate(coeffs, attrs, threshold)) + "\n";
      io::write_coeffs_csv(ctx.artifact("coeffs/" + name + "_sample0.csv"), coeffs.front(), &attrs.front());

      std::vector<Signal> train_feats, test_feats;
      for (const auto& x : data.train.x) train_feats.push_back(max_coeff_features(dwt1d(x, f, tcfg), per_scale));
      for (const auto& w : coeffs) test_feats.push_back(max_coeff_features(w, per_scale));
      const std::vector<double> ridge = {1e-3, 1e-2, 1e-1, 1.0, 10.0};
      const RidgeCvResult cv = ridge_cv(train_feats, data.train.y, ridge, 5);
      std::vector<double> pred;
      for (const auto& v : test_feats) pred.push_back(cv.head.predict(v));
      head_csv += name + "," + fnum(cv.ridge) + "," + fnum(cv.cv_r2) + "," + fnum(r2_score(eval.y, pred)) + "\n";
    }
  });
  io::write_text(ctx.artifact("distance.csv"), dist_csv);
  io::write_text(ctx.artifact("compression.csv"), comp_csv);
  io::write_text(ctx.artifact("linear_head.csv"), head_csv);

  // Activation maps: each test signal viewed as a square image the teacher reads row-major.
  const auto n_maps = cfg.get<std::size_t>("activation_maps", 2);
  const std::size_t dim = eval.x.front().size();
  const auto side = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(dim))));
  if (n_maps > 0) {
    if (side * side != dim) throw ConfigError("activation maps need a square input dimension, got " + std::to_string(dim));
    const TransformConfig map_cfg{cfg.get("map_levels", 1)};
    const auto top_k = cfg.get<std::size_t>("top_k", 8);
    const int ig_steps = cfg.get("ig_steps", 50);
    ctx.timed("activation_maps", [&] {
      for (std::size_t i = 0; i < std::min(n_maps, eval.x.size()); ++i) {
        Matrix img(side, side);
        std::copy(eval.x[i].begin(), eval.x[i].end(), img.data.begin());
        const Matrix act = activation_map(img, teacher, filters.front().second, map_cfg, top_k, ig_steps);
        io::write_matrix_csv(ctx.artifact(fmt::format("activation/map_{:02d}.csv", i)), act);
        io::write_pgm(ctx.artifact(fmt::format("activation/map_{:02d}.pgm", i)), act);
      }
    });
  }
}

peaks::PeakFilter peak_filter(const Config& cfg) {
  const std::string name = cfg.get("filter", std::string("laplace"));
  if (name == "laplace") return peaks::PeakFilter::laplace();
  if (name == "roberts") return peaks::PeakFilter::roberts_cross();
  if (name == "height") return peaks::PeakFilter::height();
  if (name == "subfilter") {
    const std::string bank = cfg.get("subfilter_filters", std::string("db5"));
    const std::string band = cfg.get("subfilter_band", std::string("LL"));
    const peaks::Subfilters s = peaks::extract_subfilters(load_filters(bank));
    if (band == "LL") return peaks::PeakFilter::subfilter(s.ll, bank + "_LL");
    if (band == "LH") return peaks::PeakFilter::subfilter(s.lh, bank + "_LH");
    if (band == "HL") return peaks::PeakFilter::subfilter(s.hl, bank + "_HL");
    if (band == "HH") return peaks::PeakFilter::subfilter(s.hh, bank + "_HH");
    throw ConfigError("subfilter_band must be one of LL, LH, HL, HH");
  }
  throw ConfigError("filter must be one of laplace, roberts, height, subfilter");
}

void cmd_peakcount(const Config& cfg, Context& ctx) {
  synth::BumpMapSpec base;
  base.rows = cfg.get("rows", base.rows);
  base.cols = cfg.get("cols", base.cols);
  base.n_bumps = cfg.get("n_bumps", base.n_bumps);
  base.bump_width = cfg.get("bump_width", base.bump_width);
  base.noise_sigma = cfg.get("noise_sigma", base.noise_sigma);
  const auto n_train = cfg.get<std::size_t>("n_train", 100);
  const auto n_val = cfg.get<std::size_t>("n_val", 50);
  const auto n_test = cfg.get<std::size_t>("n_test", 100);
  if (!cfg.has("classes")) throw ConfigError("missing required config key 'classes'");
  const json& classes_cfg = cfg.raw("classes");
  if (!classes_cfg.is_array() || classes_cfg.size() < 2) throw ConfigError("'classes' must list at least two classes");

  std::mt19937_64 seeds(ctx.seed);
  std::vector<peaks::LabeledMaps> train, val, test;
  ctx.timed("generate", [&] {
    for (const auto& c : classes_cfg) {
      synth::BumpMapSpec s = base;
      std::string label;
      try {
        label = c.at("label").get<std::string>();
        s.amplitude_mean = c.at("amplitude_mean").get<double>();
        s.amplitude_sd = c.value("amplitude_sd", s.amplitude_sd);
      } catch (const json::exception&) {
        throw ConfigError("each entry of 'classes' needs label and amplitude_mean");
      }
      train.push_back({label, synth::bump_maps(s, n_train, seeds())});
      val.push_back({label, synth::bump_maps(s, n_val, seeds())});
      test.push_back({label, synth::bump_maps(s, n_test, seeds())});
    }
  });

  const peaks::PeakFilter filter = peak_filter(cfg);
  peaks::BinSpec bins;
  std::string bin_source = "fixed";
  if (cfg.has("bins")) {
    const json& b = cfg.raw("bins");
    try {
      bins = {b.at("lo").get<double>(), b.at("hi").get<double>(), b.at("width").get<double>()};
    } catch (const json::exception&) {
      throw ConfigError("'bins' needs lo, hi and width");
    }
  } else if (cfg.has("bin_search")) {
    const json& b = cfg.raw("bin_search");
    std::vector<double> lo, hi;
    std::size_t count = 22;
    try {
      lo = b.at("lo").get<std::vector<double>>();
      hi = b.at("hi").get<std::vector<double>>();
      count = b.value("bin_count", count);
    } catch (const json::exception&) {
      throw ConfigError("'bin_search' needs lo and hi candidate lists");
    }
    bins = ctx.timed("select_bins", [&] { return peaks::select_bin_range(train, val, filter, lo, hi, count); });
    bin_source = "validation";
  }

  const auto models = ctx.timed("fit", [&] { return peaks::fit_peak_counter(train, filter, bins); });
  const peaks::Confusion conf =
      ctx.timed("classify", [&] { return peaks::evaluate_peak_counter(test, models, filter, bins); });

  io::save_class_models(models, bins, ctx.artifact("class_models.json"));
  std::vector<peaks::LabeledHistograms> hists;
  for (const auto& cls : train) {
    peaks::LabeledHistograms g{cls.label, {}};
    for (const auto& m : cls.maps) g.histograms.push_back(peaks::map_histogram(m, filter, bins));
    hists.push_back(std::move(g));
  }
  io::write_histograms_csv(ctx.artifact("histograms.csv"), hists);
  std::string csv = "true,predicted,count\n";
  for (std::size_t i = 0; i < conf.labels.size(); ++i) {
    for (std::size_t j = 0; j < conf.labels.size(); ++j) {
      csv += fmt::format("{},{},{}\n", conf.labels[i], conf.labels[j], conf.counts[i][j]);
    }
  }
  io::write_text(ctx.artifact("confusion.csv"), csv);
  const json metrics = {{"filter", filter.name},
                        {"accuracy", conf.accuracy()},
                        {"bins", {{"lo", bins.lo}, {"hi", bins.hi}, {"width", bins.width}, {"source", bin_source}}}};
  io::write_text(ctx.artifact("metrics.json"), metrics.dump(2) + "\n");
}

void cmd_bench(const Config& cfg, Context& ctx) {
  const auto dim = cfg.get<std::size_t>("dim", 64);
  const auto n = cfg.get<std::size_t>("n", 1000);
  const auto hidden = cfg.get<std::size_t>("hidden", 32);
  const TransformConfig tcfg{cfg.get("levels", 3)};
  const FilterPair f = load_filters(cfg.get("filters", std::string("db5")));
  const TeacherModel model = cfg.has("teacher") ? load_teacher(cfg.require<std::string>("teacher"))
                                                : TeacherModel::dense({dim, hidden, hidden, 1}, Activation::relu, ctx.seed);
  if (model.input_dim() != dim) throw ConfigError("teacher input size does not match 'dim'");
  synth::SynthSpec spec;
  spec.dim = dim;
  spec.levels = tcfg.levels;
  spec.n_train = n;
  spec.n_test = 0;
  spec.seed = ctx.seed;
  const auto xs = synth::generate(spec).train.x;
  std::vector<WaveletCoeffs> ws;
  for (const auto& x : xs) ws.push_back(dwt1d(x, f, tcfg));

  std::vector<std::pair<std::string, std::function<void(std::size_t)>>> stages = {
      {"dwt", [&](std::size_t i) { (void)dwt1d(xs[i], f, tcfg); }},
      {"idwt", [&](std::size_t i) { (void)idwt1d(ws[i], f); }},
      {"teacher_forward", [&](std::size_t i) { (void)forward(model, xs[i]); }},
      {"saliency", [&](std::size_t i) { (void)saliency(model, ws[i], f); }},
      {"awd_loss_grad", [&](std::size_t i) {
         (void)awd_loss_grad(f, std::span(xs).subspan(i, 1), model, 0.005, 0.04, tcfg);
       }}};
  std::string csv = "stage,samples,seconds_per_sample\n";
  for (const auto& [name, fn] : stages) {
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < xs.size(); ++i) fn(i);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ctx.manifest->timings.emplace_back(name, secs);
    csv += fmt::format("{},{},{:.3e}\n", name, xs.size(), secs / static_cast<double>(xs.size()));
  }
  io::write_text(ctx.artifact("timing.csv"), csv);
}

struct Verb {
  std::set<std::string> keys;
  std::function<void(const Config&, Context&)> run;
};

const std::map<std::string, Verb>& verbs() {
  static const std::map<std::string, Verb> v = {
      {"gen",
       {{"n_train", "n_test", "dim", "bank", "beta_value", "n_active", "active_scale", "levels", "noise_sigma",
         "full_scale"},
        cmd_gen}},
      {"train-teacher",
       {{"data", "hidden", "learning_rate", "epochs", "batch_size", "gate", "enforce_gate"}, cmd_train_teacher}},
      {"distill",
       {{"data", "teacher", "init", "init_sigma", "lambda_grid", "gamma_grid", "learning_rate", "epochs",
         "batch_size", "levels", "groundtruth", "cascade_iterations", "max_samples", "per_scale"},
        cmd_distill}},
      {"eval",
       {{"data", "teacher", "learned", "init", "groundtruth", "levels", "threshold", "cascade_iterations",
         "per_scale", "activation_maps", "map_levels", "top_k", "ig_steps"},
        cmd_eval}},
      {"peakcount",
       {{"rows", "cols", "n_bumps", "bump_width", "noise_sigma", "classes", "n_train", "n_val", "n_test", "filter",
         "subfilter_filters", "subfilter_band", "bins", "bin_search"},
        cmd_peakcount}},
      {"bench", {{"dim", "n", "hidden", "levels", "filters", "teacher"}, cmd_bench}},
  };
  return v;
}

void write_manifest(const RunManifest& m) {
  for (const auto& a : m.artifacts) {
    const fs::path p = m.out_dir / a;
    if (!fs::exists(p) || fs::file_size(p) == 0) throw Error("artifact " + p.string() + " is missing or empty");
  }
  json timings = json::object();
  for (const auto& [stage, secs] : m.timings) timings[stage] = secs;
  const json j = {{"command", m.command},
                  {"config", m.config_path.string()},
                  {"seed", m.seed},
                  {"out", m.out_dir.string()},
                  {"artifacts", m.artifacts},
                  {"timings", timings}};
  io::write_text(m.out_dir / kManifestFile, j.dump(2) + "\n");
}

}  // namespace

RunManifest run_command(const std::string& command, const CommandOptions& options) {
  const auto it = verbs().find(command);
  if (it == verbs().end()) throw ConfigError("unknown command '" + command + "'");
  if (!fs::exists(options.config_path)) throw PreconditionError("config file " + options.config_path.string() + " not found");
  json j;
  try {
    j = json::parse(io::read_text(options.config_path));
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + options.config_path.string() + " is not valid JSON: " + e.what());
  }
  const Config cfg(j, command, it->second.keys);

  RunManifest m;
  m.command = command;
  m.config_path = options.config_path;
  m.seed = options.seed ? *options.seed : cfg.require<std::uint64_t>("seed");
  m.out_dir = options.out_dir.empty() ? fs::path("out") / command : options.out_dir;
  fs::create_directories(m.out_dir);

  Context ctx{m.out_dir, m.seed, &m};
  const auto t0 = std::chrono::steady_clock::now();
  it->second.run(cfg, ctx);
  m.timings.emplace_back("total", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  std::sort(m.artifacts.begin(), m.artifacts.end());
  write_manifest(m);
  return m;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Adaptive wavelet distillation toolkit"};
  app.require_subcommand(1);
  CommandOptions options;
  std::uint64_t seed = 0;
  for (const auto& [name, verb] : verbs()) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", options.config_path, "JSON config file")->required();
    sub->add_option("--out", options.out_dir, "output directory");
    sub->add_option("--seed", seed, "overrides the config seed");
  }

  auto report = [&](const char* kind, const std::string& msg, int code) {
    err << json{{"error", kind}, {"message", msg}}.dump() << "\n";
    return code;
  };

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    return report("usage", e.what(), 2);
  }

  const CLI::App* sub = app.get_subcommands().front();
  if (sub->count("--seed") > 0) options.seed = seed;
  try {
    const RunManifest m = run_command(sub->get_name(), options);
    out << (m.out_dir / kManifestFile).string() << "\n";
    return 0;
  } catch (const ConfigError& e) {
    return report("config", e.what(), 2);
  } catch (const PreconditionError& e) {
    return report("precondition", e.what(), 3);
  } catch (const DivergenceError& e) {
    return report("divergence", e.what(), 4);
  } catch (const std::exception& e) {
    return report("runtime", e.what(), 1);
  }
}

}  // namespace awd::cli
