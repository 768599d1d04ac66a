#pragma once

// Declarative sweep over (photons added) x (channel loss), per-cell
// checkpoints, manifest, and figure-data emission.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <iostream>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ngqkd/analysis.hpp"
#include "ngqkd/io.hpp"
#include "ngqkd/measurement.hpp"
#include "ngqkd/protocol.hpp"
#include "ngqkd/security.hpp"
#include "ngqkd/tomography.hpp"

namespace ngqkd {

inline constexpr const char* kVersion = "0.1.0";

enum class Pipeline { exact_operator, postselect_tomography };

inline const char* to_string(Pipeline p) {
  return p == Pipeline::exact_operator ? "exact_operator" : "postselect_tomography";
}

struct GridSpec {
  double lo;
  double hi;
  double step;
  QuadratureGrid grid() const { return QuadratureGrid(lo, hi, step); }
};

struct SweepConfig {
  double lambda = 0.5;
  std::vector<int> k_values{0, 1, 2, 3};
  std::vector<double> loss_values_dB = default_losses_db();
  int cutoff = 10;
  /// Filter cutoff |alpha_c|^2 in coherent-amplitude units.
  double alpha_c_sq = 12.0;
  Placement placement = Placement::after_loss;
  ImpurityParams impurity = ImpurityParams::none();
  Pipeline pipeline = Pipeline::exact_operator;
  bool include_overhead = false;

  GridSpec quadrature_grid{-10.025, 10.025, 0.05};  // midpoints, no x = 0
  GridSpec wigner_grid{-4.0, 4.0, 0.08};
  GridSpec figure_joint_grid{-5.0, 5.0, 0.05};
  GridSpec alpha_grid{-6.0, 6.0, 0.05};
  GridSpec x_grid{-8.0, 8.0, 0.01};

  std::uint64_t seed_sampling = 1;
  std::uint64_t seed_postselection = 1;
  std::uint64_t seed_ber = 1;

  std::size_t tomography_samples = 1000000;
  MleConfig mle{};

  std::size_t ber_samples = 1000000;
  double ber_theta = 0.0;

  static double percent_to_db(double pct) { return 0.0 - 10.0 * std::log10(1.0 - pct / 100.0) + 0.0; }

  static std::vector<double> default_losses_db() {
    std::vector<double> out;
    for (double pct : {0.0, 25.0, 50.0, 75.0, 90.0, 95.0, 98.0, 99.0}) out.push_back(percent_to_db(pct));
    return out;
  }
};

namespace detail {

[[noreturn]] inline void config_error(const std::string& msg) { throw Error(ErrorKind::config, msg); }

inline void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) config_error(where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) config_error("unknown key '" + where + (where.empty() ? "" : ".") + it.key() + "'");
  }
}

template <class T>
T get_as(const json& j, const std::string& name) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    config_error("'" + name + "' has the wrong type");
  }
}

inline GridSpec grid_from_json(const json& j, const std::string& name, GridSpec def) {
  check_keys(j, name, {"lo", "hi", "step"});
  if (j.contains("lo")) def.lo = get_as<double>(j["lo"], name + ".lo");
  if (j.contains("hi")) def.hi = get_as<double>(j["hi"], name + ".hi");
  if (j.contains("step")) def.step = get_as<double>(j["step"], name + ".step");
  try {
    (void)def.grid();
  } catch (const Error& e) {
    config_error(name + ": " + e.what());
  }
  return def;
}

inline json grid_to_json(const GridSpec& g) { return json{{"lo", g.lo}, {"hi", g.hi}, {"step", g.step}}; }

}  // namespace detail

/// Parses and validates a config; every absent key takes its default.
inline SweepConfig config_from_json(const json& j) {
  using detail::config_error;
  using detail::get_as;
  detail::check_keys(j, "", {"lambda", "k_values", "loss_values_dB", "loss_values_percent", "cutoff", "alpha_c_sq",
                             "placement", "impurity", "pipeline", "include_overhead", "grids", "seeds",
                             "tomography", "ber"});
  SweepConfig c;
  if (j.contains("lambda")) c.lambda = get_as<double>(j["lambda"], "lambda");
  if (j.contains("k_values")) c.k_values = get_as<std::vector<int>>(j["k_values"], "k_values");
  if (j.contains("loss_values_dB") && j.contains("loss_values_percent")) {
    config_error("give either loss_values_dB or loss_values_percent, not both");
  }
  if (j.contains("loss_values_dB")) c.loss_values_dB = get_as<std::vector<double>>(j["loss_values_dB"], "loss_values_dB");
  if (j.contains("loss_values_percent")) {
    c.loss_values_dB.clear();
    for (double pct : get_as<std::vector<double>>(j["loss_values_percent"], "loss_values_percent")) {
      if (!(pct >= 0.0 && pct < 100.0)) config_error("loss_values_percent entries must be in [0, 100)");
      c.loss_values_dB.push_back(SweepConfig::percent_to_db(pct));
    }
  }
  if (j.contains("cutoff")) c.cutoff = get_as<int>(j["cutoff"], "cutoff");
  if (j.contains("alpha_c_sq")) c.alpha_c_sq = get_as<double>(j["alpha_c_sq"], "alpha_c_sq");
  if (j.contains("placement")) {
    try {
      c.placement = placement_from_string(get_as<std::string>(j["placement"], "placement"));
    } catch (const Error& e) {
      config_error(e.what());
    }
  }
  if (j.contains("impurity")) {
    const json& im = j["impurity"];
    detail::check_keys(im, "impurity", {"transmissivity", "phase_std"});
    if (im.contains("transmissivity")) c.impurity.transmissivity = get_as<double>(im["transmissivity"], "impurity.transmissivity");
    if (im.contains("phase_std")) c.impurity.phase_std = get_as<double>(im["phase_std"], "impurity.phase_std");
  }
  if (j.contains("pipeline")) {
    const auto p = get_as<std::string>(j["pipeline"], "pipeline");
    if (p == "exact_operator") {
      c.pipeline = Pipeline::exact_operator;
    } else if (p == "postselect_tomography") {
      c.pipeline = Pipeline::postselect_tomography;
    } else {
      config_error("pipeline must be exact_operator or postselect_tomography");
    }
  }
  if (j.contains("include_overhead")) c.include_overhead = get_as<bool>(j["include_overhead"], "include_overhead");
  if (j.contains("grids")) {
    const json& g = j["grids"];
    detail::check_keys(g, "grids", {"quadrature", "wigner", "figure_joint", "alpha", "x"});
    if (g.contains("quadrature")) c.quadrature_grid = detail::grid_from_json(g["quadrature"], "grids.quadrature", c.quadrature_grid);
    if (g.contains("wigner")) c.wigner_grid = detail::grid_from_json(g["wigner"], "grids.wigner", c.wigner_grid);
    if (g.contains("figure_joint")) c.figure_joint_grid = detail::grid_from_json(g["figure_joint"], "grids.figure_joint", c.figure_joint_grid);
    if (g.contains("alpha")) c.alpha_grid = detail::grid_from_json(g["alpha"], "grids.alpha", c.alpha_grid);
    if (g.contains("x")) c.x_grid = detail::grid_from_json(g["x"], "grids.x", c.x_grid);
  }
  if (j.contains("seeds")) {
    const json& s = j["seeds"];
    detail::check_keys(s, "seeds", {"sampling", "postselection", "ber"});
    if (s.contains("sampling")) c.seed_sampling = get_as<std::uint64_t>(s["sampling"], "seeds.sampling");
    if (s.contains("postselection")) c.seed_postselection = get_as<std::uint64_t>(s["postselection"], "seeds.postselection");
    if (s.contains("ber")) c.seed_ber = get_as<std::uint64_t>(s["ber"], "seeds.ber");
  }
  if (j.contains("tomography")) {
    const json& t = j["tomography"];
    detail::check_keys(t, "tomography", {"samples", "max_iterations", "tolerance", "dilution", "probability_floor"});
    if (t.contains("samples")) c.tomography_samples = get_as<std::size_t>(t["samples"], "tomography.samples");
    if (t.contains("max_iterations")) c.mle.max_iterations = get_as<int>(t["max_iterations"], "tomography.max_iterations");
    if (t.contains("tolerance")) c.mle.tolerance = get_as<double>(t["tolerance"], "tomography.tolerance");
    if (t.contains("dilution")) c.mle.dilution = get_as<double>(t["dilution"], "tomography.dilution");
    if (t.contains("probability_floor")) c.mle.probability_floor = get_as<double>(t["probability_floor"], "tomography.probability_floor");
  }
  if (j.contains("ber")) {
    const json& b = j["ber"];
    detail::check_keys(b, "ber", {"samples", "theta"});
    if (b.contains("samples")) c.ber_samples = get_as<std::size_t>(b["samples"], "ber.samples");
    if (b.contains("theta")) c.ber_theta = get_as<double>(b["theta"], "ber.theta");
  }

  // Semantic checks.
  try {
    TmsvParams{c.lambda}.validate();
    c.impurity.validate();
    (void)Cutoff(c.cutoff);
    c.mle.validate();
  } catch (const Error& e) {
    config_error(e.what());
  }
  if (c.k_values.empty()) config_error("k_values must not be empty");
  for (int k : c.k_values)
    if (k < 0) config_error("k_values entries must be >= 0");
  if (std::set<int>(c.k_values.begin(), c.k_values.end()).size() != c.k_values.size()) config_error("k_values has duplicates");
  if (c.loss_values_dB.empty()) config_error("loss values must not be empty");
  for (double db : c.loss_values_dB)
    if (!(db >= 0.0 && std::isfinite(db))) config_error("loss values must be finite and >= 0 dB");
  if (!(c.alpha_c_sq > 0.0)) config_error("alpha_c_sq must be > 0");
  if (c.ber_samples < 10000) config_error("ber.samples must be >= 10000");
  if (c.tomography_samples < 1) config_error("tomography.samples must be >= 1");
  if (c.pipeline == Pipeline::postselect_tomography && c.placement != Placement::after_loss) {
    config_error("postselect_tomography realizes addition after the channel; placement must be after_loss");
  }
  return c;
}

/// Normalized form of the config: every field explicit. Hashing this covers
/// every input that affects the numbers.
inline json config_to_json(const SweepConfig& c) {
  return json{{"lambda", c.lambda},
              {"k_values", c.k_values},
              {"loss_values_dB", c.loss_values_dB},
              {"cutoff", c.cutoff},
              {"alpha_c_sq", c.alpha_c_sq},
              {"placement", to_string(c.placement)},
              {"impurity", {{"transmissivity", c.impurity.transmissivity}, {"phase_std", c.impurity.phase_std}}},
              {"pipeline", to_string(c.pipeline)},
              {"include_overhead", c.include_overhead},
              {"grids",
               {{"quadrature", detail::grid_to_json(c.quadrature_grid)},
                {"wigner", detail::grid_to_json(c.wigner_grid)},
                {"figure_joint", detail::grid_to_json(c.figure_joint_grid)},
                {"alpha", detail::grid_to_json(c.alpha_grid)},
                {"x", detail::grid_to_json(c.x_grid)}}},
              {"seeds", {{"sampling", c.seed_sampling}, {"postselection", c.seed_postselection}, {"ber", c.seed_ber}}},
              {"tomography",
               {{"samples", c.tomography_samples},
                {"max_iterations", c.mle.max_iterations},
                {"tolerance", c.mle.tolerance},
                {"dilution", c.mle.dilution},
                {"probability_floor", c.mle.probability_floor}}},
              {"ber", {{"samples", c.ber_samples}, {"theta", c.ber_theta}}}};
}

inline SweepConfig load_config(const std::string& path) {
  std::string text;
  try {
    text = read_text(path);
  } catch (const Error& e) {
    throw Error(ErrorKind::config, e.what());
  }
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::config, path + ": " + e.what());
  }
  return config_from_json(j);
}

/// 64-bit FNV-1a as 16 hex digits.
inline std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string config_hash(const SweepConfig& c) {
  return fnv1a_hex(std::string(kVersion) + "|" + config_to_json(c).dump());
}

// ---------------------------------------------------------------------------
// Cells

struct CellResult {
  int k = 0;
  double loss_db = 0.0;
  double transmissivity = 1.0;
  bool ok = false;
  std::string error;
  double wall_seconds = 0.0;
  json values;  // numeric outputs on success
};

inline double transmissivity_from_db(double db) { return std::pow(10.0, -db / 10.0); }

inline std::string cell_name(int k, std::size_t loss_index) {
  return "k" + std::to_string(k) + "_loss" + std::to_string(loss_index);
}

namespace detail {

inline TwoModeState sweep_source(const SweepConfig& c) {
  const Cutoff cut(c.cutoff);
  if (c.impurity.transmissivity == 1.0 && c.impurity.phase_std == 0.0) return make_tmsv(TmsvParams{c.lambda}, cut);
  return noisy_tmsv(TmsvParams{c.lambda}, c.impurity, cut);
}

inline std::string joint_table_csv_payload(const TwoModeState& s, double theta, const GridSpec& g) {
  const QuadratureGrid grid = g.grid();
  const int d = s.dim();
  const Matrix h = homodyne_table(d, grid, theta);
  RealMatrix p(grid.size(), grid.size());
  for (int j = 0; j < grid.size(); ++j) {
    const Matrix sigma = condition_on(s, ModeLabel::B, h.col(j));
    const Matrix sh = sigma * h;
    for (int i = 0; i < grid.size(); ++i) p(i, j) = std::max(0.0, h.col(i).dot(sh.col(i)).real());
  }
  return matrix_csv(grid.points(), grid.points(), p, "xA\\xB");
}

/// Numbers for one analyzed state, shared by both pipelines.
inline json analyze_cell_state(const TwoModeState& state, const SweepConfig& c, double success, double t) {
  SecurityOptions opt;
  opt.grid = c.quadrature_grid.grid();
  const SecurityReport r = security_report(state, opt, success, t);
  BerConfig bc;
  bc.n_samples = c.ber_samples;
  bc.rng_seed = c.seed_ber;
  bc.theta = c.ber_theta;
  const JointTable table = joint_quadrature_distribution(state, c.ber_theta, c.ber_theta, opt.grid);
  const BerResult ber = bit_error_rate(table, bc);
  const double overhead = c.include_overhead ? success : 1.0;
  return json{{"I_AB", r.I_AB},
              {"chi_E", r.chi_E},
              {"keyrate", r.keyrate * overhead},
              {"gaussian_I_AB", r.gaussian_I_AB},
              {"gaussian_chi_E", r.gaussian_chi_E},
              {"gaussian_keyrate", r.gaussian_keyrate * overhead},
              {"success_prob", r.success_probability},
              {"plob", r.plob_bound},
              {"ber", ber.ber},
              {"ber_stderr", ber.std_error},
              {"log_negativity", log_negativity(state)},
              {"purity", purity(state)},
              {"kurtosis_A_x", kurtosis(state, ModeLabel::A, 0.0)},
              {"kurtosis_A_p", kurtosis(state, ModeLabel::A, kPi / 2.0)},
              {"kurtosis_B_x", kurtosis(state, ModeLabel::B, 0.0)},
              {"kurtosis_B_p", kurtosis(state, ModeLabel::B, kPi / 2.0)},
              {"wigner_A_origin", wigner_point(partial_trace(state, ModeLabel::A), 0.0, 0.0)},
              {"wigner_B_origin", wigner_point(partial_trace(state, ModeLabel::B), 0.0, 0.0)}};
}

/// JSON cannot carry infinity; stored as a string and restored on read.
inline json encode_number(double v) { return std::isinf(v) ? json("inf") : json(v); }
inline double decode_number(const json& v) {
  if (v.is_string()) return v.get<std::string>() == "inf" ? std::numeric_limits<double>::infinity() : NAN;
  return v.get<double>();
}

}  // namespace detail

/// Runs one (k, loss) cell and writes its side files (state, Wigner, joint
/// tables at the lowest loss) into cell_dir.
inline CellResult run_cell(const SweepConfig& c, const TwoModeState& source, int k, std::size_t loss_index,
                           const std::string& cell_dir, unsigned workers = 1) {
  CellResult res;
  res.k = k;
  res.loss_db = c.loss_values_dB[loss_index];
  res.transmissivity = transmissivity_from_db(res.loss_db);
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const double t = res.transmissivity;
    const double min_loss = *std::min_element(c.loss_values_dB.begin(), c.loss_values_dB.end());
    const bool figure_cell = res.loss_db == min_loss;
    std::filesystem::create_directories(cell_dir);
    TwoModeState state = source;
    double success = 1.0;
    json extra;
    const FilterParams filter{k, c.alpha_c_sq};
    // Husimi variance of the heterodyne mode before the filter, for the closed form.
    const TwoModeState pre = loss_channel(source, ModeLabel::A, ChannelParams{t, 0.0});
    const double sigma_sq = husimi_sigma_sq(pre, ModeLabel::A);
    const auto pred = predict_success(sigma_sq, filter);
    extra["husimi_sigma_sq"] = sigma_sq;
    extra["predicted_success"] = pred.probability;
    extra["predicted_success_tail_mass"] = pred.tail_mass;
    extra["predicted_success_assumption_holds"] = pred.assumption_holds;
    if (c.pipeline == Pipeline::exact_operator) {
      const auto prep = prepare_state(source, k, t, c.placement);
      state = prep.state;
      success = ideal_success_probability(prep.success_weight, k, c.alpha_c_sq);
      extra["truncation_loss"] = prep.truncation_loss;
    } else {
      SamplingGrids grids{c.alpha_grid.grid(), c.x_grid.grid()};
      const auto records = sample_records(pre, c.tomography_samples, c.seed_sampling, grids, workers);
      const auto kept = postselect(records, filter, c.seed_postselection);
      if (kept.empty) throw Error(ErrorKind::zero_probability, "postselection kept no records");
      MleConfig mle = c.mle;
      mle.workers = workers;
      const auto rec = reconstruct(kept.kept, Cutoff(c.cutoff), mle);
      state = rec.state;
      success = kept.empirical_success;
      auto diag = diagnostics_to_json(rec.diagnostics);
      diag.erase("wall_seconds");  // keep cell outputs reproducible byte for byte
      write_text_atomic(cell_dir + "/mle_diagnostics.json", diag.dump(1));
      extra["mle_iterations"] = rec.diagnostics.iterations;
      extra["mle_converged"] = rec.diagnostics.converged;
      extra["kept_records"] = kept.kept.size();
      extra["truncation_loss"] = 0.0;
      // Exact-operator reference for the same cell.
      if (c.placement == Placement::after_loss) {
        const auto prep = prepare_state(source, k, t, c.placement);
        extra["fidelity_to_exact"] = fidelity(state, prep.state);
      }
    }
    save_state(cell_dir + "/state.json", state);
    if (figure_cell) {
      WignerGrid wg{c.wigner_grid.grid(), c.wigner_grid.grid(), {}};
      write_text_atomic(cell_dir + "/wigner_A.csv", wigner_csv(wigner(state, ModeLabel::A, wg, workers)));
      write_text_atomic(cell_dir + "/wigner_B.csv", wigner_csv(wigner(state, ModeLabel::B, wg, workers)));
      write_text_atomic(cell_dir + "/joint_xx.csv", detail::joint_table_csv_payload(state, 0.0, c.figure_joint_grid));
      write_text_atomic(cell_dir + "/joint_pp.csv", detail::joint_table_csv_payload(state, kPi / 2.0, c.figure_joint_grid));
      write_text_atomic(cell_dir + "/photon_number.csv", photon_number_csv(photon_number_joint(state)));
    }
    json v = detail::analyze_cell_state(state, c, success, t);
    v["plob"] = detail::encode_number(plob_bound(t));
    v.update(extra);
    res.values = std::move(v);
    res.ok = true;
  } catch (const std::exception& e) {
    res.ok = false;
    res.error = e.what();
  }
  res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

struct SweepOptions {
  bool force = false;
  unsigned workers = 1;
  std::function<void(const std::string&)> progress;
};

struct SweepSummary {
  std::size_t cells = 0;
  std::size_t succeeded = 0;
  std::size_t skipped = 0;
  std::vector<CellResult> results;  // k-major, loss-minor
};

inline const std::vector<std::string>& sweep_csv_columns() {
  static const std::vector<std::string> cols{"k",        "T",           "loss_dB",         "I_AB",          "chi_E",
                                             "keyrate",  "gaussian_I_AB", "gaussian_chi_E", "gaussian_keyrate",
                                             "success_prob", "plob",   "ber",             "ber_stderr"};
  return cols;
}

inline const std::vector<std::string>& metrics_csv_columns() {
  static const std::vector<std::string> cols{"k",
                                             "T",
                                             "loss_dB",
                                             "log_negativity",
                                             "purity",
                                             "kurtosis_A_x",
                                             "kurtosis_A_p",
                                             "kurtosis_B_x",
                                             "kurtosis_B_p",
                                             "wigner_A_origin",
                                             "wigner_B_origin",
                                             "husimi_sigma_sq",
                                             "predicted_success",
                                             "truncation_loss"};
  return cols;
}

namespace detail {

inline json cell_to_json(const CellResult& r, const std::string& hash) {
  json j{{"config_hash", hash}, {"k", r.k}, {"loss_dB", r.loss_db}, {"T", r.transmissivity}, {"ok", r.ok}};
  if (r.ok) {
    j["values"] = r.values;
  } else {
    j["error"] = r.error;
  }
  return j;
}

inline std::string csv_value(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "1" : "0";
  return fmt_g(v.get<double>());
}

}  // namespace detail

/// Runs every cell, skipping cells whose checkpoint matches the config hash
/// unless forced. Writes sweep.csv, state_metrics.csv and manifest.json.
inline SweepSummary run_sweep(const SweepConfig& c, const std::string& out_dir, const SweepOptions& opt = {}) {
  namespace fs = std::filesystem;
  const std::string hash = config_hash(c);
  fs::create_directories(out_dir + "/cells");
  const TwoModeState source = detail::sweep_source(c);

  SweepSummary sum;
  struct Job {
    int k;
    std::size_t li;
  };
  std::vector<Job> jobs;
  for (int k : c.k_values)
    for (std::size_t li = 0; li < c.loss_values_dB.size(); ++li) jobs.push_back({k, li});
  sum.cells = jobs.size();
  sum.results.resize(jobs.size());
  std::vector<bool> skipped(jobs.size(), false);

  std::mutex progress_mutex;
  const unsigned cell_workers = std::max(1u, opt.workers);
  const unsigned inner_workers = jobs.size() >= cell_workers ? 1u : cell_workers;
  parallel_for(jobs.size(), cell_workers, [&](std::size_t i) {
    const Job& job = jobs[i];
    const std::string name = cell_name(job.k, job.li);
    const std::string cell_dir = out_dir + "/cells/" + name;
    const std::string cell_json = cell_dir + "/cell.json";
    if (!opt.force && fs::exists(cell_json)) {
      try {
        const json j = json::parse(read_text(cell_json));
        if (j.at("config_hash") == hash && j.at("ok").get<bool>()) {
          CellResult r;
          r.k = job.k;
          r.loss_db = j.at("loss_dB").get<double>();
          r.transmissivity = j.at("T").get<double>();
          r.ok = true;
          r.values = j.at("values");
          sum.results[i] = std::move(r);
          skipped[i] = true;
          if (opt.progress) {
            std::lock_guard<std::mutex> lock(progress_mutex);
            opt.progress("skip " + name + " (checkpoint matches)");
          }
          return;
        }
      } catch (const std::exception&) {
        // Unreadable checkpoint: recompute.
      }
    }
    CellResult r = run_cell(c, source, job.k, job.li, cell_dir, inner_workers);
    write_text_atomic(cell_json, detail::cell_to_json(r, hash).dump(1));
    if (opt.progress) {
      std::lock_guard<std::mutex> lock(progress_mutex);
      char buf[64];
      std::snprintf(buf, sizeof buf, " (%.1fs)", r.wall_seconds);
      opt.progress((r.ok ? "done " : "FAILED ") + name + buf + (r.ok ? "" : ": " + r.error));
    }
    sum.results[i] = std::move(r);
  });

  std::string csv;
  std::string metrics;
  for (std::size_t i = 0; i < sweep_csv_columns().size(); ++i) csv += (i ? "," : "") + sweep_csv_columns()[i];
  csv += "\n";
  for (std::size_t i = 0; i < metrics_csv_columns().size(); ++i) metrics += (i ? "," : "") + metrics_csv_columns()[i];
  metrics += "\n";
  json cells = json::array();
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const CellResult& r = sum.results[i];
    sum.skipped += skipped[i];
    json entry{{"name", cell_name(jobs[i].k, jobs[i].li)}, {"ok", r.ok}, {"wall_seconds", r.wall_seconds}, {"skipped", skipped[i]}};
    if (!r.ok) entry["error"] = r.error;
    cells.push_back(entry);
    if (!r.ok) continue;
    ++sum.succeeded;
    auto row = [&](const std::vector<std::string>& cols) {
      std::string line = std::to_string(r.k) + "," + fmt_g(r.transmissivity) + "," + fmt_g(r.loss_db);
      for (std::size_t ci = 3; ci < cols.size(); ++ci) {
        line += ",";
        line += r.values.contains(cols[ci]) ? detail::csv_value(r.values[cols[ci]]) : "";
      }
      return line + "\n";
    };
    csv += row(sweep_csv_columns());
    metrics += row(metrics_csv_columns());
  }
  write_text_atomic(out_dir + "/sweep.csv", csv);
  write_text_atomic(out_dir + "/state_metrics.csv", metrics);
  const json manifest{{"tool", "ngqkd"},
                      {"version", kVersion},
                      {"config_hash", hash},
                      {"config", config_to_json(c)},
                      {"seeds", {{"sampling", c.seed_sampling}, {"postselection", c.seed_postselection}, {"ber", c.seed_ber}}},
                      {"eigen_version", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                            "." + std::to_string(EIGEN_MINOR_VERSION)},
                      {"compiler", __VERSION__},
                      {"cells", cells},
                      {"succeeded", sum.succeeded},
                      {"total", sum.cells}};
  write_text_atomic(out_dir + "/manifest.json", manifest.dump(1));
  return sum;
}

// ---------------------------------------------------------------------------
// Figures

struct FigureReport {
  std::vector<std::string> written;
  /// "figure: missing input" lines for every figure left unwritten.
  std::vector<std::string> missing;
};

/// Writes figure-data CSVs from a completed sweep directory into
/// <dir>/figures. A figure is written only when all of its inputs exist.
inline FigureReport emit_figures(const std::string& dir) {
  namespace fs = std::filesystem;
  const std::string manifest_path = dir + "/manifest.json";
  if (!fs::exists(manifest_path)) throw Error(ErrorKind::io, "no manifest.json in " + dir + "; run a sweep first");
  json manifest;
  try {
    manifest = json::parse(read_text(manifest_path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::io, "unreadable manifest: " + std::string(e.what()));
  }
  const SweepConfig c = config_from_json(manifest.at("config"));
  const std::string hash = manifest.at("config_hash").get<std::string>();

  // Load every cell that is present and current.
  std::map<std::pair<int, std::size_t>, json> cells;
  for (int k : c.k_values)
    for (std::size_t li = 0; li < c.loss_values_dB.size(); ++li) {
      const std::string p = dir + "/cells/" + cell_name(k, li) + "/cell.json";
      if (!fs::exists(p)) continue;
      try {
        const json j = json::parse(read_text(p));
        if (j.at("config_hash") == hash && j.at("ok").get<bool>()) cells[{k, li}] = j.at("values");
      } catch (const std::exception&) {
      }
    }
  if (cells.empty()) throw Error(ErrorKind::io, "sweep in " + dir + " has no completed cells; nothing to plot");

  std::size_t fig_li = 0;
  for (std::size_t li = 1; li < c.loss_values_dB.size(); ++li)
    if (c.loss_values_dB[li] < c.loss_values_dB[fig_li]) fig_li = li;

  FigureReport rep;
  std::vector<std::pair<std::string, std::string>> pending;  // file, content
  auto need = [&](const std::string& fig, int k, std::size_t li, std::vector<std::string>& miss) -> const json* {
    auto it = cells.find({k, li});
    if (it == cells.end()) {
      miss.push_back(fig + ": missing cell " + cell_name(k, li));
      return nullptr;
    }
    return &it->second;
  };
  auto commit = [&](const std::string& fig, std::vector<std::string>& miss,
                    std::vector<std::pair<std::string, std::string>>& files) {
    if (miss.empty()) {
      for (auto& f : files) pending.push_back(std::move(f));
    } else {
      rep.missing.insert(rep.missing.end(), miss.begin(), miss.end());
    }
    (void)fig;
  };

  // fig2b: success probability vs k, empirical/ideal and closed form.
  {
    std::vector<std::string> miss;
    std::string s = "k,success_prob,predict_success,tail_mass\n";
    for (int k : c.k_values) {
      const json* v = need("fig2b", k, fig_li, miss);
      if (!v) continue;
      s += std::to_string(k) + "," + detail::csv_value((*v)["success_prob"]) + "," +
           detail::csv_value((*v)["predicted_success"]) + "," + detail::csv_value((*v)["predicted_success_tail_mass"]) + "\n";
    }
    std::vector<std::pair<std::string, std::string>> files{{"fig2b_success_probability.csv", s}};
    commit("fig2b", miss, files);
  }
  // Per-loss tables: one column per k.
  auto per_loss = [&](const std::string& fig, const std::string& file, const std::vector<std::string>& fields) {
    std::vector<std::string> miss;
    std::string s = "loss_dB,T";
    if (fig == "fig7") s += ",plob";
    for (int k : c.k_values)
      for (const auto& f : fields) s += "," + f + "_k" + std::to_string(k);
    s += "\n";
    for (std::size_t li = 0; li < c.loss_values_dB.size(); ++li) {
      const double t = transmissivity_from_db(c.loss_values_dB[li]);
      std::string line = fmt_g(c.loss_values_dB[li]) + "," + fmt_g(t);
      if (fig == "fig7") line += "," + fmt_g(plob_bound(t));
      for (int k : c.k_values) {
        const json* v = need(fig, k, li, miss);
        for (const auto& f : fields) line += "," + (v ? detail::csv_value((*v)[f]) : std::string());
      }
      s += line + "\n";
    }
    std::vector<std::pair<std::string, std::string>> files{{file, s}};
    commit(fig, miss, files);
  };
  per_loss("fig3", "fig3_log_negativity.csv", {"log_negativity"});
  per_loss("fig7", "fig7_rate_loss.csv", {"keyrate", "gaussian_keyrate"});
  per_loss("fig8", "fig8_ber.csv", {"ber", "ber_stderr"});

  // Per-k tables at the lowest loss.
  auto per_k = [&](const std::string& fig, const std::string& file, const std::vector<std::string>& fields) {
    std::vector<std::string> miss;
    std::string s = "k";
    for (const auto& f : fields) s += "," + f;
    s += "\n";
    for (int k : c.k_values) {
      const json* v = need(fig, k, fig_li, miss);
      if (!v) continue;
      s += std::to_string(k);
      for (const auto& f : fields) s += "," + detail::csv_value((*v)[f]);
      s += "\n";
    }
    std::vector<std::pair<std::string, std::string>> files{{file, s}};
    commit(fig, miss, files);
  };
  per_k("fig4", "fig4_kurtosis.csv", {"kurtosis_A_x", "kurtosis_A_p", "kurtosis_B_x", "kurtosis_B_p"});
  per_k("fig6", "fig6_information.csv",
        {"I_AB", "chi_E", "keyrate", "gaussian_I_AB", "gaussian_chi_E", "gaussian_keyrate"});

  // fig5: joint quadrature distributions (and Wigner functions) per k.
  {
    std::vector<std::string> miss;
    std::vector<std::pair<std::string, std::string>> files;
    for (int k : c.k_values) {
      const std::string cd = dir + "/cells/" + cell_name(k, fig_li) + "/";
      for (const char* f : {"joint_xx.csv", "joint_pp.csv", "wigner_A.csv", "wigner_B.csv", "photon_number.csv"}) {
        if (!cells.count({k, fig_li}) || !fs::exists(cd + f)) {
          miss.push_back(std::string("fig5: missing ") + cd + f);
          continue;
        }
        files.emplace_back("fig5_k" + std::to_string(k) + "_" + f, read_text(cd + f));
      }
    }
    commit("fig5", miss, files);
  }

  for (const auto& [file, content] : pending) {
    write_text_atomic(dir + "/figures/" + file, content);
    rep.written.push_back(file);
  }
  return rep;
}

}  // namespace ngqkd
