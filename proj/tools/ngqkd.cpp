// Command-line front end: sweep, reconstruct, analyze, figures,
// validate-config, plus sample for producing record files.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "ngqkd/sweep.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitAllCellsFailed = 3;

struct Common {
  std::string config;
  std::string out;
  bool force = false;
  bool include_overhead = false;
  std::optional<std::uint64_t> seed;
  unsigned workers = 0;
};

void add_common(CLI::App* app, Common& c, bool needs_out) {
  app->add_option("--config", c.config, "JSON config file (defaults apply to absent keys)")->check(CLI::ExistingFile);
  auto* out = app->add_option("--out", c.out, "output directory");
  if (needs_out) out->required();
  app->add_flag("--force", c.force, "recompute cells that already have a checkpoint");
  app->add_flag("--include-overhead", c.include_overhead, "multiply keyrates by the postselection success probability");
  app->add_option("--seed", c.seed, "seed for every random stream (overrides the config)");
  app->add_option("--workers", c.workers, "worker threads (0 = hardware concurrency)");
}

ngqkd::SweepConfig resolve_config(const Common& c) {
  ngqkd::SweepConfig cfg = c.config.empty() ? ngqkd::config_from_json(ngqkd::json::object()) : ngqkd::load_config(c.config);
  if (c.include_overhead) cfg.include_overhead = true;
  if (c.seed) {
    cfg.seed_sampling = *c.seed;
    cfg.seed_postselection = *c.seed;
    cfg.seed_ber = *c.seed;
  }
  return cfg;
}

unsigned resolve_workers(unsigned w) { return w == 0 ? std::max(1u, std::thread::hardware_concurrency()) : w; }

int run_sweep_cmd(const Common& c) {
  const auto cfg = resolve_config(c);
  ngqkd::SweepOptions opt;
  opt.force = c.force;
  opt.workers = resolve_workers(c.workers);
  opt.progress = [](const std::string& msg) { std::cerr << msg << "\n"; };
  const auto sum = ngqkd::run_sweep(cfg, c.out, opt);
  std::cerr << sum.succeeded << "/" << sum.cells << " cells ok (" << sum.skipped << " from checkpoints); hash "
            << ngqkd::config_hash(cfg) << "\n";
  return sum.succeeded == 0 ? kExitAllCellsFailed : kExitOk;
}

int run_sample_cmd(const Common& c, int k, double loss_db, std::optional<std::size_t> samples) {
  const auto cfg = resolve_config(c);
  const auto source = ngqkd::detail::sweep_source(cfg);
  const auto state = ngqkd::loss_channel(source, ngqkd::ModeLabel::A,
                                         ngqkd::ChannelParams{ngqkd::transmissivity_from_db(loss_db), 0.0});
  const ngqkd::SamplingGrids grids{cfg.alpha_grid.grid(), cfg.x_grid.grid()};
  const auto records =
      ngqkd::sample_records(state, samples.value_or(cfg.tomography_samples), cfg.seed_sampling, grids, resolve_workers(c.workers));
  const auto kept = ngqkd::postselect(records, ngqkd::FilterParams{k, cfg.alpha_c_sq}, cfg.seed_postselection);
  std::filesystem::create_directories(c.out);
  ngqkd::save_records_csv(c.out + "/records.csv", kept.kept);
  const auto expect = ngqkd::add_photons(state, ngqkd::ModeLabel::A, k);
  ngqkd::save_state(c.out + "/exact_state.json", expect.state);
  const ngqkd::json info{{"k", k},
                         {"loss_dB", loss_db},
                         {"generated", records.size()},
                         {"kept", kept.kept.size()},
                         {"empirical_success", kept.empirical_success},
                         {"config_hash", ngqkd::config_hash(cfg)}};
  ngqkd::write_text_atomic(c.out + "/sample.json", info.dump(1));
  std::cerr << "kept " << kept.kept.size() << " of " << records.size() << " records\n";
  return kept.empty ? kExitFailure : kExitOk;
}

int run_reconstruct_cmd(const Common& c, const std::string& records_path, const std::string& reference) {
  const auto cfg = resolve_config(c);
  const auto records = ngqkd::load_records_csv(records_path);
  ngqkd::MleConfig mle = cfg.mle;
  mle.workers = resolve_workers(c.workers);
  const auto res = ngqkd::reconstruct(records, ngqkd::Cutoff(cfg.cutoff), mle);
  std::filesystem::create_directories(c.out);
  ngqkd::save_state(c.out + "/state.json", res.state);
  auto diag = ngqkd::diagnostics_to_json(res.diagnostics);
  if (!reference.empty()) diag["fidelity_to_reference"] = ngqkd::fidelity(res.state, ngqkd::load_state(reference));
  ngqkd::write_text_atomic(c.out + "/diagnostics.json", diag.dump(1));
  std::cerr << "iterations " << res.diagnostics.iterations << (res.diagnostics.converged ? " (converged)" : " (not converged)")
            << ", " << res.diagnostics.wall_seconds << " s\n";
  if (diag.contains("fidelity_to_reference")) std::cerr << "fidelity to reference " << diag["fidelity_to_reference"] << "\n";
  return kExitOk;
}

int run_analyze_cmd(const Common& c, const std::string& state_path, double loss_db, double success) {
  const auto cfg = resolve_config(c);
  const auto state = ngqkd::load_state(state_path);
  const double t = ngqkd::transmissivity_from_db(loss_db);
  std::filesystem::create_directories(c.out);
  auto v = ngqkd::detail::analyze_cell_state(state, cfg, success, t);
  v["plob"] = ngqkd::detail::encode_number(ngqkd::plob_bound(t));
  const auto cov = ngqkd::covariance(state);
  ngqkd::json cm = ngqkd::json::array();
  for (int i = 0; i < 4; ++i) cm.push_back({cov.sigma(i, 0), cov.sigma(i, 1), cov.sigma(i, 2), cov.sigma(i, 3)});
  v["covariance"] = cm;
  v["means"] = {cov.mean(0), cov.mean(1), cov.mean(2), cov.mean(3)};
  ngqkd::write_text_atomic(c.out + "/analysis.json", v.dump(1));
  const unsigned w = resolve_workers(c.workers);
  const ngqkd::WignerGrid wg{cfg.wigner_grid.grid(), cfg.wigner_grid.grid(), {}};
  ngqkd::write_text_atomic(c.out + "/wigner_A.csv", ngqkd::wigner_csv(ngqkd::wigner(state, ngqkd::ModeLabel::A, wg, w)));
  ngqkd::write_text_atomic(c.out + "/wigner_B.csv", ngqkd::wigner_csv(ngqkd::wigner(state, ngqkd::ModeLabel::B, wg, w)));
  ngqkd::write_text_atomic(c.out + "/photon_number.csv", ngqkd::photon_number_csv(ngqkd::photon_number_joint(state)));
  std::cout << v.dump(1) << "\n";
  return kExitOk;
}

int run_figures_cmd(const Common& c) {
  const auto rep = ngqkd::emit_figures(c.out);
  for (const auto& f : rep.written) std::cerr << "wrote figures/" << f << "\n";
  for (const auto& m : rep.missing) std::cerr << "missing: " << m << "\n";
  return rep.missing.empty() ? kExitOk : kExitFailure;
}

int run_validate_cmd(const Common& c) {
  const auto cfg = resolve_config(c);
  std::cout << ngqkd::config_to_json(cfg).dump(2) << "\n";
  std::cerr << "config ok; hash " << ngqkd::config_hash(cfg) << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Photon-added TMSV entanglement and non-Gaussian CV-QKD keyrate toolkit"};
  app.require_subcommand(1);

  Common sweep_opts;
  auto* sweep = app.add_subcommand("sweep", "run the (k x loss) grid and write CSV/JSON outputs");
  add_common(sweep, sweep_opts, true);

  Common sample_opts;
  int sample_k = 1;
  double sample_loss = 0.0;
  std::optional<std::size_t> sample_n;
  auto* sample = app.add_subcommand("sample", "simulate heterodyne/homodyne records and postselect them");
  add_common(sample, sample_opts, true);
  sample->add_option("--k", sample_k, "photons to add by postselection")->check(CLI::NonNegativeNumber);
  sample->add_option("--loss-db", sample_loss, "channel loss on the heterodyne mode")->check(CLI::NonNegativeNumber);
  sample->add_option("--samples", sample_n, "pre-selection record count (default: tomography.samples)");

  Common rec_opts;
  std::string rec_records;
  std::string rec_reference;
  auto* rec = app.add_subcommand("reconstruct", "maximum-likelihood state from a record CSV");
  add_common(rec, rec_opts, true);
  rec->add_option("--records", rec_records, "record CSV (alpha_re,alpha_im,x,theta)")->required()->check(CLI::ExistingFile);
  rec->add_option("--reference", rec_reference, "state JSON to report fidelity against")->check(CLI::ExistingFile);

  Common an_opts;
  std::string an_state;
  double an_loss = 0.0;
  double an_success = 1.0;
  auto* an = app.add_subcommand("analyze", "entanglement, non-Gaussianity and keyrates of a state JSON");
  add_common(an, an_opts, true);
  an->add_option("--state", an_state, "state JSON")->required()->check(CLI::ExistingFile);
  an->add_option("--loss-db", an_loss, "channel loss the state went through (for the PLOB column)");
  an->add_option("--success", an_success, "postselection success probability to report");

  Common fig_opts;
  auto* fig = app.add_subcommand("figures", "write figure-data CSVs from a completed sweep directory (--out)");
  add_common(fig, fig_opts, true);

  Common val_opts;
  auto* val = app.add_subcommand("validate-config", "check a config and print it with defaults filled in");
  add_common(val, val_opts, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*sweep) return run_sweep_cmd(sweep_opts);
    if (*sample) return run_sample_cmd(sample_opts, sample_k, sample_loss, sample_n);
    if (*rec) return run_reconstruct_cmd(rec_opts, rec_records, rec_reference);
    if (*an) return run_analyze_cmd(an_opts, an_state, an_loss, an_success);
    if (*fig) return run_figures_cmd(fig_opts);
    if (*val) return run_validate_cmd(val_opts);
  } catch (const ngqkd::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == ngqkd::ErrorKind::config ? kExitConfig : kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}
