// dmrs-sssad: Monte Carlo front end.
//
//   simulate   one scenario -> roc_<detector>.csv, summary.json, trials.jsonl
//   calibrate  attack-free run -> calibration.json (empirical CDF of c, suggested eta)
//   sweep      SNR x RB grid -> sweep.csv plus one result directory per cell
//   selftest   quick property checks
//
// Exit codes: 0 success, 1 configuration error, 2 runtime or trial failure.

#include "dmrs_sssad/dmrs_sssad.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace h = dmrs::harness;

namespace {

struct Overrides {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<double> snr_db;
  std::optional<double> jsr_db;
  std::optional<int> rb;
  std::optional<int> trials;
  std::optional<std::string> out;
  std::optional<int> threads;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "JSON scenario file");
    app->add_option("--seed", seed, "master seed");
    app->add_option("--snr-db", snr_db, "SNR P_U / sigma^2 in dB");
    app->add_option("--jsr-db", jsr_db, "JSR P_A / P_U in dB");
    app->add_option("--rb", rb, "resource blocks (L = 12 * RB)");
    app->add_option("--trials", trials, "Monte Carlo trials");
    app->add_option("--out", out, "output directory");
    app->add_option("--threads", threads, "worker threads (0 = all cores)");
  }

  h::ScenarioConfig resolve() const {
    h::ScenarioConfig cfg = config_path.empty() ? h::ScenarioConfig{} : h::load_config(config_path);
    if (seed) cfg.seed = *seed;
    if (snr_db) cfg.snr_db = *snr_db;
    if (jsr_db) cfg.jsr_db = *jsr_db;
    if (rb) cfg.rb = *rb;
    if (trials) cfg.trials = *trials;
    if (out) cfg.out_dir = *out;
    if (threads) cfg.threads = *threads;
    cfg.validate();
    return cfg;
  }
};

void print_aucs(const h::SimulationResult& r) {
  const auto& c = r.summary.config;
  std::printf("snr %.1f dB  jsr %.1f dB  rb %d (L=%d)  trials %d/%d\n", c.snr_db, c.jsr_db, c.rb, c.samples(),
              r.summary.trials_ok, c.trials);
  for (const auto& curve : r.summary.curves) std::printf("  AUC %-6s %.4f\n", curve.detector.c_str(), curve.auc);
}

int run_simulate(const Overrides& o, bool latency) {
  const auto cfg = o.resolve();
  const auto r = h::simulate_scenario(cfg);
  h::emit_results(r.summary, r.trial_log(), cfg.out_dir);
  print_aucs(r);
  if (latency) {
    const auto lat = h::latency_scenario(cfg);
    const auto root = h::ensure_dir(cfg.out_dir);
    h::write_text(root / "latency.json", lat.to_json().dump(2) + "\n");
    std::string lines;
    for (const auto& s : lat.outcomes) lines += h::to_json(s).dump() + "\n";
    h::write_text(root / "streams.jsonl", lines);
    std::printf("  median first alarm %.1f (onset %d), pre-onset alarm rate %.4f\n", lat.summary.median_first_alarm,
                lat.summary.onset, lat.summary.pre_onset_alarm_rate);
  }
  std::printf("results in %s\n", cfg.out_dir.c_str());
  return 0;
}

int run_calibrate(const Overrides& o, double target_pfa) {
  const auto cfg = o.resolve();
  const auto r = h::calibrate_scenario(cfg, target_pfa);
  const auto root = h::ensure_dir(cfg.out_dir);
  h::write_text(root / "calibration.json", r.to_json().dump(2) + "\n");
  std::printf("subframe pairs %zu  fraction c > %.2f: %.4f  suggested eta at P_FA %.3f: %.4f\n",
              r.calibration.similarities.size(), r.eta, r.calibration.fraction_above(r.eta), target_pfa,
              r.calibration.suggested_eta(target_pfa));
  std::printf("results in %s\n", cfg.out_dir.c_str());
  return 0;
}

int run_sweep(const Overrides& o, const std::vector<double>& snrs, const std::vector<int>& rbs) {
  const auto cfg = o.resolve();
  const auto cells = h::sweep_scenarios(cfg, snrs, rbs);
  const auto root = h::ensure_dir(cfg.out_dir);
  for (const auto& cell : cells) {
    char name[64];
    std::snprintf(name, sizeof name, "snr%+g_rb%d", cell.snr_db, cell.rb);
    h::emit_results(cell.result.summary, cell.result.trial_log(), (root / name).string());
    print_aucs(cell.result);
  }
  h::write_text(root / "sweep.csv", h::sweep_csv(cells));
  std::printf("results in %s\n", cfg.out_dir.c_str());
  return 0;
}

bool check(bool ok, const char* what) {
  std::printf("%s  %s\n", ok ? "ok  " : "FAIL", what);
  return ok;
}

int run_selftest() {
  using namespace dmrs;
  bool all = true;
  // ZC: constant amplitude, ideal periodic autocorrelation.
  const auto zc = generate_zc(13, 2);
  double amp_err = 0.0, acf_err = 0.0;
  for (Eigen::Index j = 0; j < zc.samples.size(); ++j) {
    amp_err = std::max(amp_err, std::abs(std::abs(zc.samples(j)) - 1.0 / std::sqrt(13.0)));
  }
  for (int lag = 1; lag < 13; ++lag) acf_err = std::max(acf_err, std::abs(periodic_correlation(zc.samples, zc.samples, lag)));
  all &= check(amp_err < 1e-12 && acf_err < 1e-9, "zc constant amplitude and zero autocorrelation");

  // Noise-free chain returns the true taps.
  const auto table = default_cluster_table();
  const TapGrid grid{4, 1.0 / (139 * 30e3)};
  const ArraySpec array{8, 0.5};
  auto pool = build_pool({generate_zc(139, 1)}, 8, 2);
  assign_users(pool, 2);
  std::vector<ChannelRealization> users{draw_channel_at(array, table, grid, 20.0, SourceId::user(0), 1),
                                        draw_channel_at(array, table, grid, 80.0, SourceId::user(1), 2)};
  const auto truth = stack_taps(users[0].taps);
  LinkConfig lc;
  lc.subcarriers = 139;
  lc.samples = 2;
  lc.user_powers = {139.0, 139.0};
  LinkSimulator sim(pool, users, std::nullopt, lc, 0.0);
  SubframePlan plan;
  plan.samples = 2;
  const auto est = sim.simulate(plan, false).absent;
  all &= check((est.samples.col(0) - truth).norm() < 1e-10 * truth.norm(), "noise-free LS estimate equals channel");

  // Analytic gradient against central differences.
  const int d = 6, l = 30;
  const auto a = gaussian_probes(d, l, 3);
  Rng rng(4);
  ComplexVec phi(d), x(d);
  for (int i = 0; i < d; ++i) {
    phi(i) = rng.complex_normal(1.0);
    x(i) = rng.complex_normal(1.0);
  }
  RealVec s(l);
  for (int i = 0; i < l; ++i) s(i) = std::norm(a.col(i).dot(x));
  const SensingBatch batch(a, s);
  const ComplexVec g = gradient(batch, phi);
  double worst = 0.0;
  const double step = 1e-6;
  for (int i = 0; i < d; ++i) {
    for (const cplx dir : {cplx{1, 0}, cplx{0, 1}}) {
      ComplexVec p = phi, m = phi;
      p(i) += step * dir;
      m(i) -= step * dir;
      const double fd = (loss(batch, p) - loss(batch, m)) / (2 * step);
      const double an = dir.real() != 0.0 ? g(i).real() : g(i).imag();
      worst = std::max(worst, std::abs(fd - an) / std::max(1.0, std::abs(an)));
    }
  }
  all &= check(worst < 1e-5, "analytic gradient matches finite differences");

  // ROC of separated classes.
  const auto curve = h::roc_curve("x", {0.0, 0.1}, {1.0, 2.0}, h::Orientation::HighAlarms);
  all &= check(std::abs(curve.auc - 1.0) < 1e-15, "separable classes give AUC 1");
  return all ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DMRS spoofing detection Monte Carlo"};
  app.require_subcommand(1);

  Overrides sim_o, cal_o, sweep_o;
  bool latency = false;
  double target_pfa = 0.05;
  std::vector<double> snrs{-5.0, 5.0};
  std::vector<int> rbs{16, 4};

  auto* sim = app.add_subcommand("simulate", "run one scenario and write ROC tables");
  sim_o.attach(sim);
  sim->add_flag("--latency", latency, "also run change-point streams");
  auto* cal = app.add_subcommand("calibrate", "attack-free run: empirical CDF of c");
  cal_o.attach(cal);
  cal->add_option("--target-pfa", target_pfa, "false-alarm rate for the suggested eta");
  auto* sw = app.add_subcommand("sweep", "SNR x RB grid");
  sweep_o.attach(sw);
  sw->add_option("--snr-list", snrs, "SNR values in dB")->delimiter(',');
  sw->add_option("--rb-list", rbs, "RB counts")->delimiter(',');
  auto* self = app.add_subcommand("selftest", "quick property checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*sim) return run_simulate(sim_o, latency);
    if (*cal) return run_calibrate(cal_o, target_pfa);
    if (*sw) return run_sweep(sweep_o, snrs, rbs);
    if (*self) return run_selftest();
  } catch (const dmrs::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
